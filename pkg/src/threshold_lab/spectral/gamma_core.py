"""
Configurations of point interactions and the interaction matrix Γ(λ).

Γ(λ)_jj = α_j − g(λ),  Γ(λ)_jk = −𝒢_λ(y_j − y_k)  (j ≠ k).

Besides the direct assembly, the module provides the low-energy split
Γ(λ) = −g(λ) 1̂1̂ᵗ + D̃ + E(λ) whose remainder E is summed from the Bessel and
Hankel series without cancellation. The structure matrices D̃, 𝒢₁, 𝒢₂, 𝒢̃₂
and the projections P, S describe the λ → 0 behaviour of
A(λ) = −Γ(λ)/(N g(λ)) = P + F(λ) + λ²𝒢₁ + λ²g⁻¹𝒢₂ + O(λ⁴).
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import linalg

from threshold_lab.errors import (ConfigurationError, NearSingularError, PreconditionError)
from threshold_lab.spectral.green_functions import (TWO_PI, LambdaLike, SpectralParameter, _g_of,
                                                    as_parameter, scaled_hankel)
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.numerics import range_basis, spectral_norm

logger = logging.getLogger(__name__)

_SERIES_TERMS = 48


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Configuration:
    """
    N point interactions: centres y_j in the plane and real strengths α_j.

    Attributes:
        centres (np.ndarray): Array of shape (N, 2), pairwise distinct.
        strengths (np.ndarray): Array of shape (N,).
    """

    centres: np.ndarray
    strengths: np.ndarray

    def __post_init__(self) -> None:
        centres = np.asarray(self.centres, dtype=float)
        strengths = np.atleast_1d(np.asarray(self.strengths, dtype=float))
        if centres.ndim != 2 or centres.shape[1] != 2 or centres.shape[0] < 1:
            raise ConfigurationError(f"centres must have shape (N, 2) with N >= 1, got {centres.shape}")
        if strengths.shape != (centres.shape[0],):
            raise ConfigurationError(
                f"expected {centres.shape[0]} strengths, got shape {strengths.shape}")
        if not (np.all(np.isfinite(centres)) and np.all(np.isfinite(strengths))):
            raise ConfigurationError("centres and strengths must be finite")
        distances = np.hypot(*(centres[:, None, :] - centres[None, :, :]).transpose(2, 0, 1))
        off_diagonal = ~np.eye(len(centres), dtype=bool)
        if np.any(distances[off_diagonal] == 0.0):
            j, k = np.argwhere((distances == 0.0) & off_diagonal)[0]
            raise ConfigurationError(f"centres {j} and {k} coincide")
        object.__setattr__(self, "centres", _frozen(centres))
        object.__setattr__(self, "strengths", _frozen(strengths))

    @property
    def n(self) -> int:
        return len(self.strengths)

    @property
    def distances(self) -> np.ndarray:
        diff = self.centres[:, None, :] - self.centres[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def with_strengths(self, strengths) -> "Configuration":
        return Configuration(self.centres, strengths)

    def moved(self, angle: float, shift=(0.0, 0.0)) -> "Configuration":
        """Configuration rotated by `angle` about the origin, then translated by `shift`."""
        c, s = np.cos(angle), np.sin(angle)
        rotation = np.array([[c, -s], [s, c]])
        return Configuration(self.centres @ rotation.T + np.asarray(shift, dtype=float), self.strengths)


@dataclass(frozen=True, eq=False)
class GammaMatrix:
    entries: np.ndarray
    parameter: SpectralParameter
    condition_estimate: float

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.imag(self.entries) == 0.0))


@dataclass(frozen=True, eq=False)
class InverseResult:
    inverse: np.ndarray
    condition: float
    sigma_min: float


@dataclass(frozen=True, eq=False)
class StructureMatrices:
    """λ-independent matrices of the low-energy expansion of Γ."""

    dtilde: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g2tilde: np.ndarray
    proj_p: np.ndarray
    proj_s: np.ndarray
    s_basis: np.ndarray = field(repr=False)


def _offdiagonal_logs(config: Configuration) -> np.ndarray:
    r = config.distances
    logs = np.zeros_like(r)
    mask = ~np.eye(config.n, dtype=bool)
    logs[mask] = np.log(r[mask])
    return logs


def build_gamma(config: Configuration, lam: LambdaLike) -> GammaMatrix:
    """Assemble Γ(λ) from the Green function; exactly symmetric, real on the imaginary axis."""
    lam = as_parameter(lam)
    n = config.n
    g = complex(_g_of(np.array([lam.value]))[0])
    entries = np.zeros((n, n), dtype=complex)
    upper = np.triu_indices(n, k=1)
    if n > 1:
        values = -scaled_hankel(lam.value * config.distances[upper])
        entries[upper] = values
        entries[(upper[1], upper[0])] = values
    entries[np.diag_indices(n)] = config.strengths - g
    if lam.on_imaginary_axis:
        entries = entries.real.astype(complex)
    condition = float(np.linalg.cond(entries))
    return GammaMatrix(entries=_frozen(entries), parameter=lam, condition_estimate=condition)


def build_structure(config: Configuration) -> StructureMatrices:
    """
    D̃ = diag α + (δ̂/2π) log|y_j−y_k|,  𝒢₁ = −δ̂|y_j−y_k|²/(4N),
    𝒢₂ = −δ̂|y_j−y_k|² log(e/|y_j−y_k|)/(8πN),  𝒢̃₂ = δ̂|y_j−y_k|² log|y_j−y_k|/(8πN),
    P = 1̂1̂ᵗ/N,  S = 1 − P.
    """
    n = config.n
    r2 = config.distances**2
    logs = _offdiagonal_logs(config)
    dtilde = np.diag(config.strengths) + logs / TWO_PI
    g1 = -r2 / (4 * n)
    g2 = -r2 * (1.0 - logs) / (4 * np.pi * 2 * n)
    g2tilde = r2 * logs / (4 * np.pi * 2 * n)
    for matrix in (g1, g2, g2tilde):
        np.fill_diagonal(matrix, 0.0)
    proj_p = np.full((n, n), 1.0 / n)
    proj_s = np.eye(n) - proj_p
    return StructureMatrices(dtilde=_frozen(dtilde), g1=_frozen(g1), g2=_frozen(g2),
                             g2tilde=_frozen(g2tilde), proj_p=_frozen(proj_p),
                             proj_s=_frozen(proj_s), s_basis=_frozen(range_basis(proj_s)))


def _bessel_kernels(u: np.ndarray):
    """
    Series j1 − 1 and h1 − 1 with J₀ = 1 − u·j1(u) and Σ_k H_k(−u)^k/(k!)² = −u·h1(u),
    where u = z²/4.
    """
    j1m1 = np.zeros_like(u, dtype=complex)
    h1m1 = np.zeros_like(u, dtype=complex)
    coeff = np.ones_like(u, dtype=complex)
    harmonic = 1.0
    for k in range(2, _SERIES_TERMS + 1):
        # coeff = (−1)^{k+1} u^{k−1}/(k!)²
        coeff = coeff * (-u) / (k * k)
        harmonic += 1.0 / k
        j1m1 = j1m1 + coeff
        h1m1 = h1m1 + harmonic * coeff
    return j1m1, h1m1


@dataclass(frozen=True, eq=False)
class LowEnergyParts:
    """
    Pieces of Γ(λ) = −g 1̂1̂ᵗ + D̃ + E with E = E₁ + E_rest, where
    E₁ = −N g λ² 𝒢₁ − N λ² 𝒢₂ is the λ²-order part.
    """

    g: complex
    e_first: np.ndarray
    e_rest: np.ndarray

    @property
    def e(self) -> np.ndarray:
        return self.e_first + self.e_rest


def low_energy_parts(config: Configuration, lam: LambdaLike,
                     structure: Optional[StructureMatrices] = None) -> LowEnergyParts:
    lam = as_parameter(lam)
    structure = structure or build_structure(config)
    n = config.n
    g = complex(_g_of(np.array([lam.value]))[0])
    lam2 = lam.value**2
    e_first = -n * g * lam2 * structure.g1 - n * lam2 * structure.g2
    e_rest = np.zeros((n, n), dtype=complex)
    if n == 1:
        return LowEnergyParts(g=g, e_first=e_first.astype(complex), e_rest=e_rest)

    r = config.distances
    upper = np.triu_indices(n, k=1)
    r_up = r[upper]
    u = lam2 * r_up**2 / 4.0
    g_z = g - np.log(r_up) / TWO_PI
    if lam.on_imaginary_axis:
        g_z = g_z.real.astype(complex)
    series = np.abs(lam.value) * r_up <= LAB_CFG.regime_switch
    values = np.zeros(len(r_up), dtype=complex)
    if np.any(series):
        j1m1, h1m1 = _bessel_kernels(u[series])
        values[series] = u[series] * (g_z[series] * j1m1 + h1m1 / TWO_PI)
    if np.any(~series):
        direct = -scaled_hankel(lam.value * r_up[~series])
        first = e_first[upper][~series]
        values[~series] = direct + g - structure.dtilde[upper][~series] - first
    e_rest[upper] = values
    e_rest[(upper[1], upper[0])] = values
    if lam.on_imaginary_axis:
        e_rest = e_rest.real.astype(complex)
        e_first = e_first.real
    return LowEnergyParts(g=g, e_first=np.asarray(e_first, dtype=complex), e_rest=e_rest)


def low_energy_gamma(config: Configuration, lam: LambdaLike, dtilde: Optional[np.ndarray] = None,
                     structure: Optional[StructureMatrices] = None) -> GammaMatrix:
    """
    Γ(λ) assembled as −g(λ)1̂1̂ᵗ + D̃ + E(λ).

    Args:
        config (Configuration): The point interactions.
        lam: Spectral parameter.
        dtilde (np.ndarray, optional): Replacement for D̃, e.g. D̃ cleaned along a
            classified kernel so that the kernel stays exact in floating point.
        structure (StructureMatrices, optional): Pre-computed structure matrices.
    """
    lam = as_parameter(lam)
    structure = structure or build_structure(config)
    parts = low_energy_parts(config, lam, structure)
    dtilde = structure.dtilde if dtilde is None else np.asarray(dtilde, dtype=float)
    entries = -parts.g * np.ones((config.n, config.n)) + dtilde + parts.e
    entries = 0.5 * (entries + entries.T)
    return GammaMatrix(entries=_frozen(entries), parameter=lam,
                       condition_estimate=float(np.linalg.cond(entries)))


def scaled_gamma(config: Configuration, lam: LambdaLike) -> np.ndarray:
    """A(λ) = −Γ(λ)/(N g(λ))."""
    lam = as_parameter(lam)
    gamma = build_gamma(config, lam)
    return -gamma.entries / (config.n * complex(_g_of(np.array([lam.value]))[0]))


def expansion_f(config: Configuration, lam: LambdaLike) -> np.ndarray:
    """F(λ) = −g(λ)⁻¹ D̃ / N."""
    lam = as_parameter(lam)
    g = complex(_g_of(np.array([lam.value]))[0])
    return -build_structure(config).dtilde / (config.n * g)


def expansion_residual(config: Configuration, lam: LambdaLike) -> np.ndarray:
    """A(λ) − P − F(λ) − λ²𝒢₁ − λ²g⁻¹𝒢₂, evaluated without cancellation."""
    lam = as_parameter(lam)
    parts = low_energy_parts(config, lam)
    return -parts.e_rest / (config.n * parts.g)


def invert_gamma(gamma: Union[GammaMatrix, np.ndarray], max_condition: Optional[float] = None) -> InverseResult:
    """
    Γ⁻¹ through an LU solve, symmetrised.

    Raises:
        NearSingularError: When the condition number exceeds `max_condition`.
    """
    entries = gamma.entries if isinstance(gamma, GammaMatrix) else np.asarray(gamma)
    max_condition = LAB_CFG.max_condition if max_condition is None else max_condition
    sigma = linalg.svdvals(entries)
    sigma_min = float(sigma[-1])
    condition = float(sigma[0] / sigma_min) if sigma_min > 0 else float("inf")
    if condition > max_condition:
        raise NearSingularError("Γ(λ) is numerically singular", sigma_min=sigma_min, condition=condition)
    inverse = linalg.solve(entries, np.eye(len(entries), dtype=entries.dtype))
    return InverseResult(inverse=0.5 * (inverse + inverse.T), condition=condition, sigma_min=sigma_min)


@dataclass(frozen=True, eq=False)
class JNInverse:
    """
    Outcome of the Jensen-Nenciu inversion of A relative to a projection S.

    Attributes:
        inverse (np.ndarray | None): A⁻¹ when B is invertible.
        b_matrix (np.ndarray): B = S − S(A + S)⁻¹S written in an orthonormal basis of range(S).
        singular (bool): True when B (hence A) is singular within tolerance.
        kernel (np.ndarray | None): Unit vector of range(S) spanning the kernel direction of B.
    """

    inverse: Optional[np.ndarray]
    b_matrix: np.ndarray
    singular: bool
    kernel: Optional[np.ndarray]


def jn_invert(a: np.ndarray, s: np.ndarray, tol: Optional[float] = None) -> JNInverse:
    """
    Invert A through A⁻¹ = (A+S)⁻¹ + (A+S)⁻¹ S B⁻¹ S (A+S)⁻¹ with B = S − S(A+S)⁻¹S on range(S).

    Args:
        a (np.ndarray): Square matrix.
        s (np.ndarray): Orthogonal projection with A + S invertible.
        tol (float, optional): Relative singular-value tolerance.

    Raises:
        PreconditionError: If A + S is singular within tolerance.
    """
    tol = LAB_CFG.tolerance(tol)
    a = np.asarray(a)
    s = np.asarray(s)
    shifted = a + s
    sigma = linalg.svdvals(shifted)
    if sigma[-1] <= tol * sigma[0]:
        raise PreconditionError(
            f"A + S is singular within tolerance (smallest singular value {sigma[-1]:.3e})")
    shifted_inv = linalg.solve(shifted, np.eye(len(a), dtype=np.result_type(shifted, float)))
    basis = range_basis(s)
    if basis.size == 0:
        return JNInverse(inverse=shifted_inv, b_matrix=np.zeros((0, 0)), singular=False, kernel=None)

    b_matrix = np.eye(basis.shape[1]) - basis.T @ shifted_inv @ basis
    _, b_sigma, b_vh = linalg.svd(b_matrix)
    if b_sigma[-1] <= tol * max(1.0, b_sigma[0]):
        kernel = basis @ np.conj(b_vh[-1])
        logger.debug("B is singular on range(S); smallest singular value %.3e", b_sigma[-1])
        return JNInverse(inverse=None, b_matrix=b_matrix, singular=True, kernel=kernel)
    correction = shifted_inv @ basis @ linalg.solve(b_matrix, basis.T @ shifted_inv)
    return JNInverse(inverse=shifted_inv + correction, b_matrix=b_matrix, singular=False, kernel=None)


def gamma_norm(gamma: GammaMatrix) -> float:
    return spectral_norm(gamma.entries)
