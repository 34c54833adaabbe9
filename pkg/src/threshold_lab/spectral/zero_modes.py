"""
Zero-energy eigenfunctions ψ(x) = −(1/2π) Σ_j a_j log|x − y_j| of point
interactions, the inverse design of strengths that produces one, and the
verification of a mode against Γ(μ).
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import linalg

from threshold_lab.errors import (ConfigurationError, DesignError, InternalInconsistencyError,
                                  NearSingularError, PreconditionError)
from threshold_lab.spectral.gamma_core import Configuration, build_gamma, build_structure, invert_gamma
from threshold_lab.spectral.green_functions import LambdaLike, TWO_PI, as_parameter, g_scale, green_radial
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.numerics import fix_sign
from threshold_lab.spectral.threshold_classifier import ResonanceFunction

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ZeroMode:
    """
    Coefficient vector `a` (unit norm, first non-negligible component positive)
    of a zero mode of `config`.
    """

    a: np.ndarray
    config: Configuration

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.config.n,):
            raise ConfigurationError(f"zero-mode vector must have length {self.config.n}")
        if not np.any(a):
            raise ConfigurationError("zero-mode vector must be nonzero")
        object.__setattr__(self, "a", fix_sign(a))

    def __call__(self, x) -> float:
        return eval_psi(self, x)

    def constraint_residuals(self) -> dict:
        """Maximal violations of Σa = 0, Σ a y = 0 and D̃a = 0."""
        centres = np.asarray(self.config.centres)
        dtilde = build_structure(self.config).dtilde
        return {
            "sum": float(abs(np.sum(self.a))),
            "moment": float(np.max(np.abs(self.a @ centres))),
            "dtilde": float(np.max(np.abs(dtilde @ self.a))),
        }

    def far_field_exponent(self, r_min: float = 1e2, r_max: float = 1e4) -> float:
        """Fitted decay exponent of |ψ| on [r_min, r_max]; −2 for a genuine zero mode."""
        return ResonanceFunction(self.a, np.asarray(self.config.centres), 0.0, "zero-mode").far_field(
            r_min=r_min, r_max=r_max)[1]


@dataclass(frozen=True, eq=False)
class DesignResult:
    alpha: np.ndarray
    a: np.ndarray
    config: Configuration


@dataclass(frozen=True)
class ZeroModeCheck:
    residual: float
    decay_proxy: float
    mu: complex


def _constraint_matrix(config: Configuration) -> np.ndarray:
    centres = np.asarray(config.centres)
    return np.vstack([np.ones(config.n), centres[:, 0], centres[:, 1], build_structure(config).dtilde])


def zero_mode_space(config: Configuration, tol: Optional[float] = None) -> List[ZeroMode]:
    """Orthonormal basis of {a : Σa = 0, Σ a_j y_j = 0, D̃a = 0}, as ZeroMode objects."""
    tol = LAB_CFG.tolerance(tol)
    basis = linalg.null_space(_constraint_matrix(config), rcond=tol)
    return [ZeroMode(col, config) for col in basis.T]


def design_alpha(centres, tol: Optional[float] = None, seed: int = 0) -> Optional[DesignResult]:
    """
    Strengths α making a nonzero a with Σa = 0 and Σ a_j y_j = 0 a zero mode:
    α_j = −(1/(2π a_j)) Σ_{k≠j} a_k log|y_j − y_k|.

    Args:
        centres: Array of shape (N, 2).
        tol (float, optional): Relative tolerance for the moment null space.
        seed (int): Seed of the search for a null-space vector without zero components.

    Returns:
        DesignResult | None: None when the moment constraints only admit a = 0.

    Raises:
        DesignError: When every admissible a has a vanishing component; carries its index.
    """
    tol = LAB_CFG.tolerance(tol)
    centres = np.asarray(centres, dtype=float)
    probe = Configuration(centres, np.zeros(len(centres)))
    moments = np.vstack([np.ones(probe.n), centres[:, 0], centres[:, 1]])
    basis = linalg.null_space(moments, rcond=tol)
    if basis.shape[1] == 0:
        logger.info("moment constraints admit only a = 0 for %d centres", probe.n)
        return None

    candidates = [basis[:, j] for j in range(basis.shape[1])]
    if basis.shape[1] > 1:
        rng = np.random.default_rng(seed)
        mix = rng.standard_normal((256, basis.shape[1]))
        candidates += list((basis @ mix.T).T)
    candidates = [c / np.linalg.norm(c) for c in candidates]
    best = max(candidates, key=lambda c: np.min(np.abs(c)))
    zero_tol = 1e-8
    if np.min(np.abs(best)) <= zero_tol:
        rows = np.max(np.abs(basis), axis=1)
        index = int(np.argmin(rows)) if rows.min() <= zero_tol else int(np.argmin(np.abs(best)))
        raise DesignError(f"every admissible zero-mode vector vanishes at centre {index}", index=index)

    a = fix_sign(best)
    logs = np.zeros((probe.n, probe.n))
    mask = ~np.eye(probe.n, dtype=bool)
    logs[mask] = np.log(probe.distances[mask])
    alpha = -(logs @ a) / (TWO_PI * a)
    logger.info("designed strengths %s", np.array2string(alpha, precision=6))
    return DesignResult(alpha=alpha, a=a, config=probe.with_strengths(alpha))


def eval_psi(mode: ZeroMode, x) -> float:
    """ψ(x) = −(1/2π) Σ_j a_j log|x − y_j|; singular at the centres."""
    return ResonanceFunction(mode.a, np.asarray(mode.config.centres), 0.0, "zero-mode")(x)


def verify_zero_mode(mode: ZeroMode, mu: LambdaLike = 1.0j) -> ZeroModeCheck:
    """
    Compare v_μ(y_k) = Σ_{j≠k} a_j (G₀ − 𝒢_μ)(y_k − y_j) − g(μ) a_k with (Γ(μ)a)_k.

    The difference is exactly −(D̃a)_k, so the residual vanishes for a true zero mode.

    Raises:
        PreconditionError: If Γ(μ) is singular, i.e. μ² is (close to) an eigenvalue.
    """
    mu = as_parameter(mu)
    config = mode.config
    gamma = build_gamma(config, mu)
    try:
        invert_gamma(gamma)
    except NearSingularError as exc:
        raise PreconditionError(f"Γ(μ) is singular at μ = {mu.value}: μ² is near an eigenvalue") from exc

    r = config.distances
    n = config.n
    v = -g_scale(mu) * mode.a.astype(complex)
    for k in range(n):
        others = [j for j in range(n) if j != k]
        if not others:
            continue
        dist = r[k, others]
        v[k] += np.sum(mode.a[others] * (-np.log(dist) / TWO_PI - green_radial(mu, dist)))
    residual = float(np.max(np.abs(v - gamma.entries @ mode.a)))

    far = []
    for radius in (1e2, 1e3):
        for angle in np.linspace(0.0, 2 * np.pi, 8, endpoint=False):
            x = radius * np.array([np.cos(angle), np.sin(angle)])
            far.append(abs(eval_psi(mode, x)) * radius**2)
    return ZeroModeCheck(residual=residual, decay_proxy=float(max(far)), mu=mu.value)


def degeneracy_check(config: Configuration, tol: Optional[float] = None) -> int:
    """
    Dimension of the zero-mode space.

    Raises:
        InternalInconsistencyError: When N <= 4 and the dimension exceeds 1.
    """
    dimension = len(zero_mode_space(config, tol))
    if dimension > 1:
        if config.n <= 4:
            raise InternalInconsistencyError(
                f"zero-mode space of dimension {dimension} for N = {config.n} <= 4")
        logger.warning("degenerate zero eigenvalue: dimension %d for N = %d", dimension, config.n)
    return dimension
