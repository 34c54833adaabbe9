"""
Zero-energy classification of a configuration: regular, s-wave resonance,
p-wave resonance or zero eigenvalue.

The decision chain follows the kernels of S D̃ S on range(S), of T D̃² T on
T = ker(S D̃ S) and of T 𝒢₁ T on T. Every kernel decision is made against a
tolerance relative to the norm of the full matrix involved (for D̃ at least
1/2π), and the margins are recorded in the returned diagnostics.
"""
import enum
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
from scipy import linalg

from threshold_lab.errors import InternalInconsistencyError, SingularityError, WrongCaseError
from threshold_lab.spectral.gamma_core import Configuration, StructureMatrices, build_structure
from threshold_lab.spectral.green_functions import TWO_PI
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.numerics import fix_sign, range_basis, spectral_norm

logger = logging.getLogger(__name__)


class ThresholdCase(str, enum.Enum):
    REGULAR = "regular"
    S_WAVE = "s-wave"
    P_WAVE = "p-wave"
    ZERO_EIGENVALUE = "zero-eigenvalue"


@dataclass
class Decision:
    """One kernel decision: the retained and discarded spectrum against the threshold."""

    name: str
    threshold: float
    smallest_retained: Optional[float]
    largest_discarded: Optional[float]

    @property
    def margin(self) -> Optional[float]:
        if self.smallest_retained is None or self.threshold == 0:
            return None
        return self.smallest_retained / self.threshold


@dataclass
class Diagnostics:
    tolerance: float
    decisions: List[Decision] = field(default_factory=list)
    ill_conditioned: bool = False

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "ill_conditioned": self.ill_conditioned,
            "decisions": [
                {"name": d.name, "threshold": d.threshold, "smallest_retained": d.smallest_retained,
                 "largest_discarded": d.largest_discarded, "margin": d.margin}
                for d in self.decisions
            ],
        }


@dataclass(frozen=True, eq=False)
class RegularData:
    inverse_block: np.ndarray  # [S D̃ S]⁻¹ embedded in ℂᴺ (zero on range P)


@dataclass(frozen=True, eq=False)
class SWaveData:
    f: np.ndarray
    b: float
    gamma0: float


@dataclass(frozen=True, eq=False)
class PWaveData:
    """T[T𝒢₁T]⁻¹T = Σ_j weights_j f_j f_jᵗ with unit vectors f_j (columns of `vectors`)."""

    rank: int
    vectors: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class ZeroEigenvalueData:
    multiplicity: int
    basis: np.ndarray
    g2tilde_block: np.ndarray
    pwave_rank: int
    t_basis: np.ndarray


CaseData = Union[RegularData, SWaveData, PWaveData, ZeroEigenvalueData]


@dataclass(frozen=True, eq=False)
class ThresholdClassification:
    case: ThresholdCase
    data: CaseData
    diagnostics: Diagnostics

    def to_dict(self) -> dict:
        out = {"case": self.case.value, "diagnostics": self.diagnostics.to_dict()}
        if isinstance(self.data, SWaveData):
            out.update(f=self.data.f.tolist(), b=self.data.b, gamma0=self.data.gamma0)
        elif isinstance(self.data, PWaveData):
            out.update(rank=self.data.rank, vectors=self.data.vectors.T.tolist(),
                       weights=self.data.weights.tolist())
        elif isinstance(self.data, ZeroEigenvalueData):
            out.update(multiplicity=self.data.multiplicity, basis=self.data.basis.T.tolist(),
                       pwave_rank=self.data.pwave_rank)
        return out


def _restricted_eigen(matrix: np.ndarray, basis: np.ndarray):
    block = basis.T @ matrix @ basis
    return linalg.eigh(0.5 * (block + block.T))


def _split(matrix: np.ndarray, basis: np.ndarray, scale: float, tol: float, name: str):
    """Kernel basis of `matrix` restricted to span(basis), plus the decision record."""
    w, v = _restricted_eigen(matrix, basis)
    threshold = tol * scale
    in_kernel = np.abs(w) <= threshold
    retained = np.abs(w[~in_kernel])
    discarded = np.abs(w[in_kernel])
    decision = Decision(name=name, threshold=threshold,
                        smallest_retained=float(retained.min()) if retained.size else None,
                        largest_discarded=float(discarded.max()) if discarded.size else None)
    return basis @ v[:, in_kernel], basis @ v[:, ~in_kernel], w[~in_kernel], decision


def projection_kernel(matrix: np.ndarray, within: np.ndarray, tol: Optional[float] = None,
                      scale: Optional[float] = None) -> np.ndarray:
    """
    Orthogonal projection onto the kernel of `matrix` restricted to range(`within`).

    Args:
        matrix (np.ndarray): Real symmetric matrix.
        within (np.ndarray): Orthogonal projection defining the subspace.
        tol (float, optional): Relative tolerance.
        scale (float, optional): Reference magnitude; defaults to the largest
            restricted eigenvalue. A zero reference puts the whole subspace in the kernel.
    """
    tol = LAB_CFG.tolerance(tol)
    basis = range_basis(within)
    n = len(matrix)
    if basis.size == 0:
        return np.zeros((n, n))
    if scale is None:
        w, _ = _restricted_eigen(matrix, basis)
        scale = float(np.max(np.abs(w)))
    kernel, _, _, _ = _split(np.asarray(matrix, dtype=float), basis, scale, tol, "kernel")
    return kernel @ kernel.T


def _mark_ill_conditioned(diagnostics: Diagnostics, decision: Decision) -> None:
    diagnostics.decisions.append(decision)
    factor = LAB_CFG.ill_conditioned_factor
    near = (decision.smallest_retained is not None and decision.threshold > 0
            and decision.smallest_retained < factor * decision.threshold)
    near = near or (decision.largest_discarded is not None
                    and decision.largest_discarded > decision.threshold / factor)
    if near:
        diagnostics.ill_conditioned = True
        warnings.warn(f"classification step '{decision.name}' is within a factor {factor:g} "
                      f"of its threshold {decision.threshold:.3e}", RuntimeWarning, stacklevel=3)


def _dtilde_scale(dtilde: np.ndarray) -> float:
    """Reference magnitude for decisions on D̃, floored at the 1/2π unit of its logarithmic terms."""
    return max(spectral_norm(dtilde), 1.0 / TWO_PI)


def _columns_signed(basis: np.ndarray) -> np.ndarray:
    return np.column_stack([fix_sign(col) for col in basis.T]) if basis.size else basis


def classify(config: Configuration, tol: Optional[float] = None,
             structure: Optional[StructureMatrices] = None) -> ThresholdClassification:
    """
    Determine the zero-energy type of a configuration.

    Args:
        config (Configuration): The point interactions.
        tol (float, optional): Relative singular-value tolerance (configured default otherwise).
        structure (StructureMatrices, optional): Pre-computed structure matrices.

    Returns:
        ThresholdClassification: Case tag, case data and decision diagnostics.

    Raises:
        InternalInconsistencyError: If a structural fact of the dichotomy fails numerically,
            including the mixed structure rank T >= 2 with T D̃ ≠ 0.
    """
    tol = LAB_CFG.tolerance(tol)
    structure = structure or build_structure(config)
    diagnostics = Diagnostics(tolerance=tol)
    n = config.n
    dtilde = np.asarray(structure.dtilde)

    if n == 1:
        logger.debug("single centre: regular at threshold")
        return ThresholdClassification(ThresholdCase.REGULAR, RegularData(np.zeros((1, 1))), diagnostics)

    s_basis = np.asarray(structure.s_basis)
    d_scale = _dtilde_scale(dtilde)
    t_basis, kept, kept_w, decision = _split(dtilde, s_basis, d_scale, tol, "S D~ S on range(S)")
    _mark_ill_conditioned(diagnostics, decision)

    if t_basis.shape[1] == 0:
        inverse_block = (kept / kept_w) @ kept.T
        logger.info("regular threshold (margin %s)", decision.margin)
        return ThresholdClassification(ThresholdCase.REGULAR, RegularData(inverse_block), diagnostics)

    t_basis = _columns_signed(t_basis)
    rank_t = t_basis.shape[1]
    sigma = linalg.svdvals(dtilde @ t_basis)
    threshold = tol * d_scale
    nonzero = sigma > threshold
    decision = Decision(name="T D~^2 T on range(T)", threshold=threshold,
                        smallest_retained=float(sigma[nonzero].min()) if np.any(nonzero) else None,
                        largest_discarded=float(sigma[~nonzero].max()) if np.any(~nonzero) else None)
    _mark_ill_conditioned(diagnostics, decision)

    if np.count_nonzero(nonzero) > 1:
        raise InternalInconsistencyError(
            f"rank of T D~^2 T is {np.count_nonzero(nonzero)} > 1 on a kernel of dimension {rank_t}")
    if np.count_nonzero(nonzero) == 1:
        if rank_t > 1:
            raise InternalInconsistencyError(
                f"mixed threshold structure: S D~ S vanishes on a kernel T of dimension {rank_t} while D~ T "
                "has rank 1, which is neither an s-wave (rank T = 1) nor a p-wave (D~ T = 0) threshold; "
                "strengths alpha_j = 2 u_j with u_j + u_k = log|y_j - y_k| / 2pi give D~ = u 1^t + 1 u^t "
                "and S D~ S = 0")
        f = t_basis[:, 0]
        dtilde_f = dtilde @ f
        norm2 = float(dtilde_f @ dtilde_f)
        b = -float(f @ dtilde @ np.ones(n)) / n
        logger.info("s-wave resonance, b = %.6g", b)
        return ThresholdClassification(ThresholdCase.S_WAVE,
                                       SWaveData(f=f, b=b, gamma0=norm2**-0.5), diagnostics)

    g1_scale = spectral_norm(structure.g1)
    t1_basis, tp_basis, tp_w, decision = _split(np.asarray(structure.g1), t_basis, g1_scale, tol,
                                                "T G1 T on range(T)")
    _mark_ill_conditioned(diagnostics, decision)

    if t1_basis.shape[1] == 0:
        order = np.argsort(tp_w)[::-1]
        vectors = _columns_signed(tp_basis[:, order])
        weights = 1.0 / tp_w[order]
        logger.info("p-wave resonance of rank %d", rank_t)
        return ThresholdClassification(ThresholdCase.P_WAVE,
                                       PWaveData(rank=rank_t, vectors=vectors, weights=weights), diagnostics)

    t1_basis = _columns_signed(t1_basis)
    g2_block = t1_basis.T @ structure.g2 @ t1_basis
    g2tilde_block = t1_basis.T @ structure.g2tilde @ t1_basis
    g2_scale = max(spectral_norm(structure.g2), spectral_norm(structure.g2tilde))
    if spectral_norm(g2_block - g2tilde_block) > tol * g2_scale:
        raise InternalInconsistencyError("T1 G2 T1 differs from T1 G2~ T1")
    block_sigma = linalg.svdvals(g2tilde_block)
    if block_sigma[-1] <= tol * g2_scale:
        raise InternalInconsistencyError("T1 G2~ T1 is singular on range(T1)")
    multiplicity = t1_basis.shape[1]
    logger.info("zero eigenvalue of multiplicity %d (p-wave rank %d)", multiplicity, rank_t - multiplicity)
    data = ZeroEigenvalueData(multiplicity=multiplicity, basis=t1_basis,
                              g2tilde_block=0.5 * (g2tilde_block + g2tilde_block.T),
                              pwave_rank=rank_t - multiplicity, t_basis=t_basis)
    return ThresholdClassification(ThresholdCase.ZERO_EIGENVALUE, data, diagnostics)


def classify_two_centres(alpha1: float, alpha2: float, distance: float,
                         tol: Optional[float] = None) -> ThresholdCase:
    """
    Closed-form classification for N = 2 with c = log(d)/(2π):
    regular iff (α₁+α₂)/2 ≠ c; p-wave iff α₁ = c = α₂; s-wave otherwise.
    Tolerances are relative to max(‖D̃‖, 1/2π) exactly as in `classify`.
    """
    tol = LAB_CFG.tolerance(tol)
    c = np.log(distance) / TWO_PI
    scale = _dtilde_scale(np.array([[alpha1, c], [c, alpha2]]))
    threshold = tol * scale
    if abs(0.5 * (alpha1 + alpha2) - c) > threshold:
        return ThresholdCase.REGULAR
    if abs(alpha1 - c) <= threshold and abs(alpha2 - c) <= threshold:
        return ThresholdCase.P_WAVE
    return ThresholdCase.S_WAVE


@dataclass(frozen=True, eq=False)
class ResonanceFunction:
    """
    φ(x) = offset + Σ_j coefficients_j G₀(x − y_j) with Σ_j coefficients_j = 0.

    `kind` is "s-wave", "p-wave" or "zero-mode".
    """

    coefficients: np.ndarray
    centres: np.ndarray
    offset: float
    kind: str

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        diff = x[None, :] - self.centres
        dist2 = np.sum(diff**2, axis=1)
        if np.any(dist2 == 0):
            raise_at = int(np.argmin(dist2))
            raise SingularityError(f"resonance function evaluated at centre {raise_at}")
        r2 = float(x @ x)
        if r2 > 100.0 * float(np.max(np.sum(self.centres**2, axis=1)) + 1e-300):
            # log|x − y| − log|x| = ½ log1p((|y|² − 2x·y)/|x|²), stable far out
            ratio = (np.sum(self.centres**2, axis=1) - 2 * self.centres @ x) / r2
            logs = 0.5 * np.log1p(ratio)
        else:
            logs = 0.5 * np.log(dist2)
        return float(self.offset - (self.coefficients @ logs) / TWO_PI)

    def far_field(self, r_min: float = 1e2, r_max: float = 1e4, points: int = 25, rays: int = 8):
        """
        Limit and decay exponent of φ − offset along rays from the origin.

        Returns:
            tuple: (offset, exponent) where exponent is the slowest fitted decay
            slope of log|φ(x) − offset| against log|x| among the rays.
        """
        radii = np.geomspace(r_min, r_max, points)
        slopes = []
        for angle in np.linspace(0.0, 2 * np.pi, rays, endpoint=False):
            direction = np.array([np.cos(angle), np.sin(angle)])
            values = np.array([abs(self(r * direction) - self.offset) for r in radii])
            usable = values > 0
            if np.count_nonzero(usable) >= 3:
                slopes.append(np.polyfit(np.log(radii[usable]), np.log(values[usable]), 1)[0])
        return self.offset, float(max(slopes)) if slopes else float("-inf")


def resonance_functions(classification: ThresholdClassification,
                        config: Configuration) -> List[ResonanceFunction]:
    """
    Resonance functions (s- or p-wave) or zero modes spanning the threshold space.

    Raises:
        WrongCaseError: If the threshold is regular.
    """
    data = classification.data
    centres = np.asarray(config.centres)
    if isinstance(data, SWaveData):
        return [ResonanceFunction(data.f, centres, data.b, "s-wave")]
    if isinstance(data, PWaveData):
        return [ResonanceFunction(f, centres, 0.0, "p-wave") for f in data.vectors.T]
    if isinstance(data, ZeroEigenvalueData):
        return [ResonanceFunction(a, centres, 0.0, "zero-mode") for a in data.basis.T]
    raise WrongCaseError("a regular threshold has no resonance functions",
                         hint="classify first and call this only for resonant or zero-eigenvalue cases")


def pwave_positivity_identity(config: Configuration, f) -> tuple:
    """Both sides of ⟨𝒢₁f, f⟩ = (1/2N)|Σ_j f_j y_j|² (valid for Σ_j f_j = 0)."""
    f = np.asarray(f, dtype=float)
    lhs = float(f @ build_structure(config).g1 @ f)
    moment = f @ np.asarray(config.centres)
    return lhs, float(moment @ moment) / (2 * config.n)
