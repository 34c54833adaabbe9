"""
Negative eigenvalues (bound states) of the point-interaction Hamiltonian and
its resolvent kernel, including the λ → 0 limit in the regular case.

Bound states −κ² are the κ > 0 where Γ(iκ) is singular. Γ(iκ) is real
symmetric and increasing in κ, so every sorted eigenvalue branch of Γ(iκ)
crosses zero at most once and the change in the number of negative
eigenvalues across a grid cell counts the roots inside it.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy import linalg, optimize

from threshold_lab.errors import (EigenvalueCollisionError, InternalInconsistencyError, NearSingularError,
                                  SingularityError, WrongCaseError)
from threshold_lab.reports.sweep_report import SweepReport
from threshold_lab.spectral.gamma_core import Configuration, build_gamma, build_structure, invert_gamma
from threshold_lab.spectral.green_functions import (EULER_GAMMA, TWO_PI, LambdaLike, SpectralParameter,
                                                    as_parameter, g_scale, green_radial)
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.numerics import fit_line, fix_sign, geometric_grid, ordered_map, spectral_norm
from threshold_lab.spectral.threshold_classifier import (RegularData, ThresholdCase, ThresholdClassification,
                                                         classify)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BoundState:
    """
    Bound state with energy −κ² and eigenfunction Σ_j c_j 𝒢_{iκ}(x − y_j).

    Attributes:
        kappa (float): κ > 0.
        vectors (np.ndarray): Orthonormal kernel vectors of Γ(iκ), shape (N, multiplicity).
        multiplicity (int): Dimension of ker Γ(iκ).
        merged (bool): True when numerically coincident roots were merged.
    """

    kappa: float
    vectors: np.ndarray
    multiplicity: int
    merged: bool = False

    @property
    def energy(self) -> float:
        return -self.kappa**2

    @property
    def c(self) -> np.ndarray:
        return self.vectors[:, 0]

    def eigenfunction(self, config: Configuration, x, index: int = 0) -> float:
        diff = np.asarray(config.centres) - np.asarray(x, dtype=float)[None, :]
        dist = np.hypot(diff[:, 0], diff[:, 1])
        if np.any(dist == 0):
            raise SingularityError("bound-state eigenfunction is singular at the centres")
        return float(np.real(self.vectors[:, index] @ green_radial(1j * self.kappa, dist)))


def det_gamma_on_axis(config: Configuration, kappa: float) -> float:
    """det Γ(iκ), real for κ > 0."""
    return float(linalg.det(build_gamma(config, SpectralParameter.from_kappa(kappa)).entries.real))


def _axis_eigenvalues(config: Configuration, kappa: float) -> np.ndarray:
    return linalg.eigvalsh(build_gamma(config, SpectralParameter.from_kappa(kappa)).entries.real)


def _branch_root(config: Configuration, index: int, lo: float, hi: float) -> float:
    return optimize.brentq(lambda k: _axis_eigenvalues(config, k)[index], lo, hi,
                           xtol=lo * 1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _state_at(config: Configuration, kappa: float) -> BoundState:
    w, v = linalg.eigh(build_gamma(config, SpectralParameter.from_kappa(kappa)).entries.real)
    scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    kernel = np.abs(w) <= LAB_CFG.multiplicity_tol * scale
    if not np.any(kernel):
        kernel = np.abs(w) == np.min(np.abs(w))
    vectors = np.column_stack([fix_sign(col) for col in v[:, kernel].T])
    return BoundState(kappa=float(kappa), vectors=vectors, multiplicity=int(np.count_nonzero(kernel)))


def negative_eigenvalues(config: Configuration, kappa_min: Optional[float] = None,
                         kappa_max: Optional[float] = None, points_per_decade: Optional[int] = None,
                         workers: Optional[int] = None) -> List[BoundState]:
    """
    All bound states with κ in [kappa_min, kappa_max], sorted by increasing energy.

    Args:
        config (Configuration): The point interactions.
        kappa_min (float, optional): Lower end of the κ search range.
        kappa_max (float, optional): Upper end of the κ search range.
        points_per_decade (int, optional): Density of the logarithmic scan grid.
        workers (int, optional): Threads used to scan the grid.

    Returns:
        List[BoundState]: Roots refined to relative accuracy ~1e-13; coincident
        roots are merged with their multiplicities added.

    Raises:
        InternalInconsistencyError: If more than N roots (with multiplicity) are found.
    """
    kappa_min = LAB_CFG.kappa_min if kappa_min is None else kappa_min
    kappa_max = LAB_CFG.kappa_max if kappa_max is None else kappa_max
    points_per_decade = points_per_decade or LAB_CFG.kappa_points_per_decade
    workers = workers or LAB_CFG.workers
    grid = geometric_grid(kappa_min, kappa_max, points_per_decade)
    spectra = np.array(ordered_map(lambda k: _axis_eigenvalues(config, k), grid, workers))
    negatives = np.count_nonzero(spectra < 0, axis=1)

    roots: List[float] = []
    for i in range(len(grid) - 1):
        drop = negatives[i] - negatives[i + 1]
        if drop <= 0:
            continue
        cell = [_branch_root(config, m, grid[i], grid[i + 1])
                for m in range(negatives[i + 1], negatives[i])]
        if drop > 1 and np.ptp(cell) > LAB_CFG.multiplicity_tol * grid[i]:
            warnings.warn(f"{drop} roots in the cell [{grid[i]:.4g}, {grid[i + 1]:.4g}]; "
                          "the κ grid is too coarse to separate them", RuntimeWarning, stacklevel=2)
        roots.extend(cell)

    # an eigenvalue branch touching zero at an interior grid node
    scale = np.max(np.abs(spectra), axis=1)
    smallest = np.min(np.abs(spectra), axis=1)
    interior = np.arange(1, len(grid) - 1)
    touching = interior[(smallest[interior] <= LAB_CFG.multiplicity_tol * scale[interior])
                        & (smallest[interior] <= smallest[interior - 1])
                        & (smallest[interior] <= smallest[interior + 1])]
    for i in touching:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(lambda k: np.min(np.abs(_axis_eigenvalues(config, k))),
                                       bounds=(lo, hi), method="bounded", options={"xatol": lo * 1e-13})
        if not any(abs(res.x - r) <= LAB_CFG.multiplicity_tol * r for r in roots):
            roots.append(float(res.x))

    states: List[BoundState] = []
    for kappa in sorted(roots, reverse=True):
        if states and abs(states[-1].kappa - kappa) <= LAB_CFG.multiplicity_tol * kappa:
            previous = states.pop()
            state = _state_at(config, 0.5 * (previous.kappa + kappa))
            states.append(BoundState(state.kappa, state.vectors, max(state.multiplicity, 2), merged=True))
            warnings.warn(f"merged numerically coincident roots near κ = {kappa:.6g}",
                          RuntimeWarning, stacklevel=2)
            continue
        states.append(_state_at(config, kappa))

    total = sum(s.multiplicity for s in states)
    if total > config.n:
        raise InternalInconsistencyError(f"{total} bound states found for N = {config.n} centres")
    logger.info("found %d bound state(s) in [%g, %g]", len(states), kappa_min, kappa_max)
    return states


@dataclass(frozen=True)
class ResolventSample:
    z: complex
    value: complex
    free: complex
    correction: complex


def _green_vector(config: Configuration, lam: SpectralParameter, x) -> np.ndarray:
    diff = np.asarray(config.centres) - np.asarray(x, dtype=float)[None, :]
    dist = np.hypot(diff[:, 0], diff[:, 1])
    if np.any(dist == 0):
        raise SingularityError("resolvent kernel evaluated at a centre")
    return green_radial(lam, dist)


def resolvent_kernel(config: Configuration, z: LambdaLike, x, y) -> ResolventSample:
    """
    (H − z²)⁻¹(x, y) = 𝒢_z(x − y) + Σ_{jk} [Γ(z)⁻¹]_{jk} 𝒢_z(x − y_j) 𝒢_z(y − y_k).

    Raises:
        SingularityError: If x = y or x, y sits at a centre.
        EigenvalueCollisionError: If Γ(z) is singular (z² is an eigenvalue).
    """
    lam = as_parameter(z)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    separation = float(np.hypot(*(x - y)))
    if separation == 0.0:
        raise SingularityError("resolvent kernel is singular on the diagonal x = y")
    gx = _green_vector(config, lam, x)
    gy = _green_vector(config, lam, y)
    gamma = build_gamma(config, lam)
    try:
        inverted = invert_gamma(gamma)
    except NearSingularError as exc:
        raise EigenvalueCollisionError(f"z = {lam.value} is at an eigenvalue: {exc}") from exc
    # the condition number alone misses N = 1
    reference = max(spectral_norm(gamma.entries), abs(g_scale(lam)), float(np.max(np.abs(config.strengths))),
                    1.0 / TWO_PI)
    if inverted.sigma_min <= LAB_CFG.singular_value_tol * reference:
        raise EigenvalueCollisionError(
            f"z = {lam.value} is at an eigenvalue (smallest singular value {inverted.sigma_min:.3e})")
    inverse = inverted.inverse
    free = complex(green_radial(lam, np.array([separation]))[0])
    correction = complex(gx @ inverse @ gy)
    return ResolventSample(z=lam.value, value=free + correction, free=free, correction=correction)


def resolvent_limit(config: Configuration, x, y, classification: Optional[ThresholdClassification] = None) -> complex:
    """
    Limit of the resolvent kernel at the regular threshold:
    G₀(x−y) − N⁻¹(⟨Ĝ₀(x),1̂⟩ + ⟨1̂,Ĝ₀(y)⟩) − N⁻²⟨1̂,D̃1̂⟩
    + ⟨[SD̃S]⁻¹ S(Ĝ₀(x) − D̃1̂/N), S(Ĝ₀(y) − D̃1̂/N)⟩.
    """
    classification = classification or classify(config)
    if classification.case is not ThresholdCase.REGULAR:
        raise WrongCaseError(f"resolvent limit needs a regular threshold, got {classification.case.value}",
                             hint="use validate-asymptotics for resonant configurations")
    structure = build_structure(config)
    n = config.n
    ones = np.ones(n)

    def static_vector(point) -> np.ndarray:
        diff = np.asarray(config.centres) - np.asarray(point, dtype=float)[None, :]
        dist = np.hypot(diff[:, 0], diff[:, 1])
        if np.any(dist == 0):
            raise SingularityError("resolvent kernel evaluated at a centre")
        return -np.log(dist) / TWO_PI

    gx, gy = static_vector(x), static_vector(y)
    separation = float(np.hypot(*(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))))
    if separation == 0.0:
        raise SingularityError("resolvent kernel is singular on the diagonal x = y")
    dtilde_ones = structure.dtilde @ ones
    block = classification.data.inverse_block if isinstance(classification.data, RegularData) else None
    s = structure.proj_s
    vx = s @ (gx - dtilde_ones / n)
    vy = s @ (gy - dtilde_ones / n)
    return complex(-np.log(separation) / TWO_PI - (gx.sum() + gy.sum()) / n
                   - (ones @ dtilde_ones) / n**2 + vx @ block @ vy)


def resolvent_zero_limit(config: Configuration, x, y, lambda_grid=None,
                         classification: Optional[ThresholdClassification] = None) -> SweepReport:
    """
    Sweep the resolvent kernel towards λ = 0 and compare with its regular-threshold limit.

    The report's scaled error is |error|·|log λ|, bounded for a regular threshold.

    Raises:
        WrongCaseError: If the threshold is not regular.
    """
    classification = classification or classify(config)
    limit = resolvent_limit(config, x, y, classification)
    if lambda_grid is None:
        lambda_grid = geometric_grid(1e-10, 1e-3, 4, decreasing=True)
    rows = []
    for lam in np.asarray(lambda_grid, dtype=float):
        value = resolvent_kernel(config, lam, x, y).value
        err = abs(value - limit)
        rows.append({"lambda": lam, "predicted_norm": abs(limit), "computed_norm": abs(value),
                     "abs_err": err, "rel_err": err / abs(limit) if limit != 0 else np.inf,
                     "scaled_err": err * abs(np.log(lam))})
    frame = pd.DataFrame(rows)
    scaled = frame["scaled_err"].to_numpy()
    positive = scaled[scaled > 0]
    spread = float(positive.max() / positive.min()) if positive.size else 1.0
    summary = {"case": classification.case.value, "limit_real": limit.real, "limit_imag": limit.imag,
               "scaled_error_spread": spread, "points": len(frame)}
    return SweepReport(frame=frame, summary=summary)


def resolvent_pole_order(config: Configuration, state: BoundState, x, y,
                         offsets=None) -> float:
    """Fitted exponent of |R(iκ)(x, y)| against |κ − κ₀| near a bound state; −1 for a simple pole."""
    offsets = np.geomspace(1e-7, 1e-4, 8) if offsets is None else np.asarray(offsets)
    values = [abs(resolvent_kernel(config, 1j * state.kappa * (1 + d), x, y).value) for d in offsets]
    return fit_line(np.log(state.kappa * offsets), np.log(values)).slope


def single_centre_kappa(alpha: float) -> float:
    """Closed-form bound state of one centre: κ = 2 exp(−2πα − γ)."""
    return 2.0 * np.exp(-TWO_PI * alpha - EULER_GAMMA)


