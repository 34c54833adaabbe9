"""Small numerical helpers shared by the spectral modules: grids, projections,
finite differences, rate fits and an order-preserving parallel map."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Sequence, TypeVar

import numpy as np
from scipy import linalg

from threshold_lab.errors import ConfigurationError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def geometric_grid(start: float, stop: float, points_per_decade: int, decreasing: bool = False) -> np.ndarray:
    """
    Geometric grid from `start` to `stop` (both included) with a fixed density per decade.

    Args:
        start (float): Smallest grid value, > 0.
        stop (float): Largest grid value, > start.
        points_per_decade (int): Number of intervals per factor of ten.
        decreasing (bool): Return the grid from `stop` down to `start`.
    """
    if not (start > 0 and stop > start):
        raise ConfigurationError(f"invalid grid range [{start}, {stop}]")
    if points_per_decade < 1:
        raise ConfigurationError("points_per_decade must be positive")
    n = int(np.ceil(np.log10(stop / start) * points_per_decade - 1e-9)) + 1
    grid = np.geomspace(start, stop, max(n, 2))
    return grid[::-1].copy() if decreasing else grid


def range_basis(projection: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Orthonormal basis (columns) of the range of a real symmetric projection."""
    projection = np.asarray(projection, dtype=float)
    w, v = linalg.eigh(0.5 * (projection + projection.T))
    basis = v[:, w > threshold]
    return np.column_stack([fix_sign(col) for col in basis.T]) if basis.size else basis


def fix_sign(vector: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Unit-normalise `vector` so that its first non-negligible component is positive."""
    vector = np.asarray(vector)
    norm = np.linalg.norm(vector)
    if norm == 0:
        return vector
    vector = vector / norm
    significant = np.flatnonzero(np.abs(vector) > rel_tol * np.max(np.abs(vector)))
    first = vector[significant[0]]
    phase = first / abs(first)
    return vector / phase if np.iscomplexobj(vector) else vector * np.sign(first)


def spectral_norm(matrix: np.ndarray) -> float:
    matrix = np.atleast_2d(matrix)
    if matrix.size == 0:
        return 0.0
    return float(linalg.svdvals(matrix)[0])


def equilibrated_inverse(matrix: np.ndarray) -> np.ndarray:
    """Inverse of a complex symmetric matrix after symmetric diagonal equilibration."""
    scale = np.max(np.abs(matrix), axis=1)
    scale[scale == 0] = 1.0
    d = 1.0 / np.sqrt(scale)
    scaled = d[:, None] * matrix * d[None, :]
    inverse = linalg.solve(scaled, np.eye(len(matrix), dtype=scaled.dtype))
    inverse = d[:, None] * inverse * d[None, :]
    return 0.5 * (inverse + inverse.T)


def central_difference(func: Callable[[float], np.ndarray], x: float, order: int, h: float) -> np.ndarray:
    """
    Central finite-difference derivative of order 0..3 of an array-valued function.

    Args:
        func (Callable): Function of one real variable returning an array.
        x (float): Evaluation point.
        order (int): Derivative order, 0 <= order <= 3.
        h (float): Absolute step.
    """
    if order == 0:
        return np.asarray(func(x))
    if order == 1:
        return (func(x + h) - func(x - h)) / (2 * h)
    if order == 2:
        return (func(x + h) - 2 * func(x) + func(x - h)) / h**2
    if order == 3:
        return (func(x + 2 * h) - 2 * func(x + h) + 2 * func(x - h) - func(x - 2 * h)) / (2 * h**3)
    raise ConfigurationError(f"derivative order {order} is not supported (max 3)")


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    quality: float


def fit_line(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Ordinary least-squares line with coefficient of determination as quality."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return LinearFit(slope=float(coef[1]), intercept=float(coef[0]), quality=r_squared(y, design @ coef))


def r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - float(np.sum((y - fitted) ** 2)) / ss_tot


@dataclass(frozen=True)
class RateFit:
    power_exponent: float
    log_exponent: float
    quality: float
    model: str


def fit_rates(lam: np.ndarray, err: np.ndarray, flat_tol: float = 1e-3) -> RateFit:
    """
    Fit log(err) jointly on (1, log λ, log|log λ|).

    Data whose log varies by less than `flat_tol` (standard deviation) is a
    perfect constant fit.
    """
    lam = np.asarray(lam, dtype=float)
    log_err = np.log(np.asarray(err, dtype=float))
    if np.std(log_err) < flat_tol:
        return RateFit(power_exponent=0.0, log_exponent=0.0, quality=1.0, model="constant")
    log_lam = np.log(lam)
    loglog = np.log(np.abs(log_lam))
    design = np.column_stack([np.ones_like(log_lam), log_lam, loglog])
    coef, *_ = np.linalg.lstsq(design, log_err, rcond=None)
    joint_quality = r_squared(log_err, design @ coef)

    power = fit_line(log_lam, log_err)
    logpower = fit_line(loglog, log_err)
    model = "power" if power.quality >= logpower.quality else "log-power"
    return RateFit(power_exponent=float(coef[1]), log_exponent=float(coef[2]),
                   quality=joint_quality, model=model)


def binned_envelope(x: np.ndarray, y: np.ndarray, bins_per_decade: int = 4):
    """Maximum of |y| in logarithmic bins of x; returns (bin centres, maxima)."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y))
    edges = geometric_grid(x.min(), x.max() * (1 + 1e-12), bins_per_decade)
    centres, maxima = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (x >= lo) & (x < hi)
        if np.any(mask) and np.max(y[mask]) > 0:
            centres.append(np.sqrt(lo * hi))
            maxima.append(np.max(y[mask]))
    return np.asarray(centres), np.asarray(maxima)


def ordered_map(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """Map `func` over `items`, in parallel threads when `workers` > 1, preserving order."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
