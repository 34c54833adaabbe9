"""
Free Green functions of the planar Laplacian and their low-energy decomposition.

𝒢_λ(x) = (i/4) H₀⁽¹⁾(λ|x|) is evaluated by a convergent power series for
|λ|x|| up to the regime switch and by Gauss-Laguerre quadrature of the
Hankel integral representation beyond it. g(λ) is the logarithmic scale and
G₀(x) = −log|x|/(2π) the static Green function, so that
𝒢_λ(x) = g(λ) + G₀(x) + R₀.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from scipy import special

from threshold_lab.errors import DomainError, SingularityError
from threshold_lab.spectral.load_lab_config import LAB_CFG

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286061
TWO_PI = 2.0 * np.pi

_SERIES_TERMS = 64
Regime = Literal["series", "asymptotic"]


@dataclass(frozen=True)
class SpectralParameter:
    """A spectral parameter λ ≠ 0 in the closed upper half-plane."""

    value: complex

    def __post_init__(self) -> None:
        value = complex(self.value)
        if not (np.isfinite(value.real) and np.isfinite(value.imag)):
            raise DomainError(f"spectral parameter must be finite, got {value}")
        if value == 0:
            raise SingularityError("spectral parameter λ = 0 is the threshold itself")
        if value.imag < 0:
            raise DomainError(f"spectral parameter must satisfy Im λ >= 0, got {value}")
        object.__setattr__(self, "value", value)

    @classmethod
    def from_kappa(cls, kappa: float) -> "SpectralParameter":
        return cls(complex(0.0, kappa))

    @property
    def on_real_axis(self) -> bool:
        return self.value.imag == 0.0

    @property
    def on_imaginary_axis(self) -> bool:
        return self.value.real == 0.0 and self.value.imag > 0.0


LambdaLike = Union[SpectralParameter, complex, float]


def as_parameter(lam: LambdaLike) -> SpectralParameter:
    return lam if isinstance(lam, SpectralParameter) else SpectralParameter(lam)


@dataclass(frozen=True)
class GreenValue:
    value: complex
    regime: Regime
    argument: complex


@dataclass(frozen=True)
class RemainderValue:
    value: complex
    bound: float
    within_bound: Optional[bool]
    regime: Regime


def _g_of(z: np.ndarray) -> np.ndarray:
    """Elementwise g(z); exactly real on the positive imaginary axis."""
    z = np.asarray(z, dtype=complex)
    out = -np.log(z / 2.0) / TWO_PI + 0.25j - EULER_GAMMA / TWO_PI
    imaginary = (z.real == 0.0) & (z.imag > 0.0)
    if np.any(imaginary):
        out[imaginary] = -np.log(z.imag[imaginary] / 2.0) / TWO_PI - EULER_GAMMA / TWO_PI + 0.0j
    return out


def g_scale(lam: LambdaLike) -> complex:
    """g(λ) = −(1/2π) log(λ/2) + i/4 − γ/(2π) with the principal logarithm."""
    lam = as_parameter(lam)
    return complex(_g_of(np.array([lam.value]))[0])


def _series_terms(q: np.ndarray, terms: int = _SERIES_TERMS):
    """Yield (k, H_k, (−q)^k/(k!)²) for k = 1..terms."""
    term = np.ones_like(q)
    harmonic = 0.0
    for k in range(1, terms + 1):
        term = term * (-q) / (k * k)
        harmonic += 1.0 / k
        yield k, harmonic, term


def _bessel_series(z: np.ndarray) -> np.ndarray:
    q = np.asarray(z, dtype=complex) ** 2 / 4.0
    total = np.ones_like(q)
    for _, _, term in _series_terms(q):
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _hankel_series(z: np.ndarray) -> np.ndarray:
    """(i/4)H₀⁽¹⁾(z) = g(z)J₀(z) + (1/2π) Σ_{k≥1} H_k (−z²/4)^k/(k!)²."""
    z = np.asarray(z, dtype=complex)
    q = z**2 / 4.0
    bessel = np.ones_like(q)
    harmonic_sum = np.zeros_like(q)
    for _, harmonic, term in _series_terms(q):
        bessel = bessel + term
        harmonic_sum = harmonic_sum + harmonic * term
    return _g_of(z) * bessel + harmonic_sum / TWO_PI


def _remainder_series(z: np.ndarray) -> np.ndarray:
    """R₀ = g(z)(J₀(z) − 1) + (1/2π) Σ H_k (−z²/4)^k/(k!)², summed without cancellation."""
    z = np.asarray(z, dtype=complex)
    q = z**2 / 4.0
    bessel_minus_one = np.zeros_like(q)
    harmonic_sum = np.zeros_like(q)
    for _, harmonic, term in _series_terms(q):
        bessel_minus_one = bessel_minus_one + term
        harmonic_sum = harmonic_sum + harmonic * term
    return _g_of(z) * bessel_minus_one + harmonic_sum / TWO_PI


def _envelope_quadrature(z: np.ndarray) -> np.ndarray:
    """ω(z) = e^{−iz}(i/4)H₀⁽¹⁾(z) = (2^{3/2}π)⁻¹ ∫ e^{−t} t^{−1/2} (t/2 − iz)^{−1/2} dt."""
    nodes, weights = special.roots_genlaguerre(LAB_CFG.laguerre_nodes, -0.5)
    z = np.asarray(z, dtype=complex)
    integrand = (nodes[None, :] / 2.0 - 1j * z.reshape(-1, 1)) ** -0.5
    return (integrand @ weights).reshape(z.shape) / (2.0**1.5 * np.pi)


def _check_argument(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise DomainError("Hankel argument must be finite")
    if np.any(z == 0):
        raise SingularityError("(i/4)H₀⁽¹⁾ is singular at z = 0")
    return z


def scaled_hankel(z: np.ndarray) -> np.ndarray:
    """Vectorised (i/4)H₀⁽¹⁾(z) for z ≠ 0, switching regimes at |z| = regime_switch."""
    z = _check_argument(z)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) <= LAB_CFG.regime_switch
    if np.any(small):
        out[small] = _hankel_series(z[small])
    if np.any(~small):
        large = z[~small]
        out[~small] = np.exp(1j * large) * _envelope_quadrature(large)
    return out


def hankel1_0_scaled(z: complex) -> complex:
    """(i/4)H₀⁽¹⁾(z) for a single argument z ≠ 0."""
    return complex(scaled_hankel(np.array([z]))[0])


def hankel_envelope(z: np.ndarray) -> np.ndarray:
    """Non-oscillating factor ω(z) = e^{−iz}(i/4)H₀⁽¹⁾(z)."""
    z = _check_argument(z)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) <= LAB_CFG.regime_switch
    if np.any(small):
        out[small] = np.exp(-1j * z[small]) * _hankel_series(z[small])
    if np.any(~small):
        out[~small] = _envelope_quadrature(z[~small])
    return out


def bessel_j0(z: complex) -> complex:
    """J₀(z): power series up to the regime switch, library evaluation beyond."""
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise DomainError(f"J₀ argument must be finite, got {z}")
    if abs(z) <= LAB_CFG.regime_switch:
        return complex(_bessel_series(np.array([z]))[0])
    return complex(special.jv(0, z))


def _radius(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (2,) or not np.all(np.isfinite(x)):
        raise DomainError(f"expected a finite planar point, got {x}")
    r = float(np.hypot(x[0], x[1]))
    if r == 0.0:
        raise SingularityError("Green functions are singular at x = 0")
    return r


def evaluate_green(lam: LambdaLike, x) -> GreenValue:
    lam = as_parameter(lam)
    z = lam.value * _radius(x)
    regime: Regime = "series" if abs(z) <= LAB_CFG.regime_switch else "asymptotic"
    return GreenValue(value=hankel1_0_scaled(z), regime=regime, argument=z)


def green_free(lam: LambdaLike, x) -> complex:
    """𝒢_λ(x) = (i/4)H₀⁽¹⁾(λ|x|)."""
    return evaluate_green(lam, x).value


def green_radial(lam: LambdaLike, r: np.ndarray) -> np.ndarray:
    """𝒢_λ at an array of radii r > 0."""
    lam = as_parameter(lam)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise SingularityError("Green functions are singular at x = 0")
    return scaled_hankel(lam.value * r)


def green_log(x) -> float:
    """G₀(x) = −(1/2π) log|x|."""
    return -np.log(_radius(x)) / TWO_PI


def calibrate_c_delta(delta: float) -> float:
    """
    Empirical constant C_δ with |R₀| <= C_δ |λx|^δ on the series regime.

    R₀ depends on z = λ|x| only, so the supremum is taken over z on a geometric
    grid of the real and imaginary directions.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"δ must lie in (0, 1), got {delta}")
    s = np.geomspace(LAB_CFG.calibration_min, LAB_CFG.regime_switch, LAB_CFG.calibration_points)
    ratios = [np.abs(_remainder_series(direction * s)) / s**delta for direction in (1.0, 1.0j)]
    return float(np.max(np.concatenate(ratios)))


def green_remainder(lam: LambdaLike, x, delta: float = 0.9, c_delta: Optional[float] = None) -> RemainderValue:
    """
    R₀ = 𝒢_λ(x) − g(λ) − G₀(x) with its calibrated bound C_δ|λx|^δ.

    Args:
        lam: Spectral parameter.
        x: Planar point, x ≠ 0.
        delta (float): Exponent of the bound, 0 < δ < 1.
        c_delta (float, optional): Pre-computed constant from `calibrate_c_delta`.

    Returns:
        RemainderValue: `within_bound` is None outside the series regime, where
        the small-argument bound is not asserted.
    """
    lam = as_parameter(lam)
    z = lam.value * _radius(x)
    if c_delta is None:
        c_delta = calibrate_c_delta(delta)
    bound = c_delta * abs(z) ** delta
    if abs(z) <= LAB_CFG.regime_switch:
        value = complex(_remainder_series(np.array([z]))[0])
        return RemainderValue(value=value, bound=bound,
                              within_bound=abs(value) <= bound * (1 + 1e-12), regime="series")
    value = hankel1_0_scaled(z) - complex(_g_of(np.array([z]))[0])
    return RemainderValue(value=value, bound=bound, within_bound=None, regime="asymptotic")
