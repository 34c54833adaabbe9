"""
Computable pieces of the stationary representation of the wave operators.

Conventions: û(ξ) = (2π)⁻¹ ∫ e^{−ix·ξ} u(x) dx. With the spherical mean
M_u(r) and N_u(s) = M_u(√s) on s >= 0 (zero on s < 0), the operator K is

    Ku(x) = (i/2π²) ∫ u(y) / (|x|² − |y|² − i0) dy = −(P₋ N_u)(|x|²),

P₋ keeping the negative frequencies of the one-dimensional Fourier transform.
Ω_jk u = K(Γ̃_jk(|D|) u) with Γ̃(λ) = [conj Γ(|λ|)]⁻¹.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import fft, integrate, interpolate, optimize, special

from threshold_lab.errors import (ConfigurationError, ExtrapolationError, PreconditionError, SingularityError,
                                  TruncationError, WrongCaseError)
from threshold_lab.reports.sweep_report import SweepReport
from threshold_lab.spectral.gamma_core import Configuration, build_gamma, invert_gamma
from threshold_lab.spectral.green_functions import (TWO_PI, g_scale, green_radial, hankel_envelope,
                                                    scaled_hankel)
from threshold_lab.spectral.load_lab_config import LAB_CFG
from threshold_lab.spectral.numerics import (binned_envelope, central_difference, fit_line, geometric_grid,
                                             ordered_map)
from threshold_lab.spectral.threshold_classifier import ThresholdCase, ThresholdClassification, classify

logger = logging.getLogger(__name__)

_TRUNCATION_TOL = 1e-8
_SIGNIFICANCE = 1e-14
_SERIES_SWITCH = 40.0
_FIT_POINTS = 64
_STABILITY = 0.05


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MexicanHat:
    """
    u(x) = e^{ik·x} h(x − x₀) with h = (2/σ⁴ − |x|²/σ⁶) e^{−|x|²/2σ²}, so that
    û(ξ) = e^{−ix₀·(ξ−k)} |ξ−k|² e^{−σ²|ξ−k|²/2}.
    """

    sigma: float = 1.0
    shift: Tuple[float, float] = (0.0, 0.0)
    wavevector: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ConfigurationError(f"σ must be positive, got {self.sigma}")

    @property
    def centred(self) -> bool:
        return not (np.any(self.shift) or np.any(self.wavevector))

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = (x - self.shift[0]) ** 2 + (y - self.shift[1]) ** 2
        s2 = self.sigma**2
        hat = (2.0 / s2**2 - r2 / s2**3) * np.exp(-r2 / (2.0 * s2))
        return hat * np.exp(1j * (self.wavevector[0] * x + self.wavevector[1] * y))

    def fourier(self, xi1, xi2) -> np.ndarray:
        d1 = np.asarray(xi1, dtype=float) - self.wavevector[0]
        d2 = np.asarray(xi2, dtype=float) - self.wavevector[1]
        q2 = d1**2 + d2**2
        return np.exp(-1j * (self.shift[0] * d1 + self.shift[1] * d2)) * q2 * np.exp(-0.5 * self.sigma**2 * q2)

    def k_closed_form(self, t) -> np.ndarray:
        """Ku at |x|² = t for the centred hat: −(2/σ⁴)[Q₀(τ) − Q₁(τ)], τ = t/2σ²."""
        if not self.centred:
            raise PreconditionError("the closed form of Ku needs a centred, unmodulated hat")
        tau = _positive_t(t) / (2.0 * self.sigma**2)
        return -(2.0 / self.sigma**4) * (half_line_basis(0, tau) - half_line_basis(1, tau))


class RadialTestFunction:
    """
    A test function sampled on a polar grid: radii 0..r_max (n_r nodes) and
    n_theta equispaced angles.

    Attributes:
        func (Callable): Vectorised u(x, y).
        descriptor (MexicanHat, optional): Closed-form description, used for û.
        label (str): Name used in reports.
    """

    def __init__(self, func: Callable, r_max: Optional[float] = None, n_r: Optional[int] = None,
                 n_theta: Optional[int] = None, descriptor: Optional[MexicanHat] = None, label: str = "") -> None:
        self.func = func
        self.r_max = LAB_CFG.r_max if r_max is None else float(r_max)
        self.n_r = LAB_CFG.n_r if n_r is None else int(n_r)
        self.n_theta = LAB_CFG.n_theta if n_theta is None else int(n_theta)
        if not (self.r_max > 0 and self.n_r >= 8 and self.n_theta >= 4):
            raise ConfigurationError(f"invalid polar grid r_max={self.r_max}, n_r={self.n_r}, n_theta={self.n_theta}")
        self.descriptor = descriptor
        self.label = label

    @classmethod
    def from_hat(cls, hat: MexicanHat, **grid) -> "RadialTestFunction":
        label = f"hat(sigma={hat.sigma:g}, shift=({hat.shift[0]:g},{hat.shift[1]:g}), " \
                f"k=({hat.wavevector[0]:g},{hat.wavevector[1]:g}))"
        return cls(hat, descriptor=hat, label=label, **grid)

    def __call__(self, x, y) -> np.ndarray:
        return np.asarray(self.func(x, y), dtype=complex)

    @property
    def radii(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.n_r)

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.n_theta) * (TWO_PI / self.n_theta)

    @cached_property
    def means(self) -> np.ndarray:
        """Spherical means at the radial nodes."""
        return _angular_mean(self, self.radii)

    def fourier(self, xi1, xi2) -> np.ndarray:
        if self.descriptor is None:
            raise PreconditionError(f"{self.label or 'test function'} has no closed-form Fourier transform")
        return self.descriptor.fourier(xi1, xi2)

    def refined(self) -> "RadialTestFunction":
        """The same function on a grid with twice the radial and angular resolution."""
        return RadialTestFunction(self.func, r_max=self.r_max, n_r=2 * self.n_r - 1, n_theta=2 * self.n_theta,
                                  descriptor=self.descriptor, label=self.label)

    def midpoint_grid(self):
        """Midpoint radii, midpoint angles and the Cartesian points of the polar midpoint grid."""
        dr = self.r_max / (self.n_r - 1)
        radii = (np.arange(self.n_r - 1) + 0.5) * dr
        angles = (np.arange(self.n_theta) + 0.5) * (TWO_PI / self.n_theta)
        points = np.stack([radii[:, None] * np.cos(angles)[None, :],
                           radii[:, None] * np.sin(angles)[None, :]], axis=-1)
        return radii, angles, points


def mexican_hat_corpus(r_max: Optional[float] = None, n_r: Optional[int] = None,
                       n_theta: Optional[int] = None) -> List[RadialTestFunction]:
    """Dilations, translations and modulations of the Mexican hat (12 functions)."""
    hats = [MexicanHat(sigma=s) for s in (0.5, 1.0, 2.0)]
    hats += [MexicanHat(shift=x0) for x0 in ((1.0, 0.0), (0.0, 2.0), (-2.0, 1.0))]
    hats += [MexicanHat(wavevector=k) for k in ((1.0, 0.0), (0.0, 2.0), (2.0, 2.0))]
    hats += [MexicanHat(sigma=0.5, shift=(1.0, 0.0), wavevector=(0.0, 2.0)),
             MexicanHat(sigma=2.0, shift=(0.0, 2.0), wavevector=(1.0, 0.0)),
             MexicanHat(sigma=1.0, shift=(-2.0, 1.0), wavevector=(2.0, 2.0))]
    return [RadialTestFunction.from_hat(hat, r_max=r_max, n_r=n_r, n_theta=n_theta) for hat in hats]


def _angular_mean(u: RadialTestFunction, radii: np.ndarray) -> np.ndarray:
    angles = u.angles
    values = u(radii[:, None] * np.cos(angles)[None, :], radii[:, None] * np.sin(angles)[None, :])
    return values.mean(axis=1)


def spherical_mean(u: RadialTestFunction, r) -> np.ndarray:
    """
    (1/2π) ∫_{S¹} u(rω) dω by the periodic trapezoidal rule on the angular samples.

    Raises:
        ExtrapolationError: If r lies outside [0, r_max].
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > u.r_max):
        raise ExtrapolationError(f"radius outside the sampled range [0, {u.r_max}]")
    return _angular_mean(u, np.atleast_1d(r)).reshape(r.shape)


def polar_samples_frame(u: RadialTestFunction, values: Optional[np.ndarray] = None) -> pd.DataFrame:
    """(r, theta, value) table of u, or of `values` given on the same polar grid."""
    radii, angles = u.radii, u.angles
    if values is None:
        values = u(radii[:, None] * np.cos(angles)[None, :], radii[:, None] * np.sin(angles)[None, :])
    values = np.asarray(values, dtype=complex).reshape(len(radii), len(angles))
    rr, tt = np.meshgrid(radii, angles, indexing="ij")
    return pd.DataFrame({"r": rr.ravel(), "theta": tt.ravel(),
                         "value_real": values.real.ravel(), "value_imag": values.imag.ravel()})


# ---------------------------------------------------------------------------
# The operator K
# ---------------------------------------------------------------------------

def _positive_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise SingularityError("Ku is logarithmically singular at x = 0")
    return t


def _pv_exponential_moment(k: int, tau: np.ndarray) -> np.ndarray:
    """PV ∫₀^∞ s^k e^{−s}/(τ − s) ds for τ > 0."""
    out = np.empty(tau.shape)
    near = tau <= _SERIES_SWITCH
    t = tau[near]
    value = t**k * np.exp(-t) * special.expi(t)
    for m in range(k):
        value = value - math.factorial(m) * t ** (k - 1 - m)
    out[near] = value

    t = tau[~near]
    if t.size:
        # asymptotic series Σ_{n>=k} n! τ^{k−1−n}, cut before its smallest term
        term = math.factorial(k) / t
        total = term.copy()
        n = k
        while True:
            n += 1
            term = term * n / t
            keep = n < t
            total += np.where(keep, term, 0.0)
            if np.all(~keep | (term < 1e-17 * np.abs(total))):
                break
        out[~near] = total
    return out


def half_line_basis(k: int, tau) -> np.ndarray:
    """Q_k(τ) = P₋[s^k e^{−s} H(s)](τ) = ½ τ^k e^{−τ} − (i/2π) PV ∫₀^∞ s^k e^{−s}/(τ − s) ds, τ > 0."""
    tau = _positive_t(tau)
    return 0.5 * tau**k * np.exp(-tau) - (1j / TWO_PI) * _pv_exponential_moment(k, tau)


def _even_spline(radii: np.ndarray, values: np.ndarray):
    """Complex cubic spline of an even radial profile (zero slope at r = 0)."""
    bc = ((1, 0.0), "not-a-knot")
    real = interpolate.CubicSpline(radii, np.real(values), bc_type=bc)
    imag = interpolate.CubicSpline(radii, np.imag(values), bc_type=bc)
    return lambda r: real(r) + 1j * imag(r)


def _support_radius(radii: np.ndarray, means: np.ndarray) -> float:
    magnitude = np.abs(means)
    peak = magnitude.max()
    if peak == 0:
        raise ConfigurationError("the test function vanishes on its grid")
    last = radii[np.flatnonzero(magnitude > _SIGNIFICANCE * peak)[-1]]
    return float(min(radii[-1], 1.1 * last + 2 * (radii[1] - radii[0])))


def _tail_ratio(radii: np.ndarray, means: np.ndarray) -> float:
    magnitude = np.abs(means)
    return float(magnitude[radii >= 0.9 * radii[-1]].max() / magnitude.max())


@dataclass(frozen=True, eq=False)
class KImage:
    """
    Ku as a function of t = |x|²: −(Σ_k c_k Q_k(t) + P₋R(t)), R being N_u minus
    Σ c_k s^k e^{−s}. R is C² at s = 0 with vanishing zeroth and first moments;
    P₋R is tabulated up to `window` and continued by −(i/2π) m₂/t³ beyond.
    """

    coefficients: np.ndarray
    residual: Callable = field(repr=False)
    window: float
    second_moment: complex
    tail_ratio: float

    def __call__(self, t) -> np.ndarray:
        t = _positive_t(t)
        flat = t.ravel()
        value = np.zeros(flat.shape, dtype=complex)
        for k, c in enumerate(self.coefficients):
            value += c * half_line_basis(k, flat)
        inside = flat <= self.window
        value[inside] += self.residual(flat[inside])
        value[~inside] += -(1j / TWO_PI) * self.second_moment / flat[~inside] ** 3
        return -value.reshape(t.shape)


def _smooth_coefficients(n0: complex, n1: complex, n2: complex, i0: complex, i1: complex) -> np.ndarray:
    """c₀..c₄ matching N, N′, N″ at 0 and the first two moments of N."""
    c0 = n0
    c1 = n1 + c0
    c2 = 0.5 * (n2 - c0 + 2.0 * c1)
    rhs = np.array([i0 - c0 - c1 - 2.0 * c2, i1 - c0 - 2.0 * c1 - 6.0 * c2])
    c3, c4 = np.linalg.solve(np.array([[6.0, 24.0], [24.0, 120.0]]), rhs)
    return np.array([c0, c1, c2, c3, c4], dtype=complex)


def k_image_from_means(radii: np.ndarray, means: np.ndarray, s_step: Optional[float] = None,
                       padding: Optional[int] = None, check_truncation: bool = True) -> KImage:
    """
    Build Ku from the spherical means of u at the radial nodes.

    Raises:
        TruncationError: When |M_u| on [0.9 r_max, r_max] exceeds 1e−8 of its maximum
            and `check_truncation` is set.
    """
    s_step = LAB_CFG.s_step if s_step is None else float(s_step)
    padding = LAB_CFG.fft_padding if padding is None else int(padding)
    means = np.asarray(means, dtype=complex)
    tail = _tail_ratio(radii, means)
    if tail > _TRUNCATION_TOL:
        if check_truncation:
            raise TruncationError(f"spherical mean carries relative mass {tail:.2e} near r_max = {radii[-1]:g}")
        logger.debug("K applied to a profile with relative tail %.2e", tail)

    profile = _even_spline(radii, means)
    s_max = _support_radius(radii, means) ** 2
    s = np.arange(max(int(np.ceil(s_max / s_step)) + 1, 4 * _FIT_POINTS)) * s_step
    n_s = profile(np.sqrt(np.minimum(s, radii[-1] ** 2)))

    fit_s = s[:_FIT_POINTS]
    fit = np.polynomial.polynomial.polyfit(fit_s, n_s[:_FIT_POINTS].real, 6) \
        + 1j * np.polynomial.polynomial.polyfit(fit_s, n_s[:_FIT_POINTS].imag, 6)
    moments = [integrate.simpson(s**m * n_s, x=s) for m in (0, 1)]
    coefficients = _smooth_coefficients(n_s[0], fit[1], 2.0 * fit[2], *moments)

    decay = np.exp(-s)
    residual = n_s - sum(c * s**k * decay for k, c in enumerate(coefficients))
    second_moment = complex(integrate.simpson(s**2 * residual, x=s))

    padded = np.zeros(padding * len(s), dtype=complex)
    padded[:len(s)] = residual
    freq = fft.fftfreq(len(padded))
    mask = np.where(freq < 0, 1.0, 0.0)
    mask[0] = 0.5
    if len(padded) % 2 == 0:
        mask[len(padded) // 2] = 0.5
    projected = fft.ifft(fft.fft(padded) * mask)[: len(padded) // 2]
    grid = np.arange(len(projected)) * s_step
    real = interpolate.CubicSpline(grid, projected.real)
    imag = interpolate.CubicSpline(grid, projected.imag)
    logger.debug("K image: %d samples on s <= %.3g, window %.3g", len(s), s[-1], grid[-1])
    return KImage(coefficients=coefficients, residual=lambda t: real(t) + 1j * imag(t), window=float(grid[-1]),
                  second_moment=second_moment, tail_ratio=tail)


def k_image(u: RadialTestFunction, s_step: Optional[float] = None, padding: Optional[int] = None,
            check_truncation: bool = True) -> KImage:
    return k_image_from_means(u.radii, u.means, s_step=s_step, padding=padding, check_truncation=check_truncation)


def _squared_radius(x_grid) -> np.ndarray:
    x = np.asarray(x_grid, dtype=float)
    if x.shape[-1] != 2:
        raise ConfigurationError(f"points must have a trailing dimension of 2, got shape {x.shape}")
    return np.sum(x**2, axis=-1)


def apply_K(u: RadialTestFunction, x_grid, s_step: Optional[float] = None,
            check_truncation: bool = True) -> np.ndarray:
    """
    Samples of Ku at the points `x_grid` (array of shape (..., 2)).

    Raises:
        SingularityError: If a point is the origin.
        TruncationError: If u is not resolved by its radial grid.
    """
    return k_image(u, s_step=s_step, check_truncation=check_truncation)(_squared_radius(x_grid))


def _s_profile(u: RadialTestFunction):
    profile = _even_spline(u.radii, u.means)
    return lambda s: profile(np.sqrt(s)), _support_radius(u.radii, u.means) ** 2


def _complex_quad(func: Callable[[float], complex], a: float, b: float, **options) -> complex:
    cache: Dict[float, complex] = {}

    def value(t: float) -> complex:
        if t not in cache:
            cache[t] = complex(func(t))
        return cache[t]

    real, _ = integrate.quad(lambda t: value(t).real, a, b, **options)
    imag, _ = integrate.quad(lambda t: value(t).imag, a, b, **options)
    return complex(real, imag)


def pair_K(v: RadialTestFunction, u: RadialTestFunction, s_step: Optional[float] = None) -> complex:
    """⟨v, Ku⟩ = π ∫₀^∞ conj N_v(t) Ku(t) dt through the half-line projection route."""
    image = k_image(u, s_step=s_step)
    n_v, s_v = _s_profile(v)
    return np.pi * _complex_quad(lambda t: np.conj(n_v(t)) * image(np.array([t]))[0], 0.0, s_v,
                                 limit=400, epsabs=1e-13, epsrel=1e-11)


def pair_K_direct(v: RadialTestFunction, u: RadialTestFunction) -> complex:
    """
    ⟨v, Ku⟩ from the kernel 1/(t − s − i0) = PV 1/(t − s) + iπδ(t − s):
    (i/2) ∫ conj N_v(t) [−PV∫ N_u(s)/(s − t) ds + iπ N_u(t)] dt, the principal
    value by Cauchy-weight adaptive quadrature.
    """
    n_u, s_u = _s_profile(u)
    n_v, s_v = _s_profile(v)
    options = dict(limit=400, epsabs=1e-13, epsrel=1e-11)

    def principal_value(t: float) -> complex:
        if t < s_u:
            real, _ = integrate.quad(lambda s: n_u(s).real, 0.0, s_u, weight="cauchy", wvar=t, **options)
            imag, _ = integrate.quad(lambda s: n_u(s).imag, 0.0, s_u, weight="cauchy", wvar=t, **options)
            return complex(real, imag)
        return _complex_quad(lambda s: n_u(s) / (s - t), 0.0, s_u, **options)

    def integrand(t: float) -> complex:
        return np.conj(n_v(t)) * (-principal_value(t) + 1j * np.pi * n_u(t))

    return 0.5j * _complex_quad(integrand, 0.0, s_v, limit=200, epsabs=1e-12, epsrel=1e-10)


def poisson_identity(u: RadialTestFunction, lam: float) -> Tuple[complex, complex]:
    """
    Both sides of ∫ (𝒢_λ − 𝒢_{−λ})(y) u(y) dy = (i/2) ∫_{S¹} û(λω) dω for λ > 0.

    The left side integrates 2π r M_u(r) against the radial Green difference by
    Simpson's rule on the radial nodes; the right side needs the closed-form û.
    """
    if not lam > 0:
        raise ConfigurationError(f"λ must be positive, got {lam}")
    radii = u.radii
    integrand = np.zeros(len(radii), dtype=complex)
    inner = radii[1:]
    integrand[1:] = inner * u.means[1:] * (green_radial(lam, inner) - green_radial(-lam, inner))
    lhs = TWO_PI * complex(integrate.simpson(integrand, x=radii))
    angles = u.angles
    rhs = 1j * np.pi * complex(np.mean(u.fourier(lam * np.cos(angles), lam * np.sin(angles))))
    return lhs, rhs


# ---------------------------------------------------------------------------
# The multiplier Γ̃ and the operators Ω_jk
# ---------------------------------------------------------------------------

def multiplier_matrix(config: Configuration, lam: float) -> np.ndarray:
    """Γ̃(λ) = [conj Γ(|λ|)]⁻¹ for real λ ≠ 0."""
    lam = float(lam)
    if lam == 0 or not np.isfinite(lam):
        raise SingularityError("the multiplier is defined for real λ ≠ 0")
    return np.conj(invert_gamma(build_gamma(config, abs(lam))).inverse)


def _check_entry(config: Configuration, j: int, k: int) -> None:
    if not (0 <= j < config.n and 0 <= k < config.n):
        raise ConfigurationError(f"entry ({j}, {k}) outside a {config.n}x{config.n} matrix")


def multiplier(config: Configuration, lam: float, j: int, k: int) -> complex:
    """Entry Γ̃_jk(λ); even in λ."""
    _check_entry(config, j, k)
    return complex(multiplier_matrix(config, lam)[j, k])


def _require_regular(config: Configuration, classification: Optional[ThresholdClassification]) -> None:
    classification = classification or classify(config)
    if classification.case is not ThresholdCase.REGULAR:
        raise WrongCaseError(f"Ω_jk needs a regular threshold, got {classification.case.value}",
                             hint="the representation through K and Γ̃(|D|) holds only in the regular case")


def _hankel_quadrature(outer: np.ndarray, inner: np.ndarray, weighted: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Simpson's rule in `inner` of J₀(outer·inner) · weighted, for every outer node."""
    out = np.empty(len(outer), dtype=complex)
    for start in range(0, len(outer), chunk):
        block = special.j0(np.outer(outer[start:start + chunk], inner))
        out[start:start + chunk] = integrate.simpson(block * weighted[None, :], x=inner, axis=1)
    return out


def angular_spectrum(u: RadialTestFunction, rho: np.ndarray) -> np.ndarray:
    """(1/2π) ∫_{S¹} û(ρω) dω = ∫₀^∞ r J₀(ρr) M_u(r) dr at the nodes ρ."""
    return _hankel_quadrature(np.asarray(rho, dtype=float), u.radii, u.radii * u.means)


def _spectral_weights(config: Configuration, u: RadialTestFunction, j: int, k: int,
                      rho_max: Optional[float], n_rho: Optional[int]):
    rho_max = LAB_CFG.rho_max if rho_max is None else float(rho_max)
    n_rho = LAB_CFG.n_rho if n_rho is None else int(n_rho)
    rho = np.linspace(0.0, rho_max, n_rho)
    entries = np.array([multiplier_matrix(config, value)[j, k] for value in rho[1:]])
    weighted = np.zeros(n_rho, dtype=complex)
    weighted[1:] = rho[1:] * entries * angular_spectrum(u, rho[1:])
    return rho, weighted


def apply_omega(config: Configuration, j: int, k: int, u: RadialTestFunction, x_grid,
                classification: Optional[ThresholdClassification] = None, rho_max: Optional[float] = None,
                n_rho: Optional[int] = None, s_step: Optional[float] = None) -> np.ndarray:
    """
    Ω_jk u = K(Γ̃_jk(|D|) u) at the points `x_grid`.

    The multiplier acts on the angular spectrum; the spherical means of
    Γ̃_jk(|D|)u come back through an inverse Hankel transform and K is applied
    to them.

    Raises:
        WrongCaseError: If the threshold is not regular.
    """
    _check_entry(config, j, k)
    _require_regular(config, classification)
    rho, weighted = _spectral_weights(config, u, j, k, rho_max, n_rho)
    means = _hankel_quadrature(u.radii, rho, weighted)
    image = k_image_from_means(u.radii, means, s_step=s_step, check_truncation=False)
    return image(_squared_radius(x_grid))


def apply_omega_direct(config: Configuration, j: int, k: int, u: RadialTestFunction, x_grid,
                       classification: Optional[ThresholdClassification] = None,
                       rho_max: Optional[float] = None, n_rho: Optional[int] = None) -> np.ndarray:
    """Ω_jk u(x) = (1/πi) ∫₀^∞ λ Γ̃_jk(λ) conj 𝒢_λ(x) (∫_{S¹} û(λω) dω) dλ."""
    _check_entry(config, j, k)
    _require_regular(config, classification)
    rho, weighted = _spectral_weights(config, u, j, k, rho_max, n_rho)
    r = np.sqrt(_squared_radius(x_grid))
    if np.any(r == 0):
        raise SingularityError("Ω_jk u is evaluated away from the origin")
    flat = r.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for index, radius in enumerate(flat):
        integrand = np.zeros(len(rho), dtype=complex)
        integrand[1:] = weighted[1:] * np.conj(scaled_hankel(rho[1:] * radius))
        out[index] = -2j * integrate.simpson(integrand, x=rho)
    return out.reshape(r.shape)


# ---------------------------------------------------------------------------
# L^p ratios
# ---------------------------------------------------------------------------

def lp_norm(values: np.ndarray, radii: np.ndarray, angles: np.ndarray, p: float) -> float:
    """Midpoint rule for ‖f‖_p on a polar grid (values indexed by radius, then angle)."""
    dr = radii[1] - radii[0]
    dtheta = angles[1] - angles[0]
    return float((np.sum(np.abs(values) ** p * radii[:, None]) * dr * dtheta) ** (1.0 / p))


def _ratios(operator: Callable, u: RadialTestFunction, p_list: Sequence[float]) -> Dict[float, float]:
    radii, angles, points = u.midpoint_grid()
    source = u(points[..., 0], points[..., 1])
    image = np.asarray(operator(u, points)).reshape(source.shape)
    return {p: lp_norm(image, radii, angles, p) / lp_norm(source, radii, angles, p) for p in p_list}


def lp_ratio_sweep(operator: Callable[[RadialTestFunction, np.ndarray], np.ndarray],
                   corpus: Sequence[RadialTestFunction], p_list: Sequence[float] = (1.5, 2.0, 3.0, 4.0),
                   workers: int = 1) -> SweepReport:
    """
    ‖Tu‖_p / ‖u‖_p over a corpus, on each function's grid and on the refined grid.

    Args:
        operator (Callable): Maps (u, points of shape (..., 2)) to samples of Tu.
        corpus: Test functions.
        p_list: Exponents in (1, ∞).
        workers (int): Threads over corpus elements.
    """
    if any(not 1.0 < p < np.inf for p in p_list):
        raise ConfigurationError(f"exponents must lie in (1, ∞), got {list(p_list)}")

    def run(u: RadialTestFunction):
        return _ratios(operator, u, p_list), _ratios(operator, u.refined(), p_list)

    rows = []
    for u, (coarse, fine) in zip(corpus, ordered_map(run, corpus, workers)):
        for p in p_list:
            change = abs(fine[p] - coarse[p]) / abs(fine[p])
            rows.append({"label": u.label, "p": p, "ratio": coarse[p], "ratio_refined": fine[p],
                         "relative_change": change})
    frame = pd.DataFrame(rows)
    summary = {
        "max_ratio": {str(p): float(frame.loc[frame.p == p, "ratio"].max()) for p in p_list},
        "max_relative_change": float(frame["relative_change"].max()),
        "stable": bool(frame["relative_change"].max() <= _STABILITY),
        "corpus_size": len(corpus),
    }
    logger.info("L^p ratio sweep over %d functions: max change %.3e", len(corpus), summary["max_relative_change"])
    return SweepReport(frame=frame, summary=summary)


# ---------------------------------------------------------------------------
# High-energy decomposition and multiplier probes
# ---------------------------------------------------------------------------

def _smooth_step(t: np.ndarray) -> np.ndarray:
    """0 for t <= 0, 1 for t >= 1, C^∞ in between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class SmoothCutoff:
    """χ(λ) = 1 for |λ| <= λ₀/2, 0 for |λ| >= λ₀, smooth in between."""

    lambda0: float = 1.0

    def __post_init__(self) -> None:
        if not self.lambda0 > 0:
            raise ConfigurationError(f"λ₀ must be positive, got {self.lambda0}")

    def __call__(self, lam) -> np.ndarray:
        return _smooth_step((self.lambda0 - np.abs(np.asarray(lam, dtype=float))) / (0.5 * self.lambda0))


def _default_cutoff(cutoff: Optional[SmoothCutoff]) -> SmoothCutoff:
    return cutoff or SmoothCutoff(LAB_CFG.cutoff_lambda0)


def _high_energy_grid(lambda_grid) -> np.ndarray:
    if lambda_grid is None:
        return geometric_grid(LAB_CFG.high_energy_min, LAB_CFG.high_energy_max, 64)
    return np.asarray(lambda_grid, dtype=float)


def _dressed_parts(config: Configuration, lam: float):
    """D = diag(α − ḡ), J̄ (conjugated off-diagonal Green matrix) and Γ̃ at λ > 0."""
    d = config.strengths - np.conj(g_scale(lam))
    jbar = np.zeros((config.n, config.n), dtype=complex)
    upper = np.triu_indices(config.n, k=1)
    if config.n > 1:
        jbar[upper] = np.conj(scaled_hankel(lam * config.distances[upper]))
        jbar = jbar + jbar.T
    gtilde = np.linalg.inv(np.diag(d) - jbar)
    return d, jbar, gtilde


@dataclass(frozen=True, eq=False)
class MultiplierDecomposition:
    """
    (1−χ)Γ̃ = Φ + L on a λ grid, with Φ = (1−χ) Σ_{k<=3} X^k D⁻¹ and
    L = (1−χ) X⁴ Γ̃, X = D⁻¹J̄. Arrays have shape (n_λ, N, N).
    """

    lambdas: np.ndarray
    phi: np.ndarray
    remainder: np.ndarray
    full: np.ndarray
    phases: Tuple[float, ...]

    @property
    def reconstruction_error(self) -> float:
        scale = max(float(np.max(np.abs(self.full))), np.finfo(float).tiny)
        return float(np.max(np.abs(self.phi + self.remainder - self.full)) / scale)


def _phase_lattice(config: Configuration) -> Tuple[float, ...]:
    r = config.distances
    phases = {0.0}
    for order in range(1, 4):
        for path in itertools.product(range(config.n), repeat=order + 1):
            if all(a != b for a, b in zip(path[:-1], path[1:])):
                phases.add(round(-sum(r[a, b] for a, b in zip(path[:-1], path[1:])), 12))
    return tuple(sorted(phases))


def high_energy_split(config: Configuration, lambda_grid=None,
                      cutoff: Optional[SmoothCutoff] = None) -> MultiplierDecomposition:
    """
    Split (1−χ)Γ̃ into the oscillatory part Φ and the remainder L.

    Raises:
        ConfigurationError: If the grid reaches below λ₀.
    """
    cutoff = _default_cutoff(cutoff)
    lambdas = _high_energy_grid(lambda_grid)
    if np.any(lambdas < cutoff.lambda0):
        raise ConfigurationError(f"the high-energy grid must satisfy λ >= λ₀ = {cutoff.lambda0}")
    if config.n == 1:
        logger.info("single centre: J = 0, so Φ = (1−χ)D⁻¹ and L vanishes")
    phi, remainder, full = [], [], []
    for lam in lambdas:
        d, jbar, gtilde = _dressed_parts(config, lam)
        weight = 1.0 - float(cutoff(lam))
        x = jbar / d[:, None]
        term = np.diag(1.0 / d)
        total = np.zeros_like(term)
        for _ in range(4):
            total += term
            term = x @ term
        phi.append(weight * total)
        remainder.append(weight * np.linalg.matrix_power(x, 4) @ gtilde)
        full.append(weight * gtilde)
    return MultiplierDecomposition(lambdas=lambdas, phi=np.array(phi), remainder=np.array(remainder),
                                   full=np.array(full), phases=_phase_lattice(config))


def phase_terms(config: Configuration, j: int, k: int, lambda_grid=None,
                cutoff: Optional[SmoothCutoff] = None) -> Dict[float, np.ndarray]:
    """
    Φ_jk(λ) = Σ_a e^{iaλ} b_a(λ): amplitudes b_a on the grid, keyed by the phase a
    (minus the total length of a path of at most three hops between centres).
    """
    _check_entry(config, j, k)
    cutoff = _default_cutoff(cutoff)
    lambdas = _high_energy_grid(lambda_grid)
    r = config.distances
    weight = 1.0 - cutoff(lambdas)
    inv_d = 1.0 / (config.strengths[None, :] - np.conj(np.array([g_scale(lam) for lam in lambdas]))[:, None])
    terms: Dict[float, np.ndarray] = {}
    if j == k:
        terms[0.0] = weight * inv_d[:, j]
    for order in range(1, 4):
        for middle in itertools.product(range(config.n), repeat=order - 1):
            path = (j, *middle, k)
            hops = list(zip(path[:-1], path[1:]))
            if any(a == b for a, b in hops):
                continue
            amplitude = weight * inv_d[:, k]
            for a, b in hops:
                amplitude = amplitude * inv_d[:, a] * np.conj(hankel_envelope(lambdas * r[a, b]))
            phase = round(-sum(r[a, b] for a, b in hops), 12)
            terms[phase] = terms.get(phase, 0.0) + amplitude
    return terms


def symbol_order_fit(config: Configuration, lambda_grid=None, cutoff: Optional[SmoothCutoff] = None) -> Optional[float]:
    """
    Largest fitted exponent of |b_a(λ)| ~ λ^s over all entries and phases a ≠ 0;
    None for a single centre, where Φ has no oscillating terms.
    """
    lambdas = _high_energy_grid(lambda_grid)
    slopes = []
    for j, k in itertools.product(range(config.n), repeat=2):
        for phase, amplitude in phase_terms(config, j, k, lambdas, cutoff).items():
            if phase != 0.0:
                slopes.append(fit_line(np.log(lambdas), np.log(np.abs(amplitude))).slope)
    if not slopes:
        logger.info("no oscillating terms in Φ for N = %d", config.n)
        return None
    return float(max(slopes))


def remainder_decay_fit(config: Configuration, lambda_grid=None, cutoff: Optional[SmoothCutoff] = None,
                        ell_max: int = 2, step: float = 1e-3) -> Dict[int, float]:
    """
    Decay exponents β_ℓ with |∂^ℓ L(λ)| <= C λ^{−β_ℓ}, fitted to the binned
    maxima of central differences (absolute step `step`).
    """
    cutoff = _default_cutoff(cutoff)
    lambdas = _high_energy_grid(lambda_grid)
    if config.n == 1:
        logger.info("single centre: L vanishes identically")
        return {ell: float("inf") for ell in range(ell_max + 1)}

    def remainder(lam: float) -> np.ndarray:
        d, jbar, gtilde = _dressed_parts(config, lam)
        x = jbar / d[:, None]
        return (1.0 - float(cutoff(lam))) * np.linalg.matrix_power(x, 4) @ gtilde

    exponents = {}
    for ell in range(ell_max + 1):
        sizes = [np.max(np.abs(central_difference(remainder, lam, ell, step))) for lam in lambdas]
        centres, maxima = binned_envelope(lambdas, np.array(sizes))
        exponents[ell] = -fit_line(np.log(centres), np.log(maxima)).slope
    logger.info("decay exponents of L: %s", exponents)
    return exponents


def dominant_phase(config: Configuration, j: int, k: int, lambda_start: float = 10.0, step: float = 0.05,
                   samples: int = 4096, cutoff: Optional[SmoothCutoff] = None) -> float:
    """|a| of the strongest oscillation e^{iaλ} in Φ_jk, from the Hann-windowed spectrum."""
    lambdas = lambda_start + step * np.arange(samples)
    decomposition = high_energy_split(config, lambdas, cutoff)
    signal = decomposition.phi[:, j, k] * np.hanning(samples)
    spectrum = np.abs(fft.fft(signal))
    freq = fft.fftfreq(samples, d=step)
    spectrum[np.abs(freq) <= 2.0 / (samples * step)] = 0.0
    return float(TWO_PI * abs(freq[int(np.argmax(spectrum))]))


def _scaled_derivatives(func: Callable[[float], np.ndarray], lam: float, ell: int, relative_step: float):
    return lam**ell * np.abs(central_difference(func, lam, ell, relative_step * lam))


def _refined_sup(func: Callable[[float], np.ndarray], grid: np.ndarray, values: np.ndarray, ell: int,
                 relative_step: float, candidates: int = 3) -> float:
    """Sup of a sampled curve, with the largest local maxima polished by bounded search in log λ."""
    best = float(values.max())
    interior = [i for i in range(1, len(values) - 1) if values[i] >= values[i - 1] and values[i] >= values[i + 1]]
    for i in sorted(interior, key=lambda i: values[i], reverse=True)[:candidates]:
        result = optimize.minimize_scalar(
            lambda q: -float(_scaled_derivatives(func, float(np.exp(q)), ell, relative_step)),
            bounds=(np.log(grid[i - 1]), np.log(grid[i + 1])), method="bounded", options={"xatol": 1e-6})
        best = max(best, -float(result.fun))
    return best


def mikhlin_probe(config: Configuration, lambda_min: float = 1e-6, lambda_max: float = 1e4,
                  points_per_decade: int = 32, cutoff: Optional[SmoothCutoff] = None,
                  relative_step: float = 1e-3, classification: Optional[ThresholdClassification] = None) -> SweepReport:
    """
    sup_λ λ^ℓ |∂^ℓ m_jk(λ)| for ℓ <= 2 on a geometric grid and on a grid twice as
    dense; m = Γ̃ for one centre and χΓ̃ otherwise.

    Raises:
        WrongCaseError: If the threshold is not regular.
    """
    classification = classification or classify(config)
    if classification.case is not ThresholdCase.REGULAR:
        raise WrongCaseError(f"the Mikhlin probe needs a regular threshold, got {classification.case.value}",
                             hint="Γ̃ is unbounded near λ = 0 in the resonant cases")
    cutoff = _default_cutoff(cutoff)
    use_cutoff = config.n > 1

    def symbol(lam: float) -> np.ndarray:
        value = multiplier_matrix(config, lam)
        return float(cutoff(lam)) * value if use_cutoff else value

    def sups(density: int):
        grid = geometric_grid(lambda_min, lambda_max, density)
        results, rows = {}, []
        for ell in range(3):
            values = np.array([_scaled_derivatives(symbol, lam, ell, relative_step) for lam in grid])
            for j, k in itertools.product(range(config.n), repeat=2):
                entry = values[:, j, k]
                results[f"{j},{k},{ell}"] = _refined_sup(lambda lam: symbol(lam)[j, k], grid, entry, ell,
                                                         relative_step)
                rows += [{"lambda": lam, "j": j, "k": k, "ell": ell, "value": v} for lam, v in zip(grid, entry)]
        return results, rows

    coarse, rows = sups(points_per_decade)
    fine, _ = sups(2 * points_per_decade)
    change = {key: abs(fine[key] - coarse[key]) / max(fine[key], np.finfo(float).tiny) for key in coarse}
    summary = {"sups": coarse, "refined_sups": fine, "max_relative_change": float(max(change.values())),
               "stable": bool(max(change.values()) <= _STABILITY), "cutoff_applied": use_cutoff,
               "lambda0": cutoff.lambda0}
    logger.info("Mikhlin probe: max relative change %.3e under refinement", summary["max_relative_change"])
    return SweepReport(frame=pd.DataFrame(rows), summary=summary)
