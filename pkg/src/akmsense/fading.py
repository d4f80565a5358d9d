"""The alpha-kappa-mu fading law: densities, MGF and its derivatives, sampler.

Parameterisation follows the nonlinear line-of-sight model: with
``x = (gamma / gbar) ** (alpha / 2)`` the variate ``x`` is kappa-mu
distributed with unit mean power.  ``gbar`` is the scale appearing in the
SNR density; it coincides with E[gamma] only when alpha = 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .specfun import (
    DEFAULT_CONTROL,
    ConvergenceError,
    DomainError,
    SeriesControl,
    log_bessel_i,
    log_fox_h_2002,
    log_gamma,
)

__all__ = [
    "KAPPA_FLOOR",
    "FadingParams",
    "ChannelSpec",
    "special_case",
    "envelope_pdf",
    "power_pdf",
    "snr_pdf",
    "snr_mgf",
    "snr_mgf_derivative",
    "snr_mgf_derivative_quad",
    "MgfDerivativeSeries",
    "expectation",
    "sample_snr",
]

# kappa = 0 is evaluated at this value; kappa^((1-mu)/2) is singular at 0
KAPPA_FLOOR = 1e-9


@dataclass(frozen=True)
class FadingParams:
    """(alpha, kappa, mu) triple of the alpha-kappa-mu law."""

    alpha: float
    kappa: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DomainError(f"mu must be > 0, got {self.mu}")

    @property
    def kappa_eff(self) -> float:
        return max(self.kappa, KAPPA_FLOOR)

    @property
    def log_a1(self) -> float:
        """log of alpha*mu*kappa^((1-mu)/2)*(1+kappa)^((1+mu)/2) / (2 e^(kappa*mu))."""
        a, k, m = self.alpha, self.kappa_eff, self.mu
        return (math.log(a * m) + 0.5 * (1.0 - m) * math.log(k)
                + 0.5 * (1.0 + m) * math.log1p(k) - math.log(2.0) - k * m)


@dataclass(frozen=True)
class ChannelSpec:
    """One diversity branch: fading law plus linear SNR scale ``avg_snr``."""

    fading: FadingParams
    avg_snr: float

    def __post_init__(self):
        if not (math.isfinite(self.avg_snr) and self.avg_snr > 0):
            raise DomainError(f"avg_snr must be > 0 (linear), got {self.avg_snr}")

    @classmethod
    def from_db(cls, fading: FadingParams, snr_db: float) -> "ChannelSpec":
        return cls(fading, 10.0 ** (snr_db / 10.0))


def special_case(name: str, *params: float) -> FadingParams:
    """alpha-kappa-mu triple for a classical fading family.

    ``name`` is one of ``rayleigh``, ``rice`` (K), ``nakagami`` (m),
    ``one_sided_gaussian``, ``kappa_mu`` (kappa, mu), ``alpha_mu`` (alpha, mu).
    kappa = 0 entries are returned as :data:`KAPPA_FLOOR`.
    """
    key = name.lower().replace("-", "_").replace(" ", "_")
    arity = {"rayleigh": 0, "rice": 1, "nakagami": 1, "one_sided_gaussian": 0,
             "kappa_mu": 2, "alpha_mu": 2}
    if key not in arity:
        raise DomainError(f"unknown fading family {name!r}")
    if len(params) != arity[key]:
        raise DomainError(f"{name} takes {arity[key]} parameter(s), got {len(params)}")
    if key == "rayleigh":
        return FadingParams(2.0, KAPPA_FLOOR, 1.0)
    if key == "rice":
        (k,) = params
        if not k >= 0:
            raise DomainError(f"Rice K must be >= 0, got {k}")
        return FadingParams(2.0, max(k, KAPPA_FLOOR), 1.0)
    if key == "nakagami":
        (m,) = params
        if not m >= 0.5:
            raise DomainError(f"Nakagami m must be >= 0.5, got {m}")
        return FadingParams(2.0, KAPPA_FLOOR, m)
    if key == "one_sided_gaussian":
        return FadingParams(2.0, KAPPA_FLOOR, 0.5)
    if key == "kappa_mu":
        k, m = params
        return FadingParams(2.0, max(k, KAPPA_FLOOR), m)
    a, m = params
    return FadingParams(a, KAPPA_FLOOR, m)


# ---------------------------------------------------------------------------
# densities


def _log_bessel_term(p: FadingParams, x: float) -> float:
    # log I_{mu-1}(2 mu sqrt(kappa (1+kappa)) sqrt(x))
    k = p.kappa_eff
    return log_bessel_i(p.mu - 1.0, 2.0 * p.mu * math.sqrt(k * (1.0 + k) * x))


def _origin_value(p: FadingParams, log_scale: float, exponent: float) -> float:
    # near 0 the density behaves like C * t^exponent (Bessel small-argument limit)
    if exponent > 0:
        return 0.0
    if exponent < 0:
        return math.inf
    k, m = p.kappa_eff, p.mu
    return math.exp(p.log_a1 + log_scale
                    + (m - 1.0) * math.log(m * math.sqrt(k * (1.0 + k))) - log_gamma(m))


def snr_pdf(gamma: float, ch: ChannelSpec) -> float:
    """Density of the instantaneous SNR.

    ``A1 * gamma^(c-1) / gbar^c * exp(-mu (1+kappa) (gamma/gbar)^(alpha/2))
    * I_{mu-1}(2 mu sqrt(kappa (1+kappa)) (gamma/gbar)^(alpha/4))`` with
    ``c = alpha (1+mu) / 4``.  At gamma = 0 the analytic limit is returned:
    the density behaves like gamma^(alpha*mu/2 - 1) there.
    """
    if not gamma >= 0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    p, gbar = ch.fading, ch.avg_snr
    a, k, m = p.alpha, p.kappa_eff, p.mu
    if gamma == 0:
        # A1 * gbar^-(alpha mu / 2) times the Bessel limit
        return _origin_value(p, -0.5 * a * m * math.log(gbar), 0.5 * a * m - 1.0)
    c = 0.25 * a * (1.0 + m)
    ratio = gamma / gbar
    x = ratio ** (0.5 * a)
    log_f = (p.log_a1 + (c - 1.0) * math.log(gamma) - c * math.log(gbar)
             - m * (1.0 + k) * x + _log_bessel_term(p, x))
    return math.exp(log_f) if log_f > -745.0 else 0.0


def power_pdf(w: float, p: FadingParams, mean_power: float) -> float:
    """Density of the received power w = R^2 with scale ``mean_power``."""
    return snr_pdf(w, ChannelSpec(p, mean_power))


def envelope_pdf(rho: float, p: FadingParams) -> float:
    """Density of the normalized envelope rho, for which E[rho^alpha] = 1.

    ``alpha mu kappa^((1-mu)/2) (1+kappa)^((1+mu)/2) rho^(alpha(1+mu)/2 - 1)
    exp(-kappa mu - mu (1+kappa) rho^alpha) I_{mu-1}(2 mu sqrt(kappa(1+kappa)) rho^(alpha/2))``.
    """
    if not rho >= 0:
        raise DomainError(f"rho must be >= 0, got {rho}")
    a, k, m = p.alpha, p.kappa_eff, p.mu
    log_lead = p.log_a1 + math.log(2.0)
    if rho == 0:
        return _origin_value(p, math.log(2.0), a * m - 1.0)
    x = rho ** a
    log_f = (log_lead + (0.5 * a * (1.0 + m) - 1.0) * math.log(rho)
             - m * (1.0 + k) * x + _log_bessel_term(p, x))
    return math.exp(log_f) if log_f > -745.0 else 0.0


# ---------------------------------------------------------------------------
# expectations by quadrature


def _log_unit_kappa_mu(p: FadingParams, x: float) -> float:
    # log density of x = (gamma/gbar)^(alpha/2), a unit-mean kappa-mu power
    k, m = p.kappa_eff, p.mu
    return (math.log(m) + 0.5 * (1.0 + m) * math.log1p(k) - 0.5 * (m - 1.0) * math.log(k)
            - k * m + 0.5 * (m - 1.0) * math.log(x) - m * (1.0 + k) * x
            + _log_bessel_term(p, x))


@lru_cache(maxsize=256)
def _x_support(p: FadingParams) -> tuple[float, float]:
    """(mode-ish split point, upper cut) for the unit kappa-mu density."""
    k, m = p.kappa_eff, p.mu
    x_split = max(1.0, (math.sqrt(k) + 1.0) ** 2 / (1.0 + k))
    # exponent of the tail ~ -mu ((1+k) x - 2 sqrt(k(1+k) x)); find where log f < -80
    hi = 2.0 * x_split
    while _log_unit_kappa_mu(p, hi) > -80.0:
        hi *= 1.5
    return x_split, hi


def expectation(func: Callable[[float], float], ch: ChannelSpec,
                breakpoints: Sequence[float] = (),
                epsabs: float = 1e-10, epsrel: float = 1e-10) -> tuple[float, float]:
    """E[func(gamma)] under the SNR law, by adaptive quadrature.

    The integral is taken over x = (gamma/gbar)^(alpha/2), which removes the
    alpha-dependent power singularity at the origin and turns the
    stretched-exponential tail into a plain exponential; on [0, 1] a further
    substitution x = v^(1/mu) absorbs the x^(mu-1) factor.  ``breakpoints``
    are SNR values where ``func`` changes quickly.

    Returns:
        (value, absolute error estimate)
    """
    p, gbar = ch.fading, ch.avg_snr
    m = p.mu
    two_over_a = 2.0 / p.alpha
    x_split, x_max = _x_support(p)

    def to_gamma(x):
        return gbar * x ** two_over_a

    def head(v):
        # x = v^(1/mu); g(x) dx = g(x) x^(1-mu) / mu dv, finite as v -> 0
        if v <= 0:
            return func(0.0) * math.exp(_head_log_limit(p)) / m
        x = v ** (1.0 / m)
        lg = _log_unit_kappa_mu(p, x) + (1.0 - m) * math.log(x)
        return func(to_gamma(x)) * math.exp(lg) / m

    def body(x):
        lg = _log_unit_kappa_mu(p, x)
        return func(to_gamma(x)) * math.exp(lg) if lg > -745.0 else 0.0

    xs = sorted({(b / gbar) ** (0.5 * p.alpha) for b in breakpoints if b > 0})
    head_end = 1.0
    total, err = integrate.quad(head, 0.0, head_end ** m, epsabs=epsabs, epsrel=epsrel,
                                limit=200)
    pts = sorted({head_end, x_split, x_max, *[x for x in xs if head_end < x < x_max]})
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = integrate.quad(body, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += v
        err += e
    return total, err


def _head_log_limit(p: FadingParams) -> float:
    # lim_{x->0} log g(x) + (1-mu) log x = log of mu-normalised Bessel small-arg limit
    k, m = p.kappa_eff, p.mu
    return (math.log(m) + 0.5 * (1.0 + m) * math.log1p(k) - 0.5 * (m - 1.0) * math.log(k)
            - k * m + (m - 1.0) * math.log(m * math.sqrt(k * (1.0 + k))) - log_gamma(m))


def snr_mgf(s: float, ch: ChannelSpec) -> float:
    """MGF E[exp(-s gamma)] by adaptive quadrature."""
    if not s > 0:
        raise DomainError(f"s must be > 0, got {s}")
    val, err = expectation(lambda g: math.exp(-s * g), ch, breakpoints=(1.0 / s,))
    if not math.isfinite(val):
        raise ArithmeticError(f"MGF quadrature failed at s={s}")
    return min(val, 1.0)


def snr_mgf_derivative_quad(n: int, s: float, ch: ChannelSpec) -> float:
    """n-th derivative of the MGF by direct quadrature of (-gamma)^n e^(-s gamma) f."""
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a non-negative integer, got {n}")
    if not s > 0:
        raise DomainError(f"s must be > 0, got {s}")
    peak = max(n / s, 1e-3)
    val, _ = expectation(lambda g: g ** n * math.exp(-s * g), ch,
                         breakpoints=(0.5 * peak, peak, 2.0 * peak), epsabs=0.0, epsrel=1e-11)
    return (-1.0) ** n * val


# ---------------------------------------------------------------------------
# MGF derivatives by the Bessel-series / Fox-H representation


class MgfDerivativeSeries:
    """Scaled MGF derivatives ``psi_n(s) = (-1)^n phi^(n)(s) / n! = E[gamma^n e^(-s gamma)] / n!``.

    Each psi_n is the Bessel-expanded series

        A1 * A2 * sum_k (kappa(1+kappa))^k mu^(2k) / (k! Gamma(k+mu) (gbar s)^(alpha k / 2))
             * H^{2,0}_{0,2}[ mu (1+kappa) (gbar s)^(-alpha/2) | (0,1), (n + alpha(k+mu)/2, -alpha/2) ] / n!

    with ``A2 = (kappa(1+kappa))^((mu-1)/2) mu^(mu-1) / (gbar^(alpha mu/2) s^(n + alpha mu/2))``,
    evaluated in log space.  Values are cached per n; the k-sum follows ``ctrl``.
    """

    _CHUNK = 24

    def __init__(self, ch: ChannelSpec, s: float = 1.0, ctrl: SeriesControl = DEFAULT_CONTROL):
        if not s > 0:
            raise DomainError(f"s must be > 0, got {s}")
        self.ch = ch
        self.s = s
        self.ctrl = ctrl
        self._log_psi: list[float] = []
        self.k_terms: list[int] = []
        p = ch.fading
        a, k, m = p.alpha, p.kappa_eff, p.mu
        gs = ch.avg_snr * s
        self._z = m * (1.0 + k) * gs ** (-0.5 * a)
        self._log_kk = math.log(k * (1.0 + k))
        self._log_a1a2 = (p.log_a1 + 0.5 * (m - 1.0) * self._log_kk + (m - 1.0) * math.log(m)
                          - 0.5 * a * m * math.log(ch.avg_snr) - 0.5 * a * m * math.log(s))
        self._log_gs = math.log(gs)
        self._log_s = math.log(s)

    def _log_k_terms(self, n: int, ks: np.ndarray) -> np.ndarray:
        p = self.ch.fading
        a, m = p.alpha, p.mu
        b2 = n + 0.5 * a * (ks + m)
        log_coef = (ks * self._log_kk + 2.0 * ks * math.log(m)
                    - np.array([log_gamma(k + 1.0) + log_gamma(k + m) for k in ks])
                    - 0.5 * a * ks * self._log_gs)
        return (self._log_a1a2 - n * self._log_s + log_coef
                + log_fox_h_2002(self._z, b2, -0.5 * a) - log_gamma(n + 1.0))

    def _compute(self, n: int) -> float:
        ctrl = self.ctrl
        log_rel = math.log(ctrl.rel_tol)
        log_abs = math.log(ctrl.abs_tol) if ctrl.abs_tol > 0 else -math.inf
        total = -math.inf
        run = 0
        k0 = 0
        while k0 < ctrl.max_terms:
            ks = np.arange(k0, min(k0 + self._CHUNK, ctrl.max_terms), dtype=float)
            for k, lt in zip(ks, self._log_k_terms(n, ks)):
                total = np.logaddexp(total, lt)
                if lt <= max(log_rel + total, log_abs):
                    run += 1
                else:
                    run = 0
                if run >= ctrl.run_length:
                    self.k_terms.append(int(k) + 1)
                    return float(total)
            k0 += self._CHUNK
        raise ConvergenceError(f"MGF derivative k-series (n={n}) did not converge",
                               math.exp(total) if total < 700 else math.inf, ctrl.max_terms)

    def log_scaled(self, n: int) -> float:
        """log psi_n."""
        while len(self._log_psi) <= n:
            self._log_psi.append(self._compute(len(self._log_psi)))
        return self._log_psi[n]

    def scaled(self, n: int) -> float:
        """psi_n = E[gamma^n e^(-s gamma)] / n!."""
        return math.exp(self.log_scaled(n))

    def derivative(self, n: int) -> float:
        """phi^(n)(s) itself; overflows to +-inf for very large n."""
        lv = self.log_scaled(n) + log_gamma(n + 1.0)
        mag = math.exp(lv) if lv < 709.0 else math.inf
        return -mag if n % 2 else mag


def snr_mgf_derivative(n: int, s: float, ch: ChannelSpec,
                       ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """n-th derivative of the SNR MGF at s from the closed Fox-H series.

    Raises:
        ConvergenceError: k-series not converged, carrying the partial sum.
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a non-negative integer, got {n}")
    return MgfDerivativeSeries(ch, s, ctrl).derivative(int(n))


# ---------------------------------------------------------------------------
# sampler


def sample_snr(rng: np.random.Generator, ch: ChannelSpec, size=None):
    """Draw SNR variates.

    A unit-mean kappa-mu power Z is drawn as a Poisson(kappa*mu)-mixed
    Gamma(mu + N) / (mu (1 + kappa)) variate (valid for non-integer mu), and
    gamma = gbar * Z^(2/alpha).
    """
    p = ch.fading
    k, m = p.kappa_eff, p.mu
    n = rng.poisson(k * m, size=size)
    z = rng.standard_gamma(m + n, size=size) / (m * (1.0 + k))
    return ch.avg_snr * z ** (2.0 / p.alpha)
