"""Fading-averaged detection probability and AUC.

Quadrature is the reference path.  The MGF-derivative series for the average
Pd and the finite-domain Taylor series for the average AUC are cross-checks
that report how well they converged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import gmpy2
from gmpy2 import mpfr
import numpy as np

from .detector import DetectorSpec, auc_instantaneous, detection_prob, _check_u
from .fading import ChannelSpec, MgfDerivativeSeries, expectation
from .specfun import (
    DEFAULT_CONTROL,
    ConvergenceError,
    DomainError,
    SeriesControl,
    log_gamma,
    upper_incomplete_gamma_reg,
)

__all__ = [
    "Method",
    "AveragedResult",
    "AucSeriesDisagreement",
    "avg_pd_quadrature",
    "avg_pd_mgf_series",
    "pd_series_from_psi",
    "avg_auc_quadrature",
    "avg_auc_series",
    "auc_b1_series",
]

QUAD_TOL = 1e-8
# AUC series statuses: ok within this distance of quadrature, flagged up to the hard limit
AUC_SERIES_OK = 0.02
AUC_SERIES_LIMIT = 0.05


class Method(str, enum.Enum):
    QUADRATURE = "quadrature"
    MGF_SERIES = "mgf_series"
    AUC_SERIES = "auc_series"


@dataclass(frozen=True)
class AveragedResult:
    """An averaged probability with provenance of the numerical method.

    Attributes:
        value: the probability, in [0, 1].
        method: which evaluator produced it.
        terms_used: series terms summed (function evaluations for quadrature).
        est_error: estimated absolute error.
        status: ``ok``, ``flagged`` (usable but outside the cross-check
            tolerance) or ``clamped`` (raw sum left [0, 1] and was clipped).
    """

    value: float
    method: Method
    terms_used: int
    est_error: float
    status: str = "ok"

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise DomainError(f"averaged probability outside [0, 1]: {self.value}")
        if not self.est_error >= 0:
            raise DomainError(f"est_error must be >= 0, got {self.est_error}")


class AucSeriesDisagreement(ArithmeticError):
    """The AUC Taylor series and the quadrature reference disagree too much."""

    def __init__(self, message: str, series_value: float, quadrature_value: float):
        super().__init__(message)
        self.series_value = series_value
        self.quadrature_value = quadrature_value


def _clamped(raw: float, method: Method, terms: int, err: float) -> AveragedResult:
    value = min(max(raw, 0.0), 1.0)
    status = "ok" if abs(value - raw) <= 1e-9 else "clamped"
    return AveragedResult(value, method, terms, err + abs(value - raw), status)


# ---------------------------------------------------------------------------
# average detection probability


def avg_pd_quadrature(ch: ChannelSpec, det: DetectorSpec) -> AveragedResult:
    """E[Pd(gamma)] over the fading law by adaptive quadrature."""
    u, lam = det.u, det.lam
    if lam == 0:
        return AveragedResult(1.0, Method.QUADRATURE, 0, 0.0)
    calls = [0]

    def pd(g):
        calls[0] += 1
        return detection_prob(u, lam, g)

    # Pd moves from Pf to 1 around 2 gamma ~ lam
    val, err = expectation(pd, ch, breakpoints=(0.125 * lam, 0.5 * lam, 2.0 * lam),
                           epsabs=0.01 * QUAD_TOL, epsrel=1e-10)
    if not math.isfinite(val):
        raise ArithmeticError(f"average Pd quadrature failed for {ch}, {det}")
    return _clamped(val, Method.QUADRATURE, calls[0], err)


def pd_series_from_psi(log_psi: Callable[[int], float], u: int, lam: float,
                       ctrl: SeriesControl = DEFAULT_CONTROL,
                       tail_closure: bool = True) -> AveragedResult:
    """Sum_l Q~(l+u, lam/2) psi_l, with psi_l = E[gamma^l e^-gamma] / l!.

    This is the MGF-derivative series with its sign (-1)^l absorbed into the
    scaled derivatives, so every term is non-negative.  Because
    sum_l psi_l = 1 exactly and Q~ increases to 1, the unsummed remainder lies
    in [Q~_next * R, R] with R = 1 - sum psi_l.  With ``tail_closure`` the
    series stops as soon as that bracket is narrower than the stop tolerance
    and adds its midpoint; otherwise only the term-wise stop rule applies.

    Raises:
        ConvergenceError: stop rule not met within ``ctrl.max_terms``.
    """
    x = 0.5 * lam
    q = upper_incomplete_gamma_reg(u, x)
    log_x = math.log(x) if x > 0 else -math.inf
    stop = ctrl.stopper()
    partial = 0.0
    psi_sum = 0.0
    for l in range(ctrl.max_terms):
        psi = math.exp(log_psi(l))
        partial += q * psi
        psi_sum += psi
        # Q~(u+l+1, x) = Q~(u+l, x) + x^(u+l) e^-x / Gamma(u+l+1)
        if x > 0:
            q = min(1.0, q + math.exp((u + l) * log_x - x - log_gamma(u + l + 1.0)))
        if tail_closure:
            rem = max(1.0 - psi_sum, 0.0)
            gap = rem * (1.0 - q)
            if gap <= max(ctrl.rel_tol * partial, ctrl.abs_tol):
                raw = partial + rem * 0.5 * (1.0 + q)
                return _clamped(raw, Method.MGF_SERIES, l + 1, 0.5 * gap + 1e-13)
        if stop.update(q * psi, partial):
            return _clamped(partial, Method.MGF_SERIES, l + 1,
                            ctrl.run_length * q * psi)
    raise ConvergenceError("average-Pd MGF series did not converge", partial, ctrl.max_terms)


def avg_pd_mgf_series(ch: ChannelSpec, det: DetectorSpec,
                      ctrl: SeriesControl = DEFAULT_CONTROL,
                      tail_closure: bool = True) -> AveragedResult:
    """Average Pd from the MGF derivatives at s = 1.

    Pd_avg = sum_l (-1)^l Q~(l+u, lam/2) / l! * phi^(l)(1), with the
    derivatives phi^(l) from the closed Fox-H series.
    """
    series = MgfDerivativeSeries(ch, 1.0, ctrl)
    return pd_series_from_psi(series.log_scaled, det.u, det.lam, ctrl, tail_closure)


# ---------------------------------------------------------------------------
# average AUC


def avg_auc_quadrature(ch: ChannelSpec, u: int) -> AveragedResult:
    """E[AUC(gamma)] over the fading law by adaptive quadrature."""
    u = _check_u(u)
    calls = [0]

    def auc(g):
        calls[0] += 1
        return auc_instantaneous(u, g)

    val, err = expectation(auc, ch, breakpoints=(1.0, 2.0 * u, 8.0 * u),
                           epsabs=0.01 * QUAD_TOL, epsrel=1e-10)
    if not math.isfinite(val):
        raise ArithmeticError(f"average AUC quadrature failed for {ch}, u={u}")
    return _clamped(val, Method.QUADRATURE, calls[0], err)


def _digits_needed(gamma_max: float, b: float, alpha: float) -> int:
    # alternating Taylor terms peak near exp(G/2 + b G^(alpha/2))
    peak = 0.5 * gamma_max + b * gamma_max ** (0.5 * alpha)
    return int(peak / math.log(10.0)) + 30


class _TaylorTable:
    """Multi-precision coefficients (G/2)^j / j! and (b G^(alpha/2))^w / w!."""

    def __init__(self, b: float, alpha: float, gamma_max: float):
        self.ctx = gmpy2.get_context().copy()
        self.ctx.precision = int(3.33 * _digits_needed(gamma_max, b, alpha)) + 64
        with gmpy2.context(self.ctx):
            self.G = mpfr(gamma_max)
            self.a2 = mpfr(alpha) / 2
            self.x = self.G / 2
            self.y = mpfr(b) * self.G ** self.a2
            self.scale = self.x + self.y
        self.A = [mpfr(1, self.ctx.precision)]
        self.B = [mpfr(1, self.ctx.precision)]

    def extend(self, n: int) -> None:
        with gmpy2.context(self.ctx):
            while len(self.A) <= n:
                j = len(self.A)
                self.A.append(self.A[-1] * self.x / j)
                self.B.append(self.B[-1] * self.y / j)


@lru_cache(maxsize=64)
def _taylor_table(b: float, alpha: float, gamma_max: float) -> _TaylorTable:
    return _TaylorTable(b, alpha, gamma_max)


def _effective_limit(p0: float, b: float, alpha: float, gamma_max: float) -> float:
    # log integrand is unimodal; cut where it is 45 nats below its peak
    t = np.geomspace(gamma_max * 1e-6, gamma_max, 2000)
    h = (p0 - 1.0) * np.log(t) - 0.5 * t - b * t ** (0.5 * alpha)
    peak = int(np.argmax(h))
    below = np.nonzero(h[peak:] < h[peak] - 45.0)[0]
    if below.size == 0:
        return float(gamma_max)
    return float(min(gamma_max, math.ceil(t[peak + below[0]])))


def auc_b1_series(p0: float, b: float, alpha: float, gamma_max: float,
                  n_max: int | None = None, ctrl: SeriesControl = DEFAULT_CONTROL) -> tuple[float, int]:
    """Truncated integral int_0^G t^(p0-1) exp(-t/2 - b t^(alpha/2)) dt by term-wise Taylor expansion.

    Expands exp(-(t/2 + b t^(alpha/2))) in powers, then binomially:

        sum_n sum_w (-1)^n (1/2)^(n-w) b^w / (w! (n-w)!) * G^p / p,
        p = p0 + n - w + w alpha / 2.

    The sum cancels catastrophically, so it runs in multi-precision with
    working precision sized from the largest term.  ``n_max`` caps the outer
    index (``n_max=0`` keeps the leading term only).

    Without ``n_max``, the upper limit is lowered to where the integrand has
    fallen e^-45 below its peak (rounded up to an integer), which drops a
    relative mass far below double precision and keeps the Taylor scale
    small when ``b`` is large.  The term budget is at least
    e * (G/2 + b G^(alpha/2)) + 50, past which the bound decays geometrically.

    Returns:
        (value, outer terms used)

    Raises:
        ConvergenceError: outer sum not settled within ``ctrl.max_terms``.
    """
    if not (p0 > 0 and gamma_max > 0 and b >= 0):
        raise DomainError("need p0 > 0, gamma_max > 0, b >= 0")
    if n_max is None:
        gamma_max = _effective_limit(p0, b, alpha, gamma_max)
    tab = _taylor_table(float(b), float(alpha), float(gamma_max))
    if n_max is None:
        limit = max(ctrl.max_terms, math.ceil(math.e * float(tab.scale)) + 50)
    else:
        limit = n_max + 1
    with gmpy2.context(tab.ctx):
        P = mpfr(p0)
        a2 = tab.a2
        tol = mpfr(ctrl.rel_tol) * mpfr(10) ** -3
        total = mpfr(0)
        run = 0
        # |n-th group| / G^p0 <= (G/2 + b G^(alpha/2))^n / (n! p0)
        bound = 1 / P
        for n in range(limit):
            tab.extend(n)
            A, B = tab.A, tab.B
            group = mpfr(0)
            for w in range(n + 1):
                group += A[n - w] * B[w] / (P + (n - w) + w * a2)
            total += -group if n % 2 else group
            if n:
                bound = bound * tab.scale / n
            if n_max is None and n > 2 and bound <= tol * abs(total):
                run += 1
                if run >= ctrl.run_length:
                    return float(total * tab.G ** P), n + 1
            else:
                run = 0
        if n_max is not None:
            return float(total * tab.G ** P), limit
    raise ConvergenceError("AUC Taylor series did not converge", float(total * tab.G ** P), limit)


def avg_auc_series(ch: ChannelSpec, u: int, ctrl: SeriesControl = DEFAULT_CONTROL,
                   gamma_max: float = 40.0, reference: AveragedResult | None = None) -> AveragedResult:
    """Average AUC from the term-wise expanded closed series on [0, gamma_max].

    1 - A1 sum_{l<u} sum_{i<=l} C(l+u-1, l-i) / (2^(l+i+u) i!)
        * sum_k c_k gbar^(-a_k) B1(i + a_k),
    with a_k = alpha (k+mu) / 2 and B1 the truncated integral of
    :func:`auc_b1_series`.  Over the whole half line the expansion diverges
    term by term; the finite domain keeps each term finite, at the cost of
    dropping the mass beyond ``gamma_max``.

    The result is compared with :func:`avg_auc_quadrature` (or ``reference``);
    ``est_error`` is that distance and ``status`` is ``flagged`` beyond 0.02.

    Raises:
        AucSeriesDisagreement: distance beyond 0.05.
        ConvergenceError: a constituent series failed to converge.
    """
    u = _check_u(u)
    p = ch.fading
    a, k_eff, m = p.alpha, p.kappa_eff, p.mu
    gbar = ch.avg_snr
    b = m * (1.0 + k_eff) / gbar ** (0.5 * a)
    log_kk = math.log(k_eff * (1.0 + k_eff))

    weights = {}
    for l in range(u):
        for i in range(l + 1):
            weights[i] = weights.get(i, 0.0) + math.comb(l + u - 1, l - i) / (2.0 ** (l + i + u) * math.factorial(i))

    total = 0.0
    terms = 0
    stop = ctrl.stopper()
    for k in range(ctrl.max_terms):
        a_k = 0.5 * a * (k + m)
        log_ck = (p.log_a1 + (2 * k + m - 1.0) * math.log(m) + (k + 0.5 * (m - 1.0)) * log_kk
                  - log_gamma(k + 1.0) - log_gamma(k + m) - a_k * math.log(gbar))
        term = 0.0
        for i, wgt in weights.items():
            b1, used = auc_b1_series(i + a_k, b, a, gamma_max, ctrl=ctrl)
            terms += used
            term += wgt * b1
        term *= math.exp(log_ck)
        total += term
        if stop.update(term, total):
            break
    else:
        raise ConvergenceError("AUC k-series did not converge", 1.0 - total, terms)

    raw = 1.0 - total
    ref = reference if reference is not None else avg_auc_quadrature(ch, u)
    dist = abs(raw - ref.value)
    if not math.isfinite(raw) or dist > AUC_SERIES_LIMIT:
        raise AucSeriesDisagreement(
            f"AUC series {raw:.6g} vs quadrature {ref.value:.6g} (gamma_max={gamma_max})",
            raw, ref.value)
    value = min(max(raw, 0.0), 1.0)
    status = "ok" if dist <= AUC_SERIES_OK else "flagged"
    return AveragedResult(value, Method.AUC_SERIES, terms, dist, status)
