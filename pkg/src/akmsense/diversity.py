"""Diversity reception (MRC, SLC, SLS) and hard-decision cooperative fusion."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .analytic import AveragedResult, Method, avg_pd_mgf_series, avg_pd_quadrature, pd_series_from_psi
from .detector import DetectorSpec, detection_prob, threshold_for_pf
from .fading import ChannelSpec, MgfDerivativeSeries, expectation
from .specfun import DEFAULT_CONTROL, DomainError, SeriesControl, log_gamma

__all__ = [
    "MAX_BRANCHES",
    "Scheme",
    "DiversitySpec",
    "CssSpec",
    "compositions",
    "mrc_mgf_derivative",
    "MrcScaledSeries",
    "avg_pd_mrc",
    "avg_pd_slc",
    "avg_pd_sls",
    "avg_pd_combined_quadrature",
    "sls_literal_expression",
    "slc_threshold",
    "sls_branch_pf",
    "css_fuse",
    "css_or_avg_pd",
]

MAX_BRANCHES = 8


class Scheme(str, enum.Enum):
    MRC = "mrc"
    SLC = "slc"
    SLS = "sls"


@dataclass(frozen=True)
class DiversitySpec:
    """Combining scheme over independent branches."""

    scheme: Scheme
    branches: tuple[ChannelSpec, ...]
    max_branches: int = field(default=MAX_BRANCHES, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "branches", tuple(self.branches))
        if len(self.branches) < 1:
            raise DomainError("at least one branch is required")
        if len(self.branches) > self.max_branches:
            raise DomainError(f"{len(self.branches)} branches exceed the cap of "
                              f"{self.max_branches}; use the Monte Carlo path instead")
        for b in self.branches:
            if not isinstance(b, ChannelSpec):
                raise DomainError(f"branch must be a ChannelSpec, got {type(b).__name__}")

    @classmethod
    def iid(cls, scheme, branch: ChannelSpec, n_branches: int, **kw) -> "DiversitySpec":
        return cls(scheme, (branch,) * n_branches, **kw)

    @property
    def L(self) -> int:
        return len(self.branches)


@dataclass(frozen=True)
class CssSpec:
    """n-out-of-N voting at the fusion centre (n=1 is OR, n=N is AND)."""

    n_users: int
    vote_threshold: int = 1

    def __post_init__(self):
        if int(self.n_users) != self.n_users or self.n_users < 1:
            raise DomainError(f"n_users must be an integer >= 1, got {self.n_users}")
        if int(self.vote_threshold) != self.vote_threshold or not 1 <= self.vote_threshold <= self.n_users:
            raise DomainError(f"vote_threshold must lie in [1, {self.n_users}], got {self.vote_threshold}")


# ---------------------------------------------------------------------------
# MRC MGF derivatives


@lru_cache(maxsize=1024)
def compositions(n: int, parts: int) -> tuple[tuple[int, ...], ...]:
    """All ordered tuples of ``parts`` non-negative integers summing to ``n``."""
    if parts == 1:
        return ((n,),)
    out = []
    for first in range(n, -1, -1):
        for rest in compositions(n - first, parts - 1):
            out.append((first,) + rest)
    return tuple(out)


def _branch_series(spec: DiversitySpec, s: float, ctrl: SeriesControl) -> list[MgfDerivativeSeries]:
    # identical branches share one cached series
    cache: dict[ChannelSpec, MgfDerivativeSeries] = {}
    return [cache.setdefault(b, MgfDerivativeSeries(b, s, ctrl)) for b in spec.branches]


def mrc_mgf_derivative(n: int, s: float, spec: DiversitySpec,
                       ctrl: SeriesControl = DEFAULT_CONTROL, method: str = "compositions") -> float:
    """n-th derivative of prod_i phi_i(s), the MGF of the branch-SNR sum.

    ``compositions`` applies the generalized Leibniz rule, summing
    multinomial(n; n_1..n_L) * prod_i phi_i^(n_i)(s) over every composition
    of n.  ``fold`` convolves the scaled derivative sequences branch by branch,
    in which the multinomial weights cancel; it is the path used for averaging.
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a non-negative integer, got {n}")
    n = int(n)
    if method == "fold":
        lv = MrcScaledSeries(spec, s, ctrl).log_scaled(n) + log_gamma(n + 1.0)
        mag = math.exp(lv) if lv < 709.0 else math.inf
        return -mag if n % 2 else mag
    if method != "compositions":
        raise DomainError(f"unknown method {method!r}")
    series = _branch_series(spec, s, ctrl)
    total = 0.0
    nf = math.factorial(n)
    for comp in compositions(n, spec.L):
        coef = nf // math.prod(math.factorial(k) for k in comp)
        total += coef * math.prod(ser.derivative(k) for ser, k in zip(series, comp))
    return total


class MrcScaledSeries:
    """Scaled derivatives Psi_n = E[G^n e^(-s G)] / n! of the branch sum G.

    Psi for a sum of independent branches is the Cauchy product of the
    per-branch psi sequences, built lazily in log space.
    """

    def __init__(self, spec: DiversitySpec, s: float = 1.0, ctrl: SeriesControl = DEFAULT_CONTROL):
        self.series = _branch_series(spec, s, ctrl)
        self._levels: list[list[float]] = [[] for _ in self.series]

    def log_scaled(self, n: int) -> float:
        for lvl, ser in enumerate(self.series):
            seq = self._levels[lvl]
            while len(seq) <= n:
                m = len(seq)
                own = ser.log_scaled(m)
                if lvl == 0:
                    seq.append(own)
                    continue
                prev = np.array(self._levels[lvl - 1][: m + 1])
                mine = np.array([ser.log_scaled(j) for j in range(m, -1, -1)])
                v = prev + mine
                top = v.max()
                seq.append(float(top + math.log(np.exp(v - top).sum())) if top > -math.inf else -math.inf)
        return self._levels[-1][n]


# ---------------------------------------------------------------------------
# averaged detection probability per scheme


def slc_threshold(det: DetectorSpec, L: int) -> float:
    """Threshold for SLC: re-solved on 2Lu degrees of freedom when a target Pf is set."""
    if det.target_pf is not None:
        return threshold_for_pf(L * det.u, det.target_pf)
    return det.lam


def sls_branch_pf(target_pf: float, L: int) -> float:
    """Per-branch Pf giving a system Pf of ``target_pf`` under SLS: 1 - (1 - Pf)^(1/L)."""
    return -math.expm1(math.log1p(-target_pf) / L)


def _require(spec: DiversitySpec, scheme: Scheme) -> None:
    if spec.scheme is not scheme:
        raise DomainError(f"expected a {scheme.value.upper()} spec, got {spec.scheme.value.upper()}")


def avg_pd_mrc(spec: DiversitySpec, det: DetectorSpec, ctrl: SeriesControl = DEFAULT_CONTROL,
               tail_closure: bool = True) -> AveragedResult:
    """Average Pd with maximal-ratio combining (u degrees, summed branch SNR)."""
    _require(spec, Scheme.MRC)
    series = MrcScaledSeries(spec, 1.0, ctrl)
    return pd_series_from_psi(series.log_scaled, det.u, det.lam, ctrl, tail_closure)


def avg_pd_slc(spec: DiversitySpec, det: DetectorSpec, ctrl: SeriesControl = DEFAULT_CONTROL,
               tail_closure: bool = True) -> AveragedResult:
    """Average Pd with square-law combining (Lu degrees, summed branch SNR)."""
    _require(spec, Scheme.SLC)
    lam = slc_threshold(det, spec.L)
    series = MrcScaledSeries(spec, 1.0, ctrl)
    return pd_series_from_psi(series.log_scaled, spec.L * det.u, lam, ctrl, tail_closure)


def avg_pd_sls(spec: DiversitySpec, det: DetectorSpec, ctrl: SeriesControl = DEFAULT_CONTROL,
               method: str = "series") -> AveragedResult:
    """Average Pd with square-law selection: 1 - prod_i (1 - Pd_i).

    Each branch Pd is the full detection-weighted average (``series`` or
    ``quadrature``).  With a target Pf set, each branch runs at
    1 - (1 - Pf)^(1/L) so that the system false-alarm rate equals the target.
    """
    _require(spec, Scheme.SLS)
    if det.target_pf is not None:
        branch_det = DetectorSpec.for_pf(det.u, sls_branch_pf(det.target_pf, spec.L))
    else:
        branch_det = det
    if method == "series":
        fn, meth = (lambda ch: avg_pd_mgf_series(ch, branch_det, ctrl)), Method.MGF_SERIES
    elif method == "quadrature":
        fn, meth = (lambda ch: avg_pd_quadrature(ch, branch_det)), Method.QUADRATURE
    else:
        raise DomainError(f"unknown method {method!r}")
    cache: dict[ChannelSpec, AveragedResult] = {}
    for b in spec.branches:
        if b not in cache:
            cache[b] = fn(b)
    per = [cache[b] for b in spec.branches]
    miss = math.prod(1.0 - r.value for r in per)
    err = sum(r.est_error for r in per)
    status = "ok" if all(r.status == "ok" for r in per) else "flagged"
    return AveragedResult(min(max(1.0 - miss, 0.0), 1.0), meth,
                          sum(r.terms_used for r in cache.values()), err, status)


def avg_pd_combined_quadrature(spec: DiversitySpec, det: DetectorSpec) -> AveragedResult:
    """Quadrature reference for MRC/SLC with one or two branches.

    L = 2 uses nested adaptive quadrature of Q_u'(sqrt(2 (g1 + g2)), sqrt(lam)).
    Larger L should be checked by Monte Carlo.
    """
    if spec.scheme is Scheme.SLS:
        return avg_pd_sls(spec, det, method="quadrature")
    if spec.scheme is Scheme.SLC:
        u_eff, lam = spec.L * det.u, slc_threshold(det, spec.L)
    else:
        u_eff, lam = det.u, det.lam
    if spec.L == 1:
        return avg_pd_quadrature(spec.branches[0], DetectorSpec(u_eff, lam))
    if spec.L != 2:
        raise DomainError("quadrature reference is available for L <= 2 only")
    b1, b2 = spec.branches
    bp = (0.125 * lam, 0.5 * lam, 2.0 * lam)
    calls = [0]

    def inner(g1):
        def pd(g2):
            calls[0] += 1
            return detection_prob(u_eff, lam, g1 + g2)
        return expectation(pd, b2, breakpoints=[max(b - g1, 0.0) for b in bp],
                           epsabs=1e-10, epsrel=1e-9)[0]

    val, err = expectation(inner, b1, breakpoints=bp, epsabs=1e-9, epsrel=1e-9)
    value = min(max(val, 0.0), 1.0)
    return AveragedResult(value, Method.QUADRATURE, calls[0], err + abs(value - val))


def sls_literal_expression(spec: DiversitySpec, n: int, s: float = 1.0,
                           ctrl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Diagnostic: 1 - prod_i (1 - phi_i^(n)(s)) with the bare MGF derivative as branch term.

    This is the selection formula with the per-branch term taken as a plain
    MGF derivative, without detection weights.  It is not a probability in
    general (odd n makes it negative) and is kept only for comparison.
    """
    from .fading import snr_mgf_derivative

    return 1.0 - math.prod(1.0 - snr_mgf_derivative(n, s, b, ctrl) for b in spec.branches)


# ---------------------------------------------------------------------------
# cooperative fusion


def css_fuse(decisions: Sequence[int], spec: CssSpec) -> int:
    """Fusion-centre decision: 1 iff at least ``vote_threshold`` users report 1."""
    if len(decisions) != spec.n_users:
        raise DomainError(f"expected {spec.n_users} decisions, got {len(decisions)}")
    if any(d not in (0, 1) for d in decisions):
        raise DomainError("decisions must be 0/1 bits")
    return int(sum(decisions) >= spec.vote_threshold)


def css_or_avg_pd(branch_pd: Sequence[float]) -> float:
    """OR-rule system probability 1 - prod(1 - p_i); applies to Pd and Pf alike."""
    if len(branch_pd) < 1:
        raise DomainError("need at least one user")
    for p in branch_pd:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"probability outside [0, 1]: {p}")
    return 1.0 - math.prod(1.0 - p for p in branch_pd)
