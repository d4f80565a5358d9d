"""Energy detector on an AWGN channel: Pf, Pd, threshold design and AUC."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .specfun import DomainError, marcum_q, upper_incomplete_gamma_reg

__all__ = [
    "DetectorSpec",
    "false_alarm_prob",
    "detection_prob",
    "threshold_for_pf",
    "auc_instantaneous",
]


def _check_u(u) -> int:
    if isinstance(u, bool) or int(u) != u or u < 1:
        raise DomainError(f"time-bandwidth product u must be an integer >= 1, got {u}")
    return int(u)


@dataclass(frozen=True)
class DetectorSpec:
    """Energy detector with time-bandwidth product ``u`` and threshold ``lam``."""

    u: int
    lam: float
    target_pf: Optional[float] = None

    def __post_init__(self):
        _check_u(self.u)
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise DomainError(f"threshold must be >= 0, got {self.lam}")

    @classmethod
    def for_pf(cls, u: int, pf: float) -> "DetectorSpec":
        """Detector whose threshold yields false-alarm probability ``pf``."""
        return cls(u, threshold_for_pf(u, pf), pf)

    @property
    def pf(self) -> float:
        return false_alarm_prob(self.u, self.lam)


def false_alarm_prob(u: int, lam: float) -> float:
    """Pf = Gamma(u, lam/2) / Gamma(u)."""
    u = _check_u(u)
    if not lam >= 0:
        raise DomainError(f"threshold must be >= 0, got {lam}")
    return upper_incomplete_gamma_reg(u, 0.5 * lam)


def detection_prob(u: int, lam: float, gamma: float) -> float:
    """Pd = Q_u(sqrt(2 gamma), sqrt(lam)) at instantaneous SNR ``gamma``."""
    u = _check_u(u)
    if not lam >= 0:
        raise DomainError(f"threshold must be >= 0, got {lam}")
    if not gamma >= 0:
        raise DomainError(f"SNR must be >= 0, got {gamma}")
    return marcum_q(u, math.sqrt(2.0 * gamma), math.sqrt(lam))


def threshold_for_pf(u: int, pf: float, tol: float = 1e-10) -> float:
    """Threshold lam with false_alarm_prob(u, lam) == pf, by bisection.

    Pf is strictly decreasing in lam, so bisection on a bracket that is widened
    until it encloses the target always succeeds.
    """
    u = _check_u(u)
    if not (0.0 < pf < 1.0):
        raise DomainError(f"target Pf must lie in (0, 1), got {pf}")
    lo, hi = 0.0, 2.0 * u + 20.0 * math.sqrt(u) + 200.0
    while false_alarm_prob(u, hi) > pf:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if false_alarm_prob(u, mid) > pf:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    lam = 0.5 * (lo + hi)
    err = abs(false_alarm_prob(u, lam) - pf)
    if err > tol:
        raise ArithmeticError(f"threshold search missed Pf target by {err:.3g}")
    return lam


def auc_instantaneous(u: int, gamma: float) -> float:
    """Area under the AWGN ROC at instantaneous SNR ``gamma``.

    AUC = 1 - sum_{l<u} sum_{i<=l} C(l+u-1, l-i) gamma^i e^(-gamma/2) / (2^(l+i+u) i!)
    """
    u = _check_u(u)
    if not gamma >= 0:
        raise DomainError(f"SNR must be >= 0, got {gamma}")
    total = 0.0
    for l in range(u):
        for i in range(l + 1):
            if gamma == 0 and i > 0:
                continue
            log_t = (-0.5 * gamma - (l + i + u) * math.log(2.0) - math.lgamma(i + 1.0)
                     + (i * math.log(gamma) if i else 0.0))
            total += math.comb(l + u - 1, l - i) * math.exp(log_t)
    return 1.0 - total
