"""Monte Carlo simulation of the energy-detector experiment.

Trials are split into fixed-size blocks.  Block j draws from its own Philox
stream spawned from ``SeedSequence(seed, spawn_key=(j,))``, so the sampled
values depend only on (seed, trials) and never on how many worker threads
process the blocks.  Block results are aggregated in block order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .detector import DetectorSpec, threshold_for_pf
from .diversity import CssSpec, DiversitySpec, Scheme, slc_threshold, sls_branch_pf
from .fading import ChannelSpec, sample_snr
from .specfun import DomainError

__all__ = [
    "BLOCK_SIZE",
    "SimConfig",
    "Estimate",
    "block_rng",
    "decision_threshold",
    "empirical_pd_pf",
    "empirical_roc",
    "empirical_auc",
    "empirical_css",
    "roc_auc",
]

BLOCK_SIZE = 1 << 16
_BOOT_KEY = 0xB007


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo experiment description.

    Attributes:
        trials: H1 trials (and, separately, H0 trials).
        seed: root seed of the stream tree.
        channel: a single branch or a diversity arrangement.
        detector: time-bandwidth product and threshold (or target Pf).
        css: optional fusion rule; each user is an independent copy of ``channel``.
        workers: threads used to process blocks; does not change results.
        fixed_gamma: if set, skip the fading sampler and use this SNR on every branch.
    """

    trials: int
    seed: int
    channel: Union[ChannelSpec, DiversitySpec]
    detector: DetectorSpec
    css: Optional[CssSpec] = None
    workers: int = 1
    fixed_gamma: Optional[float] = None

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise DomainError(f"workers must be a positive integer, got {self.workers}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.fixed_gamma is not None and not self.fixed_gamma >= 0:
            raise DomainError("fixed_gamma must be >= 0")

    @property
    def diversity(self) -> DiversitySpec:
        if isinstance(self.channel, DiversitySpec):
            return self.channel
        return DiversitySpec(Scheme.MRC, (self.channel,))


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo proportion with its binomial standard error."""

    p_hat: float
    std_err: float
    trials: int

    @classmethod
    def from_count(cls, hits: int, trials: int) -> "Estimate":
        p = hits / trials
        return cls(p, math.sqrt(p * (1.0 - p) / trials), trials)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent generator for one block of trials."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(block,))))


def _blocks(trials: int) -> list[tuple[int, int]]:
    return [(j, min(BLOCK_SIZE, trials - j * BLOCK_SIZE)) for j in range(-(-trials // BLOCK_SIZE))]


def _map_blocks(cfg: SimConfig, fn) -> list:
    blocks = _blocks(cfg.trials)
    if cfg.workers == 1 or len(blocks) == 1:
        return [fn(j, n) for j, n in blocks]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda jn: fn(*jn), blocks))


def decision_threshold(cfg: SimConfig) -> float:
    """Threshold applied to the combined statistic for the configured scheme."""
    det, div = cfg.detector, cfg.diversity
    if div.scheme is Scheme.SLC:
        return slc_threshold(det, div.L)
    if div.scheme is Scheme.SLS and det.target_pf is not None:
        return threshold_for_pf(det.u, sls_branch_pf(det.target_pf, div.L))
    return det.lam


def _user_statistics(rng: np.random.Generator, cfg: SimConfig, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(H1, H0) combined statistics for one user over ``n`` trials."""
    u, div = cfg.detector.u, cfg.diversity
    # per-branch SNR, then chi-square energies built from 2u unit Gaussians
    gammas = []
    for b in div.branches:
        if cfg.fixed_gamma is None:
            gammas.append(sample_snr(rng, b, n))
        else:
            gammas.append(np.full(n, float(cfg.fixed_gamma)))
    if div.scheme is Scheme.MRC:
        g = np.sum(gammas, axis=0)
        z1 = rng.standard_normal((n, 2 * u))
        z1[:, 0] += np.sqrt(2.0 * g)
        z0 = rng.standard_normal((n, 2 * u))
        return np.einsum("ij,ij->i", z1, z1), np.einsum("ij,ij->i", z0, z0)
    y1 = np.empty((div.L, n))
    y0 = np.empty((div.L, n))
    for i, g in enumerate(gammas):
        z1 = rng.standard_normal((n, 2 * u))
        z1[:, 0] += np.sqrt(2.0 * g)
        z0 = rng.standard_normal((n, 2 * u))
        y1[i] = np.einsum("ij,ij->i", z1, z1)
        y0[i] = np.einsum("ij,ij->i", z0, z0)
    if div.scheme is Scheme.SLC:
        return y1.sum(axis=0), y0.sum(axis=0)
    return y1.max(axis=0), y0.max(axis=0)


def _block_statistics(cfg: SimConfig, j: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    # shape (users, n)
    rng = block_rng(cfg.seed, j)
    users = cfg.css.n_users if cfg.css is not None else 1
    h1 = np.empty((users, n))
    h0 = np.empty((users, n))
    for k in range(users):
        h1[k], h0[k] = _user_statistics(rng, cfg, n)
    return h1, h0


def empirical_pd_pf(cfg: SimConfig) -> tuple[Estimate, Estimate]:
    """Fractions of H1 and H0 trials whose statistic exceeds the threshold.

    With a fusion rule configured, each user decides on its own statistic and
    the fusion-centre decision is counted.
    """
    lam = decision_threshold(cfg)
    vote = cfg.css.vote_threshold if cfg.css is not None else 1

    def count(j, n):
        h1, h0 = _block_statistics(cfg, j, n)
        return (int(np.count_nonzero((h1 > lam).sum(axis=0) >= vote)),
                int(np.count_nonzero((h0 > lam).sum(axis=0) >= vote)))

    counts = _map_blocks(cfg, count)
    return (Estimate.from_count(sum(c[0] for c in counts), cfg.trials),
            Estimate.from_count(sum(c[1] for c in counts), cfg.trials))


def empirical_css(cfg: SimConfig) -> Estimate:
    """Global detection probability at the fusion centre."""
    if cfg.css is None:
        raise DomainError("empirical_css needs a CssSpec in the configuration")
    return empirical_pd_pf(cfg)[0]


def _roc_counts(cfg: SimConfig, lambda_grid: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("lambda_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) < 0) or grid[0] < 0:
        raise DomainError("lambda_grid must be non-negative and ascending")
    if cfg.css is not None:
        raise DomainError("ROC sweeps are defined for a single user")

    def count(j, n):
        h1, h0 = _block_statistics(cfg, j, n)
        # exceedance counts: trials with statistic > lambda
        c1 = n - np.searchsorted(np.sort(h1[0]), grid, side="right")
        c0 = n - np.searchsorted(np.sort(h0[0]), grid, side="right")
        return c1, c0

    parts = _map_blocks(cfg, count)
    return sum(p[0] for p in parts), sum(p[1] for p in parts)


def empirical_roc(cfg: SimConfig, lambda_grid: Sequence[float]) -> list[tuple[float, float]]:
    """(pf, pd) at each threshold, from one pass over the sampled statistics."""
    c1, c0 = _roc_counts(cfg, lambda_grid)
    return [(float(a) / cfg.trials, float(b) / cfg.trials) for b, a in zip(c1, c0)]


def roc_auc(pf: np.ndarray, pd: np.ndarray) -> float:
    """Trapezoid area under (pf, pd) points, closed with (1, 1) and (0, 0)."""
    x = np.concatenate(([1.0], np.asarray(pf, float), [0.0]))
    y = np.concatenate(([1.0], np.asarray(pd, float), [0.0]))
    return float(-np.trapezoid(y, x))


def empirical_auc(cfg: SimConfig, lambda_grid: Sequence[float], n_boot: int = 200) -> Estimate:
    """Trapezoid AUC of the empirical ROC with a bootstrap standard error.

    Resampling works on the counts of statistics falling between consecutive
    thresholds, which is equivalent to resampling trials for this statistic.
    """
    c1, c0 = _roc_counts(cfg, lambda_grid)
    T = cfg.trials
    auc = roc_auc(c0 / T, c1 / T)

    def bins(c):
        # counts per cell [0, l_0], (l_0, l_1], ..., (l_last, inf)
        exceed = np.concatenate(([T], c, [0]))
        return -np.diff(exceed)

    b1, b0 = bins(c1), bins(c0)
    rng = block_rng(cfg.seed, _BOOT_KEY)
    samples = np.empty(n_boot)
    for r in range(n_boot):
        r1 = rng.multinomial(T, b1 / T)
        r0 = rng.multinomial(T, b0 / T)
        e1 = T - np.cumsum(r1)[:-1]
        e0 = T - np.cumsum(r0)[:-1]
        samples[r] = roc_auc(e0 / T, e1 / T)
    return Estimate(auc, float(samples.std(ddof=1)) if n_boot > 1 else 0.0, T)
