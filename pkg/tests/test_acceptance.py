"""Acceptance suite.

One test per criterion; each prints a single PASS/FAIL line, repeated in the
terminal summary.  Tolerances are those stated for the criteria and are not
adjusted to the results.
"""

import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate, special, stats

from akmsense.analytic import avg_auc_quadrature, avg_auc_series, avg_pd_mgf_series, avg_pd_quadrature
from akmsense.detector import DetectorSpec, auc_instantaneous, detection_prob
from akmsense.diversity import CssSpec, DiversitySpec, avg_pd_mrc, avg_pd_slc, avg_pd_sls, css_or_avg_pd
from akmsense.fading import ChannelSpec, FadingParams, sample_snr, snr_pdf, special_case
from akmsense.mcsim import SimConfig, empirical_css, empirical_pd_pf
from akmsense.specfun import ConvergenceError, marcum_q

DET = DetectorSpec.for_pf(2, 0.01)
REF = FadingParams(1.35, 1.0, 1.0)

GRID_ALPHA = (0.7, 1.35, 2.0, 3.0)
GRID_KAPPA = (1e-9, 1.0, 2.0)
GRID_MU = (0.5, 1.0, 2.5)
GRID_DB = (0.0, 4.0, 8.0, 12.0)
GRID = list(itertools.product(GRID_ALPHA, GRID_KAPPA, GRID_MU, GRID_DB))


def _fmt_bad(bad, limit=6):
    head = ", ".join(str(b) for b in bad[:limit])
    return head + (f", ... ({len(bad)} total)" if len(bad) > limit else "")


def test_mrc_anchor_points(report):
    anchors = [(1, 8.0, 0.519), (2, 8.0, 0.767), (2, 4.0, 0.617), (3, 4.0, 0.835)]
    t0 = time.perf_counter()
    parts, ok = [], True
    for i, (L, db, target) in enumerate(anchors):
        spec = DiversitySpec.iid("mrc", ChannelSpec.from_db(REF, db), L)
        a = avg_pd_mrc(spec, DET).value
        pd, _ = empirical_pd_pf(SimConfig(1_000_000, 5000 + i, spec, DET))
        hit = abs(a - target) <= 0.05 and abs(pd.p_hat - target) <= 0.05
        ok &= hit
        parts.append(f"L={L} {db:g}dB target {target}: analytic {a:.4f}, MC {pd.p_hat:.4f}"
                     f" [{'ok' if hit else 'miss'}]")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    assert report("1 MRC anchor points (+-0.05, analytic and 1e6-trial MC)", ok,
                  "; ".join(parts) + f"; runtime {elapsed:.0f} s")


def test_oracle_triangle(report):
    worst_mc, worst_series, skipped, bad = 0.0, 0.0, 0, []
    for i, (a, k, m, db) in enumerate(GRID):
        ch = ChannelSpec.from_db(FadingParams(a, k, m), db)
        q = avg_pd_quadrature(ch, DET).value
        pd, _ = empirical_pd_pf(SimConfig(100_000, 6000 + i, ch, DET))
        d = abs(pd.p_hat - q)
        worst_mc = max(worst_mc, d / max(0.01, 3 * pd.std_err))
        if d > max(0.01, 3 * pd.std_err):
            bad.append(("mc", a, k, m, db))
        try:
            s = avg_pd_mgf_series(ch, DET).value
        except ConvergenceError:
            skipped += 1
            continue
        worst_series = max(worst_series, abs(s - q))
        if abs(s - q) > 1e-3:
            bad.append(("series", a, k, m, db))
    detail = (f"{len(GRID)} points; worst |MC-quad| / max(0.01, 3SE) = {worst_mc:.2f}; "
              f"worst |series-quad| = {worst_series:.1e}; series not converged at {skipped}")
    if bad:
        detail += f"; violations {_fmt_bad(bad)}"
    assert report("2 oracle triangle", not bad, detail)


def _kappa_mu_reference(g, k, m, gbar):
    z = 2 * m * math.sqrt(k * (1 + k) * g / gbar)
    log_f = (math.log(m) + 0.5 * (m + 1) * math.log(1 + k) - 0.5 * (m - 1) * math.log(k) - k * m
             - math.log(gbar) + 0.5 * (m - 1) * math.log(g / gbar) - m * (1 + k) * g / gbar
             + math.log(special.ive(m - 1, z)) + z)
    return math.exp(log_f)


def _snr_cdf(ch):
    # (gamma/gbar)^(alpha/2) is unit-mean kappa-mu: F = 1 - Q_mu(sqrt(2 kappa mu), sqrt(2 (1+kappa) mu x))
    p = ch.fading
    a0 = math.sqrt(2 * p.kappa_eff * p.mu)

    def F(g):
        x = (g / ch.avg_snr) ** (p.alpha / 2)
        return 1.0 - marcum_q(p.mu, a0, math.sqrt(2 * (1 + p.kappa_eff) * p.mu * x))
    return np.vectorize(F)


def test_density_suite(report):
    # normalisation over the grid
    worst_norm = 0.0
    for a, k, m, db in GRID:
        ch = ChannelSpec.from_db(FadingParams(a, k, m), db)
        tot = integrate.quad(lambda g: snr_pdf(g, ch), 0, np.inf, limit=400)[0]
        worst_norm = max(worst_norm, abs(tot - 1.0))

    # reductions
    gbar = 2.0
    g = np.concatenate((np.geomspace(1e-3, 0.5, 15), np.linspace(0.6, 30.0, 60)))
    refs = {
        "Rayleigh": (special_case("rayleigh"), lambda x: math.exp(-x / gbar) / gbar),
        "Nakagami m=2.5": (special_case("nakagami", 2.5), lambda x: stats.gamma.pdf(x, 2.5, scale=gbar / 2.5)),
        "Rice K=3": (special_case("rice", 3.0),
                     lambda x: 4 * math.exp(-3) / gbar * math.exp(-4 * x / gbar)
                     * special.i0(2 * math.sqrt(12 * x / gbar))),
        "kappa-mu (2, 1.5)": (special_case("kappa_mu", 2.0, 1.5),
                              lambda x: _kappa_mu_reference(x, 2.0, 1.5, gbar)),
    }
    sup = {name: max(abs(snr_pdf(x, ChannelSpec(p, gbar)) - f(x)) for x in g) for name, (p, f) in refs.items()}

    # sampler KS at 1 % on every grid point
    ks_fail = []
    for i, (a, k, m, db) in enumerate(GRID):
        ch = ChannelSpec.from_db(FadingParams(a, k, m), db)
        x = sample_snr(np.random.default_rng(7000 + i), ch, 2000)
        pv = stats.kstest(x, _snr_cdf(ch)).pvalue
        if pv < 0.01:
            ks_fail.append(((a, k, m, db), round(float(pv), 4)))

    ok = worst_norm <= 1e-6 and max(sup.values()) <= 1e-6 and not ks_fail
    detail = (f"max |int f - 1| = {worst_norm:.1e}; reduction sup-errors "
              + ", ".join(f"{n} {v:.1e}" for n, v in sup.items())
              + f"; KS rejections at 1%: {len(ks_fail)}/{len(GRID)} {_fmt_bad(ks_fail)}")
    assert report("3 density suite", ok, detail)


def test_auc_suite(report):
    notes, ok = [], True

    # closed form vs integral of Pd over the H0 density
    worst = 0.0
    for u in (1, 2, 3, 4):
        for gam in (0.05, 0.5, 2.0, 5.0, 12.0, 30.0):
            ref = integrate.quad(lambda l: detection_prob(u, l, gam) * stats.chi2.pdf(l, 2 * u),
                                 0, np.inf, limit=200, epsabs=1e-12)[0]
            worst = max(worst, abs(auc_instantaneous(u, gam) - ref))
    ok &= worst <= 1e-5
    notes.append(f"closed form vs numeric max err {worst:.1e}")

    # bounds and monotonicity in mean SNR
    bad = []
    for a, k, m in itertools.product(GRID_ALPHA, GRID_KAPPA, GRID_MU):
        v = [avg_auc_quadrature(ChannelSpec.from_db(FadingParams(a, k, m), db), 2).value
             for db in range(-10, 21, 2)]
        if not (all(0.5 <= x <= 1.0 for x in v) and np.all(np.diff(v) >= 0)):
            bad.append((a, k, m))
    ok &= not bad
    notes.append(f"bounds/monotone in SNR: {'hold' if not bad else 'violated for ' + _fmt_bad(bad)}")

    # alpha ordering of the two curves with kappa = mu = 0.7
    order_bad = []
    for db in range(2, 21):
        lo = avg_auc_quadrature(ChannelSpec.from_db(FadingParams(0.7, 0.7, 0.7), db), 2).value
        hi = avg_auc_quadrature(ChannelSpec.from_db(FadingParams(1.5, 0.7, 0.7), db), 2).value
        if not hi > lo:
            order_bad.append(f"{db} dB ({hi:.6f} vs {lo:.6f})")
    ok &= not order_bad
    notes.append("AUC(alpha=1.5) > AUC(alpha=0.7) from 2 dB: "
                 + ("holds" if not order_bad else "violated at " + _fmt_bad(order_bad)))

    # non-decreasing in alpha from 3 dB
    alphas = (0.7, 1.0, 1.5, 2.0, 2.5, 3.0)
    mono_bad = []
    for k, m in ((0.7, 0.7), (1.0, 1.0)):
        for db in range(3, 21):
            v = [avg_auc_quadrature(ChannelSpec.from_db(FadingParams(a, k, m), db), 2).value for a in alphas]
            if not np.all(np.diff(v) >= 0):
                mono_bad.append((k, m, db))
    ok &= not mono_bad
    notes.append("non-decreasing in alpha from 3 dB: "
                 + ("holds" if not mono_bad else "violated at " + _fmt_bad(mono_bad)))
    assert report("4 AUC suite", ok, "; ".join(notes))


def test_diversity_css(report):
    notes, ok = [], True

    bad = []
    for db in range(0, 21):
        ch = ChannelSpec.from_db(REF, db)
        slc = avg_pd_slc(DiversitySpec.iid("slc", ch, 2), DET).value
        sls = avg_pd_sls(DiversitySpec.iid("sls", ch, 2), DET).value
        if slc < sls:
            bad.append(db)
    ok &= not bad
    notes.append(f"SLC >= SLS (L=2, 0-20 dB): {'holds' if not bad else 'violated at ' + _fmt_bad(bad)}")

    bad = []
    for db in range(0, 21, 2):
        p = avg_pd_slc(DiversitySpec.iid("slc", ChannelSpec.from_db(REF, db), 2), DET).value
        v = [css_or_avg_pd([p] * n) for n in range(1, 9)]
        if not np.all(np.diff(v) >= 0):
            bad.append(db)
    ok &= not bad
    notes.append(f"OR rule non-decreasing in N=1..8: {'holds' if not bad else 'violated at ' + _fmt_bad(bad)}")

    worst, bad = 0.0, []
    for i, (n, db) in enumerate(itertools.product((1, 2, 3), (0.0, 4.0, 8.0, 12.0))):
        spec = DiversitySpec.iid("slc", ChannelSpec.from_db(REF, db), 2)
        analytic = css_or_avg_pd([avg_pd_slc(spec, DET).value] * n)
        mc = empirical_css(SimConfig(100_000, 8000 + i, spec, DET, CssSpec(n, 1)))
        tol = max(0.01, 3 * mc.std_err)
        worst = max(worst, abs(mc.p_hat - analytic) / tol)
        if abs(mc.p_hat - analytic) > tol:
            bad.append((n, db))
    ok &= not bad
    notes.append(f"CSS analytic vs MC, N=1..3: worst |diff| / tol = {worst:.2f}"
                 + (f", violated at {_fmt_bad(bad)}" if bad else ""))
    assert report("5 diversity and CSS", ok, "; ".join(notes))


def _cli(*argv):
    res = subprocess.run([sys.executable, "-m", "akmsense.cli", *argv], capture_output=True, check=True)
    return res.stdout


def test_determinism(report):
    runs = [
        ["pd-vs-snr", "--snr-db-min", "0", "--snr-db-max", "8", "--snr-db-step", "4",
         "--methods", "analytic,series,montecarlo", "--trials", "150000", "--seed", "11"],
        ["roc", "--snr-db-min", "4", "--snr-db-max", "4", "--methods", "analytic,montecarlo",
         "--trials", "150000", "--seed", "12", "--n-lambda", "9"],
        ["auc-vs-snr", "--snr-db-min", "4", "--snr-db-max", "4", "--methods", "analytic,montecarlo",
         "--trials", "150000", "--seed", "13", "--format", "json"],
        ["diversity", "--scheme", "sls", "--L", "3", "--snr-db-min", "4", "--snr-db-max", "4",
         "--methods", "analytic,montecarlo", "--trials", "150000", "--seed", "14"],
        ["css", "--preset", "fig7", "--snr-db-min", "4", "--snr-db-max", "4",
         "--methods", "analytic,montecarlo", "--trials", "150000", "--seed", "15"],
    ]
    repeat_bad, worker_bad = [], []
    for argv in runs:
        first = _cli(*argv)
        if _cli(*argv) != first:
            repeat_bad.append(argv[0])
        if _cli(*argv, "--workers", "4") != first:
            worker_bad.append(argv[0])
    ok = not repeat_bad and not worker_bad
    assert report("6 determinism", ok,
                  f"{len(runs)} commands; repeat mismatches {repeat_bad or 'none'}; "
                  f"workers 1 vs 4 mismatches {worker_bad or 'none'}")


def test_auc_series_cross_check(report):
    worst, worst_shift, bad = 0.0, 0.0, []
    for k, m, db in itertools.product(GRID_KAPPA, GRID_MU, GRID_DB):
        ch = ChannelSpec.from_db(FadingParams(2.0, k, m), db)
        ref = avg_auc_quadrature(ch, 2)
        v40 = avg_auc_series(ch, 2, reference=ref).value
        v80 = avg_auc_series(ch, 2, gamma_max=80.0, reference=ref).value
        worst = max(worst, abs(v40 - ref.value))
        worst_shift = max(worst_shift, abs(v40 - v80))
        if abs(v40 - ref.value) > 0.02 or abs(v40 - v80) >= 1e-3:
            bad.append((k, m, db))
    ok = not bad
    assert report("AUC series cross-check (alpha=2)", ok,
                  f"worst |series-quad| = {worst:.1e} (limit 0.02); worst shift 40->80 = {worst_shift:.1e} "
                  f"(limit 1e-3)" + (f"; violations {_fmt_bad(bad)}" if bad else ""))
