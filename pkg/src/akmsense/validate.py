"""Quick self-check suite behind ``akmsense validate``."""

from __future__ import annotations

import math
from typing import Callable

from scipy import integrate, stats

from .analytic import avg_auc_quadrature, avg_pd_mgf_series, avg_pd_quadrature
from .detector import DetectorSpec, auc_instantaneous, detection_prob, false_alarm_prob
from .diversity import DiversitySpec, avg_pd_mrc, avg_pd_slc, avg_pd_sls, mrc_mgf_derivative
from .fading import ChannelSpec, FadingParams, expectation, snr_pdf, special_case
from .mcsim import SimConfig, empirical_pd_pf
from .specfun import gamma_fn, marcum_q, upper_incomplete_gamma_reg

_CFG = FadingParams(1.35, 1.0, 1.0)


def _check(name: str, fn: Callable[[], tuple[bool, str]]) -> tuple[str, bool, str]:
    try:
        ok, detail = fn()
    except Exception as exc:  # report, keep going
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return name, bool(ok), detail


def _invariants() -> list[tuple[str, Callable[[], tuple[bool, str]]]]:
    det = DetectorSpec.for_pf(2, 0.01)
    ch8 = ChannelSpec.from_db(_CFG, 8.0)

    def gamma_half():
        v = gamma_fn(0.5)
        return abs(v - math.sqrt(math.pi)) < 1e-12, f"{v!r}"

    def marcum_zero():
        err = max(abs(marcum_q(2, 0.0, math.sqrt(l)) - upper_incomplete_gamma_reg(2, l / 2))
                  for l in (0.1, 1.0, 5.0, 20.0))
        return err <= 1e-10, f"max err {err:.2e}"

    def normalisation():
        worst = 0.0
        for a, k, m in [(0.7, 1e-9, 0.5), (1.35, 1.0, 1.0), (3.0, 2.0, 2.5)]:
            ch = ChannelSpec(FadingParams(a, k, m), 2.0)
            tot = integrate.quad(lambda g: snr_pdf(g, ch), 0, math.inf, limit=400)[0]
            worst = max(worst, abs(tot - 1.0))
        return worst <= 1e-6, f"max |int f - 1| {worst:.2e}"

    def rayleigh():
        ch = ChannelSpec(special_case("rayleigh"), 3.0)
        err = max(abs(snr_pdf(g, ch) - math.exp(-g / 3.0) / 3.0) for g in (0.01, 0.5, 2.0, 9.0))
        return err <= 1e-6, f"sup err {err:.2e}"

    def auc_closed():
        ref = integrate.quad(lambda l: detection_prob(2, l, 3.0) * stats.chi2.pdf(l, 4),
                             0, math.inf, limit=200)[0]
        v = auc_instantaneous(2, 3.0)
        return abs(v - ref) <= 1e-5, f"{v:.8f} vs {ref:.8f}"

    def series_vs_quad():
        q = avg_pd_quadrature(ch8, det).value
        s = avg_pd_mgf_series(ch8, det).value
        return abs(q - s) <= 1e-3, f"{s:.8f} vs {q:.8f}"

    def mrc_paths():
        sp = DiversitySpec.iid("mrc", ch8, 3)
        err = max(abs(mrc_mgf_derivative(n, 1.0, sp) - mrc_mgf_derivative(n, 1.0, sp, method="fold"))
                  for n in range(6))
        return err <= 1e-10, f"max diff {err:.2e}"

    def mc_vs_quad():
        pd, pf = empirical_pd_pf(SimConfig(200_000, 1, ch8, det))
        q = avg_pd_quadrature(ch8, det).value
        ok = abs(pd.p_hat - q) <= max(0.01, 3 * pd.std_err) and abs(pf.p_hat - 0.01) <= 3 * pf.std_err
        return ok, f"pd {pd.p_hat:.4f} vs {q:.4f}, pf {pf.p_hat:.4f}"

    return [("gamma(1/2)", gamma_half), ("marcum Q at zero SNR", marcum_zero),
            ("SNR pdf normalisation", normalisation), ("Rayleigh reduction", rayleigh),
            ("closed-form AUC vs numeric", auc_closed), ("MGF series vs quadrature", series_vs_quad),
            ("MRC derivative paths", mrc_paths), ("Monte Carlo vs quadrature", mc_vs_quad)]


def _claims() -> list[tuple[str, Callable[[], tuple[bool, str]]]]:
    det = DetectorSpec.for_pf(2, 0.01)

    def anchor(L, db, target):
        def run():
            v = avg_pd_mrc(DiversitySpec.iid("mrc", ChannelSpec.from_db(_CFG, db), L), det).value
            return abs(v - target) <= 0.05, f"{v:.4f} vs {target}"
        return run

    def kappa_mu_trend():
        bad = []
        for db in range(0, 21):
            lo = avg_pd_quadrature(ChannelSpec.from_db(FadingParams(1.35, 0.7, 0.7), db), det).value
            hi = avg_pd_quadrature(ChannelSpec.from_db(_CFG, db), det).value
            if hi < lo:
                bad.append(db)
        return not bad, f"violated at dB {bad}" if bad else "holds"

    def alpha_order():
        bad = []
        for db in range(2, 21):
            lo = avg_auc_quadrature(ChannelSpec.from_db(FadingParams(0.7, 0.7, 0.7), db), 2).value
            hi = avg_auc_quadrature(ChannelSpec.from_db(FadingParams(1.5, 0.7, 0.7), db), 2).value
            if not hi > lo:
                bad.append(db)
        return not bad, f"violated at dB {bad}" if bad else "holds"

    def slc_vs_sls():
        bad = []
        for db in range(0, 15):
            ch = ChannelSpec.from_db(_CFG, db)
            if avg_pd_slc(DiversitySpec.iid("slc", ch, 2), det).value < \
                    avg_pd_sls(DiversitySpec.iid("sls", ch, 2), det).value:
                bad.append(db)
        return not bad, f"violated at dB {bad}" if bad else "holds"

    return [("Pd(L=1, 8 dB) ~ 0.519", anchor(1, 8.0, 0.519)),
            ("Pd(L=2, 8 dB) ~ 0.767", anchor(2, 8.0, 0.767)),
            ("Pd(L=2, 4 dB) ~ 0.617", anchor(2, 4.0, 0.617)),
            ("Pd(L=3, 4 dB) ~ 0.835", anchor(3, 4.0, 0.835)),
            ("higher kappa, mu raises Pd", kappa_mu_trend),
            ("AUC alpha=1.5 above alpha=0.7 from 2 dB", alpha_order),
            ("SLC at least SLS", slc_vs_sls)]


def run_validation(include_claims: bool = False) -> int:
    """Print a pass/fail table; return 0 iff every check passed."""
    checks = _invariants() + (_claims() if include_claims else [])
    results = [_check(name, fn) for name, fn in checks]
    width = max(len(r[0]) for r in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = sum(not r[1] for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1
