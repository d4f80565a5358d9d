"""Command-line front end: sweeps over average SNR with CSV/JSON output."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .analytic import (
    AucSeriesDisagreement,
    AveragedResult,
    avg_auc_quadrature,
    avg_auc_series,
    avg_pd_mgf_series,
    avg_pd_quadrature,
)
from .detector import DetectorSpec, false_alarm_prob, threshold_for_pf
from .diversity import (
    CssSpec,
    DiversitySpec,
    Scheme,
    avg_pd_mrc,
    avg_pd_slc,
    avg_pd_sls,
    css_or_avg_pd,
)
from .fading import ChannelSpec, FadingParams
from .mcsim import SimConfig, empirical_auc, empirical_pd_pf
from .specfun import ConvergenceError, DomainError

COLUMNS = ["snr_db", "method", "value", "std_err", "terms_used", "status"]
ROC_COLUMNS = COLUMNS + ["lambda", "pf"]
METHODS = ("analytic", "series", "montecarlo")
_CURVE_RE = re.compile(r"^a([0-9.eE+-]+)-k([0-9.eE+-]+)-m([0-9.eE+-]+)$")

# named presets: command, fixed parameters and selectable fading curves (first is default)
_S7 = "a1.35-k1.0-m1.0"
PRESETS = {
    "fig2": dict(command="pd-vs-snr", u=2, pf=0.01,
                 curves=[_S7, "a1.35-k0.7-m0.7", "a1.75-k1.0-m1.0"]),
    "fig3": dict(command="auc-vs-snr", u=2,
                 curves=["a1.5-k0.7-m0.7", "a0.7-k0.7-m0.7", "a0.7-k0.7-m1.0", "a0.7-k1.0-m0.7"]),
    "fig4": dict(command="auc-vs-snr", u=2,
                 curves=["a2.5-k0.7-m0.7", "a3.0-k0.7-m0.7", "a2.5-k1.0-m1.0"]),
    "fig5": dict(command="diversity", u=2, pf=0.01, scheme="mrc", L=1, curves=[_S7]),
    "fig6": dict(command="css", u=2, pf=0.01, scheme="slc", L=2, N=1, curves=[_S7]),
    "fig7": dict(command="css", u=2, pf=0.01, scheme="slc", L=2, N=2, curves=[_S7]),
}
_BASE_DEFAULTS = dict(alpha=1.35, kappa=1.0, mu=1.0, snr_db_min=0.0, snr_db_max=20.0,
                      snr_db_step=1.0, u=2, pf=0.01, L=1, scheme="mrc", N=1, vote_n=1,
                      trials=1_000_000, seed=0, workers=1, methods="analytic", format="csv")


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


@dataclass
class Row:
    snr_db: float
    method: str
    value: float
    std_err: float = 0.0
    terms_used: int = 0
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def as_dict(self, columns) -> dict:
        base = dict(snr_db=self.snr_db, method=self.method, value=self.value,
                    std_err=self.std_err, terms_used=self.terms_used, status=self.status)
        base.update(self.extra)
        return {c: base[c] for c in columns}


# ---------------------------------------------------------------------------
# argument handling


def parse_curve(text: str) -> tuple[float, float, float]:
    m = _CURVE_RE.match(text)
    if not m:
        raise UsageError(f"curve must look like a1.35-k1.0-m1.0, got {text!r}")
    return tuple(float(g) for g in m.groups())


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--alpha", type=float)
    g.add_argument("--kappa", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--curve", help="fading triple as a<alpha>-k<kappa>-m<mu>")
    g.add_argument("--snr-db-min", type=float)
    g.add_argument("--snr-db-max", type=float)
    g.add_argument("--snr-db-step", type=float)
    g.add_argument("--u", type=int, help="time-bandwidth product")
    thr = g.add_mutually_exclusive_group()
    thr.add_argument("--pf", type=float, help="target false-alarm probability")
    thr.add_argument("--lambda", dest="lam", type=float, help="detector threshold")
    g.add_argument("--L", type=int, help="diversity branches")
    g.add_argument("--scheme", choices=[s.value for s in Scheme])
    g.add_argument("--N", type=int, help="cooperating users")
    g.add_argument("--vote-n", type=int, help="fusion vote threshold (1 = OR)")
    r = common.add_argument_group("run")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, help="threads for Monte Carlo blocks")
    r.add_argument("--methods", help="comma list from analytic,series,montecarlo")
    r.add_argument("--format", choices=["csv", "json"])
    r.add_argument("--out", help="output path (default: stdout)")
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--allow-flagged", action="store_true",
                   help="emit rows for failed or flagged points instead of exiting with 1")

    p = argparse.ArgumentParser(prog="akmsense",
                                description="Energy-detection performance over alpha-kappa-mu fading.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("pd-vs-snr", parents=[common], help="average detection probability")
    roc = sub.add_parser("roc", parents=[common], help="ROC points per SNR")
    roc.add_argument("--n-lambda", type=int, default=41, help="thresholds per ROC")
    sub.add_parser("auc-vs-snr", parents=[common], help="average AUC")
    sub.add_parser("diversity", parents=[common], help="MRC/SLC/SLS average detection")
    sub.add_parser("css", parents=[common], help="cooperative sensing with diversity users")
    val = sub.add_parser("validate", help="run the invariant suite")
    val.add_argument("--include-claims", action="store_true",
                     help="also check the published point values and trends")
    return p


def _resolve(ns: argparse.Namespace) -> dict:
    cfg = dict(_BASE_DEFAULTS)
    curves = None
    if ns.preset:
        pre = PRESETS[ns.preset]
        if pre["command"] != ns.command:
            raise UsageError(f"preset {ns.preset} belongs to the {pre['command']} command")
        cfg.update({k: v for k, v in pre.items() if k not in ("command", "curves")})
        curves = pre["curves"]
    curve = ns.curve or (curves[0] if curves else None)
    if ns.curve and curves and ns.curve not in curves:
        raise UsageError(f"curve {ns.curve} not in preset {ns.preset}: {', '.join(curves)}")
    if curve:
        cfg["alpha"], cfg["kappa"], cfg["mu"] = parse_curve(curve)
    for key in ("alpha", "kappa", "mu", "snr_db_min", "snr_db_max", "snr_db_step", "u", "L",
                "scheme", "N", "vote_n", "trials", "seed", "workers", "methods", "format"):
        val = getattr(ns, key, None)
        if val is not None:
            cfg[key] = val
    if ns.pf is not None:
        cfg["pf"], cfg["lam"] = ns.pf, None
    elif ns.lam is not None:
        cfg["pf"], cfg["lam"] = None, ns.lam
    else:
        cfg.setdefault("lam", None)
    cfg["curve"] = curve
    cfg["methods"] = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    bad = [m for m in cfg["methods"] if m not in METHODS]
    if bad or not cfg["methods"]:
        raise UsageError(f"methods must be a non-empty subset of {','.join(METHODS)}")
    if cfg["snr_db_step"] <= 0 or cfg["snr_db_max"] < cfg["snr_db_min"]:
        raise UsageError("need snr-db-step > 0 and snr-db-max >= snr-db-min")
    for key in ("u", "L", "N", "vote_n", "trials", "workers"):
        if cfg[key] < 1:
            raise UsageError(f"--{key.replace('_', '-')} must be >= 1")
    if cfg["vote_n"] > cfg["N"]:
        raise UsageError("--vote-n cannot exceed --N")
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    try:
        cfg["fading"] = FadingParams(cfg["alpha"], cfg["kappa"], cfg["mu"])
        if cfg["pf"] is not None:
            cfg["detector"] = DetectorSpec.for_pf(cfg["u"], cfg["pf"])
        else:
            cfg["detector"] = DetectorSpec(cfg["u"], cfg["lam"])
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def snr_grid(cfg: dict) -> list[float]:
    lo, hi, step = cfg["snr_db_min"], cfg["snr_db_max"], cfg["snr_db_step"]
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 10) for i in range(n + 1)]


# ---------------------------------------------------------------------------
# sweeps


def _from_result(db: float, method: str, r: AveragedResult) -> Row:
    return Row(db, method, r.value, r.est_error, r.terms_used, r.status)


def _guarded(db: float, method: str, fn: Callable[[], Row], allow: bool) -> Row:
    try:
        row = fn()
    except (ConvergenceError, AucSeriesDisagreement, ArithmeticError) as exc:
        if not allow:
            raise NumericFailure(f"{method} failed at snr_db={db}: {exc}") from exc
        partial = getattr(exc, "partial_sum", getattr(exc, "series_value", math.nan))
        return Row(db, method, float(partial), math.nan, getattr(exc, "terms", 0),
                   f"failed:{type(exc).__name__}")
    if row.status != "ok" and not allow:
        raise NumericFailure(f"{method} flagged ({row.status}) at snr_db={db}")
    return row


def _diversity_spec(cfg: dict, ch: ChannelSpec) -> DiversitySpec:
    return DiversitySpec.iid(cfg["scheme"], ch, cfg["L"])


def _scheme_pd(cfg: dict, ch: ChannelSpec) -> AveragedResult:
    spec = _diversity_spec(cfg, ch)
    fn = {Scheme.MRC: avg_pd_mrc, Scheme.SLC: avg_pd_slc, Scheme.SLS: avg_pd_sls}[spec.scheme]
    return fn(spec, cfg["detector"])


def _mc(cfg: dict, channel, css: Optional[CssSpec] = None) -> SimConfig:
    return SimConfig(cfg["trials"], cfg["seed"], channel, cfg["detector"], css, cfg["workers"])


def mc_auc_grid(u: int) -> np.ndarray:
    """Threshold grid for empirical ROC/AUC: dense in log scale until Pf is negligible."""
    top = threshold_for_pf(u, 1e-12)
    return np.concatenate(([0.0], np.geomspace(1e-3, top, 600)))


def _sweep(cfg: dict, command: str) -> list[Row]:
    allow = cfg["allow_flagged"]
    det = cfg["detector"]
    rows: list[Row] = []
    for db in snr_grid(cfg):
        ch = ChannelSpec.from_db(cfg["fading"], db)
        for method in cfg["methods"]:
            if command == "pd-vs-snr":
                if method == "analytic":
                    fn = lambda: _from_result(db, method, avg_pd_quadrature(ch, det))
                elif method == "series":
                    fn = lambda: _from_result(db, method, avg_pd_mgf_series(ch, det))
                else:
                    fn = lambda: _mc_row(db, method, empirical_pd_pf(_mc(cfg, ch))[0])
            elif command == "auc-vs-snr":
                if method == "analytic":
                    fn = lambda: _from_result(db, method, avg_auc_quadrature(ch, det.u))
                elif method == "series":
                    fn = lambda: _from_result(db, method, avg_auc_series(ch, det.u))
                else:
                    fn = lambda: _mc_row(db, method,
                                         empirical_auc(_mc(cfg, ch), mc_auc_grid(det.u)))
            elif command == "diversity":
                if method == "montecarlo":
                    fn = lambda: _mc_row(db, method,
                                         empirical_pd_pf(_mc(cfg, _diversity_spec(cfg, ch)))[0])
                else:
                    fn = lambda: _from_result(db, method, _scheme_pd(cfg, ch))
            elif command == "css":
                css = CssSpec(cfg["N"], cfg["vote_n"])
                if method == "montecarlo":
                    fn = lambda: _mc_row(db, method,
                                         empirical_pd_pf(_mc(cfg, _diversity_spec(cfg, ch), css))[0])
                else:
                    if css.vote_threshold != 1:
                        raise UsageError("analytic fusion is available for the OR rule (--vote-n 1) only")
                    fn = lambda: _css_row(db, method, _scheme_pd(cfg, ch), css.n_users)
            else:
                raise UsageError(f"unknown command {command}")
            rows.append(_guarded(db, method, fn, allow))
    return rows


def _mc_row(db: float, method: str, est) -> Row:
    return Row(db, method, est.p_hat, est.std_err, est.trials, "ok")


def _css_row(db: float, method: str, r: AveragedResult, n_users: int) -> Row:
    return Row(db, method, css_or_avg_pd([r.value] * n_users), n_users * r.est_error,
               r.terms_used, r.status)


def _roc(cfg: dict, n_lambda: int) -> list[Row]:
    from .mcsim import empirical_roc

    u = cfg["detector"].u
    pfs = np.geomspace(1e-4, 1.0, n_lambda)[:-1]
    lams = [0.0] + sorted(threshold_for_pf(u, p) for p in pfs)
    rows = []
    for db in snr_grid(cfg):
        ch = ChannelSpec.from_db(cfg["fading"], db)
        for method in cfg["methods"]:
            if method == "montecarlo":
                pts = empirical_roc(_mc(cfg, ch), lams)
                T = cfg["trials"]
                for lam, (pf, pd) in zip(lams, pts):
                    rows.append(Row(db, method, pd, math.sqrt(pd * (1 - pd) / T), T, "ok",
                                    {"lambda": lam, "pf": pf}))
                continue
            for lam in lams:
                det = DetectorSpec(u, lam)
                if method == "analytic":
                    fn = lambda: _from_result(db, method, avg_pd_quadrature(ch, det))
                else:
                    fn = lambda: _from_result(db, method, avg_pd_mgf_series(ch, det))
                row = _guarded(db, method, fn, cfg["allow_flagged"])
                row.extra = {"lambda": lam, "pf": false_alarm_prob(u, lam)}
                rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# output


def _meta(cfg: dict, command: str) -> dict:
    keys = ("alpha", "kappa", "mu", "curve", "snr_db_min", "snr_db_max", "snr_db_step", "u",
            "pf", "lam", "L", "scheme", "N", "vote_n", "trials", "seed", "methods", "preset")
    params = {k: cfg.get(k) for k in keys}
    params["lambda"] = cfg["detector"].lam
    return {"command": command, "version": __version__, "seed": cfg["seed"], "params": params}


def render(rows: list[Row], columns: list[str], fmt: str, meta: dict) -> str:
    if fmt == "json":
        payload = {"meta": meta, "rows": [r.as_dict(columns) for r in rows]}
        return json.dumps(payload, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.as_dict(columns).values()])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command == "validate":
        from .validate import run_validation

        return run_validation(include_claims=ns.include_claims)
    try:
        cfg = _resolve(ns)
        cfg["allow_flagged"] = ns.allow_flagged
        cfg["preset"] = ns.preset
        if ns.command == "roc":
            if ns.n_lambda < 2:
                raise UsageError("--n-lambda must be >= 2")
            rows, columns = _roc(cfg, ns.n_lambda), ROC_COLUMNS
        else:
            rows, columns = _sweep(cfg, ns.command), COLUMNS
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"akmsense: error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"akmsense: numeric failure: {exc}", file=sys.stderr)
        return 1
    _emit(render(rows, columns, cfg["format"], _meta(cfg, ns.command)), ns.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
