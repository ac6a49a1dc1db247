"""Command-line front end: fit, forecast, simulate, score, diagnose, compare.

Every command writes a JSON report (plus CSVs where useful) into ``--out``.
Exit codes: 0 success, 1 numerical or degenerate failure, 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from rechvol import data_io, diagnostics, scoring
from rechvol.experiments import SIM1_THETA as SIM1_PARAMS
from rechvol.experiments import SIM3_THETAS
from rechvol import volatility_filter as vf
from rechvol.errors import DegenerateInput, IncompleteAnneal, InvalidInput, NumericalFailure, OptimizationFailure
from rechvol.model_space import ModelSpec, in_support, priors_to_json
from rechvol.smc import RechTarget, SmcConfig, bayes_factor, jeffreys_label, run_data_annealing, run_likelihood_annealing

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "model": "SRN_GARCH",
    "data": None,
    "realized": [],
    "t_in": None,
    "particles": 1000,
    "ess_frac": 0.8,
    "n_lik": 30,
    "n_data": 30,
    "max_stages": 10000,
    "proposal_scale": 1.0,
    "seed": 0,
    "sigma0_sq": None,
    "priors": {},
    "bound": 1.0,
    "exp_input": True,
    "alpha": 0.01,
    "out": "out",
}

SIM1_THETA = dict(zip(("omega", "alpha", "beta"), SIM1_PARAMS))


class UsageError(Exception):
    pass


# -- helpers ----------------------------------------------------------------


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n")


def _resolve(args, keys):
    """Defaults < --config JSON < explicit flags."""
    cfg = {k: DEFAULTS[k] for k in keys if k in DEFAULTS}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        loaded = json.loads(path.read_text())
        unknown = set(loaded) - set(DEFAULTS) - {"threads"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in loaded.items() if k in keys})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _smc_config(cfg):
    return SmcConfig(
        particles=int(cfg["particles"]),
        ess_frac=float(cfg["ess_frac"]),
        n_lik=int(cfg.get("n_lik", DEFAULTS["n_lik"])),
        n_data=int(cfg.get("n_data", DEFAULTS["n_data"])),
        max_stages=int(cfg["max_stages"]),
        seed=int(cfg["seed"]),
        proposal_scale=float(cfg["proposal_scale"]),
    )


def _require_file(path, what="data"):
    if path is None:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} file not found: {p}")
    return p


def load_returns(path) -> tuple[list, np.ndarray]:
    """Read ``date,value`` returns as-is, or ``date,price`` prices and demean."""
    p = _require_file(path)
    with p.open(newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    if header == ["date", "price"]:
        prices = data_io.read_prices(p)
        return list(prices.dates[1:]), data_io.demean_log_returns(prices).values
    dates, values = data_io.read_two_column_csv(p, "value")
    return dates, values


def _sigma0(cfg, y_train):
    if cfg.get("sigma0_sq") is not None:
        s0 = float(cfg["sigma0_sq"])
        if not s0 > 0:
            raise InvalidInput("sigma0_sq must be positive")
        return s0
    s0 = float(np.var(y_train))
    if not s0 > 0:
        raise DegenerateInput("in-sample returns have zero variance")
    return s0


def _trace_writer(path):
    fh = open(path, "w")
    return fh, lambda rec: fh.write(rec.to_json() + "\n")


def _public_config(cfg):
    # run-location settings stay out so reports are byte-identical across runs
    return {k: v for k, v in cfg.items() if k not in ("threads", "out")}


# -- commands ---------------------------------------------------------------

FIT_KEYS = ("model", "data", "t_in", "particles", "ess_frac", "n_lik", "max_stages", "proposal_scale",
            "seed", "sigma0_sq", "priors", "bound", "exp_input", "out")


def cmd_fit(args):
    cfg = _resolve(args, FIT_KEYS)
    spec = ModelSpec(cfg["model"])
    _, y = load_returns(cfg["data"])
    if cfg["t_in"] is not None:
        y = data_io.split(data_io.ReturnSeries(y), int(cfg["t_in"])).train
    sigma0 = _sigma0(cfg, y)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    target = RechTarget(spec, y, sigma0, cfg["priors"], cfg["bound"], cfg["exp_input"])
    fh, sink = _trace_writer(out / "fit_trace.jsonl")
    try:
        res = run_likelihood_annealing(target, _smc_config(cfg), on_stage=sink)
    finally:
        fh.close()
    theta = spec.vector(res.posterior_mean)
    path = vf.filter_variance(spec, theta, y, sigma0, cfg["bound"], cfg["exp_input"])
    with (out / "variance_path.csv").open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "sigma2_hat", "omega_t"])
        for t, (s2, om) in enumerate(zip(path.sigma2, path.omega), start=1):
            w.writerow([t, repr(float(s2)), repr(float(om))])
    resid = y / np.sqrt(path.sigma2)
    report = {
        "command": "fit",
        "config": _public_config(cfg),
        "model": spec.family,
        "n_obs": int(y.size),
        "sigma0_sq": sigma0,
        "priors": priors_to_json(target.priors),
        "parameters": {n: {"mean": res.posterior_mean[n], "sd": res.posterior_sd[n]} for n in spec.names},
        "log_ml": res.log_ml,
        "n_stages": len(res.stage_trace),
        "stage_trace": [r.__dict__ for r in res.stage_trace],
        "in_sample_loglik_at_mean": path.loglik,
        "residual_diagnostics": _diagnose_series(resid, lags=10, qs=(10, 20, 30), warnings_out=[]),
    }
    _dump(report, out / "fit_report.json")
    print(f"{spec.family}: log ML = {res.log_ml:.3f} ({len(res.stage_trace)} stages) -> {out / 'fit_report.json'}")
    return EXIT_OK


FORECAST_KEYS = FIT_KEYS + ("n_data", "alpha", "realized")


def cmd_forecast(args):
    cfg = _resolve(args, FORECAST_KEYS)
    spec = ModelSpec(cfg["model"])
    dates, y = load_returns(cfg["data"])
    if cfg["t_in"] is None:
        raise UsageError("--t-in is required for forecasting")
    series = data_io.split(data_io.ReturnSeries(y), int(cfg["t_in"]))
    sigma0 = _sigma0(cfg, series.train)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    target = RechTarget(spec, series.values, sigma0, cfg["priors"], cfg["bound"], cfg["exp_input"])
    fh, sink = _trace_writer(out / "forecast_trace.jsonl")
    try:
        res = run_data_annealing(target, series.t_in, _smc_config(cfg), on_stage=sink)
    finally:
        fh.close()
    alpha = float(cfg["alpha"])
    records = scoring.ForecastRecords.build(res.sigma2_hat, series.test, alpha, t=res.t)
    write_records(out / "forecast_records.csv", records)
    proxies = _load_proxies(cfg["realized"], series.test)
    report = scoring.score_forecasts(records, alpha, proxies)
    body = {
        "command": "forecast",
        "config": _public_config(cfg),
        "model": spec.family,
        "t_in": series.t_in,
        "t_out": series.t_out,
        "sigma0_sq": sigma0,
        "in_sample_log_ml": res.warm_start.log_ml,
        "out_of_sample_log_predictive": res.log_predictive,
        "scores": report.to_json(),
        "final_posterior_mean": dict(zip(spec.names, map(float, res.posterior_mean[-1]))),
    }
    _dump(body, out / "forecast_report.json")
    print(f"{spec.family}: PPS = {report.pps:.4f}, #Vio = {report.n_violations}, "
          f"QS = {report.qs:.4f}, %Hit = {report.hit_pct:.4f}")
    return EXIT_OK


def write_records(path, records):
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "sigma2_hat", "y", "var_quantile"])
        for row in zip(records.t, records.sigma2_hat, records.y, records.var_quantile):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def read_records(path):
    p = _require_file(path, "forecast")
    cols = {"t": [], "sigma2_hat": [], "y": [], "var_quantile": []}
    with p.open(newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != list(cols):
            raise InvalidInput(f"{p}: expected header {','.join(cols)}")
        for row in reader:
            for k in cols:
                cols[k].append(float(row[k]))
    return scoring.ForecastRecords(np.array(cols["t"], dtype=int), cols["sigma2_hat"], cols["y"], cols["var_quantile"])


def _load_proxies(specs, test_returns, scale=True):
    proxies = {}
    for item in specs or []:
        kind, _, path = item.rpartition("=")
        kind = kind or Path(path).stem
        rv = data_io.read_realized(_require_file(path, "realized"), kind=kind)
        if len(rv) != len(test_returns):
            raise InvalidInput(f"realized measure {kind} has {len(rv)} values, expected {len(test_returns)}")
        proxies[kind] = data_io.scale_realized_measure(rv, test_returns).values if scale else rv.values
    return proxies


def cmd_simulate(args):
    dgp = args.dgp.upper().replace("Θ", "").replace("THETA", "")
    rng = np.random.default_rng(args.seed)
    T = args.T
    if dgp == "SIM1":
        spec = ModelSpec("GARCH")
        sim = vf.simulate(spec, spec.vector(SIM1_THETA), T or 2000, args.burnin or 0, 0.1, rng)
        params = SIM1_THETA
    elif dgp == "SIM2":
        sim = vf.simulate_sim2(T or 2000, args.burnin or 0, rng)
        params = None
    elif dgp.startswith("SIM3"):
        idx = int(dgp.split("-")[-1]) if "-" in dgp else 1
        if idx not in SIM3_THETAS:
            raise UsageError(f"unknown SIM3 parameter set {idx}")
        params = dict(SIM3_THETAS[idx])
        if args.garch_arm:
            params["beta1"] = 0.0
        spec = ModelSpec("SRN_GARCH")
        burnin = 7000 if args.burnin is None else args.burnin
        sim = vf.simulate(spec, spec.vector(params), T or 3000, burnin, 0.1, rng)
    elif dgp == "CUSTOM":
        if not args.model or not args.params:
            raise UsageError("custom DGP needs --model and --params")
        spec = ModelSpec(args.model)
        params = json.loads(Path(args.params).read_text()) if Path(args.params).exists() else json.loads(args.params)
        theta = spec.vector(params)
        if not in_support(spec, theta)[0]:
            raise InvalidInput(f"parameters outside the {spec.family} support")
        sim = vf.simulate(spec, theta, T or 2000, args.burnin or 0, args.sigma_init or 0.1, rng)
    else:
        raise UsageError(f"unknown DGP {args.dgp!r}; use SIM1, SIM2, SIM3-1..4 or custom")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    idx = range(1, sim.y.size + 1)
    data_io.write_two_column_csv(out / "data.csv", idx, sim.y)
    data_io.write_two_column_csv(out / "truth.csv", idx, sim.sigma2)
    _dump({"command": "simulate", "dgp": args.dgp, "seed": args.seed, "T": int(sim.y.size),
           "burnin": args.burnin, "parameters": params}, out / "simulate_report.json")
    print(f"wrote {sim.y.size} observations to {out / 'data.csv'}")
    return EXIT_OK


def cmd_score(args):
    alpha = args.alpha
    reports = {}
    for path in args.forecast:
        records = read_records(path)
        records.var_quantile = scoring.var_quantile(records.sigma2_hat, alpha)
        proxies = _load_proxies(args.realized, records.y)
        if args.truth:
            _, truth = data_io.read_two_column_csv(_require_file(args.truth, "truth"), "value")
            truth = truth[-len(records):] if truth.size > len(records) else truth
            if truth.size != len(records):
                raise InvalidInput("truth series shorter than the forecast window")
            proxies["truth"] = truth
        reports[str(path)] = scoring.score_forecasts(records, alpha, proxies)
    names = list(reports)
    pairs = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ra, rb = reports[a], reports[b]
            headline = scoring.count_winner(scoring.headline_scores(ra), scoring.headline_scores(rb), alpha)
            per_measure = {
                kind: scoring.count_winner(ra.realized_losses[kind], rb.realized_losses[kind])
                for kind in ra.realized_losses
            }
            pairs.append({"a": a, "b": b, "headline": list(headline),
                          "realized": {k: list(v) for k, v in per_measure.items()}})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump({"command": "score", "alpha": alpha, "reports": {k: r.to_json() for k, r in reports.items()},
           "count_winner": pairs}, out / "score_report.json")
    for k, r in reports.items():
        print(f"{k}: PPS={r.pps:.4f} #Vio={r.n_violations} QS={r.qs:.4f} %Hit={r.hit_pct:.4f}")
    return EXIT_OK


def cmd_compare(args):
    values = []
    for path in (args.report_a, args.report_b):
        rep = json.loads(_require_file(path, "report").read_text())
        if "log_ml" not in rep:
            raise UsageError(f"{path}: no log_ml field")
        values.append((rep.get("model", str(path)), float(rep["log_ml"])))
    (name_a, ml_a), (name_b, ml_b) = values
    bf, log_bf = bayes_factor(ml_a, ml_b)
    body = {
        "command": "compare",
        "model_a": name_a,
        "model_b": name_b,
        "log_ml_a": ml_a,
        "log_ml_b": ml_b,
        "log_bayes_factor": log_bf,
        "bayes_factor": bf if math.isfinite(bf) else "inf",
        "favours": "a" if log_bf > 0 else ("b" if log_bf < 0 else "neither"),
        "evidence": jeffreys_label(log_bf),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(body, out / "compare_report.json")
    print(f"log BF({name_a} vs {name_b}) = {log_bf:.3f}: {body['evidence']}")
    return EXIT_OK


def _diagnose_series(x, lags, qs, warnings_out):
    out = {}
    try:
        out["moments"] = diagnostics.sample_moments(x).to_json()
    except DegenerateInput as exc:
        x = np.asarray(x, dtype=float)
        out["moments"] = {"mean": float(x.mean()), "std": 0.0, "skewness": None, "kurtosis": None,
                          "min": float(x.min()), "max": float(x.max())}
        warnings_out.append(f"moments: {exc}")
    try:
        q, p = diagnostics.ljung_box(x, lags)
        out["ljung_box"] = {"lags": lags, "Q": q, "p_value": p}
    except (DegenerateInput, InvalidInput) as exc:
        warnings_out.append(f"ljung_box: {exc}")
    rs = {}
    for label, series in (("abs", np.abs(x)), ("squared", np.asarray(x) ** 2)):
        for q in qs:
            try:
                v, sig = diagnostics.lo_rs(series, q, return_verdict=True)
                rs[f"{label}_q{q}"] = {"V": v, "reject_5pct": sig}
            except (DegenerateInput, InvalidInput) as exc:
                warnings_out.append(f"lo_rs {label} q={q}: {exc}")
    out["lo_rs"] = rs
    return out


def cmd_diagnose(args):
    _, x = load_returns(args.data)
    warn = []
    body = {"command": "diagnose", "n": int(x.size), "lags": args.lags, "q": list(args.q)}
    body.update(_diagnose_series(x, args.lags, args.q, warn))
    if args.figarch:
        try:
            params, ll = diagnostics.fit_figarch_qmle(x, args.truncation_lag, region=args.figarch_region)
            body["figarch"] = {"params": params.to_json(), "qmle_loglik": ll, "truncation_lag": args.truncation_lag,
                               "region": args.figarch_region}
        except (DegenerateInput, OptimizationFailure) as exc:
            warn.append(f"figarch: {exc}")
    body["warnings"] = warn
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(body, out / "diagnose_report.json")
    for w in warn:
        print(f"warning: {w}", file=sys.stderr)
    print(f"diagnostics written to {out / 'diagnose_report.json'}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _add_common(p, forecast=False):
    p.add_argument("--config", help="JSON config; explicit flags override it")
    p.add_argument("--model", help="GARCH, GJR, EGARCH, SRN_GARCH, SRN_GJR or SRN_EGARCH")
    p.add_argument("--data", help="CSV with date,value returns or date,price prices")
    p.add_argument("--t-in", dest="t_in", type=int)
    p.add_argument("--particles", type=int)
    p.add_argument("--ess-frac", dest="ess_frac", type=float)
    p.add_argument("--moves", dest="n_data" if forecast else "n_lik", type=int,
                   help="MH moves per resampling stage")
    if forecast:
        p.add_argument("--lik-moves", dest="n_lik", type=int, help="MH moves for the warm-start fit")
    p.add_argument("--max-stages", dest="max_stages", type=int)
    p.add_argument("--sigma0-sq", dest="sigma0_sq", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")


def build_parser():
    parser = argparse.ArgumentParser(prog="rechvol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="likelihood-annealing SMC fit on the in-sample window")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="data-annealing SMC one-step forecasts")
    _add_common(p, forecast=True)
    p.add_argument("--realized", action="append", help="KIND=path of a realized measure (repeatable)")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("simulate", help="simulate SIM1, SIM2, SIM3-k or a custom model")
    p.add_argument("dgp", help="SIM1 | SIM2 | SIM3-1..4 | custom")
    p.add_argument("-T", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--garch-arm", action="store_true", help="SIM3 with beta1 = 0")
    p.add_argument("--model")
    p.add_argument("--params", help="JSON object or file with custom parameters")
    p.add_argument("--sigma-init", dest="sigma_init", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="score forecast records against realized measures")
    p.add_argument("--forecast", action="append", required=True, help="forecast_records.csv (repeatable)")
    p.add_argument("--realized", action="append", help="KIND=path of a realized measure (repeatable)")
    p.add_argument("--truth", help="CSV of true variances (simulation)")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("diagnose", help="moments, Ljung-Box, Lo R/S, optional FIGARCH")
    p.add_argument("--data", required=True)
    p.add_argument("--lags", type=int, default=10)
    p.add_argument("--q", type=int, nargs="+", default=[10, 20, 30])
    p.add_argument("--figarch", action="store_true")
    p.add_argument("--truncation-lag", dest="truncation_lag", type=int, default=1000)
    p.add_argument("--figarch-region", dest="figarch_region", choices=diagnostics.FIGARCH_REGIONS, default="sufficient")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("compare", help="Bayes factor between two fit reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    vf.set_threads(getattr(args, "threads", None))
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except (UsageError, InvalidInput, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, DegenerateInput, IncompleteAnneal, OptimizationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
