"""Command-line interface: ``wassar <command> [options]``.

Every command writes its output file(s) plus ``<output>.manifest.json``.
Options may also come from ``--config FILE`` (``key = value`` lines);
explicit flags win over the file, which wins over built-in defaults.

Exit codes: 0 ok, 2 usage, 3 data error, 4 numerical failure.
"""

import argparse
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .errors import DataError, NumericalError, WassarError
from .ffwar import FfwarFit, fit_ffwar
from .forecast import DEFAULT_U_POINTS, forecast_multi, resolve_u_grid
from .grid import (
    DensitySeries,
    density_to_quantile,
    kde_estimate,
    probability_grid,
    silverman_bandwidth,
    support_grid,
)
from .metrics import METRICS, REPORT_METRICS
from .selection import (
    DEFAULT_FRACTIONS,
    DEFAULT_ORDERS,
    INTRADAY_WINDOWS,
    choose_ffwar,
    choose_order_window,
    score_cells,
)
from .simulate import InnovationModel, SimConfig, replicate_estimates, simulate_war
from .war import WarFit, acf_asymptotic_covariance, fit_war, wasserstein_acf

log = logging.getLogger("wassar")


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# --- option parsing helpers -------------------------------------------------

def float_list(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def int_range(text):
    """``"1:10"`` (inclusive) or ``"1,2,5"``."""
    text = str(text)
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range like 1:10 or a list like 20,62, got {text!r}")


def metric_list(text):
    tags = list(REPORT_METRICS) if text == "all" else [t.strip() for t in str(text).split(",") if t.strip()]
    bad = [t for t in tags if t not in METRICS]
    if bad or not tags:
        raise argparse.ArgumentTypeError(f"unknown metric(s) {bad}; choose from {', '.join(METRICS)} or 'all'")
    return tags


def bandwidth(text):
    if text == "silverman":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("bandwidth must be 'silverman' or a positive number")


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment; keys may use ``-`` or ``_``."""
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError("bad-config", f"{path} line {i}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip("\"'")
    return out


def _truthy(value):
    if isinstance(value, bool):
        return value
    return str(value).lower() in ("1", "true", "yes", "on")


# --- commands ---------------------------------------------------------------

def cmd_densify(args):
    rows = io.read_raw_samples(args.input)
    kept = []
    for label, x in rows:
        x = x[np.isfinite(x)]
        if np.unique(x).size < 2:
            log.warning("row %s skipped: fewer than 2 distinct samples", label)
            continue
        kept.append((label, x))
    if not kept:
        raise DataError("empty-series", "no row has at least 2 distinct samples")
    bws = [silverman_bandwidth(x) if args.bandwidth == "silverman" else args.bandwidth for _, x in kept]
    if args.clip:
        if len(args.clip) != 2 or not args.clip[0] < args.clip[1]:
            raise DataError("bad-clip", "--clip takes lo,hi with lo < hi")
        lo, hi = args.clip
    else:
        lo = min(x.min() - 4 * h for (_, x), h in zip(kept, bws))
        hi = max(x.max() + 4 * h for (_, x), h in zip(kept, bws))
    u_grid = support_grid(lo, hi, args.u_points)
    s_grid = probability_grid(args.grid)
    labels, quantiles, dens = [], [], []
    for (label, x), h in zip(kept, bws):
        f = kde_estimate(x, u_grid, h)
        labels.append(label)
        dens.append(f.values)
        quantiles.append(density_to_quantile(f, s_grid))
    series = DensitySeries.from_quantiles(quantiles, labels)
    io.write_series(args.output, series)
    outputs = [args.output]
    if args.density_output:
        io.write_densities(args.density_output, u_grid.points, labels, dens)
        outputs.append(args.density_output)
    return outputs, {"rows_in": len(rows), "rows_out": len(kept)}


def _sim_config(args):
    model = InnovationModel(args.innovation, args.eta_sd, args.delta_bound, args.eta_dist)
    return SimConfig(tuple(args.beta), model, args.n, args.burn_in, probability_grid(args.grid), seed=args.seed)


def cmd_simulate(args):
    config = _sim_config(args)
    if args.reps > 1 or args.estimate_order:
        order = args.estimate_order or len(config.beta)
        est = replicate_estimates(config, order, args.reps, args.jobs)
        with open(args.output, "w") as fh:
            fh.write("replicate," + ",".join(f"beta_{j}" for j in range(1, order + 1)) + "\n")
            for r, row in enumerate(est):
                fh.write(f"{r}," + ",".join(io.fmt(b) for b in row) + "\n")
        return [args.output], {"reps": args.reps, "order": order}
    series = simulate_war(config, args.replicate)
    io.write_series(args.output, series)
    return [args.output], {"replicate": args.replicate}


def cmd_fit(args):
    series = io.read_series(args.input)
    if args.method == "ffwar":
        fit = fit_ffwar(series, args.order, args.R)
        d = fit.to_dict()
        info = {"n_components": 0 if fit.basis is None else fit.basis.n_components}
    else:
        fit = fit_war(series, args.order, inference=True, allow_degenerate=True)
        d = {"method": "war", **fit.to_dict()}
        info = {"beta": fit.beta.tolist(), "causal": fit.causal}
        if not np.any(fit.beta) and fit.innovation_stats is None:
            log.warning("series has no Wasserstein variance; forecasts equal the mean")
    io.write_json(args.output, d)
    return [args.output], info


def load_fit(path):
    d = io.read_json(path)
    if d.get("method") == "ffwar":
        return FfwarFit.from_dict(d)
    return WarFit.from_dict(d)


def cmd_forecast(args):
    fit = load_fit(args.fit)
    series = io.read_series(args.input)
    u_grid = None
    if args.u_range:
        if len(args.u_range) != 2 or not args.u_range[0] < args.u_range[1]:
            raise DataError("bad-range", "--u-range takes lo,hi with lo < hi")
        u_grid = support_grid(args.u_range[0], args.u_range[1], args.u_points)
    elif args.u_points != DEFAULT_U_POINTS:
        lo, hi = float(series.values.min()), float(series.values.max())
        u_grid = resolve_u_grid(None, lo, hi, args.u_points)
    fcs = forecast_multi(fit, series, args.steps, u_grid, args.smooth)
    grid = fcs[0].u_grid
    labels = [f"step_{f.horizon}" for f in fcs]
    io.write_densities(args.output, grid.points, labels, [f.density.values for f in fcs])
    outputs = [args.output]
    if args.cdf_output:
        io.write_densities(args.cdf_output, grid.points, labels, [f.cdf for f in fcs])
        outputs.append(args.cdf_output)
    if args.quantile_output:
        io.write_series(args.quantile_output,
                        DensitySeries(fit.grid, np.stack([f.quantile.values for f in fcs]), labels))
        outputs.append(args.quantile_output)
    return outputs, {"monotone_transport": [bool(f.monotone_transport) for f in fcs]}


def cmd_acf(args):
    series = io.read_series(args.input)
    n = len(series)
    rho = wasserstein_acf(series, args.max_lag)
    lags = np.arange(1, args.max_lag + 1)
    cols = [lags, rho]
    head = ["lag", "acf"]
    info = {}
    if args.ci:
        fit = fit_war(series, args.order, inference=True)
        cov = acf_asymptotic_covariance(fit, args.max_lag)
        half = 1.96 * np.sqrt(np.maximum(np.diag(cov), 0.0) / n)
        cols += [rho - half, rho + half]
        head += ["lower", "upper"]
        info["ci_order"] = args.order
    with open(args.output, "w") as fh:
        fh.write(",".join(head) + "\n")
        for row in zip(*cols):
            fh.write(f"{int(row[0])}," + ",".join(io.fmt(x) for x in row[1:]) + "\n")
    return [args.output], info


def _metric_path(output, metric, many):
    if not many:
        return Path(output)
    p = Path(output)
    return p.with_name(f"{p.stem}_{metric}{p.suffix}")


def cmd_backtest(args):
    series = io.read_series(args.input)
    if args.method == "ffwar":
        cells = [("ffwar", 1, K, R) for R in sorted(set(args.fractions)) for K in sorted(set(args.windows))]
    else:
        orders = sorted(set(args.orders) | {1})
        cells = [("war", p, K, None) for K in sorted(set(args.windows)) for p in orders]
    tables = score_cells(series, cells, args.metric, args.u_points, args.jobs)
    outputs, selection = [], {}
    many = len(args.metric) > 1
    for m in args.metric:
        table = tables[m]
        if args.method == "war":
            table = [r for r in table if r.p in set(args.orders)]
        if not table:
            raise DataError("infeasible", f"no candidate has enough history (n={len(series)})")
        path = _metric_path(args.output, m, many)
        io.write_scores(path, table)
        outputs.append(str(path))
        if args.method == "ffwar":
            R_hat, K_hat = choose_ffwar(tables[m])
            selection[m] = {"p": 1, "K": K_hat, "R": R_hat}
        else:
            p_hat, K_hat = choose_order_window(tables[m], set(args.orders))
            selection[m] = {"p": p_hat, "K": K_hat}
        bad = sum(len(r.diagnostics) > 0 for r in table)
        if bad:
            log.warning("%s: %d cell(s) had failed steps scored as inf", m, bad)
    print(json.dumps(selection))
    return outputs, {"selection": selection}


# --- parser -----------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="key = value file with defaults for this command")
    p.add_argument("--output", "-o", help="output file")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for replicates and grid cells")
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="wassar", description="Wasserstein autoregression for density time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("densify", help="kernel density estimates of raw samples, converted to quantiles")
    _common(p)
    p.add_argument("--input", "-i", help="raw-sample CSV")
    p.add_argument("--grid", type=int, default=100, help="probability-grid subintervals")
    p.add_argument("--u-points", type=int, default=512)
    p.add_argument("--bandwidth", type=bandwidth, default="silverman")
    p.add_argument("--clip", type=float_list, help="support range lo,hi for the KDE grid")
    p.add_argument("--density-output", help="also write the KDE densities")
    p.set_defaults(func=cmd_densify, needs=("input", "output"))

    p = sub.add_parser("simulate", help="simulate a stationary WAR(p) series")
    _common(p)
    p.add_argument("--beta", type=float_list, help="comma-separated coefficients")
    p.add_argument("--innovation", default="constant", help="constant|linear|sinusoidal (or const|lin|sin)")
    p.add_argument("--eta-sd", type=float, default=1.0)
    p.add_argument("--eta-dist", default="normal", choices=["normal", "uniform"])
    p.add_argument("--delta-bound", type=float, default=0.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--replicate", type=int, default=0, help="replicate index (random stream)")
    p.add_argument("--reps", type=int, default=1, help="with > 1, write beta estimates per replicate")
    p.add_argument("--estimate-order", type=int, default=0, help="order fitted to each replicate")
    p.set_defaults(func=cmd_simulate, needs=("beta", "output"))

    p = sub.add_parser("fit", help="fit WAR(p) or FFWAR(p) to a series CSV")
    _common(p)
    p.add_argument("--input", "-i")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--method", choices=["war", "ffwar"], default="war")
    p.add_argument("--R", type=float, default=0.99, help="FPCA variance fraction (ffwar)")
    p.set_defaults(func=cmd_fit, needs=("input", "output"))

    p = sub.add_parser("forecast", help="density forecasts from a fitted model")
    _common(p)
    p.add_argument("--fit", help="fit JSON")
    p.add_argument("--input", "-i", help="series CSV holding the latest observations")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--u-points", type=int, default=DEFAULT_U_POINTS)
    p.add_argument("--u-range", type=float_list, help="support grid range lo,hi")
    p.add_argument("--smooth", action="store_true", help="width-3 moving average on the density")
    p.add_argument("--cdf-output")
    p.add_argument("--quantile-output")
    p.set_defaults(func=cmd_forecast, needs=("fit", "input", "output"))

    p = sub.add_parser("acf", help="Wasserstein autocorrelations")
    _common(p)
    p.add_argument("--input", "-i")
    p.add_argument("--max-lag", type=int, default=10)
    p.add_argument("--ci", action="store_true", help="asymptotic 95%% bands under a fitted WAR model")
    p.add_argument("--order", type=int, default=1, help="WAR order behind the bands")
    p.set_defaults(func=cmd_acf, needs=("input", "output"))

    p = sub.add_parser("backtest", help="rolling one-step backtest score table")
    _common(p)
    p.add_argument("--input", "-i")
    p.add_argument("--method", choices=["war", "ffwar"], default="war")
    p.add_argument("--orders", type=int_range, default=list(DEFAULT_ORDERS))
    p.add_argument("--windows", type=int_range, default=list(INTRADAY_WINDOWS))
    p.add_argument("--fractions", type=float_list, default=list(DEFAULT_FRACTIONS))
    p.add_argument("--metric", type=metric_list, default=["kld"], help="tag, comma list, or 'all'")
    p.add_argument("--u-points", type=int, default=256)
    p.set_defaults(func=cmd_backtest, needs=("input", "output"))
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise DataError("io-error", str(exc)) from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(unknown)}")
        for key, value in cfg.items():
            if known[key].nargs == 0:
                cfg[key] = _truthy(value)
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    missing = [k for k in args.needs if getattr(args, k) in (None, "")]
    if missing:
        parser.error("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return args


def _manifest(args, argv, outputs, info, wall):
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "needs")}
    return {
        "command": args.command,
        "argv": list(argv),
        "flags": flags,
        "seed": args.seed,
        "inputs": [str(getattr(args, k)) for k in ("input", "fit", "config") if getattr(args, k, None)],
        "outputs": [str(o) for o in outputs],
        "version": _version(),
        "wall_time_s": wall,
        **info,
    }


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except WassarError as exc:
        return _fail(exc.code, str(exc), exc.exit_code)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="wassar: %(levelname)s: %(message)s")
    start = time.perf_counter()
    try:
        outputs, info = args.func(args)
    except WassarError as exc:
        return _fail(exc.code, str(exc), exc.exit_code)
    except (OSError, ValueError) as exc:
        return _fail("io-error" if isinstance(exc, OSError) else "bad-input", str(exc), DataError.exit_code)
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail("numerical-failure", str(exc), NumericalError.exit_code)
    wall = time.perf_counter() - start
    for out in outputs:
        io.write_json(io.manifest_path(out), _manifest(args, argv, outputs, info, wall))
    return 0


def _fail(code, message, exit_code):
    sys.stderr.write(json.dumps({"error": code, "message": message, "exit_code": exit_code}) + "\n")
    return exit_code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
