"""Command-line front end.

Exit codes: 0 success, 2 configuration or validation failure, 3 numerical
failure during a run.
"""
import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bounds as bd
from .config import load_config
from .errors import ConfigError, NumericalError
from .examples import BenchmarkCase, reproduce_table
from .noise import generate_noise_sequence, noise_diagnostics

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _emit_rows(columns, rows, fmt, out):
    if fmt == "json":
        payload = [dict(zip(columns, (_json_value(v) for v in row))) for row in rows]
        text = json.dumps(payload, indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    _write(text, out)


def _emit_mapping(mapping, fmt, out):
    if fmt == "json":
        text = json.dumps({k: _json_value(v) for k, v in mapping.items()}, indent=1) + "\n"
    else:
        text = "".join(f"{k},{_fmt(v)}\n" for k, v in mapping.items())
        text = "key,value\n" + text
    _write(text, out)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _write(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load(args):
    cfg = load_config(args.config)
    if args.builtin is not None:
        cfg.problem.builtin = args.builtin
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.noise.seed = args.seed
    if getattr(args, "replications", None) is not None:
        cfg.ensemble.M = args.replications
    return cfg


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args):
    from .core import run_mann

    run = _load(args).resolve()
    trace = run_mann(run.problem, run.mann, run.noise)
    x_star = run.problem.known_fixed_point
    columns = ["n", "x_n", "xi_n"] + (["abs_error"] if x_star is not None else [])
    rows = []
    for n, x, xi in trace.states:
        row = [n, x, xi]
        if x_star is not None:
            row.append(abs(x - x_star))
        rows.append(row)
    _emit_rows(columns, rows, args.format, args.out)
    return EXIT_OK


def cmd_validate(args):
    run = _load(args).resolve(strict=False)
    report = bd.validate_hypotheses(run.problem, run.mann, run.params, run.consts)
    if args.format == "json":
        _write(report.to_json() + "\n", args.out)
    else:
        _write(report.render() + "\n", args.out)
    return EXIT_CONFIG if report.failed else EXIT_OK


def cmd_bound(args):
    run = _load(args).resolve()
    a, c = run.mann.a, run.problem.c
    rate = a * (1.0 - c)
    q = args.query
    if q == "epsilon":
        n = _require(args.n, "--n")
        result = {"epsilon": bd.rate_epsilon(n, a, c, run.params.rho, run.consts.delta)}
    elif q == "terms":
        n = _require(args.n, "--n")
        t1, t2, t3 = bd.tail_terms(n, run.params, run.consts, rate=rate, t3_form=run.t3_form)
        result = {"T1": t1, "T2": t2, "T3": t3, "sum": math.fsum((t1, t2, t3))}
    elif q == "n_sigma":
        sigma = _require(args.sigma, "--sigma")
        result = {"n_sigma": bd.find_n_sigma(sigma, run.params, run.consts, run.n_cap,
                                             rate=rate, t3_form=run.t3_form)}
    else:
        lam = _require(args.lam, "--lam")
        n = _require(args.n, "--n")
        s_n_sq = args.s_n_sq if args.s_n_sq is not None else run.consts.s_n_sq
        s_n_sq = _require(s_n_sq, "--s-n-sq (or bounds.s_n_sq)")
        result = {"fuk_nagaev": bd.fuk_nagaev_bound(
            lam, run.consts.r, n, s_n_sq, run.consts.c_fn, run.params.beta, run.params.p)}
    _emit_mapping(result, args.format, args.out)
    return EXIT_OK


def _require(value, flag):
    if value is None:
        raise ConfigError(f"this query needs {flag}")
    return value


def cmd_bench(args):
    run = _load(args).resolve()
    if run.case is None:
        raise ConfigError("bench needs a builtin problem (golden or kepler)")
    if run.M < 30:
        raise ConfigError(f"bench needs at least 30 replications, got M={run.M}")
    case = BenchmarkCase(run.case.name, run.problem, run.mann, run.noise,
                         run.case.reference_rows, run.case.reference_successive)
    rows, _ = reproduce_table(case, run.M, threads=args.threads)
    columns = ["n", "median_error", "published_error", "ratio", "median_successive", "published_successive"]
    _emit_rows(columns, [list(asdict(r).values()) for r in rows], args.format, args.out)
    series = args.series
    if series is None and args.out not in (None, "-"):
        out = Path(args.out)
        series = out.with_name(out.stem + "_series.csv")
    if series is not None:
        _emit_rows(["n", "median_error"], [[r.n, r.median_error] for r in rows], "csv", series)
    return EXIT_OK


def cmd_noise_diag(args):
    run = _load(args).resolve(strict=False)
    xi = generate_noise_sequence(run.noise, args.samples)
    diag = noise_diagnostics(xi, p=args.p, max_lag=args.max_lag)
    result = {
        "samples": diag.sample_size,
        "phi": run.noise.phi,
        "mean": diag.empirical_mean,
        "variance": diag.empirical_variance,
        "stationary_variance": run.noise.stationary_variance,
        "p": diag.p,
        "tail_ratio_sup": diag.tail_ratio_sup,
        "tail_argmax": diag.tail_argmax,
    }
    for k, v in enumerate(diag.lag_autocorrelations):
        result[f"acf_{k}"] = v
    _emit_mapping(result, args.format, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--builtin", choices=["golden", "kepler"], help="builtin problem")
    common.add_argument("--seed", type=int, help="override noise.seed")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--replications", type=int, help="override ensemble.M")
    common.add_argument("--threads", type=int, help="worker threads (default MANNMIX_THREADS or CPU count)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. mann.n_max=10000")

    parser = argparse.ArgumentParser(prog="mannmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="run one stochastic Mann trace")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", parents=[common], help="check hypotheses H1-H5")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bound", parents=[common], help="evaluate a theoretical bound")
    p.add_argument("query", choices=["epsilon", "terms", "n_sigma", "fuk_nagaev"])
    p.add_argument("--n", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--s-n-sq", dest="s_n_sq", type=float)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("bench", parents=[common], help="reproduce a benchmark table")
    p.add_argument("--series", help="log-log series file (default <out>_series.csv)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("noise-diag", parents=[common], help="diagnostics of the error sequence")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--p", type=float, default=3.0)
    p.add_argument("--max-lag", type=int, default=10)
    p.set_defaults(func=cmd_noise_diag)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mannmix: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"mannmix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
