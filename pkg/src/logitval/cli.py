"""Command-line interface: ``logitval assess`` and ``logitval simulate``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 compute error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import EstimatorKind, EstimatorSpec, check_fittable
from .exceptions import ComputeError, DataError, LogitValError
from .fileio import ResultsRow, atomic_write_text, load_csv, render_report
from .metrics import MetricKind
from .resampling import Method, assess
from .simstudy import ScenarioConfig, run_scenario, summarize, winsorized_summary

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 0, 2, 3, 4

ESTIMATORS = [k.value for k in EstimatorKind]
METHODS = [m.value for m in Method]
METRICS = [m.value for m in MetricKind]
DEFAULT_METHODS = ["apparent", "loo", "lpo", "kfold", "enhboot", "632plus"]


class UsageError(LogitValError):
    pass


def _choices(values, allowed, flag):
    if not values:
        return None
    out = []
    for v in values:
        for token in v.split(","):
            token = token.strip().lower()
            if not token:
                continue
            if token not in allowed:
                raise UsageError(f"{flag}: unknown value {token!r}; choose from {', '.join(allowed)}")
            if token not in out:
                out.append(token)
    return out


def _fmt(v):
    return None if v is None or not np.isfinite(v) else float(v)


# --- assess -----------------------------------------------------------------------


def cmd_assess(args) -> int:
    estimators = _choices(args.estimator, ESTIMATORS, "--estimator") or ESTIMATORS
    explicit_methods = _choices(args.method, METHODS, "--method")
    methods = explicit_methods or DEFAULT_METHODS
    metrics = _choices(args.metric, METRICS, "--metric") or ["cstat"]
    if explicit_methods and "lpo" in methods and "brier" in metrics:
        raise UsageError("leave-pair-out CV is not supported for the Brier score; "
                         "drop 'lpo' or 'brier' from the selection")
    data = load_csv(args.data, args.outcome)
    check_fittable(data)
    rate = data.n_events / data.n
    rows = []
    for name in estimators:
        spec = EstimatorSpec(EstimatorKind(name))
        for r in assess(data, spec, methods, metrics, folds=args.folds, repetitions=args.reps,
                        bootstrap_count=args.boot, seed=args.seed):
            rows.append(ResultsRow(
                scenario_n=data.n, event_rate=rate, effect=None, estimator=name,
                method=r.method.value, metric=r.metric.value, statistic="value",
                value=_fmt(r.value), mcse=None, discarded=r.discarded_subsets,
                attempted=r.attempted_subsets, reason=r.failure,
            ))
    manifest = {
        "tool": f"logitval {__version__}",
        "command": "assess",
        "data_sha256": hashlib.sha256(Path(args.data).read_bytes()).hexdigest(),
        "seed": args.seed,
        "folds": args.folds, "reps": args.reps, "boot": args.boot,
    }
    _emit(rows, args.out, args.format, manifest)
    return EXIT_OK


def _emit(rows, out, fmt, manifest):
    text = render_report(rows, fmt, manifest)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


# --- simulate ---------------------------------------------------------------------

_LIST_KEYS = {"n", "event_rate", "effect", "estimators", "methods", "metrics"}
_INT_KEYS = {"replicates", "validation_size", "seed", "folds", "reps", "boot"}


def parse_config(text: str) -> dict:
    """Flat ``key=value`` text; list values are comma separated, ``#`` starts a comment."""
    cfg = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"config line {line_no}: expected key=value")
        if key in _LIST_KEYS:
            cfg[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in _INT_KEYS:
            try:
                cfg[key] = int(value)
            except ValueError:
                raise UsageError(f"config line {line_no}: {key} must be an integer") from None
        else:
            raise UsageError(f"config line {line_no}: unknown key {key!r}")
    return cfg


def _scenario_filter(spec: str) -> dict:
    out = {}
    for part in spec.split(","):
        key, _, value = part.partition("=")
        key = {"rate": "event_rate", "event_rate": "event_rate", "n": "n", "effect": "effect"}.get(key.strip())
        if key is None:
            raise UsageError(f"--scenario: cannot parse {part!r}; use n=..,rate=..,effect=..")
        try:
            out[key] = float(value)
        except ValueError:
            raise UsageError(f"--scenario: {part!r} is not numeric") from None
    return out


def build_scenarios(cfg: dict, filters=(), replicates=None) -> list[ScenarioConfig]:
    try:
        ns = [int(v) for v in cfg.get("n", ["50", "100"])]
        rates = [float(v) for v in cfg.get("event_rate", ["0.25", "0.5"])]
        effects = [float(v) for v in cfg.get("effect", ["0", "0.5", "1"])]
    except ValueError as exc:
        raise UsageError(f"config: {exc}") from None
    if replicates is not None and replicates < 2:
        raise UsageError("--replicates must be at least 2")
    kwargs = {
        "n_replicates": replicates or cfg.get("replicates", 1000),
        "validation_size": cfg.get("validation_size", 100_000),
        "base_seed": cfg.get("seed", 20200101),
    }
    scenarios = []
    for n in ns:
        for rate in rates:
            for effect in effects:
                try:
                    scenarios.append(ScenarioConfig(n, rate, effect, **kwargs))
                except ValueError as exc:
                    raise UsageError(f"invalid scenario n={n}, rate={rate}, effect={effect}: {exc}") from None
    parsed = [_scenario_filter(f) for f in filters]
    if parsed:
        def keep(sc):
            vals = {"n": sc.n, "event_rate": sc.event_rate, "effect": sc.effect_multiplier}
            return any(all(np.isclose(vals[k], v) for k, v in f.items()) for f in parsed)
        scenarios = [sc for sc in scenarios if keep(sc)]
        if not scenarios:
            raise UsageError("--scenario selects none of the configured scenarios")
    return scenarios


def summary_rows(run) -> list[ResultsRow]:
    """Long-format summary rows for one scenario run."""
    sc = run.scenario
    base = dict(scenario_n=sc.n, event_rate=sc.event_rate, effect=sc.effect_multiplier)
    rows = [ResultsRow(**base, estimator="all", method="full", metric="separation",
                       statistic="rate", value=run.separation_rate, attempted=len(run.separated))]
    estimators = list(dict.fromkeys(v.estimator for v in run.validation))
    for est in estimators:
        for metric in MetricKind:
            iv = run.iv_values(est, metric)
            rows.append(ResultsRow(**base, estimator=est, method="iv", metric=metric.value,
                                   statistic="mean", value=float(iv.mean()),
                                   mcse=float(iv.std(ddof=1) / np.sqrt(iv.size)) if iv.size > 1 else None))
            rows.append(ResultsRow(**base, estimator=est, method="iv", metric=metric.value,
                                   statistic="sd", value=float(iv.std(ddof=1)) if iv.size > 1 else None))
    cells = defaultdict(list)
    for r in run.records:
        cells[(r.estimator, r.method, r.metric)].append(r)
    for (est, method, metric), recs in cells.items():
        common = dict(base, estimator=est, method=method.value, metric=metric.value,
                      discarded=sum(r.discarded for r in recs), attempted=sum(r.attempted for r in recs))
        b = np.array([r.resampled for r in recs])
        ok = np.isfinite(b)
        missing = int((~ok).sum())
        reason = f"{missing} replicates without estimate" if missing else None
        rows.append(ResultsRow(**common, statistic="mean_resampled",
                               value=_fmt(b[ok].mean()) if ok.any() else None,
                               mcse=_fmt(b[ok].std(ddof=1) / np.sqrt(ok.sum())) if ok.sum() > 1 else None,
                               reason=reason))
        try:
            s = summarize(recs)
        except ComputeError as exc:
            rows.append(ResultsRow(**common, statistic="mean_diff", value=None, reason=str(exc)))
            rows.append(ResultsRow(**common, statistic="rmsd", value=None, reason=str(exc)))
            continue
        rows.append(ResultsRow(**common, statistic="mean_diff", value=s.mean_diff, mcse=s.mcse_mean, reason=reason))
        rows.append(ResultsRow(**common, statistic="rmsd", value=s.rmsd, mcse=s.mcse_rmsd, reason=reason))
        if metric is MetricKind.C_STATISTIC:
            w = winsorized_summary(recs)
            rows.append(ResultsRow(**common, statistic="winsorized_mean_diff", value=w.mean_diff,
                                   mcse=w.mcse_mean, reason=reason))
            rows.append(ResultsRow(**common, statistic="winsorized_rmsd", value=w.rmsd,
                                   mcse=w.mcse_rmsd, reason=reason))
    return rows


REPLICATE_COLUMNS = ("replicate", "scenario_n", "event_rate", "effect", "estimator", "method",
                     "metric", "resampled", "iv", "discarded", "attempted", "separated", "failure")


def replicate_table(runs) -> str:
    lines = [",".join(REPLICATE_COLUMNS)]
    for run in runs:
        sc = run.scenario
        for r in run.records:
            vals = [r.replicate, sc.n, sc.event_rate, sc.effect_multiplier, r.estimator, r.method.value,
                    r.metric.value, r.resampled, r.iv, r.discarded, r.attempted, int(r.separated_full),
                    r.failure or "NA"]
            lines.append(",".join("NA" if isinstance(v, float) and not np.isfinite(v) else
                                  (repr(v) if isinstance(v, float) else str(v)) for v in vals))
    return "\n".join(lines) + "\n"


_TABLE_METRIC = {"s2": MetricKind.C_STATISTIC, "s3": MetricKind.DISCRIMINATION_SLOPE,
                 "s4": MetricKind.BRIER_SCORE}


def pivot_table(rows, table: str) -> str:
    """Wide text table (values x100) in the layout of the validation/winsorization tables."""
    out = []
    if table in _TABLE_METRIC:
        metric = _TABLE_METRIC[table].value
        ests = list(dict.fromkeys(r.estimator for r in rows if r.method == "iv"))
        out.append("n\trate\teffect\t" + "\t".join(f"mean_{e}" for e in ests) + "\t"
                   + "\t".join(f"sd_{e}" for e in ests))
        keys = list(dict.fromkeys((r.scenario_n, r.event_rate, r.effect) for r in rows))
        for key in keys:
            look = {(r.estimator, r.statistic): r.value for r in rows
                    if (r.scenario_n, r.event_rate, r.effect) == key and r.method == "iv" and r.metric == metric}
            vals = [look.get((e, s)) for s in ("mean", "sd") for e in ests]
            out.append("\t".join(str(k) for k in key) + "\t"
                       + "\t".join("NA" if v is None else f"{100 * v:.2f}" for v in vals))
    elif table == "s6":
        meths = list(dict.fromkeys(r.method for r in rows if r.statistic == "winsorized_mean_diff"))
        out.append("n\trate\teffect\testimator\t" + "\t".join(f"diff_{m}" for m in meths) + "\t"
                   + "\t".join(f"rmsd_{m}" for m in meths))
        keys = list(dict.fromkeys((r.scenario_n, r.event_rate, r.effect, r.estimator) for r in rows
                                  if r.statistic == "winsorized_mean_diff"))
        for key in keys:
            look = {(r.method, r.statistic): r.value for r in rows
                    if (r.scenario_n, r.event_rate, r.effect, r.estimator) == key}
            vals = [look.get((m, s)) for s in ("winsorized_mean_diff", "winsorized_rmsd") for m in meths]
            out.append("\t".join(str(k) for k in key) + "\t"
                       + "\t".join("NA" if v is None else f"{100 * v:.2f}" for v in vals))
    else:
        raise UsageError(f"unknown table {table!r}")
    return "\n".join(out) + "\n"


def cmd_simulate(args) -> int:
    config_bytes = Path(args.config).read_bytes()
    cfg = parse_config(config_bytes.decode())
    scenarios = build_scenarios(cfg, args.scenario or (), args.replicates)
    estimators = _choices(cfg.get("estimators"), ESTIMATORS, "estimators") or ESTIMATORS
    methods = _choices(cfg.get("methods"), METHODS, "methods")
    if methods is None:
        methods = ["apparent", "loo", "lpo", "kfold", "enhboot", "632plus"]
    metrics = _choices(cfg.get("metrics"), METRICS, "metrics") or METRICS
    workers = args.workers or os.cpu_count() or 1

    runs = [
        run_scenario(sc, estimators, methods, metrics, folds=cfg.get("folds", 5),
                     repetitions=cfg.get("reps", 40), bootstrap_count=cfg.get("boot", 200),
                     workers=workers)
        for sc in scenarios
    ]
    rows = [row for run in runs for row in summary_rows(run)]
    digest = hashlib.sha256(config_bytes)
    digest.update(repr((sorted(args.scenario or ()), args.replicates)).encode())
    manifest = {
        "tool": f"logitval {__version__}",
        "command": "simulate",
        "seed": cfg.get("seed", 20200101),
        "config_sha256": digest.hexdigest(),
        "scenarios": len(scenarios),
        "replicates": scenarios[0].n_replicates,
    }
    text = render_report(rows, args.format, manifest)
    sidecar = None
    if args.per_replicate:
        sidecar = replicate_table(runs)
    atomic_write_text(args.out, text)
    if sidecar is not None:
        atomic_write_text(f"{args.out}.replicates.csv", sidecar)
    if args.table:
        sys.stdout.write(pivot_table(rows, args.table))
    return EXIT_OK


# --- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logitval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"logitval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("assess", help="optimism-corrected performance of a CSV dataset")
    a.add_argument("--data", required=True)
    a.add_argument("--outcome", required=True)
    a.add_argument("--estimator", action="append", help=f"one or more of {','.join(ESTIMATORS)}")
    a.add_argument("--method", action="append", help=f"one or more of {','.join(METHODS)}")
    a.add_argument("--metric", action="append", help=f"one or more of {','.join(METRICS)}")
    a.add_argument("--folds", type=int, default=5)
    a.add_argument("--reps", type=int, default=40)
    a.add_argument("--boot", type=int, default=200)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default="-")
    a.add_argument("--format", choices=["csv", "json"], default="csv")
    a.set_defaults(func=cmd_assess)

    s = sub.add_parser("simulate", help="run simulation scenarios from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--scenario", action="append", help="filter, e.g. n=50,rate=0.25,effect=1")
    s.add_argument("--replicates", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--per-replicate", action="store_true")
    s.add_argument("--table", choices=["s2", "s3", "s4", "s6"])
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "folds", 5) < 2 or getattr(args, "reps", 1) < 1 or getattr(args, "boot", 1) < 1:
        parser.error("--folds must be >= 2, --reps and --boot >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"logitval: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"logitval: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ComputeError, LogitValError, ValueError) as exc:
        print(f"logitval: compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
