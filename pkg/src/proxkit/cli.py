"""``proxkit`` command line: gen, solve, bench, verify, export.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import platform
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from proxkit import __version__
from proxkit.core import NonFiniteError, ProxkitError
from proxkit.data import (
    DataError,
    SyntheticSpec,
    cache_dir,
    generate_synthetic,
    load_csv,
    read_binary,
    standardize,
    write_binary,
)
from proxkit.experiments import (
    CHECK_NAMES,
    EXPORT_COLUMNS,
    METHOD_FLAGS,
    TRACE_COLUMNS,
    TraceRun,
    bench_csv,
    format_table,
    merge_traces,
    random_suite,
    run_benchmark,
    run_method,
    summarize_outcomes,
    verify_problem,
)
from proxkit.objective import PowerIterationError
from proxkit.solvers import AdamConfig, SolverConfig

log = logging.getLogger("proxkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- config handling ----------------------------------------------------------------

SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
_FLOAT_KEYS = {"grad_tol", "lambda0", "mu0", "mu1", "eta_rho", "alpha", "adam_step", "adam_beta1", "adam_beta2", "adam_epsilon"}
_INT_KEYS = {"max_iters"}
_BOOL_KEYS = {"monotone_stop"}
_STR_KEYS = {"lipschitz_mode"}
CONFIG_KEYS = _FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys as in :data:`CONFIG_KEYS`."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            elif key in _BOOL_KEYS:
                if value.lower() not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                    raise ValueError(value)
                out[key] = value.lower() in ("true", "1", "yes", "on")
            else:
                out[key] = value
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


def _settings(args) -> dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    merged = {"alpha": 0.01}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _configs(settings: dict, method: str = ""):
    solver_kw = {k: v for k, v in settings.items() if k in SOLVER_KEYS}
    if method == "gd":
        solver_kw.setdefault("lipschitz_mode", "analytic")
    adam_kw = {k[len("adam_"):]: v for k, v in settings.items() if k.startswith("adam_")}
    try:
        return SolverConfig(**solver_kw), AdamConfig(**adam_kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_solver_flags(p):
    g = p.add_argument_group("solver settings (override --config, which overrides defaults)")
    g.add_argument("--config", help="key = value settings file")
    g.add_argument("--alpha", type=float, help="l1 weight (default 0.01)")
    g.add_argument("--max-iters", dest="max_iters", type=int, help="iteration budget N (default 1000)")
    g.add_argument("--grad-tol", dest="grad_tol", type=float, help="stop when |grad f| falls below this (default 0.001)")
    g.add_argument("--lambda0", type=float, help="initial variable step (default 0.1)")
    g.add_argument("--mu0", type=float, help="shrink-test factor (default 0.99)")
    g.add_argument("--mu1", type=float, help="shrink factor (default 0.95)")
    g.add_argument("--eta-rho", dest="eta_rho", type=float, help="growth schedule eta_k = rho^k (default 0.99)")
    g.add_argument("--lipschitz-mode", dest="lipschitz_mode", choices=("paper", "analytic"))
    g.add_argument("--no-monotone-stop", dest="monotone_stop", action="store_const", const=False)
    g.add_argument("--adam-step", dest="adam_step", type=float)


# -- dataset handling -----------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_dataset(path, alpha: float, target=None, do_standardize=False, log_target=False):
    """Return ``(dataset, identity)`` for a PXG1 binary or a CSV file."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if not target:
            raise UsageError("CSV datasets need --target")
        ds = load_csv(path, target, alpha=alpha, log_target=log_target)
        if do_standardize:
            ds, _ = standardize(ds)
        ident = {"kind": "csv", "path": str(path), "sha256": _sha256(path), "target": target, "standardized": do_standardize}
        return ds, ident
    rho = 0.5
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        rho = json.loads(sidecar.read_text(encoding="utf-8")).get("spec", {}).get("rho", 0.5)
    ds = read_binary(path, alpha=alpha, rho=rho)
    return ds, {"kind": "synthetic", "spec_key": ds.spec.key(), "spec": asdict(ds.spec)}


def _identity_key(ident: dict) -> str:
    return ident.get("spec_key") or ident.get("sha256") or json.dumps(ident, sort_keys=True)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _manifest(**extra) -> dict:
    out = {"software": f"proxkit {__version__}", "python": platform.python_version(), "numpy": np.__version__}
    out.update(extra)
    return out


# -- commands -------------------------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        spec = SyntheticSpec(args.d, args.m, args.s, args.seed, args.rho)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out) if args.out else cache_dir() / f"{spec.key()}.bin"
    ds = generate_synthetic(spec)
    write_binary(ds, out)
    manifest = _manifest(spec=asdict(spec), spec_key=spec.key(), sha256=_sha256(out), created=_now())
    out.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(out)
    return EXIT_OK


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def cmd_solve(args) -> int:
    settings = _settings(args)
    cfg, acfg = _configs(settings, args.method)
    ds, ident = load_dataset(args.dataset, settings["alpha"], args.target, args.standardize, args.log_target)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = args.name or args.method
    trace_path = out_dir / f"{stem}.trace.csv"
    result_path = out_dir / f"{stem}.result.json"
    started = _now()
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)

        def on_record(row):
            writer.writerow([row[0]] + [_fmt(v) for v in row[1:]])
            fh.flush()

        result = run_method(args.method, ds.problem, cfg, acfg, ds.ground_truth, on_record)
    payload = {
        "method": args.method,
        "result": result.summary(),
        "trace_csv": trace_path.name,
        "manifest": _manifest(
            dataset=ident,
            dataset_key=_identity_key(ident),
            solver=args.method,
            config={k: (v if not isinstance(v, np.ndarray) else v.tolist()) for k, v in asdict(cfg).items()},
            adam=asdict(acfg),
            alpha=settings["alpha"],
            started=started,
            finished=_now(),
        ),
    }
    result_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"{args.method}: {result.stop_reason.value} after {result.iterations} iterations, F = {result.final_objective:.10g}")
    print(f"wrote {result_path} and {trace_path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    settings = _settings(args)
    cfg, acfg = _configs(settings)
    if args.repeats < 1:
        raise UsageError("--repeats must be at least 1")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHOD_FLAGS]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from {sorted(METHOD_FLAGS)}")
    datasets = []
    for path in args.datasets:
        ds, _ = load_dataset(path, settings["alpha"], args.target, args.standardize)
        datasets.append((Path(path).name, ds))
    rows = run_benchmark(datasets, methods, cfg, acfg, args.repeats, args.parallel)
    if args.parallel:
        print("note: --parallel runs cells concurrently; times and speeds are not comparable", file=sys.stderr)
    print(format_table(rows))
    if args.csv:
        Path(args.csv).write_text(bench_csv(rows), encoding="utf-8")
    return EXIT_SOLVER if any(r.failed for r in rows) else EXIT_OK


def cmd_verify(args) -> int:
    checks = CHECK_NAMES
    if args.checks:
        checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
        bad = [c for c in checks if c not in CHECK_NAMES]
        if bad:
            raise UsageError(f"unknown checks {bad}; choose from {list(CHECK_NAMES)}")
    if args.random_suite == bool(args.dataset):
        raise UsageError("give either a dataset or --random-suite")
    if args.random_suite:
        outcomes = random_suite(args.seed, args.instances, checks, args.iters)
    else:
        ds, _ = load_dataset(args.dataset, args.alpha, args.target, args.standardize)
        outcomes = verify_problem(ds.problem, checks, n_iters=args.iters, seed=args.seed, instance=str(args.dataset))
    summary = summarize_outcomes(outcomes)
    for line in summary:
        worst = "n/a" if line["worst_slack"] is None else f"{line['worst_slack']:.3e}"
        extra = f" ({'; '.join(line['reasons'])})" if line["status"] == "SKIPPED" else ""
        print(
            f"{line['check']:<17} {line['status']:<7} instances={line['instances']} "
            f"skipped={line['skipped']} failed={line['failed']} worst_slack={worst}{extra}"
        )
    if args.json:
        doc = {"summary": summary, "outcomes": [o.to_dict() for o in outcomes]}
        Path(args.json).write_text(json.dumps(doc, indent=2, default=float) + "\n", encoding="utf-8")
    return EXIT_VERIFY if any(line["status"] == "FAILED" for line in summary) else EXIT_OK


def _read_run(result_path: Path) -> TraceRun:
    doc = json.loads(result_path.read_text(encoding="utf-8"))
    trace_path = result_path.parent / doc["trace_csv"]
    raw = trace_path.read_text(encoding="utf-8")
    rows = list(csv.DictReader(raw.splitlines()))
    return TraceRun(doc["method"], doc["manifest"]["dataset_key"], rows, raw)


def cmd_export(args) -> int:
    try:
        runs = [_read_run(Path(p)) for p in args.results]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read run outputs: {exc}") from None
    out = Path(args.out)
    if args.format == "csv" and len(runs) == 1 and args.f_star is None:
        out.write_text(runs[0].raw, encoding="utf-8")
        print(out)
        return EXIT_OK
    merged = merge_traces(runs, args.f_star)
    if args.format == "csv":
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, EXPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(merged)
    else:
        series = {}
        for row in merged:
            series.setdefault(row["method"], []).append({k: row[k] for k in EXPORT_COLUMNS if k != "method"})
        out.write_text(json.dumps({"dataset": runs[0].dataset_id, "series": series}, indent=2) + "\n", encoding="utf-8")
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proxkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"proxkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--out", help="output path (default $PROXKIT_CACHE/<spec-hash>.bin)")
    p.set_defaults(func=cmd_gen)

    def data_flags(q):
        q.add_argument("--target", help="target column for CSV datasets")
        q.add_argument("--standardize", action="store_true", help="z-score features and target of CSV data")

    p = sub.add_parser("solve", help="run one solver and write result JSON plus trace CSV")
    p.add_argument("dataset")
    p.add_argument("--method", required=True, choices=("gd", "prox-const", "prox-var", "adam"))
    p.add_argument("--out-dir", default=".")
    p.add_argument("--name", help="output file stem (default: method name)")
    p.add_argument("--log-target", action="store_true", help="log-transform the CSV target before standardising")
    data_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="benchmark solvers over datasets")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--methods", default="prox-const,prox-var")
    p.add_argument("--repeats", type=int, default=7)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--csv", help="also write the table as CSV")
    data_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="check the convergence bounds numerically")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--random-suite", action="store_true")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--checks", help=f"comma-separated subset of {','.join(CHECK_NAMES)}")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--json", help="write the full report as JSON")
    data_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="merge solve outputs into plot-ready series")
    p.add_argument("results", nargs="+", help="*.result.json files written by solve")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--f-star", dest="f_star", type=float, help="reference optimum for the gap column")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"proxkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"proxkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteError, PowerIterationError) as exc:
        print(f"proxkit: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ProxkitError as exc:
        print(f"proxkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
