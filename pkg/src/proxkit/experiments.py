"""Benchmark cells, the bound-verification suite and trace merging behind the CLI."""

from __future__ import annotations

import csv
import enum
import io
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from proxkit.core import ProxkitError
from proxkit.data import LabeledDataset
from proxkit.objective import LassoProblem
from proxkit.solvers import (
    AdamConfig,
    SolverConfig,
    adam_l1_solve,
    gd_solve,
    prox_gd_constant_solve,
    prox_gd_variable_solve,
)
from proxkit import theory

TRACE_COLUMNS = ("k", "F", "grad_norm", "lambda", "dist_to_opt", "elapsed_s")


class Method(str, enum.Enum):
    CONSTANT_PROX = "ConstantProx"
    VARIABLE_PROX = "VariableProx"
    ADAM_L1 = "AdamL1"


METHOD_FLAGS = {
    "prox-const": Method.CONSTANT_PROX,
    "prox-var": Method.VARIABLE_PROX,
    "adam": Method.ADAM_L1,
}


def run_method(name: str, p: LassoProblem, cfg: SolverConfig, acfg: AdamConfig = AdamConfig(), x_ref=None, on_record=None):
    if name == "gd":
        return gd_solve(p.with_alpha(0.0), cfg, x_ref, on_record)
    if name == "prox-const":
        return prox_gd_constant_solve(p, cfg, x_ref, on_record)
    if name == "prox-var":
        return prox_gd_variable_solve(p, cfg, x_ref, on_record)
    if name == "adam":
        return adam_l1_solve(p, cfg, acfg, x_ref, on_record)
    raise ValueError(f"unknown method {name!r}; expected gd, prox-const, prox-var or adam")


# -- benchmark ----------------------------------------------------------------------


@dataclass
class BenchmarkRow:
    method: Method
    d: int
    iterations: int
    time_seconds: float
    speed_iters_per_second: float
    repeats: int
    final_objective: float = float("nan")
    stop_reason: str = ""
    inverse_lipschitz: Optional[float] = None
    dataset: str = ""
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def bench_cell(
    ds: LabeledDataset,
    method: str,
    cfg: SolverConfig = SolverConfig(),
    acfg: AdamConfig = AdamConfig(),
    repeats: int = 7,
    label: str = "",
) -> BenchmarkRow:
    """Time ``repeats`` identical runs of one method on one dataset.

    The timed region is the whole solver call, which includes computing the
    Lipschitz constant for both proximal methods.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    tag = METHOD_FLAGS[method]
    d = ds.problem.d
    times = []
    result = None
    try:
        for _ in range(repeats):
            t0 = time.perf_counter()
            result = run_method(method, ds.problem, cfg, acfg, ds.ground_truth)
            times.append(time.perf_counter() - t0)
    except ProxkitError as exc:
        return BenchmarkRow(tag, d, 0, float("nan"), float("nan"), repeats, dataset=label, error=str(exc))
    mean = statistics.fmean(times)
    return BenchmarkRow(
        tag,
        d,
        result.iterations,
        mean,
        result.iterations / mean,
        repeats,
        result.final_objective,
        result.stop_reason.value,
        None if result.lipschitz is None else 1.0 / result.lipschitz,
        label,
    )


def run_benchmark(
    datasets: Sequence[tuple],
    methods: Sequence[str],
    cfg: SolverConfig = SolverConfig(),
    acfg: AdamConfig = AdamConfig(),
    repeats: int = 7,
    parallel: bool = False,
) -> list:
    """``datasets`` is a sequence of ``(label, LabeledDataset)`` pairs."""
    cells = [(label, ds, m) for label, ds in datasets for m in methods]
    if not parallel:
        return [bench_cell(ds, m, cfg, acfg, repeats, label) for label, ds, m in cells]
    # timings from concurrent cells compete for cores; only iteration counts stay meaningful
    with ThreadPoolExecutor() as pool:
        futures = [pool.submit(bench_cell, ds, m, cfg, acfg, repeats, label) for label, ds, m in cells]
        return [f.result() for f in futures]


BENCH_COLUMNS = ("dataset", "method", "d", "iterations", "time_s", "speed_it_per_s", "final_F", "stop_reason", "inv_L", "status")


def _bench_fields(r: BenchmarkRow) -> list:
    status = "ok" if not r.failed else f"failed: {r.error}"
    return [
        r.dataset,
        r.method.value,
        str(r.d),
        str(r.iterations),
        f"{r.time_seconds:.4f}",
        f"{r.speed_iters_per_second:.2f}",
        f"{r.final_objective:.8f}",
        r.stop_reason,
        "" if r.inverse_lipschitz is None else f"{r.inverse_lipschitz:.4f}",
        status,
    ]


def format_table(rows: Iterable[BenchmarkRow]) -> str:
    body = [list(BENCH_COLUMNS)] + [_bench_fields(r) for r in rows]
    widths = [max(len(line[i]) for line in body) for i in range(len(BENCH_COLUMNS))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(line, widths)) for line in body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def bench_csv(rows: Iterable[BenchmarkRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        w.writerow(_bench_fields(r))
    return buf.getvalue()


# -- bound verification ---------------------------------------------------------------

CHECK_NAMES = ("max-decrease", "gd-sublinear", "gd-geometric", "prox-lemma", "prox-sublinear", "prox-exponential")


@dataclass
class CheckOutcome:
    check: str
    status: str  # PASSED, FAILED or SKIPPED
    report: Optional[theory.BoundReport] = None
    reason: str = ""
    instance: str = ""

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "instance": self.instance,
            "reason": self.reason,
            "report": None if self.report is None else self.report.to_dict(),
        }


def random_instance(seed) -> LassoProblem:
    """Small random LASSO instance: d <= 20, m <= 500, planted sparse solution plus noise."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 21))
    m = int(rng.integers(max(2 * d, 10), 501))
    A = rng.standard_normal((m, d)) * rng.uniform(0.5, 2.0)
    x_true = np.where(rng.random(d) < 0.5, rng.standard_normal(d), 0.0)
    b = A @ x_true + 0.5 * rng.standard_normal(m)
    alpha = float(rng.uniform(0.005, 0.2))
    return LassoProblem(A, b, alpha)


def verify_problem(
    p: LassoProblem,
    checks: Sequence[str] = CHECK_NAMES,
    n_iters: int = 200,
    n_z: int = 20,
    seed=0,
    instance: str = "",
) -> list:
    """Run the compliant solver configurations on ``p`` and evaluate the requested bounds.

    Both solvers run with step 1/L for the true Lipschitz constant and without
    early stopping; references x* come from runs with a 100x larger budget.
    """
    unknown = set(checks) - set(CHECK_NAMES)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    cfg = SolverConfig(
        max_iters=n_iters, grad_tol=0.0, monotone_stop=False, lipschitz_mode="analytic", record_iterates=True
    )
    rng = np.random.default_rng(seed)
    mu_est = theory.estimate_strong_convexity(p)
    outcomes = []

    def outcome(name, fn):
        try:
            rep = fn()
        except theory.NotStronglyConvexError as exc:
            outcomes.append(CheckOutcome(name, "SKIPPED", reason=str(exc), instance=instance))
            return
        outcomes.append(CheckOutcome(name, "PASSED" if rep.passed else "FAILED", rep, instance=instance))

    gd_checks = [c for c in checks if c.startswith(("max-", "gd-"))]
    if gd_checks:
        smooth = p.with_alpha(0.0)
        x_star, _ = theory.reference_solution(smooth, 100 * n_iters)
        tr = gd_solve(smooth, cfg, x_ref=x_star).trace
        table = {
            "max-decrease": lambda: theory.check_max_decrease(smooth, tr),
            "gd-sublinear": lambda: theory.check_sublinear_gd(smooth, tr, x_star),
            "gd-geometric": lambda: theory.check_geometric_gd(smooth, tr, x_star, mu_est),
        }
        for name in gd_checks:
            outcome(name, table[name])

    prox_checks = [c for c in checks if c.startswith("prox-")]
    if prox_checks:
        x_star, F_star = theory.reference_solution(p, 100 * n_iters)
        tr = prox_gd_constant_solve(p, cfg, x_ref=x_star).trace
        spread = max(1.0, float(np.max(np.abs(x_star))))
        zs = [x_star + spread * rng.standard_normal(p.d) for _ in range(n_z - 1)] + [x_star]
        table = {
            "prox-lemma": lambda: theory.check_prox_descent_lemma(p, tr, zs),
            "prox-sublinear": lambda: theory.check_sublinear_prox(p, tr, x_star),
            "prox-exponential": lambda: theory.check_exponential_prox(p, tr, F_star, mu_est),
        }
        for name in prox_checks:
            outcome(name, table[name])
    order = {c: i for i, c in enumerate(CHECK_NAMES)}
    return sorted(outcomes, key=lambda o: order[o.check])


def random_suite(seed: int = 7, n_instances: int = 20, checks: Sequence[str] = CHECK_NAMES, n_iters: int = 200) -> list:
    outcomes = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_instances)):
        p = random_instance(child)
        outcomes += verify_problem(p, checks, n_iters=n_iters, seed=child, instance=f"random-{i} (d={p.d}, m={p.m})")
    return outcomes


def summarize_outcomes(outcomes: Sequence[CheckOutcome]) -> list:
    """Collapse per-instance outcomes to one line per check: status, worst slack, counts."""
    lines = []
    for name in CHECK_NAMES:
        mine = [o for o in outcomes if o.check == name]
        if not mine:
            continue
        ran = [o for o in mine if o.status != "SKIPPED"]
        failed = [o for o in ran if o.status == "FAILED"]
        if not ran:
            status = "SKIPPED"
        else:
            status = "FAILED" if failed else "PASSED"
        worst = max((o.report.worst_slack for o in ran), default=None)
        lines.append(
            {
                "check": name,
                "status": status,
                "instances": len(ran),
                "skipped": len(mine) - len(ran),
                "failed": len(failed),
                "worst_slack": worst,
                "reasons": sorted({o.reason for o in mine if o.reason}),
            }
        )
    return lines


# -- trace export ---------------------------------------------------------------------


@dataclass
class TraceRun:
    method: str
    dataset_id: str
    rows: list = field(default_factory=list)  # dicts keyed by TRACE_COLUMNS (strings)
    raw: str = ""


EXPORT_COLUMNS = ("method",) + TRACE_COLUMNS + ("F_gap", "gap_clipped")


def merge_traces(runs: Sequence[TraceRun], f_star: Optional[float] = None) -> list:
    """Stack traces keyed by method, adding a log-scale-safe gap F - F*.

    ``F*`` defaults to the smallest objective seen in any run. Gaps at or
    below machine epsilon are clipped to epsilon and flagged.
    """
    if not runs:
        raise ValueError("no runs to export")
    ids = {r.dataset_id for r in runs}
    if len(ids) > 1:
        raise ProxkitError(f"runs come from different datasets: {sorted(ids)}")
    if f_star is None:
        f_star = min(float(row["F"]) for r in runs for row in r.rows)
    eps = float(np.finfo(np.float64).eps)
    merged = []
    for r in runs:
        for row in r.rows:
            gap = float(row["F"]) - f_star
            clipped = gap <= eps
            merged.append(dict(row, method=r.method, F_gap=repr(eps if clipped else gap), gap_clipped=str(int(clipped))))
    return merged
