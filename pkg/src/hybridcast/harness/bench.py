"""Benchmark runner: the combos x budgets x seeds product, written as CSV."""
from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path

from ..formats import load_instance
from ..hybrid import run_pipeline
from ..workloads import generate
from .config import ExperimentConfig

__all__ = ["CSV_HEADER", "ResultRow", "run_benchmark", "sweep_budget", "write_csv",
           "read_csv", "format_rows", "thread_count"]

CSV_HEADER = ("workload", "algo", "heuristic", "mode", "direction", "budget", "seed", "n", "m",
              "k", "total_cost", "pct_of_perfect", "unicast_frac", "wall_time_ms", "moves",
              "error")


@dataclass
class ResultRow:
    workload: str
    algo: str
    heuristic: str
    mode: str
    direction: str
    budget: float
    seed: int
    n: int | None = None
    m: int | None = None
    k: int | None = None
    total_cost: float | None = None
    pct_of_perfect: float | None = None
    unicast_frac: float | None = None
    wall_time_ms: float | None = None
    moves: int | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    def cells(self) -> list[str]:
        def num(x, fmt):
            return "" if x is None else format(x, fmt)
        return [self.workload, self.algo, self.heuristic, self.mode, self.direction,
                format(self.budget, "g"), str(self.seed), num(self.n, "d"), num(self.m, "d"),
                num(self.k, "d"), "" if self.total_cost is None else repr(self.total_cost),
                num(self.pct_of_perfect, ".6f"), num(self.unicast_frac, ".6f"),
                num(self.wall_time_ms, ".3f"), num(self.moves, "d"), self.error]

    @classmethod
    def from_cells(cls, rec: dict) -> "ResultRow":
        kw = {}
        for f in fields(cls):
            v = rec.get(f.name, "")
            if f.name in ("workload", "algo", "heuristic", "mode", "direction", "error"):
                kw[f.name] = v
            elif v == "":
                kw[f.name] = None
            elif f.name in ("seed", "n", "m", "k", "moves"):
                kw[f.name] = int(v)
            else:
                kw[f.name] = float(v)
        return cls(**kw)


def thread_count() -> int:
    """Parallel runs allowed by ``CHAN_THREADS`` (default 1)."""
    raw = os.environ.get("CHAN_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"CHAN_THREADS must be an integer, got {raw!r}") from None


@lru_cache(maxsize=8)
def _instance(spec, path):
    return load_instance(path) if spec is None else generate(spec)


def _workload_id(cfg: ExperimentConfig, point) -> str:
    if point is not None:
        return f"scaling-{point}"
    if cfg.workload == "file":
        return Path(cfg.file).stem
    return cfg.workload


def _task(args) -> ResultRow:
    cfg, point, combo, budget, seed = args
    hcfg = combo.heuristic_config(budget, cfg.solver(combo, seed))
    row = ResultRow(_workload_id(cfg, point), combo.algo_name, combo.heuristic or "none",
                    hcfg.mode, hcfg.direction, budget, seed)
    try:
        inst = _instance(cfg.workload_spec(seed, point), cfg.file)
        row.n, row.m, row.k = inst.n, inst.m, inst.k
        t0 = time.perf_counter()
        res = run_pipeline(inst, hcfg)  # asserts feasibility and budget
        row.wall_time_ms = (time.perf_counter() - t0) * 1000.0
        row.total_cost = res.report.total
        row.pct_of_perfect = res.report.pct_of_perfect
        row.unicast_frac = res.unicast_fraction
        row.moves = res.moves
    except Exception as e:  # recorded, the run continues
        row.error = f"{type(e).__name__}: {e}".replace("\n", " ")
    return row


def _tasks(cfg: ExperimentConfig):
    for point in cfg.scaling or [None]:
        for combo in cfg.combos:
            for budget in cfg.budgets:
                for seed in cfg.seeds:
                    yield cfg, point, combo, budget, seed


def format_rows(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_csv(rows, path) -> None:
    Path(path).write_text(format_rows(rows), encoding="utf-8")


def read_csv(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: not a results CSV (unexpected header)")
        return [ResultRow.from_cells(rec) for rec in reader]


def run_benchmark(cfg: ExperimentConfig, out=None, threads: int | None = None) -> list[ResultRow]:
    """Run every (scaling point, combo, budget, seed) in config order.

    Rows come back, and are written, in that order whatever the parallelism.
    """
    cfg.validate()
    tasks = list(_tasks(cfg))
    threads = thread_count() if threads is None else threads
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as ex:
            rows = list(ex.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    out = out or cfg.csv
    if out:
        write_csv(rows, out)
    return rows


def sweep_budget(cfg: ExperimentConfig, budgets=None, out=None, chart=None):
    """Run ``cfg`` over a budget grid and chart cost against the budget.

    Returns ``(rows, chart_path)``; ``chart_path`` is None when no chart is asked for.
    """
    from .charts import render_chart
    if budgets is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "budgets": list(budgets)})
    rows = run_benchmark(cfg, out)
    chart = chart or cfg.chart
    if chart:
        render_chart(rows, "budget", chart)
    return rows, chart
