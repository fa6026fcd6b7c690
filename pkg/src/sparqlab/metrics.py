"""Comparison-table metrics, recomputable from saved run logs alone.

One MetricsRow summarizes one gate kind across its seeds: final success rate
(mean +/- std over pooled final-evaluation episodes), budget use, return after
query costs, queries per successful evaluation episode, and the final grasp
distance (median +/- MAD). ``build_table`` derives every number from the CSV
files a run leaves behind, so the emitted table can always be reproduced from
disk bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

EVENT_COLUMNS = ["step", "episode", "kind", "query", "reason", "budget_remaining",
                 "cooldown", "delta_j", "r_env", "f", "r_eff", "done"]
CURVE_COLUMNS = ["timestep", "success_rate", "queries_per_episode"]
EVAL_COLUMNS = ["timestep", "episode", "success", "final_dist", "episode_return"]
TABLE_COLUMNS = ["method", "success_rate", "success_std", "budget_pct",
                 "cost_adjusted_return", "queries_per_success",
                 "final_dist_median", "final_dist_mad", "seeds", "runs_completed"]


@dataclass(frozen=True, eq=False)
class MetricsRow:
    method: str
    success_rate: float
    success_std: float
    budget_pct: float
    cost_adjusted_return: float
    queries_per_success: float
    final_dist_median: float
    final_dist_mad: float
    seeds: str
    runs_completed: int

    def __eq__(self, other) -> bool:
        # NaN cells (e.g. queries/success with zero successes) compare equal,
        # so emit/parse round-trips are identities.
        if not isinstance(other, MetricsRow):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, float) and isinstance(b, float):
                if a != b and not (math.isnan(a) and math.isnan(b)):
                    return False
            elif a != b:
                return False
        return True


def median_mad(values: np.ndarray) -> tuple[float, float]:
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    return med, mad


def cost_adjusted_return(returns, total_queries: int, c: float) -> float:
    """Summed evaluation-episode returns minus the cost of all training queries."""
    if c < 0:
        raise ValueError("query cost must be >= 0")
    return float(np.sum(returns)) - c * total_queries


@dataclass
class RunLog:
    """The parts of one run's on-disk logs the table needs."""
    method: str
    seed: int
    total_steps: int
    total_queries: int
    final_eval_successes: np.ndarray
    final_eval_dists: np.ndarray
    all_eval_successes: np.ndarray
    all_eval_returns: np.ndarray
    query_cost: float


def read_events_summary(path: Path) -> tuple[int, int]:
    """(total steps, total queries) from an events file."""
    steps = 0
    queries = 0
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            steps += 1
            queries += int(row["query"])
    return steps, queries


def read_evals(path: Path) -> dict[str, np.ndarray]:
    timesteps, successes, dists, returns = [], [], [], []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            timesteps.append(int(row["timestep"]))
            successes.append(int(row["success"]))
            dists.append(float(row["final_dist"]))
            returns.append(float(row["episode_return"]))
    return {
        "timestep": np.array(timesteps),
        "success": np.array(successes),
        "final_dist": np.array(dists),
        "episode_return": np.array(returns),
    }


def load_run_log(log_dir: Path, run_hash: str, method: str, seed: int,
                 query_cost: float) -> RunLog:
    stem = f"{run_hash}_{method}_{seed}"
    steps, queries = read_events_summary(log_dir / f"run_{stem}.events.csv")
    evals = read_evals(log_dir / f"evals_{stem}.csv")
    last_t = evals["timestep"].max()
    final_mask = evals["timestep"] == last_t
    return RunLog(
        method=method,
        seed=seed,
        total_steps=steps,
        total_queries=queries,
        final_eval_successes=evals["success"][final_mask],
        final_eval_dists=evals["final_dist"][final_mask],
        all_eval_successes=evals["success"],
        all_eval_returns=evals["episode_return"],
        query_cost=query_cost,
    )


def summarize_run(log: RunLog) -> dict[str, float]:
    return {
        "final_success_rate": float(np.mean(log.final_eval_successes)),
        "budget_pct": 100.0 * log.total_queries / log.total_steps,
        "cost_adjusted_return": cost_adjusted_return(
            log.all_eval_returns, log.total_queries, log.query_cost),
        "total_queries": float(log.total_queries),
    }


def build_row(method: str, logs: list[RunLog]) -> MetricsRow:
    successes = np.concatenate([log.final_eval_successes for log in logs])
    dists = np.concatenate([log.final_eval_dists for log in logs])
    budget_pcts = [100.0 * log.total_queries / log.total_steps for log in logs]
    cost_adj = [cost_adjusted_return(log.all_eval_returns, log.total_queries,
                                     log.query_cost) for log in logs]
    total_queries = sum(log.total_queries for log in logs)
    total_successes = int(sum(int(log.all_eval_successes.sum()) for log in logs))
    if total_queries == 0:
        qps = 0.0
    elif total_successes == 0:
        qps = math.nan
    else:
        qps = total_queries / total_successes
    med, mad = median_mad(dists)
    return MetricsRow(
        method=method,
        success_rate=float(np.mean(successes)),
        success_std=float(np.std(successes)),
        budget_pct=float(np.mean(budget_pcts)),
        cost_adjusted_return=float(np.mean(cost_adj)),
        queries_per_success=float(qps),
        final_dist_median=med,
        final_dist_mad=mad,
        seeds=" ".join(str(log.seed) for log in logs),
        runs_completed=len(logs),
    )


def build_table(log_dir: Path, run_hash: str, methods: list[str], seeds: list[int],
                query_cost: float) -> list[MetricsRow]:
    """Recompute the comparison table from saved logs; missing runs are skipped.

    Rows are emitted in alphabetical method order so rebuilding from disk
    reproduces the original file byte for byte regardless of request order.
    """
    rows = []
    for method in sorted(set(methods)):
        logs = []
        for seed in seeds:
            try:
                logs.append(load_run_log(log_dir, run_hash, method, seed, query_cost))
            except FileNotFoundError:
                continue
        if logs:
            rows.append(build_row(method, logs))
        else:
            rows.append(MetricsRow(method=method, success_rate=math.nan,
                                   success_std=math.nan, budget_pct=math.nan,
                                   cost_adjusted_return=math.nan,
                                   queries_per_success=math.nan,
                                   final_dist_median=math.nan, final_dist_mad=math.nan,
                                   seeds="", runs_completed=0))
    return rows


def emit_table(rows: list[MetricsRow], path: Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow([repr(getattr(row, c)) if isinstance(getattr(row, c), float)
                             else getattr(row, c) for c in TABLE_COLUMNS])


def parse_table(path: Path) -> list[MetricsRow]:
    rows = []
    float_fields = {f.name for f in fields(MetricsRow)
                    if f.type in ("float", float)}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != TABLE_COLUMNS:
            raise ValueError(f"unexpected table columns: {reader.fieldnames}")
        for raw in reader:
            kwargs = {}
            for key, value in raw.items():
                if key in float_fields:
                    kwargs[key] = float(value)
                elif key == "runs_completed":
                    kwargs[key] = int(value)
                else:
                    kwargs[key] = value
            rows.append(MetricsRow(**kwargs))
    return rows


def format_table(rows: list[MetricsRow]) -> str:
    """Fixed-width text table for the console."""
    header = (f"{'method':<10} {'success':>16} {'budget %':>9} {'cost-adj':>10} "
              f"{'q/success':>10} {'final dist':>19} {'runs':>5}")
    lines = [header, "-" * len(header)]
    for r in rows:
        if r.runs_completed == 0:
            lines.append(f"{r.method:<10} {'(no completed runs)':>16}")
            continue
        lines.append(
            f"{r.method:<10} {r.success_rate:>7.3f} +/- {r.success_std:<5.3f} "
            f"{r.budget_pct:>8.1f}% {r.cost_adjusted_return:>10.1f} "
            f"{r.queries_per_success:>10.2f} "
            f"{r.final_dist_median:>9.4f} +/- {r.final_dist_mad:<7.4f} "
            f"{r.runs_completed:>4}"
        )
    return "\n".join(lines)
