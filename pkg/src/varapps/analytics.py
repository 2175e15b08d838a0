"""Behavior and reliability metrics over trajectory records.

Reliability follows the mean-absolute-deviation definitions: within a fixed
variation the divisor is n (attempts), across variations it is n*d over the
pooled rewards. Standard deviations default to the sample convention
(divisor n-1) and can be switched to population.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .controls import is_external
from .tasks import TaskSpec, get_task, intent_routes

STD_CONVENTIONS = ("sample", "population")
NAVIGATE_TASK = "NavigateToPageTask"


# ---------------------------------------------------------------------------
# Loops


def _unit(action: str) -> str:
    return action.strip()


def count_loops(actions: Sequence[str]) -> int:
    """Number of maximal repeated-unit runs, resolved left to right.

    At each position the shortest unit that repeats there (and is not a
    continuation of an identical copy to its left) starts a run; the run is
    extended as far as the unit keeps repeating and scanning resumes after it.
    """
    a = [_unit(x) for x in actions]
    n = len(a)
    count, i = 0, 0
    while i < n:
        for length in range(1, (n - i) // 2 + 1):
            w = a[i : i + length]
            if a[i + length : i + 2 * length] != w:
                continue
            if i >= length and a[i - length : i] == w:
                continue
            k = 2
            while a[i + k * length : i + (k + 1) * length] == w:
                k += 1
            count += 1
            i += k * length
            break
        else:
            i += 1
    return count


def loop_candidates(actions: Sequence[str]) -> List[Tuple[int, int, int]]:
    """All maximal runs ``(start, unit length, copies)`` before resolution."""
    a = [_unit(x) for x in actions]
    n = len(a)
    out = []
    for s in range(n):
        for length in range(1, n // 2 + 1):
            w = a[s : s + length]
            if len(w) < length:
                break
            k = 1
            while a[s + k * length : s + (k + 1) * length] == w:
                k += 1
            left = s >= length and a[s - length : s] == w
            if k >= 2 and not left:
                out.append((s, length, k))
    return out


def count_loops_bruteforce(actions: Sequence[str]) -> int:
    """Reference count: enumerate maximal runs, keep non-overlapping greedily."""
    end = 0
    count = 0
    for s, length, k in sorted(loop_candidates(actions)):
        if s >= end:
            count += 1
            end = s + k * length
    return count


# ---------------------------------------------------------------------------
# Per-record behavior


def _steps(record) -> List[dict]:
    return record["steps"] if isinstance(record, Mapping) else record.steps


def _spec(record) -> dict:
    return record["spec"] if isinstance(record, Mapping) else record.spec.to_dict()


def count_invalid(record) -> int:
    """Steps whose action text did not parse (any category)."""
    return sum(1 for s in _steps(record) if not s["parse"]["ok"])


def record_actions(record) -> List[str]:
    return [s["action_text"] for s in _steps(record)]


def intent_misunderstood(record, task: Union[str, TaskSpec, None] = None) -> bool:
    """True if any post-action route leaves the task's apps (external pages count)."""
    task = get_task(task if task is not None else _spec(record)["task"])
    if task.id == NAVIGATE_TASK:
        raise ValueError(f"intent misunderstanding is not defined for {NAVIGATE_TASK}")
    allowed = intent_routes(task)
    for s in _steps(record):
        route = s["route"]
        if is_external(route) or route not in allowed:
            return True
    return False


def variation_label(variations: Iterable[str]) -> str:
    ids = [v for v in variations if v != "default"]
    return "+".join(ids) if ids else "default"


@dataclass(frozen=True)
class BehaviorRow:
    agent: str
    variation: str
    runs: int
    avg_loops: float
    avg_invalid: float
    intent_rate: Optional[float]  # None when no eligible runs
    loops_success: Optional[float]
    loops_failure: Optional[float]


def behavior_report(records: Sequence) -> List[BehaviorRow]:
    """Per (agent, variation): mean loops, mean invalid actions, intent rate.

    Also reports mean loops split by success, so the loop-failure association
    can be inspected.
    """
    groups: Dict[Tuple[str, str], list] = defaultdict(list)
    for r in records:
        if _error(r) is not None:
            continue
        spec = _spec(r)
        groups[(spec["agent"], variation_label(spec["variations"]))].append(r)
    rows = []
    for (agent, var), recs in sorted(groups.items()):
        loops = [count_loops(record_actions(r)) for r in recs]
        invalid = [count_invalid(r) for r in recs]
        eligible = [r for r in recs if _spec(r)["task"] != NAVIGATE_TASK]
        intent = [intent_misunderstood(r) for r in eligible]
        succ = [l for l, r in zip(loops, recs) if _reward(r) >= 1.0]
        fail = [l for l, r in zip(loops, recs) if _reward(r) < 1.0]
        rows.append(
            BehaviorRow(
                agent=agent,
                variation=var,
                runs=len(recs),
                avg_loops=float(np.mean(loops)),
                avg_invalid=float(np.mean(invalid)),
                intent_rate=float(np.mean(intent)) if intent else None,
                loops_success=float(np.mean(succ)) if succ else None,
                loops_failure=float(np.mean(fail)) if fail else None,
            )
        )
    return rows


def _error(record):
    return record.get("error") if isinstance(record, Mapping) else record.error


def _reward(record) -> float:
    result = record.get("result") if isinstance(record, Mapping) else record.result
    if result is None:
        return 0.0
    return float(result["reward"] if isinstance(result, Mapping) else result.reward)


# ---------------------------------------------------------------------------
# Reliability


def mad(rewards: Sequence[float]) -> float:
    """Mean absolute deviation about the mean, divisor len(rewards)."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("mad of an empty sample")
    return float(np.mean(np.abs(r - r.mean())))


def std(rewards: Sequence[float], convention: str = "sample") -> float:
    if convention not in STD_CONVENTIONS:
        raise ValueError(f"std convention must be one of {STD_CONVENTIONS}")
    r = np.asarray(rewards, dtype=float)
    ddof = 1 if convention == "sample" else 0
    if r.size <= ddof:
        raise ValueError("not enough samples for a standard deviation")
    return float(np.std(r, ddof=ddof))


@dataclass(frozen=True)
class RewardSample:
    agent: str
    task: str
    variation: str
    seed: int
    reward: float


def samples_from_records(records: Sequence) -> List[RewardSample]:
    """One sample per (agent, task, variation, seed); error runs are skipped."""
    seen: Dict[Tuple[str, str, str, int], RewardSample] = {}
    for r in records:
        if _error(r) is not None:
            continue
        spec = _spec(r)
        key = (spec["agent"], spec["task"], variation_label(spec["variations"]), int(spec["seed"]))
        if key in seen:
            raise ValueError(f"duplicate sample for {key}")
        seen[key] = RewardSample(*key, reward=_reward(r))
    return list(seen.values())


@dataclass(frozen=True)
class CellStats:
    variation: str
    n: int
    pass_at_1: float
    std: Optional[float]
    mad: Optional[float]


@dataclass(frozen=True)
class ReliabilityRow:
    agent: str
    task: str
    cells: Tuple[CellStats, ...]
    n: int  # seeds per cell (minimum over cells)
    d: int  # number of variations
    pass_at_1: float
    overall_std: Optional[float]
    overall_mad: Optional[float]
    fixed_variation: str
    ratio_std: Optional[float]
    ratio_mad: Optional[float]

    def cell(self, variation: str) -> Optional[CellStats]:
        for c in self.cells:
            if c.variation == variation:
                return c
        return None


@dataclass
class ReliabilityReport:
    rows: List[ReliabilityRow] = field(default_factory=list)
    std_convention: str = "sample"

    def row(self, agent: str, task: str) -> ReliabilityRow:
        for r in self.rows:
            if r.agent == agent and r.task == task:
                return r
        raise KeyError((agent, task))


def _ratio(num: Optional[float], den: Optional[float]) -> Optional[float]:
    if num is None or den is None or den <= 0:
        return None
    return num / den


def cell_stats(variation: str, rewards: Sequence[float], convention: str = "sample") -> CellStats:
    n = len(rewards)
    enough = n >= 2
    return CellStats(
        variation=variation,
        n=n,
        pass_at_1=float(np.mean(rewards)),
        std=std(rewards, convention) if enough else None,
        mad=mad(rewards) if enough else None,
    )


def reliability(
    samples: Sequence[RewardSample], std_convention: str = "sample", fixed_variation: str = "default"
) -> ReliabilityReport:
    """Per (agent, task) reliability across seeds and variations.

    Cells with fewer than two samples report deviations as absent (None).
    The ratio compares the ``fixed_variation`` cell with the pooled overall
    deviation and is absent when the overall deviation is zero.
    """
    if std_convention not in STD_CONVENTIONS:
        raise ValueError(f"std convention must be one of {STD_CONVENTIONS}")
    grouped: Dict[Tuple[str, str], Dict[str, List[float]]] = defaultdict(lambda: defaultdict(list))
    for s in samples:
        grouped[(s.agent, s.task)][s.variation].append(float(s.reward))
    report = ReliabilityReport(std_convention=std_convention)
    for (agent, task), by_var in sorted(grouped.items()):
        cells = tuple(cell_stats(v, rs, std_convention) for v, rs in sorted(by_var.items()))
        pooled = [r for v in sorted(by_var) for r in by_var[v]]
        enough = len(pooled) >= 2
        overall_std = std(pooled, std_convention) if enough else None
        overall_mad = mad(pooled) if enough else None
        fixed = next((c for c in cells if c.variation == fixed_variation), None)
        report.rows.append(
            ReliabilityRow(
                agent=agent,
                task=task,
                cells=cells,
                n=min(c.n for c in cells),
                d=len(cells),
                pass_at_1=float(np.mean(pooled)),
                overall_std=overall_std,
                overall_mad=overall_mad,
                fixed_variation=fixed_variation,
                ratio_std=_ratio(fixed.std if fixed else None, overall_std),
                ratio_mad=_ratio(fixed.mad if fixed else None, overall_mad),
            )
        )
    return report


# ---------------------------------------------------------------------------
# Tables

RELIABILITY_COLUMNS = (
    "agent",
    "task",
    "variation",
    "n",
    "pass_at_1",
    "std",
    "mad",
)
OVERALL_COLUMNS = (
    "agent",
    "task",
    "n",
    "d",
    "pass_at_1",
    "overall_std",
    "overall_mad",
    "fixed_variation",
    "ratio_std",
    "ratio_mad",
)
BEHAVIOR_COLUMNS = (
    "agent",
    "variation",
    "runs",
    "avg_loops",
    "avg_invalid",
    "intent_rate",
    "loops_success",
    "loops_failure",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.4f}"
    return str(value)


def reliability_tables(report: ReliabilityReport) -> Dict[str, Tuple[Tuple[str, ...], List[List[str]]]]:
    cells, overall = [], []
    for r in report.rows:
        for c in r.cells:
            cells.append([_cell(x) for x in (r.agent, r.task, c.variation, c.n, c.pass_at_1, c.std, c.mad)])
        overall.append(
            [
                _cell(x)
                for x in (
                    r.agent,
                    r.task,
                    r.n,
                    r.d,
                    r.pass_at_1,
                    r.overall_std,
                    r.overall_mad,
                    r.fixed_variation,
                    r.ratio_std,
                    r.ratio_mad,
                )
            ]
        )
    return {"reliability_cells": (RELIABILITY_COLUMNS, cells), "reliability_overall": (OVERALL_COLUMNS, overall)}


def behavior_table(rows: Sequence[BehaviorRow]) -> Tuple[Tuple[str, ...], List[List[str]]]:
    body = [[_cell(getattr(r, c)) for c in BEHAVIOR_COLUMNS] for r in rows]
    return BEHAVIOR_COLUMNS, body


def to_csv(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def to_text(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(c) for c in columns]
    for row in rows:
        widths = [max(w, len(v)) for w, v in zip(widths, row)]

    def line(values):
        return "  ".join(v.ljust(w) for v, w in zip(values, widths)).rstrip()

    out = [line(columns), line(["-" * w for w in widths])]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"


def emit_tables(
    report: ReliabilityReport, behavior: Sequence[BehaviorRow], out_dir: Union[str, Path]
) -> List[Path]:
    """Write ``<name>.csv`` and ``<name>.txt`` for every table; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = dict(reliability_tables(report))
    tables["behavior"] = behavior_table(behavior)
    written = []
    for name, (columns, rows) in sorted(tables.items()):
        for suffix, text in (("csv", to_csv(columns, rows)), ("txt", to_text(columns, rows))):
            path = out / f"{name}.{suffix}"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(path)
    return written


def analyze(records: Sequence, out_dir: Union[str, Path], std_convention: str = "sample") -> List[Path]:
    report = reliability(samples_from_records(records), std_convention)
    return emit_tables(report, behavior_report(records), out_dir)
