"""Run a small agent matrix, replay it, and print the reliability tables.

    python demos/03_matrix_and_tables.py [out_dir]
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

from varapps.analytics import analyze
from varapps.harness import RunSpec, replay, run_matrix

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="varapps-demo-"))
tasks = ["AddEventTask", "MarkItemAsDoneTask", "SavePlace"]
variations = ["default", "dark_theme", "german"]
specs = [
    RunSpec(agent, task, (var,), seed, horizon=15)
    for agent in ("oracle", "random", "looper:2")
    for task in tasks
    for var in variations
    for seed in range(3)
]
records = run_matrix(specs, parallelism=2, out_dir=out)
print(f"{len(records)} runs written under {out}")
print("replay matches:", sum(replay(r).match for r in records), "of", len(records))

for path in analyze(records, out / "tables"):
    if path.suffix == ".txt" and path.stem in ("behavior", "reliability_overall"):
        print(f"\n== {path.stem}")
        print(path.read_text(encoding="utf-8"))
