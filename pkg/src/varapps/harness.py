"""Run matrices of (agent, task, variation, seed) and persist trajectories.

Trajectories are NDJSON, one versioned record per run. A run's digests form a
chain ``h_0 = s0 digest``, ``h_i = sha256(h_{i-1} | action text | digest_i)``
that ``replay`` re-derives from the action texts alone.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import yaml

from .agents import AgentSpec, make_agent
from .env import ENGINE_VERSION, Env, EnvRequest, RequestError
from .layout import Viewport
from .tasks import DEFAULT_HORIZON, RewardResult

FORMAT_VERSION = 1
TRAJECTORY_FILE = "trajectories.traj.ndjson"
ERROR_CATEGORIES = ("connect", "protocol", "internal")


class ReplayVersionError(RuntimeError):
    pass


class MatrixError(ValueError):
    pass


@dataclass(frozen=True)
class RunSpec:
    agent: str
    task: str
    variations: Tuple[str, ...] = ()
    seed: int = 0
    viewport: str = "HD"
    horizon: int = DEFAULT_HORIZON
    profile: str = "full"

    @classmethod
    def from_dict(cls, d: dict) -> "RunSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = sorted(set(d) - known)
        if extra:
            raise MatrixError(f"unknown run spec fields: {', '.join(extra)}")
        if "agent" not in d or "task" not in d:
            raise MatrixError("run spec needs 'agent' and 'task'")
        variations = d.get("variations") or ()
        if isinstance(variations, str):
            variations = (variations,)
        viewport = d.get("viewport", "HD")
        if isinstance(viewport, dict):
            viewport = Viewport.parse(viewport).name
        return cls(
            agent=str(d["agent"]),
            task=str(d["task"]),
            variations=tuple(variations),
            seed=int(d.get("seed", 0)),
            viewport=str(viewport),
            horizon=int(d.get("horizon", DEFAULT_HORIZON)),
            profile=str(d.get("profile", "full")),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variations"] = list(self.variations)
        return d

    def request(self) -> EnvRequest:
        return EnvRequest(
            task=self.task,
            variations=self.variations,
            seed=self.seed,
            viewport=Viewport.parse(self.viewport),
            profile=self.profile,
            horizon=self.horizon,
        )

    def wire_request(self) -> dict:
        req = self.request().to_dict()
        req["protocol_version"] = 1
        return req


def chain_step(prev: str, action_text: str, digest: str) -> str:
    h = hashlib.sha256()
    for part in (prev, action_text, digest):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


@dataclass
class TrajectoryRecord:
    spec: RunSpec
    run_index: int = 0
    goal: str = ""
    s0_digest: str = ""
    steps: List[dict] = field(default_factory=list)
    result: Optional[RewardResult] = None
    status: str = "error"
    chain: str = ""
    duration_s: float = 0.0
    error: Optional[dict] = None
    format_version: int = FORMAT_VERSION
    engine_version: str = ENGINE_VERSION

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def actions(self) -> List[str]:
        return [s["action_text"] for s in self.steps]

    @property
    def digests(self) -> List[str]:
        return [self.s0_digest] + [s["digest"] for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "engine_version": self.engine_version,
            "run_index": self.run_index,
            "spec": self.spec.to_dict(),
            "goal": self.goal,
            "s0_digest": self.s0_digest,
            "steps": self.steps,
            "result": self.result.to_dict() if self.result else None,
            "status": self.status,
            "chain": self.chain,
            "duration_s": self.duration_s,
            "error": self.error,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryRecord":
        return cls(
            spec=RunSpec.from_dict(d["spec"]),
            run_index=d.get("run_index", 0),
            goal=d.get("goal", ""),
            s0_digest=d.get("s0_digest", ""),
            steps=list(d.get("steps") or []),
            result=RewardResult.from_dict(d["result"]) if d.get("result") else None,
            status=d.get("status", "error"),
            chain=d.get("chain", ""),
            duration_s=float(d.get("duration_s", 0.0)),
            error=d.get("error"),
            format_version=int(d.get("format_version", FORMAT_VERSION)),
            engine_version=str(d.get("engine_version", "")),
        )

    @classmethod
    def from_line(cls, line: str) -> "TrajectoryRecord":
        return cls.from_dict(json.loads(line))


def _step_entry(step: dict) -> dict:
    return {
        "index": step["index"],
        "action_text": step["action_text"],
        "parse": step["parse"],
        "rejection": step["rejection"],
        "route": step["route"],
        "digest": step["digest"],
        "reward": step["reward"],
    }


# ---------------------------------------------------------------------------
# Running one spec


class _ProtocolError(RuntimeError):
    pass


def _run_in_process(spec: RunSpec, record: TrajectoryRecord) -> None:
    request = spec.request()
    env = Env(request)
    agent = make_agent(spec.agent, request)
    record.goal = env.goal
    record.s0_digest = record.chain = env.s0_digest()
    agent.reset(env.goal, env.observe().ax_tree)
    while env.status == "running":
        text = agent.act(env.observe().ax_tree)
        step = env.step(text).to_dict()
        record.steps.append(_step_entry(step))
        record.chain = chain_step(record.chain, text, step["digest"])
    record.result = env.result()
    record.status = env.status


def _run_http(spec: RunSpec, record: TrajectoryRecord, base_url: str) -> None:
    import httpx

    def check(resp, expected=200) -> dict:
        if resp.status_code != expected:
            raise _ProtocolError(f"{resp.request.method} {resp.request.url.path}: HTTP {resp.status_code} {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError:
            raise _ProtocolError("response is not JSON") from None

    agent = make_agent(spec.agent, spec.request())
    with httpx.Client(base_url=base_url, timeout=30.0) as client:
        created = check(client.post("/sessions", json=spec.wire_request()), 201)
        sid = created["session_id"]
        try:
            record.goal = created["goal"]
            obs = created["observation"]["text"]
            agent.reset(record.goal, obs)
            status = created["status"]
            while status == "running":
                text = agent.act(obs)
                body = check(client.post(f"/sessions/{sid}/actions", json={"protocol_version": 1, "action": text}))
                step = body["step"]
                record.steps.append(_step_entry(step))
                obs = body["observation"]["text"]
                status = body["status"]
            final = check(client.get(f"/sessions/{sid}/result"))
        finally:
            client.delete(f"/sessions/{sid}")
    record.s0_digest = final["s0_digest"]
    chain = record.s0_digest
    for s in record.steps:
        chain = chain_step(chain, s["action_text"], s["digest"])
    record.chain = chain
    record.result = RewardResult.from_dict(final["result"])
    record.status = final["status"]


def _error_category(exc: BaseException) -> str:
    try:
        import httpx
    except ImportError:  # pragma: no cover
        httpx = None
    if httpx is not None and isinstance(exc, (httpx.ConnectError, httpx.ConnectTimeout)):
        return "connect"
    if isinstance(exc, (ConnectionError,)):
        return "connect"
    if isinstance(exc, (_ProtocolError, RequestError, KeyError)):
        return "protocol"
    if httpx is not None and isinstance(exc, httpx.HTTPError):
        return "protocol"
    return "internal"


def run_one(spec: RunSpec, base_url: Optional[str] = None, run_index: int = 0) -> TrajectoryRecord:
    """Run a single spec; failures become an error record, never an exception."""
    record = TrajectoryRecord(spec=spec, run_index=run_index)
    start = time.perf_counter()
    try:
        if base_url:
            _run_http(spec, record, base_url)
        else:
            _run_in_process(spec, record)
    except Exception as exc:  # crash containment
        record.status = "error"
        record.error = {"category": _error_category(exc), "type": type(exc).__name__, "message": str(exc)}
    record.duration_s = round(time.perf_counter() - start, 6)
    return record


def _run_indexed(args) -> Tuple[int, str]:
    index, spec, base_url = args
    return index, run_one(spec, base_url, index).to_line()


def run_matrix(
    specs: Sequence[RunSpec],
    parallelism: int = 1,
    out_dir: Optional[Union[str, Path]] = None,
    base_url: Optional[str] = None,
) -> List[TrajectoryRecord]:
    """Run all specs; output order is spec order regardless of completion order.

    With ``out_dir``, each finished run is written at once to its own part
    file; the parts are merged into one NDJSON file at the end.
    """
    specs = list(specs)
    jobs = [(i, s, base_url) for i, s in enumerate(specs)]
    lines: Dict[int, str] = {}
    parts = None
    if out_dir is not None:
        parts = Path(out_dir) / "parts"
        parts.mkdir(parents=True, exist_ok=True)

    def collect(index: int, line: str) -> None:
        lines[index] = line
        if parts is not None:
            (parts / f"{index:06d}.ndjson").write_text(line + "\n", encoding="utf-8")

    if parallelism <= 1:
        for job in jobs:
            collect(*_run_indexed(job))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for index, line in pool.map(_run_indexed, jobs, chunksize=max(1, len(jobs) // (parallelism * 4))):
                collect(index, line)
    ordered = [lines[i] for i in range(len(specs))]
    if out_dir is not None:
        write_trajectories(Path(out_dir) / TRAJECTORY_FILE, ordered)
        for p in parts.glob("*.ndjson"):
            p.unlink()
        parts.rmdir()
    return [TrajectoryRecord.from_line(line) for line in ordered]


def write_trajectories(path: Union[str, Path], records: Iterable[Union[str, TrajectoryRecord]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write((r if isinstance(r, str) else r.to_line()) + "\n")
    return path


def read_trajectories(path: Union[str, Path]) -> List[TrajectoryRecord]:
    """Read one NDJSON file, or every ``*.ndjson`` file under a directory."""
    path = Path(path)
    files = sorted(path.rglob("*.ndjson")) if path.is_dir() else [path]
    records = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            records.extend(TrajectoryRecord.from_line(line) for line in fh if line.strip())
    return records


# ---------------------------------------------------------------------------
# Replay


@dataclass(frozen=True)
class ReplayVerdict:
    match: bool
    steps_checked: int
    first_divergence: Optional[int] = None  # step index; 0 means s0
    field: Optional[str] = None
    expected: Any = None
    actual: Any = None

    def to_dict(self) -> dict:
        return asdict(self)


def replay(record: TrajectoryRecord, engine_version: str = ENGINE_VERSION) -> ReplayVerdict:
    """Re-execute a record's action texts from s0 and compare every digest."""
    if record.engine_version != engine_version:
        raise ReplayVersionError(
            f"record was produced by engine {record.engine_version!r}, this is {engine_version!r}"
        )
    if record.format_version != FORMAT_VERSION:
        raise ReplayVersionError(f"unsupported trajectory format_version {record.format_version}")
    if record.error is not None:
        raise ValueError("cannot replay an error record")
    env = Env(record.spec.request())
    s0 = env.s0_digest()
    if s0 != record.s0_digest:
        return ReplayVerdict(False, 0, 0, "digest", record.s0_digest, s0)
    chain = s0
    for n, expected in enumerate(record.steps, start=1):
        if expected.get("index") != n:
            return ReplayVerdict(False, n - 1, n, "index", expected.get("index"), n)
        step = env.step(expected["action_text"]).to_dict()
        chain = chain_step(chain, step["action_text"], step["digest"])
        for key in ("digest", "parse", "route", "reward"):
            if step[key] != expected.get(key):
                return ReplayVerdict(False, n, n, key, expected.get(key), step[key])
    if record.chain and chain != record.chain:
        return ReplayVerdict(False, len(record.steps), len(record.steps), "chain", record.chain, chain)
    return ReplayVerdict(True, len(record.steps))


# ---------------------------------------------------------------------------
# Matrix files


def _as_list(value, default) -> list:
    if value is None:
        return list(default)
    return list(value) if isinstance(value, (list, tuple)) else [value]


def expand_matrix(doc: dict) -> List[RunSpec]:
    """Cartesian product form: each key holds one value or a list."""
    from .tasks import all_tasks

    tasks = doc.get("tasks", "all")
    tasks = list(all_tasks()) if tasks == "all" else _as_list(tasks, [])
    seeds = doc.get("seeds", [0])
    seeds = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    variations = []
    for v in _as_list(doc.get("variations"), [["default"]]):
        variations.append(tuple(v) if isinstance(v, (list, tuple)) else (v,))
    specs = []
    for agent, task, var, seed, viewport, profile in itertools.product(
        _as_list(doc.get("agents"), ["oracle"]),
        tasks,
        variations,
        seeds,
        _as_list(doc.get("viewports"), ["HD"]),
        _as_list(doc.get("profiles"), ["full"]),
    ):
        specs.append(
            RunSpec(
                agent=str(agent),
                task=task,
                variations=var,
                seed=int(seed),
                viewport=str(viewport),
                horizon=int(doc.get("horizon", DEFAULT_HORIZON)),
                profile=str(profile),
            )
        )
    return specs


def parse_matrix(text: str) -> List[RunSpec]:
    """A YAML list of run specs, or a mapping with a ``product`` block."""
    doc = yaml.safe_load(text)
    if isinstance(doc, list):
        return [RunSpec.from_dict(d) for d in doc]
    if isinstance(doc, dict) and "product" in doc:
        return expand_matrix(doc["product"])
    if isinstance(doc, dict) and "runs" in doc:
        return [RunSpec.from_dict(d) for d in doc["runs"]]
    raise MatrixError("matrix file must be a list of run specs or a mapping with 'product' or 'runs'")


def load_matrix(path: Union[str, Path]) -> List[RunSpec]:
    return parse_matrix(Path(path).read_text(encoding="utf-8"))


def oracle_matrix(seeds: int = 3, profile: str = "full") -> List[RunSpec]:
    """The solvability suite: every single-goal task x shipped variation x seed."""
    from .config import shipped_catalog
    from .tasks import SINGLE_GOAL_TASKS

    return [
        RunSpec("oracle", task, (var,), seed, profile=profile)
        for task in SINGLE_GOAL_TASKS
        for var in shipped_catalog()
        for seed in range(seeds)
    ]


def default_parallelism() -> int:
    return max(1, os.cpu_count() or 1)


__all__ = [
    "AgentSpec",
    "FORMAT_VERSION",
    "ReplayVerdict",
    "ReplayVersionError",
    "RunSpec",
    "TrajectoryRecord",
    "chain_step",
    "load_matrix",
    "oracle_matrix",
    "parse_matrix",
    "read_trajectories",
    "replay",
    "run_matrix",
    "run_one",
    "write_trajectories",
]
