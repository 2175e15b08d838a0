"""Task registry, expected state changes and rewards.

A task describes the change it asks for as a list of declarative ops over
the initial state ``s0``. The reward compares the full canonical state
reached by the agent with ``s0`` after those ops, so any extra change in any
app makes the reward 0.

Multi-step tasks group their ops into steps. A trajectory earns
``k / total`` when its final state equals ``s0`` with exactly ``k`` of the
steps applied, and 0 otherwise.
"""

from __future__ import annotations

import datetime as _dt
import itertools
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import yaml

from .controls import APP_ROUTES
from .state import (
    CalendarEvent,
    CanonicalState,
    CartItem,
    EnvState,
    FileNode,
    Message,
    NavState,
    SavedPlace,
    TodoItem,
    _add_file,
    _remove_file,
    add_to_cart,
    canonicalize,
    next_seq,
    norm_text,
    state_to_dict,
)

SINGLE_GOAL_TASKS = (
    "Add2CartASingleItemTask",
    "AddEventTask",
    "AddFiles2CodeEditorTask",
    "AddItem2ToDoListTask",
    "DuplicateEventTask",
    "ForwardMessageTask",
    "MarkItemAsDoneTask",
    "MessageXTask",
    "NavigateToPageTask",
    "RemoveEventTask",
    "RemoveFromCodeEditorTask",
    "RemoveItemFromToDoListTask",
    "RemoveItemsFromCartTask",
    "RemoveSavedPlace",
    "SavePlace",
)

DEFAULT_HORIZON = 30

OP_KINDS = (
    "add_todo",
    "set_todo_done",
    "remove_todo",
    "add_event",
    "duplicate_event",
    "remove_event",
    "send_message",
    "forward_latest",
    "save_place",
    "remove_place",
    "add_cart",
    "clear_cart",
    "add_file",
    "remove_file",
    "navigate",
)


class TaskError(ValueError):
    pass


class UnknownTask(TaskError, KeyError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    id: str
    prompts: Tuple[str, ...]
    relevant_apps: frozenset
    ops: Tuple[dict, ...] = ()
    steps: Tuple[Tuple[dict, ...], ...] = ()
    refs: Tuple[Tuple[str, str], ...] = ()

    @property
    def multi_step(self) -> bool:
        return bool(self.steps)

    @property
    def total_steps(self) -> int:
        return len(self.steps) if self.steps else 1

    @property
    def all_ops(self) -> Tuple[dict, ...]:
        return tuple(op for step in self.steps for op in step) if self.steps else self.ops

    @property
    def reads_route(self) -> bool:
        return any(op["op"] == "navigate" for op in self.all_ops)


@dataclass(frozen=True)
class RewardResult:
    reward: float
    success: bool
    steps_completed: int
    at_least_one_step: bool
    total_steps: int = 1
    achieved_step: Optional[int] = None  # first step index reaching the reported reward
    steps_taken: int = 0

    def to_dict(self) -> dict:
        return {
            "reward": self.reward,
            "success": self.success,
            "steps_completed": self.steps_completed,
            "at_least_one_step": self.at_least_one_step,
            "total_steps": self.total_steps,
            "achieved_step": self.achieved_step,
            "steps_taken": self.steps_taken,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardResult":
        return cls(**d)


# ---------------------------------------------------------------------------
# Catalog


def _plain(value: Any) -> Any:
    """YAML dates become ISO text; lists stay lists."""
    if isinstance(value, _dt.date):
        return value.isoformat()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def _check_op(op: dict, where: str) -> dict:
    if not isinstance(op, dict) or op.get("op") not in OP_KINDS:
        raise TaskError(f"{where}: unknown op {op!r}")
    return _plain(op)


def parse_tasks(yaml_text: str) -> Dict[str, TaskSpec]:
    entries = yaml.safe_load(yaml_text) or []
    tasks: Dict[str, TaskSpec] = {}
    for i, e in enumerate(entries):
        where = f"tasks[{i}]"
        tid = e.get("id")
        if not tid or tid in tasks:
            raise TaskError(f"{where}: missing or duplicate id {tid!r}")
        prompts = tuple(e.get("prompts") or ())
        if len(prompts) < 2:
            raise TaskError(f"{tid}: needs at least two goal prompts")
        apps = frozenset(e.get("relevant_apps") or ())
        if not apps or not apps <= set(APP_ROUTES) | {"cart"}:
            raise TaskError(f"{tid}: bad relevant_apps {sorted(apps)}")
        ops = tuple(_check_op(op, f"{tid}.ops") for op in e.get("ops") or ())
        steps = tuple(
            tuple(_check_op(op, f"{tid}.steps[{j}]") for op in step) for j, step in enumerate(e.get("steps") or ())
        )
        if bool(ops) == bool(steps):
            raise TaskError(f"{tid}: give exactly one of ops or steps")
        refs = tuple(sorted((str(k), str(v)) for k, v in (e.get("refs") or {}).items()))
        tasks[tid] = TaskSpec(tid, prompts, apps, ops, steps, refs)
    return tasks


def load_tasks(path: Union[str, Path]) -> Dict[str, TaskSpec]:
    return parse_tasks(Path(path).read_text(encoding="utf-8"))


_TASKS: Optional[Dict[str, TaskSpec]] = None


def all_tasks() -> Dict[str, TaskSpec]:
    global _TASKS
    if _TASKS is None:
        text = resources.files("varapps").joinpath("data").joinpath("tasks.yaml").read_text(encoding="utf-8")
        _TASKS = parse_tasks(text)
    return _TASKS


def get_task(task_id: Union[str, TaskSpec]) -> TaskSpec:
    if isinstance(task_id, TaskSpec):
        return task_id
    try:
        return all_tasks()[task_id]
    except KeyError:
        raise UnknownTask(task_id) from None


def single_goal_tasks() -> List[TaskSpec]:
    return [get_task(t) for t in SINGLE_GOAL_TASKS]


def multi_step_tasks() -> List[TaskSpec]:
    return [t for t in all_tasks().values() if t.multi_step]


# ---------------------------------------------------------------------------
# References and prompts


def lookup(data: Any, path: str) -> Any:
    node = data
    for part in path.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node[part]
    return node


def ref_values(task: TaskSpec, s0: EnvState) -> Dict[str, str]:
    if not task.refs:
        return {}
    data = state_to_dict(s0)
    try:
        return {name: str(lookup(data, path)) for name, path in task.refs}
    except (KeyError, IndexError, ValueError) as exc:
        raise TaskError(f"{task.id}: reference does not resolve in this state: {exc!r}") from None


def _default_s0() -> EnvState:
    from .config import default_config
    from .state import init_state

    return init_state(default_config())


def sample_goal(task: Union[str, TaskSpec], seed: int, s0: Optional[EnvState] = None) -> str:
    """Goal prompt for a seed (round-robin over the task's prompts)."""
    task = get_task(task)
    template = task.prompts[seed % len(task.prompts)]
    return template.format_map(ref_values(task, s0 if s0 is not None else _default_s0()))


def fill_op(op: dict, values: Dict[str, str]) -> dict:
    def sub(v):
        if isinstance(v, str):
            return v.format_map(values)
        if isinstance(v, list):
            return [sub(x) for x in v]
        if isinstance(v, dict):
            return {k: sub(x) for k, x in v.items()}
        return v

    return {k: (v if k == "op" else sub(v)) for k, v in op.items()}


# ---------------------------------------------------------------------------
# Applying ops


class OpApplier:
    """Applies ops to a working copy of ``s0``.

    Todos and events are tracked with their ``s0`` index so that ops can keep
    referring to ``s0`` positions after earlier removals. ``position`` gives
    the current index of an ``s0`` item, which is how the oracle agent finds
    the element to act on.
    """

    def __init__(self, s0: EnvState, values: Optional[Dict[str, str]] = None):
        self.s0 = s0
        self.values = values or {}
        self.todos: List[Tuple[Optional[int], TodoItem]] = [(i, t) for i, t in enumerate(s0.todos)]
        self.events: List[Tuple[Optional[int], CalendarEvent]] = [(i, e) for i, e in enumerate(s0.calendar)]
        self.state = s0

    def position(self, kind: str, index: int) -> int:
        items = self.todos if kind == "todo" else self.events
        for pos, (orig, _item) in enumerate(items):
            if orig == index:
                return pos
        raise TaskError(f"{kind} #{index} is no longer present")

    def _item(self, kind: str, index: int):
        items = self.todos if kind == "todo" else self.events
        return items[self.position(kind, index)][1]

    def latest_received(self, source: str) -> Message:
        msgs = self.s0.conversation(source) or ()
        received = [m for m in msgs if m.direction == "received"]
        if not received:
            raise TaskError(f"no received message from {source}")
        return received[-1]

    def apply(self, raw_op: dict) -> EnvState:
        op = fill_op(raw_op, self.values)
        kind = op["op"]
        s = self.state
        if kind == "add_todo":
            self.todos.append((None, TodoItem(norm_text(op["text"]), False)))
        elif kind == "set_todo_done":
            pos = self.position("todo", op["index"])
            orig, item = self.todos[pos]
            self.todos[pos] = (orig, replace(item, done=bool(op.get("done", True))))
        elif kind == "remove_todo":
            del self.todos[self.position("todo", op["index"])]
        elif kind == "add_event":
            invitees = op.get("invitees")
            self.events.append((None, CalendarEvent(
                title=norm_text(op["title"]),
                date=_dt.date.fromisoformat(op["date"]),
                description=norm_text(op.get("description") or ""),
                url=op.get("url") or None,
                location=op.get("location") or None,
                invitees=tuple(invitees) if invitees else None,
            )))
        elif kind == "duplicate_event":
            src = self._item("event", op["index"])
            self.events.append((None, replace(src, date=_dt.date.fromisoformat(op["date"]))))
        elif kind == "remove_event":
            del self.events[self.position("event", op["index"])]
        elif kind in ("send_message", "forward_latest"):
            peer = op["peer"]
            body = norm_text(op["body"]) if kind == "send_message" else self.latest_received(op["source"]).body
            msgs = s.conversation(peer)
            if msgs is None:
                raise TaskError(f"no conversation with {peer}")
            s = s.with_conversation(peer, msgs + (Message(peer, "sent", body, next_seq(msgs)),))
        elif kind == "save_place":
            name = norm_text(op["name"])
            s = replace(s, places=s.places + (SavedPlace(name, name),))
        elif kind == "remove_place":
            name = self.s0.places[op["index"]].name if "index" in op else op["name"]
            s = replace(s, places=tuple(p for p in s.places if p.name != name))
        elif kind == "add_cart":
            chosen = tuple(sorted((str(k), str(v)) for k, v in (op.get("options") or {}).items()))
            s = replace(s, cart=add_to_cart(s.cart, CartItem(op["product"], chosen, int(op.get("quantity", 1)))))
        elif kind == "clear_cart":
            s = replace(s, cart=())
        elif kind == "add_file":
            node = FileNode(op.get("kind", "file"), op["name"])
            s = replace(s, files=_add_file(s.files, tuple(op.get("path") or ()), node))
        elif kind == "remove_file":
            s = replace(s, files=_remove_file(s.files, tuple(op["path"])))
        elif kind == "navigate":
            s = replace(s, nav=NavState(route=op["route"]))
        else:  # pragma: no cover - rejected at load time
            raise TaskError(f"unknown op {kind}")
        self.state = replace(
            s,
            todos=tuple(t for _, t in self.todos),
            calendar=tuple(e for _, e in self.events),
        )
        return self.state


def apply_ops(s0: EnvState, ops: Iterable[dict], values: Optional[Dict[str, str]] = None) -> EnvState:
    applier = OpApplier(s0, values)
    for op in ops:
        applier.apply(op)
    return applier.state


def expected_state(s0: EnvState, task: Union[str, TaskSpec]) -> EnvState:
    task = get_task(task)
    return apply_ops(s0, task.all_ops, ref_values(task, s0))


# ---------------------------------------------------------------------------
# Rewards


def _compare_form(state: EnvState, keep_route: bool, canon: Optional[CanonicalState] = None) -> str:
    canon = canon if canon is not None else canonicalize(state)
    return canon.text if keep_route else canon.without_route().text


@dataclass
class _Targets:
    keep_route: bool
    by_count: Dict[str, int] = field(default_factory=dict)  # canonical text -> steps completed


# Keyed by object identity; the entry keeps s0 alive so ids are not reused.
_TARGET_CACHE: Dict[Tuple[int, str], Tuple[EnvState, TaskSpec, _Targets]] = {}


def _targets(s0: EnvState, task: TaskSpec) -> _Targets:
    key = (id(s0), task.id)
    cached = _TARGET_CACHE.get(key)
    if cached is not None and cached[0] is s0 and cached[1] == task:
        return cached[2]
    values = ref_values(task, s0)
    keep_route = task.reads_route
    targets = _Targets(keep_route)
    if task.multi_step:
        n = len(task.steps)
        for k in range(n, -1, -1):
            for subset in itertools.combinations(range(n), k):
                ops = [op for i in subset for op in task.steps[i]]
                text = _compare_form(apply_ops(s0, ops, values), keep_route)
                targets.by_count.setdefault(text, k)
    else:
        targets.by_count[_compare_form(apply_ops(s0, task.ops, values), keep_route)] = 1
    if len(_TARGET_CACHE) > 256:
        _TARGET_CACHE.clear()
    _TARGET_CACHE[key] = (s0, task, targets)
    return targets


def evaluate(
    s0: EnvState, st: EnvState, task: Union[str, TaskSpec], canonical: Optional[CanonicalState] = None
) -> RewardResult:
    """Indicator (or partial) reward of ``st`` against the task's target.

    ``canonical`` may pass an already computed ``canonicalize(st)``.
    """
    task = get_task(task)
    targets = _targets(s0, task)
    done = targets.by_count.get(_compare_form(st, targets.keep_route, canonical), 0)
    total = task.total_steps
    return RewardResult(
        reward=done / total,
        success=done == total,
        steps_completed=done,
        at_least_one_step=done >= 1,
        total_steps=total,
    )


def episode_outcome(
    states: Sequence[EnvState], task: Union[str, TaskSpec], horizon: int = DEFAULT_HORIZON
) -> RewardResult:
    """First-hit outcome over a trajectory of states ``[s0, s1, ...]``.

    Stops at the first successful step. The reported reward is the best
    reward seen, tagged with the first step that reached it.
    """
    if not states:
        raise TaskError("trajectory must contain at least s0")
    task = get_task(task)
    s0 = states[0]
    best = RewardResult(0.0, False, 0, False, task.total_steps, None, 0)
    last = min(len(states) - 1, horizon)
    for t in range(1, last + 1):
        r = evaluate(s0, states[t], task)
        if r.reward > best.reward:
            best = replace(r, achieved_step=t)
        if r.success:
            return replace(best, steps_taken=t)
    return replace(best, steps_taken=last)


def intent_routes(task: Union[str, TaskSpec]) -> frozenset:
    """Routes that are on-task: the task's apps plus home."""
    return get_task(task).relevant_apps | {"home"}
