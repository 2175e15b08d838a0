"""Scripted reference agents.

Agents see only the goal text and the observation text that any external
agent would get, and answer with an action string. The oracle is the
exception: it keeps a private replica of the environment, built from the same
request, and plans from the task's declared ops. This is what makes it an
oracle rather than a policy. It still drives the real environment only
through action text, so it works in-process and over HTTP alike.
"""

from __future__ import annotations

import random
import re
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence

from .actions import call, format_action
from .controls import (
    ActivateButton,
    Focus,
    Navigate,
    SelectOption,
    SemanticControl,
    SetField,
    ToggleTodo,
)
from .env import Env, EnvRequest
from .layout import Observation, UiNode, route_url
from .state import FORM_FIELDS, EnvState
from .tasks import OpApplier, fill_op, ref_values

AGENT_IDS = ("oracle", "random", "looper", "external")


class AgentError(RuntimeError):
    pass


class Agent:
    id = "agent"

    def reset(self, goal: str, observation: str) -> None:
        self.goal = goal

    def act(self, observation: str) -> str:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Oracle


def _fmt(name: str, *args, **kwargs) -> str:
    return format_action(call(name, *args, **kwargs))


def expand_op(op: dict, applier: OpApplier, state: EnvState) -> List[SemanticControl]:
    """Controls that carry out one (already filled) op from ``state``."""
    kind = op["op"]
    nav = state.nav
    out: List[SemanticControl] = []
    if kind == "add_todo":
        out = [Navigate("todo"), SetField("todo.text", op["text"]), ActivateButton("add-todo")]
    elif kind == "set_todo_done":
        pos = applier.position("todo", op["index"])
        out = [Navigate("todo")]
        if state.todos[pos].done != bool(op.get("done", True)):
            out.append(ToggleTodo(pos))
    elif kind == "remove_todo":
        out = [Navigate("todo"), ActivateButton("delete-todo", (applier.position("todo", op["index"]),))]
    elif kind == "add_event":
        wanted = {
            "calendar.title": op["title"],
            "calendar.date": op["date"],
            "calendar.description": op.get("description") or "",
            "calendar.url": op.get("url") or "",
            "calendar.invitees": ", ".join(op.get("invitees") or ()),
            "calendar.location": op.get("location") or "",
        }
        out = [Navigate("calendar")]
        for name in FORM_FIELDS["calendar"]:
            if name in ("calendar.title", "calendar.date") or nav.field(name) != wanted[name]:
                out.append(SetField(name, wanted[name]))
        out.append(ActivateButton("add-event"))
    elif kind == "duplicate_event":
        pos = applier.position("event", op["index"])
        out = [
            Navigate("calendar"),
            ActivateButton("copy-event", (pos,)),
            SetField("calendar.date", op["date"]),
            ActivateButton("add-event"),
        ]
    elif kind == "remove_event":
        e = state.calendar[applier.position("event", op["index"])]
        out = [Navigate("calendar"), ActivateButton("delete-event", (e.title, e.date.isoformat()))]
    elif kind == "send_message":
        out = [
            Navigate("messenger"),
            ActivateButton("open-chat", (op["peer"],)),
            SetField("messenger.body", op["body"]),
            ActivateButton("send-message"),
        ]
    elif kind == "forward_latest":
        msg = applier.latest_received(op["source"])
        out = [
            Navigate("messenger"),
            ActivateButton("open-chat", (op["source"],)),
            ActivateButton("forward-message", (msg.peer, msg.seq)),
            ActivateButton("open-chat", (op["peer"],)),
            ActivateButton("send-message"),
        ]
    elif kind == "save_place":
        out = [
            Navigate("maps"),
            SetField("maps.query", op["name"]),
            ActivateButton("search-place"),
            ActivateButton("save-place"),
        ]
    elif kind == "remove_place":
        name = applier.s0.places[op["index"]].name if "index" in op else op["name"]
        out = [Navigate("maps"), ActivateButton("remove-place", (name,))]
    elif kind == "add_cart":
        out = [Navigate("shop")]
        for option, value in sorted((op.get("options") or {}).items()):
            out.append(SelectOption(op["product"], option, value))
        out.append(ActivateButton("add-to-cart", (op["product"],)))
    elif kind == "clear_cart":
        out = [Navigate("cart")] + [ActivateButton("remove-cart-line", (0,))] * len(state.cart)
    elif kind == "add_file":
        button = "new-file" if op.get("kind", "file") == "file" else "new-folder"
        out = [
            Navigate("codeeditor"),
            SetField("codeeditor.name", op["name"]),
            ActivateButton(button, tuple(op.get("path") or ())),
        ]
    elif kind == "remove_file":
        out = [Navigate("codeeditor"), ActivateButton("delete-node", tuple(op["path"]))]
    elif kind == "navigate":
        out = [Navigate(op["route"])]
    else:
        raise AgentError(f"oracle cannot plan op {kind}")
    return out


def _find(obs: Observation, control: SemanticControl) -> Optional[UiNode]:
    for node in obs.root.walk():
        if isinstance(control, (SetField, Focus)):
            if node.field == control.field:
                return node
        elif node.control == control:
            return node
    return None


class OracleAgent(Agent):
    """Plans from the task's ops on a replica and emits matching action text.

    ``visual=True`` uses only coordinate and keyboard actions, scrolling
    targets into view first.
    """

    id = "oracle"

    def __init__(self, request: EnvRequest, visual: Optional[bool] = None):
        self.replica = Env(request)
        self.visual = (request.profile == "visual_only") if visual is None else visual
        task = self.replica.task
        values = ref_values(task, self.replica.s0)
        self.applier = OpApplier(self.replica.s0, values)
        self.ops: Deque[dict] = deque(fill_op(op, values) for op in task.all_ops)
        self.queue: Deque[SemanticControl] = deque()

    def _next_control(self) -> Optional[SemanticControl]:
        while True:
            state = self.replica.state
            while self.queue:
                control = self.queue[0]
                if isinstance(control, Navigate) and state.nav.route == control.route:
                    self.queue.popleft()
                    continue
                if isinstance(control, ActivateButton) and control.button == "open-chat":
                    if state.nav.open_dialog == f"chat:{control.target[0]}":
                        self.queue.popleft()
                        continue
                return control
            if not self.ops:
                return None
            op = self.ops.popleft()
            self.queue.extend(expand_op(op, self.applier, state))
            self.applier.apply(op)

    def _click(self, obs: Observation, node: UiNode) -> str:
        if not self.visual:
            return _fmt("click", node.bid)
        scroll = self._scroll_into_view(obs, node)
        if scroll:
            return scroll
        cx, cy = node.center
        vx, vy = obs.to_viewport(cx, cy)
        return _fmt("mouse_click", round(vx, 1), round(vy, 1))

    def _scroll_into_view(self, obs: Observation, node: UiNode) -> Optional[str]:
        _x, y, _w, h = node.bbox
        top, bottom = obs.scroll_offset, obs.scroll_offset + obs.viewport.height
        if y >= top and y + h <= bottom:
            return None
        target = int(node.center[1] - obs.viewport.height / 2)
        target = max(0, min(obs.max_scroll, target))
        return _fmt("scroll", 0, target - obs.scroll_offset)

    def _emit(self, control: SemanticControl) -> str:
        obs = self.replica.observe()
        state = self.replica.state
        node = _find(obs, control)
        if isinstance(control, Navigate) and node is None:
            self.queue.popleft()
            return _fmt("goto", route_url(control.route))
        if node is None:
            raise AgentError(f"oracle found no element for {control!r} on {state.nav.route}")
        if isinstance(control, SetField) and self.visual:
            scroll = self._scroll_into_view(obs, node)
            if scroll:
                return scroll
            current = state.nav.field(control.field)
            if state.nav.focus != control.field:
                return self._click(obs, node)
            if current and not state.nav.selected:
                return _fmt("keyboard_press", "Control+a")
            self.queue.popleft()
            if control.value:
                return _fmt("keyboard_type", control.value)
            return _fmt("keyboard_press", "Backspace")
        if isinstance(control, SetField):
            self.queue.popleft()
            return _fmt("fill", node.bid, control.value)
        if self.visual:
            scroll = self._scroll_into_view(obs, node)
            if scroll:
                return scroll
        self.queue.popleft()
        return self._click(obs, node)

    def act(self, observation: str = "") -> str:
        control = self._next_control()
        if control is None:
            text = _fmt("scroll", 0, 0)
        else:
            text = self._emit(control)
        if self.replica.status == "running":
            self.replica.step(text)
        return text


# ---------------------------------------------------------------------------
# Other scripted agents

_AX_LINE = re.compile(r"^\s*(\d+) (button|link|textbox|checkbox|option) ")


def interactive_bids(ax_tree: str) -> List[str]:
    return [m.group(1) for m in map(_AX_LINE.match, ax_tree.splitlines()) if m]


class RandomAgent(Agent):
    """Seeded random clicks, fills and scrolls over the visible ax tree."""

    id = "random"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def act(self, observation: str) -> str:
        bids = interactive_bids(observation)
        roll = self.rng.random()
        if not bids or roll < 0.1:
            return _fmt("scroll", 0, self.rng.choice((-300, 300)))
        bid = self.rng.choice(bids)
        if roll < 0.3:
            return _fmt("fill", bid, self.rng.choice(("hello", "Buy milk", "2025-07-22")))
        return _fmt("click", bid)


class LooperAgent(Agent):
    """Repeats a fixed cycle of ``period`` actions."""

    id = "looper"

    def __init__(self, period: int = 1, actions: Optional[Sequence[str]] = None):
        if period < 1:
            raise ValueError("period must be >= 1")
        pool = list(actions) if actions else [_fmt("click", str(i)) for i in range(2, 2 + period)]
        self.cycle = (pool * period)[:period]
        self.i = 0

    def act(self, observation: str) -> str:
        text = self.cycle[self.i % len(self.cycle)]
        self.i += 1
        return text


class CrashingAgent(Agent):
    """Raises on its first action; used to exercise crash containment."""

    id = "crash"

    def act(self, observation: str) -> str:
        raise AgentError("agent policy crashed")


@dataclass(frozen=True)
class AgentSpec:
    id: str
    period: int = 1
    visual: Optional[bool] = None

    @classmethod
    def parse(cls, value) -> "AgentSpec":
        if isinstance(value, AgentSpec):
            return value
        if isinstance(value, dict):
            return cls(str(value["id"]), int(value.get("period", 1)), value.get("visual"))
        text = str(value)
        m = re.fullmatch(r"looper(?::(\d+))?", text)
        if m:
            return cls("looper", int(m.group(1) or 1))
        return cls(text)


def make_agent(spec, request: EnvRequest) -> Agent:
    spec = AgentSpec.parse(spec)
    if spec.id == "oracle":
        return OracleAgent(request, spec.visual)
    if spec.id == "random":
        return RandomAgent(request.seed)
    if spec.id == "looper":
        return LooperAgent(spec.period)
    if spec.id == "crash":
        return CrashingAgent()
    if spec.id == "external":
        raise AgentError("external agents attach over HTTP (varapps serve); they cannot run in the harness")
    raise AgentError(f"unknown agent {spec.id!r}")
