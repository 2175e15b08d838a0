"""In-process environment sessions: parse, resolve, apply, evaluate.

``Env`` is the single pipeline used by the HTTP server, the harness and the
scripted agents. Invalid and rejected actions leave the state unchanged but
still consume a step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple, Union

from . import __version__
from .actions import Action, InvalidAction, UnknownProfile, format_action, get_profile, parse_action
from .config import AppConfigSet, VariationError, build_config, get_variation
from .controls import Rejection, describe
from .layout import Observation, Viewport, render, resolve
from .state import EnvState, apply_control, canonicalize, init_state
from .tasks import DEFAULT_HORIZON, RewardResult, TaskSpec, UnknownTask, evaluate, get_task, sample_goal

ENGINE_VERSION = __version__


class RequestError(ValueError):
    """Bad session request; ``code`` is machine readable."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class SessionTerminal(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvRequest:
    task: str
    variations: Tuple[str, ...] = ()
    seed: int = 0
    viewport: Viewport = field(default_factory=lambda: Viewport(1280, 720))
    profile: str = "full"
    horizon: int = DEFAULT_HORIZON

    @classmethod
    def from_dict(cls, d: Dict[str, Any], default_horizon: int = DEFAULT_HORIZON) -> "EnvRequest":
        if not isinstance(d, dict):
            raise RequestError("bad_request", "request body must be an object")
        known = {"task", "variations", "seed", "viewport", "profile", "horizon", "protocol_version"}
        extra = sorted(set(d) - known)
        if extra:
            raise RequestError("bad_request", f"unknown fields: {', '.join(extra)}")
        if "task" not in d:
            raise RequestError("bad_request", "missing field: task")
        try:
            viewport = Viewport.parse(d.get("viewport", "HD"))
        except (ValueError, KeyError, TypeError) as exc:
            raise RequestError("bad_viewport", str(exc)) from None
        variations = d.get("variations") or []
        if isinstance(variations, str) or not all(isinstance(v, str) for v in variations):
            raise RequestError("bad_request", "variations must be a list of ids")
        seed, horizon = d.get("seed", 0), d.get("horizon", default_horizon)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise RequestError("bad_request", "seed must be an integer")
        if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
            raise RequestError("bad_request", "horizon must be a positive integer")
        return cls(
            task=str(d["task"]),
            variations=tuple(variations),
            seed=seed,
            viewport=viewport,
            profile=str(d.get("profile", "full")),
            horizon=horizon,
        )

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "variations": list(self.variations),
            "seed": self.seed,
            "viewport": {"width": self.viewport.width, "height": self.viewport.height},
            "profile": self.profile,
            "horizon": self.horizon,
        }


def parse_outcome(parsed: Union[Action, InvalidAction]) -> dict:
    if isinstance(parsed, Action):
        return {"ok": True, "action": format_action(parsed)}
    return {"ok": False, "category": parsed.category, "detail": parsed.detail}


@dataclass
class StepResult:
    index: int
    action_text: str
    parsed: Union[Action, InvalidAction]
    rejection: Optional[Rejection]
    control: Optional[str]
    route: str
    digest: str
    reward: RewardResult
    status: str

    def to_dict(self) -> dict:
        rej = None
        if self.rejection is not None:
            rej = {"reason": self.rejection.reason, "detail": self.rejection.detail}
        return {
            "index": self.index,
            "action_text": self.action_text,
            "parse": parse_outcome(self.parsed),
            "rejection": rej,
            "control": self.control,
            "route": self.route,
            "digest": self.digest,
            "reward": self.reward.reward,
            "status": self.status,
        }


class Env:
    """One episode of one task under one configuration."""

    def __init__(self, request: EnvRequest, base_config: Optional[AppConfigSet] = None):
        try:
            self.task: TaskSpec = get_task(request.task)
        except UnknownTask:
            raise RequestError("unknown_task", f"unknown task {request.task!r}") from None
        try:
            self.profile = get_profile(request.profile)
        except UnknownProfile:
            raise RequestError("unknown_profile", f"unknown action profile {request.profile!r}") from None
        try:
            for v in request.variations:
                get_variation(v)
            self.config = build_config(request.variations, base_config)
        except VariationError as exc:
            raise RequestError("unknown_variation", str(exc)) from None
        self.request = request
        self.s0: EnvState = init_state(self.config)
        self.state: EnvState = self.s0
        self.states: List[EnvState] = [self.s0]
        self.steps: List[StepResult] = []
        self.status = "running"
        self.best = RewardResult(0.0, False, 0, False, self.task.total_steps, None, 0)
        self.goal = sample_goal(self.task, request.seed, self.s0)
        self._obs: Optional[Observation] = None

    @property
    def step_count(self) -> int:
        return len(self.steps)

    @property
    def horizon(self) -> int:
        return self.request.horizon

    def observe(self) -> Observation:
        if self._obs is None:
            self._obs = render(self.state, self.config, self.request.viewport)
        return self._obs

    def s0_digest(self) -> str:
        return canonicalize(self.s0).digest

    def result(self) -> RewardResult:
        return replace(self.best, steps_taken=self.step_count)

    def step(self, action_text: str) -> StepResult:
        if self.status != "running":
            raise SessionTerminal(f"session is {self.status}")
        parsed = parse_action(action_text, self.profile)
        rejection: Optional[Rejection] = None
        control_text: Optional[str] = None
        new_state = self.state
        if isinstance(parsed, Action):
            resolved = resolve(self.observe(), parsed)
            if isinstance(resolved, Rejection):
                rejection = resolved
                if resolved.effect is not None:
                    control_text = describe(resolved.effect)
                    applied = apply_control(self.state, resolved.effect)
                    if not isinstance(applied, Rejection):
                        new_state = applied
            else:
                control_text = describe(resolved)
                applied = apply_control(self.state, resolved)
                if isinstance(applied, Rejection):
                    rejection = applied
                else:
                    new_state = applied
        if new_state is not self.state:
            self._obs = None
        self.state = new_state
        self.states.append(new_state)
        index = len(self.steps) + 1
        canon = canonicalize(new_state)
        reward = evaluate(self.s0, new_state, self.task, canonical=canon)
        if reward.reward > self.best.reward:
            self.best = replace(reward, achieved_step=index)
        if reward.success:
            self.status = "succeeded"
        elif index >= self.horizon:
            self.status = "exhausted"
        result = StepResult(
            index=index,
            action_text=action_text,
            parsed=parsed,
            rejection=rejection,
            control=control_text,
            route=new_state.nav.route,
            digest=canon.digest,
            reward=reward,
            status=self.status,
        )
        self.steps.append(result)
        return result


def observation_payload(obs: Observation, mode: str = "axtree") -> dict:
    """Wire form of an observation; ``mode`` is ``axtree`` or ``html``."""
    if mode not in ("axtree", "html"):
        raise RequestError("bad_mode", f"unknown observation mode {mode!r}")
    return {
        "mode": mode,
        "url": obs.url,
        "route": obs.route,
        "viewport": {"width": obs.viewport.width, "height": obs.viewport.height},
        "scroll_offset": obs.scroll_offset,
        "page_height": obs.page_height,
        "focus": obs.focus,
        "text": obs.ax_tree if mode == "axtree" else obs.html,
    }
