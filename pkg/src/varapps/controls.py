"""Semantic controls: the resolved meaning of a UI action.

Raw agent actions (``click('12')``, ``mouse_click(300, 210)``) are resolved
against a rendered page into one of these values, which the state machine
then applies. Controls are plain frozen dataclasses so they compare and hash
by value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

ROUTES = ("home", "calendar", "todo", "messenger", "maps", "codeeditor", "shop", "cart")
APP_ROUTES = ("calendar", "todo", "messenger", "maps", "codeeditor", "shop")
EXTERNAL_PREFIX = "external:"


def external_route(url: str) -> str:
    return EXTERNAL_PREFIX + url


def is_external(route: str) -> bool:
    return route.startswith(EXTERNAL_PREFIX)


def route_app(route: str) -> Optional[str]:
    """App that owns a route (``cart`` belongs to the shop)."""
    if route == "cart":
        return "shop"
    if route in APP_ROUTES:
        return route
    return None


@dataclass(frozen=True)
class Navigate:
    route: str


@dataclass(frozen=True)
class GoBack:
    pass


@dataclass(frozen=True)
class GoForward:
    pass


@dataclass(frozen=True)
class Scroll:
    offset: int


@dataclass(frozen=True)
class Focus:
    field: str


@dataclass(frozen=True)
class SetField:
    field: str
    value: str


@dataclass(frozen=True)
class TypeText:
    text: str


@dataclass(frozen=True)
class PressKey:
    key: str  # one of "Enter", "Backspace", "Tab", "select_all"


@dataclass(frozen=True)
class ActivateButton:
    button: str
    target: Tuple = ()


@dataclass(frozen=True)
class ToggleTodo:
    index: int


@dataclass(frozen=True)
class SelectOption:
    product_id: str
    option: str
    value: str


SemanticControl = Union[
    Navigate, GoBack, GoForward, Scroll, Focus, SetField, TypeText, PressKey,
    ActivateButton, ToggleTodo, SelectOption,
]


@dataclass(frozen=True)
class Rejection:
    """A control (or action) that is well-formed but not applicable.

    ``effect`` is an optional control that is still applied, used for
    navigation away from the environment: the page changes, but the attempt
    is recorded as a rejection for analytics.
    """

    reason: str
    detail: str = ""
    effect: Optional[SemanticControl] = None


def describe(control: SemanticControl) -> str:
    """Short stable text form, used in logs and trajectory records."""
    name = type(control).__name__
    args = ", ".join(repr(v) for v in control.__dict__.values())
    return f"{name}({args})"
