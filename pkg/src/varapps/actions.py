"""Agent action commands: grammar, signatures, parsing and formatting.

An action is a single call ``name(arg, ..., key=value)`` whose arguments are
literals: quoted strings, integers, floats, ``True``/``False`` and lists of
those. The argument syntax is the Python call syntax restricted to literal
nodes, so the stdlib :mod:`ast` parser does the tokenising. Anything that is
not exactly one such call is classified rather than raised:

``malformed``
    not a single well-formed call (missing parentheses on a known action,
    broken argument syntax, trailing text after the call);
``unknown_action``
    a name that is not in the active profile;
``bad_arguments``
    a known action whose arguments do not bind to its signature.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

_MISSING = object()

# Verbatim action listings. The full listing repeats mouse_click and
# mouse_dblclick; the visual one repeats them too and drops a comma.
FULL_LISTING = """click, fill, dblclick, clear, select_option,
drag_and_drop, hover, go_back, go_forward,goto,
scroll, mouse_click, mouse_dblclick, mouse_move,
mouse_down, mouse_up, mouse_click, mouse_dblclick,
mouse_drag_and_drop, mouse_upload_file, keyboard_down,
keyboard_up, keyboard_press, keyboard_type, keyboard_insert_text."""

VISUAL_LISTING = """go_back,go_forward,goto,mouse_click
mouse_dblclick,scroll,mouse_move,mouse_down,
mouse_up,mouse_click,mouse_dblclick,
mouse_drag_and_drop,mouse_upload_file,keyboard_down,
keyboard_up,keyboard_press,keyboard_type,
keyboard_insert_text."""


def listing_tokens(listing: str) -> List[str]:
    """Names in a listing, in order, repeats kept."""
    return re.findall(r"[a-z_]+", listing)


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # str | num | bool | strlist | str_or_strlist
    default: Any = _MISSING
    choices: Optional[Tuple[str, ...]] = None

    @property
    def required(self) -> bool:
        return self.default is _MISSING

    def describe(self) -> str:
        text = f"{self.name}: {self.kind}"
        if not self.required:
            text += f" = {_format_value(self.default)}"
        return text


@dataclass(frozen=True)
class Signature:
    name: str
    params: Tuple[Param, ...]
    doc: str = ""

    def param(self, name: str) -> Optional[Param]:
        return next((p for p in self.params if p.name == name), None)

    def text(self) -> str:
        return f"{self.name}({', '.join(p.describe() for p in self.params)})"


_BUTTON = Param("button", "str", "left", ("left", "middle", "right"))
_MODIFIERS = Param("modifiers", "strlist", (), ("Alt", "Control", "ControlOrMeta", "Meta", "Shift"))


def _sig(name: str, *params: Param, doc: str = "") -> Signature:
    return Signature(name, tuple(params), doc)


SIGNATURES: Dict[str, Signature] = {
    s.name: s
    for s in (
        _sig("click", Param("bid", "str"), _BUTTON, _MODIFIERS, doc="Click an element."),
        _sig("dblclick", Param("bid", "str"), _BUTTON, _MODIFIERS, doc="Double-click an element."),
        _sig("fill", Param("bid", "str"), Param("value", "str"), doc="Replace a text field's value."),
        _sig("clear", Param("bid", "str"), doc="Empty a text field."),
        _sig("select_option", Param("bid", "str"), Param("options", "str_or_strlist"), doc="Choose option(s)."),
        _sig("drag_and_drop", Param("from_bid", "str"), Param("to_bid", "str")),
        _sig("hover", Param("bid", "str")),
        _sig("go_back", doc="Previous page in history."),
        _sig("go_forward", doc="Next page in history."),
        _sig("goto", Param("url", "str"), doc="Open a URL."),
        _sig("scroll", Param("delta_x", "num"), Param("delta_y", "num"), doc="Scroll by a pixel delta."),
        _sig("mouse_click", Param("x", "num"), Param("y", "num"), _BUTTON, doc="Click at viewport coordinates."),
        _sig("mouse_dblclick", Param("x", "num"), Param("y", "num"), _BUTTON),
        _sig("mouse_move", Param("x", "num"), Param("y", "num")),
        _sig("mouse_down", Param("x", "num"), Param("y", "num"), _BUTTON),
        _sig("mouse_up", Param("x", "num"), Param("y", "num"), _BUTTON),
        _sig(
            "mouse_drag_and_drop",
            Param("from_x", "num"), Param("from_y", "num"), Param("to_x", "num"), Param("to_y", "num"),
        ),
        _sig("mouse_upload_file", Param("x", "num"), Param("y", "num"), Param("file", "str_or_strlist")),
        _sig("keyboard_down", Param("key", "str")),
        _sig("keyboard_up", Param("key", "str")),
        _sig("keyboard_press", Param("key", "str"), doc="Press a key or chord, e.g. 'Enter', 'Control+a'."),
        _sig("keyboard_type", Param("text", "str"), doc="Type text into the focused field."),
        _sig("keyboard_insert_text", Param("text", "str")),
    )
}


@dataclass(frozen=True)
class ActionProfile:
    id: str
    allowed: frozenset

    def signatures(self) -> List[Signature]:
        return [SIGNATURES[n] for n in SIGNATURES if n in self.allowed]


PROFILES: Dict[str, ActionProfile] = {
    "full": ActionProfile("full", frozenset(listing_tokens(FULL_LISTING))),
    "visual_only": ActionProfile("visual_only", frozenset(listing_tokens(VISUAL_LISTING))),
}

ELEMENT_ACTIONS = frozenset(
    {"click", "dblclick", "fill", "clear", "select_option", "drag_and_drop", "hover"}
)


class UnknownProfile(KeyError):
    pass


def get_profile(profile: Union[str, ActionProfile]) -> ActionProfile:
    if isinstance(profile, ActionProfile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise UnknownProfile(profile) from None


def action_signatures(profile: Union[str, ActionProfile] = "full") -> List[Tuple[str, Signature]]:
    return [(s.name, s) for s in get_profile(profile).signatures()]


# ---------------------------------------------------------------------------
# Parsed values


@dataclass(frozen=True)
class Action:
    """A parsed call. ``args`` holds only the arguments that were given,
    keyed by parameter name in signature order; lists become tuples."""

    name: str
    args: Tuple[Tuple[str, Any], ...] = ()

    def get(self, name: str, default: Any = _MISSING) -> Any:
        for key, value in self.args:
            if key == name:
                return value
        if default is not _MISSING:
            return default
        param = SIGNATURES[self.name].param(name)
        if param is None or param.required:
            raise KeyError(name)
        return param.default

    def __getitem__(self, name: str) -> Any:
        return self.get(name)

    @property
    def ok(self) -> bool:
        return True


@dataclass(frozen=True)
class InvalidAction:
    raw: str
    category: str  # malformed | unknown_action | bad_arguments
    detail: str = ""

    @property
    def ok(self) -> bool:
        return False


CATEGORIES = ("malformed", "unknown_action", "bad_arguments")
ParseResult = Union[Action, InvalidAction]


# ---------------------------------------------------------------------------
# Parsing

_HEAD = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*(\()?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _NotLiteral(Exception):
    pass


def _literal(node: ast.AST) -> Any:
    if isinstance(node, ast.Constant) and isinstance(node.value, (str, int, float, bool)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = node.operand
        if isinstance(inner, ast.Constant) and type(inner.value) in (int, float):
            return -inner.value if isinstance(node.op, ast.USub) else inner.value
    if isinstance(node, ast.List):
        return tuple(_literal(e) for e in node.elts)
    raise _NotLiteral(node)


def _check_type(param: Param, value: Any) -> Optional[str]:
    kind = param.kind
    if kind == "str":
        ok = isinstance(value, str)
    elif kind == "num":
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind == "bool":
        ok = isinstance(value, bool)
    elif kind == "strlist":
        ok = isinstance(value, tuple) and all(isinstance(v, str) for v in value)
    else:
        ok = isinstance(value, str) or (
            isinstance(value, tuple) and bool(value) and all(isinstance(v, str) for v in value)
        )
    if not ok:
        return f"{param.name} expects {kind}, got {_format_value(value)}"
    if param.choices is not None:
        values = value if isinstance(value, tuple) else (value,)
        bad = [v for v in values if v not in param.choices]
        if bad:
            return f"{param.name} must be one of {', '.join(param.choices)}"
    return None


def _bind(sig: Signature, positional: Sequence[Any], keywords: Sequence[Tuple[str, Any]]) -> Union[Tuple, str]:
    if len(positional) > len(sig.params):
        return f"{sig.name} takes {len(sig.params)} arguments, got {len(positional)}"
    bound: Dict[str, Any] = {}
    for param, value in zip(sig.params, positional):
        bound[param.name] = value
    for key, value in keywords:
        param = sig.param(key)
        if param is None:
            return f"{sig.name} has no argument {key!r}"
        if key in bound:
            return f"{sig.name} got {key!r} twice"
        bound[key] = value
    for param in sig.params:
        if param.name in bound:
            problem = _check_type(param, bound[param.name])
            if problem:
                return problem
        elif param.required:
            return f"{sig.name} is missing {param.name!r}"
    return tuple((p.name, bound[p.name]) for p in sig.params if p.name in bound)


def parse_action(text: Any, profile: Union[str, ActionProfile] = "full") -> ParseResult:
    """Parse one action command. Never raises on any input text."""
    prof = get_profile(profile)
    if isinstance(text, bytes):
        raw = text.decode("utf-8", errors="replace")
    else:
        raw = str(text)
    try:
        return _parse(raw, prof)
    except Exception as exc:  # pragma: no cover - last-resort totality guard
        return InvalidAction(raw, "malformed", f"unparseable: {type(exc).__name__}")


def _parse(raw: str, prof: ActionProfile) -> ParseResult:
    src = raw.strip()
    if not src:
        return InvalidAction(raw, "malformed", "empty action")
    if _IDENT.fullmatch(src):
        if src in prof.allowed:
            return InvalidAction(raw, "malformed", f"{src} is missing its argument list")
        return InvalidAction(raw, "unknown_action", f"no action named {src!r}")
    head = _HEAD.match(src)
    if head is None or head.group(2) is None:
        return InvalidAction(raw, "malformed", "expected name(arguments)")
    name = head.group(1)
    if name not in prof.allowed:
        return InvalidAction(raw, "unknown_action", f"no action named {name!r} in profile {prof.id}")
    try:
        tree = ast.parse(src, mode="eval")
    except (SyntaxError, ValueError, MemoryError, RecursionError) as exc:
        detail = getattr(exc, "msg", None) or type(exc).__name__
        return InvalidAction(raw, "malformed", f"syntax: {detail}")
    call = tree.body
    if not (isinstance(call, ast.Call) and isinstance(call.func, ast.Name) and call.func.id == name):
        return InvalidAction(raw, "malformed", "text after the call")
    if any(isinstance(a, ast.Starred) for a in call.args) or any(k.arg is None for k in call.keywords):
        return InvalidAction(raw, "malformed", "argument unpacking is not supported")
    try:
        positional = [_literal(a) for a in call.args]
        keywords = [(k.arg, _literal(k.value)) for k in call.keywords]
    except _NotLiteral as exc:
        node = exc.args[0]
        what = ast.get_source_segment(src, node) or type(node).__name__
        return InvalidAction(raw, "bad_arguments", f"not a literal value: {what}")
    except RecursionError:
        return InvalidAction(raw, "malformed", "nesting too deep")
    bound = _bind(SIGNATURES[name], positional, keywords)
    if isinstance(bound, str):
        return InvalidAction(raw, "bad_arguments", bound)
    return Action(name, bound)


# ---------------------------------------------------------------------------
# Formatting


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    return repr(value)


def format_action(action: Action) -> str:
    """Text form that parses back to an equal Action.

    Required arguments are written positionally, optional ones by keyword.
    """
    sig = SIGNATURES[action.name]
    given = dict(action.args)
    parts = []
    for param in sig.params:
        if param.name not in given:
            continue
        value = _format_value(given[param.name])
        parts.append(value if param.required else f"{param.name}={value}")
    return f"{action.name}({', '.join(parts)})"


def call(name: str, *args: Any, **kwargs: Any) -> Action:
    """Build a validated Action in code (raises ValueError if it does not bind)."""
    sig = SIGNATURES[name]
    norm = lambda v: tuple(v) if isinstance(v, list) else v  # noqa: E731
    bound = _bind(sig, [norm(a) for a in args], [(k, norm(v)) for k, v in kwargs.items()])
    if isinstance(bound, str):
        raise ValueError(bound)
    return Action(name, bound)


# ---------------------------------------------------------------------------
# Splitting concatenated calls


def split_actions(text: str) -> List[str]:
    """Split text holding back-to-back calls, e.g. ``click(47)click(47)``.

    Parentheses inside quoted strings are ignored. Text that is not part of
    a call is kept as its own chunk, so nothing is lost.
    """
    out: List[str] = []
    i, n = 0, len(text)
    start = 0
    while i < n:
        m = _HEAD.match(text, i)
        if m is None or m.group(2) is None:
            i += 1
            continue
        depth, j, quote = 0, m.end() - 1, None
        while j < n:
            ch = text[j]
            if quote:
                if ch == "\\":
                    j += 1
                elif ch == quote:
                    quote = None
            elif ch in "'\"":
                quote = ch
            elif ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    break
            j += 1
        if depth != 0:
            break
        if text[start:m.start()].strip():
            out.append(text[start:m.start()].strip())
        out.append(text[m.start():j + 1])
        i = start = j + 1
    if text[start:].strip():
        out.append(text[start:].strip())
    return out


# ---------------------------------------------------------------------------
# Manifest


MANIFEST_VERSION = 1


def signature_manifest(profile: Union[str, ActionProfile] = "full") -> dict:
    prof = get_profile(profile)
    actions = []
    for name, sig in action_signatures(prof):
        params = []
        for p in sig.params:
            entry: Dict[str, Any] = {"name": p.name, "type": p.kind, "required": p.required}
            if not p.required:
                entry["default"] = list(p.default) if isinstance(p.default, tuple) else p.default
            if p.choices:
                entry["choices"] = list(p.choices)
            params.append(entry)
        actions.append({"name": name, "signature": sig.text(), "params": params})
    return {"manifest_version": MANIFEST_VERSION, "profile": prof.id, "actions": actions}
