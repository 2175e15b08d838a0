"""Ground-truth environment state for the six apps and its transitions.

Every value here is an immutable snapshot: ``apply_control`` returns a new
``EnvState`` (or a ``Rejection``) and never mutates its input. Rewards are
computed from :func:`canonicalize`, which masks navigation-only details and
sorts the collections whose display order carries no meaning.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import re
import unicodedata
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import yaml

from .controls import (
    ActivateButton,
    Focus,
    GoBack,
    GoForward,
    Navigate,
    PressKey,
    Rejection,
    Scroll,
    SelectOption,
    SemanticControl,
    SetField,
    ToggleTodo,
    TypeText,
    route_app,
)

FORM_FIELDS: Dict[str, Tuple[str, ...]] = {
    "calendar": (
        "calendar.title",
        "calendar.date",
        "calendar.description",
        "calendar.url",
        "calendar.invitees",
        "calendar.location",
    ),
    "todo": ("todo.text",),
    "messenger": ("messenger.body",),
    "maps": ("maps.query",),
    "codeeditor": ("codeeditor.name",),
}

# Pressing Enter inside a form activates its submit button.
SUBMIT_BUTTONS = {
    "calendar": "add-event",
    "todo": "add-todo",
    "messenger": "send-message",
    "maps": "search-place",
}

BUTTON_ROUTES = {
    "add-todo": "todo",
    "delete-todo": "todo",
    "add-event": "calendar",
    "delete-event": "calendar",
    "copy-event": "calendar",
    "open-chat": "messenger",
    "send-message": "messenger",
    "forward-message": "messenger",
    "search-place": "maps",
    "save-place": "maps",
    "remove-place": "maps",
    "new-file": "codeeditor",
    "new-folder": "codeeditor",
    "delete-node": "codeeditor",
    "add-to-cart": "shop",
    "remove-cart-line": "cart",
}


class StateError(ValueError):
    """Raised when a state cannot be built from configuration data."""


def norm_text(value: str) -> str:
    return unicodedata.normalize("NFC", value).strip()


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class CalendarEvent:
    title: str
    date: _dt.date
    description: str = ""
    url: Optional[str] = None
    location: Optional[str] = None
    invitees: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if not self.title.strip():
            raise StateError("calendar event title must be non-empty")
        if not isinstance(self.date, _dt.date):
            raise StateError(f"calendar event date must be a date, got {self.date!r}")

    def sort_key(self):
        return (
            self.date.isoformat(),
            self.title,
            self.description,
            self.url or "",
            self.location or "",
            self.invitees or (),
        )


@dataclass(frozen=True)
class TodoItem:
    text: str
    done: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise StateError("todo text must be non-empty")


@dataclass(frozen=True)
class Message:
    peer: str
    direction: str  # "sent" | "received"
    body: str
    seq: int

    def __post_init__(self):
        if self.direction not in ("sent", "received"):
            raise StateError(f"bad message direction {self.direction!r}")
        if not self.body.strip():
            raise StateError("message body must be non-empty")


@dataclass(frozen=True)
class SavedPlace:
    name: str
    query: str


@dataclass(frozen=True)
class Product:
    id: str
    name: str
    options: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()

    def option_values(self, option: str) -> Optional[Tuple[str, ...]]:
        for name, values in self.options:
            if name == option:
                return values
        return None


@dataclass(frozen=True)
class CartItem:
    product_id: str
    chosen_options: Tuple[Tuple[str, str], ...] = ()
    quantity: int = 1

    def __post_init__(self):
        if self.quantity < 1:
            raise StateError("cart quantity must be >= 1")

    def sort_key(self):
        return (self.product_id, self.chosen_options)


@dataclass(frozen=True)
class FileNode:
    kind: str  # "file" | "folder"
    name: str
    children: Tuple["FileNode", ...] = ()

    def __post_init__(self):
        if self.kind not in ("file", "folder"):
            raise StateError(f"bad file node kind {self.kind!r}")
        if self.kind == "file" and self.children:
            raise StateError(f"file {self.name!r} cannot have children")
        names = [c.name for c in self.children]
        if len(names) != len(set(names)):
            raise StateError(f"duplicate names under folder {self.name!r}")

    def find(self, path: Tuple[str, ...]) -> Optional["FileNode"]:
        node = self
        for name in path:
            node = next((c for c in node.children if c.name == name), None)
            if node is None:
                return None
        return node


def _file_order(node: FileNode):
    return (node.kind != "folder", node.name)


@dataclass(frozen=True)
class NavState:
    route: str = "home"
    scroll_offset: int = 0
    pending_form: Tuple[Tuple[str, str], ...] = ()
    open_dialog: Optional[str] = None
    focus: Optional[str] = None
    selected: bool = False
    back: Tuple[str, ...] = ()
    forward: Tuple[str, ...] = ()

    def field(self, name: str, default: str = "") -> str:
        for key, value in self.pending_form:
            if key == name:
                return value
        return default

    def with_fields(self, **updates: Optional[str]) -> "NavState":
        """Set (or with ``None`` drop) pending form fields."""
        form = dict(self.pending_form)
        for key, value in updates.items():
            if value is None:
                form.pop(key, None)
            else:
                form[key] = value
        return replace(self, pending_form=tuple(sorted(form.items())))

    def without_prefix(self, prefix: str) -> "NavState":
        form = tuple((k, v) for k, v in self.pending_form if not k.startswith(prefix))
        return replace(self, pending_form=form)


@dataclass(frozen=True)
class EnvState:
    calendar: Tuple[CalendarEvent, ...] = ()
    todos: Tuple[TodoItem, ...] = ()
    conversations: Tuple[Tuple[str, Tuple[Message, ...]], ...] = ()
    places: Tuple[SavedPlace, ...] = ()
    catalog: Tuple[Product, ...] = ()
    cart: Tuple[CartItem, ...] = ()
    files: FileNode = field(default_factory=lambda: FileNode("folder", "project"))
    nav: NavState = field(default_factory=NavState)
    today: _dt.date = _dt.date(2025, 7, 1)
    logical_clock: int = 0

    def conversation(self, peer: str) -> Optional[Tuple[Message, ...]]:
        for name, messages in self.conversations:
            if name == peer:
                return messages
        return None

    def with_conversation(self, peer: str, messages: Tuple[Message, ...]) -> "EnvState":
        convs = dict(self.conversations)
        convs[peer] = messages
        return replace(self, conversations=tuple(sorted(convs.items())))

    def product(self, product_id: str) -> Optional[Product]:
        return next((p for p in self.catalog if p.id == product_id), None)


# ---------------------------------------------------------------------------
# Construction from configuration


def _parse_date(value: Any, where: str) -> _dt.date:
    if isinstance(value, _dt.datetime):
        return value.date()
    if isinstance(value, _dt.date):
        return value
    try:
        return _dt.date.fromisoformat(str(value))
    except ValueError:
        raise StateError(f"{where}: not an ISO date: {value!r}") from None


def _event_from_dict(d: dict, where: str) -> CalendarEvent:
    invitees = d.get("invitees")
    if isinstance(invitees, str):
        invitees = [p for p in (s.strip() for s in invitees.split(",")) if p]
    return CalendarEvent(
        title=str(d["title"]),
        date=_parse_date(d["date"], f"{where}.date"),
        description=str(d.get("description") or ""),
        url=d.get("url"),
        location=d.get("location"),
        invitees=tuple(invitees) if invitees else None,
    )


def _file_from_dict(d: dict) -> FileNode:
    children = tuple(sorted((_file_from_dict(c) for c in d.get("children") or ()), key=_file_order))
    return FileNode(kind=d["kind"], name=str(d["name"]), children=children)


def _conversations_from_config(convs: dict) -> Tuple[Tuple[str, Tuple[Message, ...]], ...]:
    out = {}
    for peer, messages in (convs or {}).items():
        out[str(peer)] = tuple(
            Message(peer=str(peer), direction=m["direction"], body=str(m["body"]), seq=i + 1)
            for i, m in enumerate(messages or ())
        )
    return tuple(sorted(out.items()))


def init_state(configs) -> EnvState:
    """Build the initial state ``s_0`` from the content sections of a config set.

    ``configs`` is an :class:`~varapps.config.AppConfigSet` (anything with a
    ``data`` mapping in the config-set layout works).
    """
    data = configs.data if hasattr(configs, "data") else configs
    where = "apps"
    try:
        apps = data["apps"]
        where = "apps.calendar.content.events"
        calendar = tuple(
            _event_from_dict(e, f"{where}[{i}]")
            for i, e in enumerate(apps["calendar"]["content"].get("events") or ())
        )
        where = "apps.todo.content.todos"
        todos = tuple(
            TodoItem(text=str(t["text"]), done=bool(t.get("done", False)))
            for t in apps["todo"]["content"].get("todos") or ()
        )
        where = "apps.messenger.content.conversations"
        conversations = _conversations_from_config(apps["messenger"]["content"].get("conversations"))
        where = "apps.maps.content.saved_places"
        places = tuple(
            SavedPlace(name=str(p["name"]), query=str(p.get("query", p["name"])))
            for p in apps["maps"]["content"].get("saved_places") or ()
        )
        if len({p.name for p in places}) != len(places):
            raise StateError(f"{where}: duplicate saved place names")
        where = "apps.shop.content.products"
        catalog = tuple(
            Product(
                id=str(p["id"]),
                name=str(p["name"]),
                options=tuple((str(k), tuple(str(v) for v in vs)) for k, vs in (p.get("options") or {}).items()),
            )
            for p in apps["shop"]["content"].get("products") or ()
        )
        where = "apps.shop.content.cart"
        cart = tuple(
            CartItem(
                product_id=str(c["product_id"]),
                chosen_options=tuple(sorted((str(k), str(v)) for k, v in (c.get("options") or {}).items())),
                quantity=int(c.get("quantity", 1)),
            )
            for c in apps["shop"]["content"].get("cart") or ()
        )
        where = "apps.codeeditor.content.files"
        files = _file_from_dict(apps["codeeditor"]["content"]["files"])
        where = "globals.today"
        today = _parse_date(data["globals"]["today"], where)
    except StateError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise StateError(f"{where}: {exc!r}") from None
    return EnvState(
        calendar=calendar,
        todos=todos,
        conversations=conversations,
        places=places,
        catalog=catalog,
        cart=cart,
        files=files,
        nav=NavState(),
        today=today,
        logical_clock=0,
    )


# ---------------------------------------------------------------------------
# Serialization


def _event_dict(e: CalendarEvent) -> dict:
    return {
        "title": e.title,
        "date": e.date.isoformat(),
        "description": e.description,
        "url": e.url,
        "location": e.location,
        "invitees": list(e.invitees) if e.invitees is not None else None,
    }


def _file_dict(node: FileNode) -> dict:
    d = {"kind": node.kind, "name": node.name}
    if node.kind == "folder":
        d["children"] = [_file_dict(c) for c in node.children]
    return d


def _product_dict(p: Product) -> dict:
    return {"id": p.id, "name": p.name, "options": {k: list(v) for k, v in p.options}}


def _cart_dict(c: CartItem) -> dict:
    return {"product_id": c.product_id, "options": dict(c.chosen_options), "quantity": c.quantity}


def _messages(msgs: Iterable[Message]) -> list:
    return [{"direction": m.direction, "body": m.body, "seq": m.seq} for m in msgs]


def state_to_dict(state: EnvState) -> dict:
    """Full (unmasked) plain-data form, in schema order."""
    nav = state.nav
    return {
        "calendar": [_event_dict(e) for e in state.calendar],
        "todos": [{"text": t.text, "done": t.done} for t in state.todos],
        "conversations": {peer: _messages(msgs) for peer, msgs in state.conversations},
        "places": [{"name": p.name, "query": p.query} for p in state.places],
        "catalog": [_product_dict(p) for p in state.catalog],
        "cart": [_cart_dict(c) for c in state.cart],
        "files": _file_dict(state.files),
        "nav": {
            "route": nav.route,
            "scroll_offset": nav.scroll_offset,
            "pending_form": dict(nav.pending_form),
            "open_dialog": nav.open_dialog,
            "focus": nav.focus,
            "selected": nav.selected,
            "back": list(nav.back),
            "forward": list(nav.forward),
        },
        "today": state.today.isoformat(),
        "logical_clock": state.logical_clock,
    }


def state_from_dict(d: dict) -> EnvState:
    nav = d["nav"]
    return EnvState(
        calendar=tuple(_event_from_dict(e, "calendar") for e in d["calendar"]),
        todos=tuple(TodoItem(t["text"], bool(t["done"])) for t in d["todos"]),
        conversations=tuple(
            sorted(
                (peer, tuple(Message(peer, m["direction"], m["body"], int(m["seq"])) for m in msgs))
                for peer, msgs in d["conversations"].items()
            )
        ),
        places=tuple(SavedPlace(p["name"], p["query"]) for p in d["places"]),
        catalog=tuple(
            Product(p["id"], p["name"], tuple((k, tuple(v)) for k, v in p["options"].items()))
            for p in d["catalog"]
        ),
        cart=tuple(
            CartItem(c["product_id"], tuple(sorted(c["options"].items())), int(c["quantity"]))
            for c in d["cart"]
        ),
        files=_file_from_dict(d["files"]),
        nav=NavState(
            route=nav["route"],
            scroll_offset=int(nav["scroll_offset"]),
            pending_form=tuple(sorted(nav["pending_form"].items())),
            open_dialog=nav["open_dialog"],
            focus=nav["focus"],
            selected=bool(nav["selected"]),
            back=tuple(nav["back"]),
            forward=tuple(nav["forward"]),
        ),
        today=_parse_date(d["today"], "today"),
        logical_clock=int(d["logical_clock"]),
    )


class _Dumper(getattr(yaml, "CSafeDumper", yaml.SafeDumper)):
    def ignore_aliases(self, data):
        return True


class _PyDumper(yaml.SafeDumper):
    def ignore_aliases(self, data):
        return True


def dump_yaml(data: Any, pure: bool = False) -> str:
    """Deterministic YAML: UTF-8 text, LF, 2-space indent, insertion key order.

    Uses libyaml when available; ``pure=True`` forces the Python emitter,
    which produces the same bytes.
    """
    return yaml.dump(
        data,
        Dumper=_PyDumper if pure else _Dumper,
        sort_keys=False,
        allow_unicode=True,
        default_flow_style=False,
        indent=2,
        width=4096,
        line_break="\n",
    )


def _load_yaml(text: str):
    loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)
    return yaml.load(text, Loader=loader)


def serialize(state: EnvState) -> str:
    return dump_yaml(state_to_dict(state))


def parse(text: str) -> EnvState:
    return state_from_dict(_load_yaml(text))


# ---------------------------------------------------------------------------
# Canonical form and diff


_NAV_BLOCK = re.compile(r"^nav:\n(?:  .*\n)+", re.MULTILINE)


@dataclass(frozen=True)
class CanonicalState:
    data: dict = field(compare=False)
    text: str

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def without_route(self) -> "CanonicalState":
        data = {k: v for k, v in self.data.items() if k != "nav"}
        return CanonicalState(data, _NAV_BLOCK.sub("", self.text, count=1))


def _canonical_file(node: FileNode) -> dict:
    d = {"kind": node.kind, "name": node.name}
    if node.kind == "folder":
        d["children"] = [_canonical_file(c) for c in sorted(node.children, key=_file_order)]
    return d


def canonical_dict(state: EnvState) -> dict:
    return {
        "calendar": [_event_dict(e) for e in sorted(state.calendar, key=CalendarEvent.sort_key)],
        "todos": [{"text": t.text, "done": t.done} for t in state.todos],
        "conversations": {peer: _messages(msgs) for peer, msgs in sorted(state.conversations)},
        "places": [{"name": p.name, "query": p.query} for p in sorted(state.places, key=lambda p: p.name)],
        "catalog": [_product_dict(p) for p in sorted(state.catalog, key=lambda p: p.id)],
        "cart": [_cart_dict(c) for c in sorted(state.cart, key=CartItem.sort_key)],
        "files": _canonical_file(state.files),
        "nav": {"route": state.nav.route},
        "today": state.today.isoformat(),
    }


def canonicalize(state: EnvState) -> CanonicalState:
    """Byte-deterministic canonical form with volatile fields masked.

    Masked: logical clock, scroll offset, pending form text, open dialog,
    focus and history. Calendar, places and cart are sorted; todos,
    conversations and files keep their meaningful order.
    """
    data = canonical_dict(state)
    return CanonicalState(data, dump_yaml(data))


def state_digest(state: EnvState) -> str:
    return canonicalize(state).digest


@dataclass(frozen=True)
class DiffEntry:
    path: str
    before: Any
    after: Any


def _diff(a, b, path: str, out: List[DiffEntry]) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        for key in list(a) + [k for k in b if k not in a]:
            sub = f"{path}.{key}" if path else str(key)
            if key not in a:
                out.append(DiffEntry(sub, None, b[key]))
            elif key not in b:
                out.append(DiffEntry(sub, a[key], None))
            else:
                _diff(a[key], b[key], sub, out)
    elif isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        for i, (x, y) in enumerate(zip(a, b)):
            _diff(x, y, f"{path}.{i}", out)
    elif a != b:
        out.append(DiffEntry(path, a, b))


def diff(a: CanonicalState, b: CanonicalState) -> List[DiffEntry]:
    """Structured difference; lists of unequal length are reported whole."""
    out: List[DiffEntry] = []
    _diff(a.data, b.data, "", out)
    return out


# ---------------------------------------------------------------------------
# Transitions


def _reject(reason: str, detail: str = "") -> Rejection:
    return Rejection(reason=reason, detail=detail)


def _field_app(name: str) -> str:
    return name.split(".", 1)[0]


def _navigate(state: EnvState, route: str) -> EnvState:
    nav = NavState(route=route, back=state.nav.back + (state.nav.route,), forward=())
    return replace(state, nav=nav)


def _set_field(nav: NavState, name: str, value: str) -> NavState:
    return replace(nav.with_fields(**{name: value}), focus=name, selected=False)


def _remove_file(node: FileNode, path: Tuple[str, ...]) -> FileNode:
    head, rest = path[0], path[1:]
    children = []
    for child in node.children:
        if child.name != head:
            children.append(child)
        elif rest:
            children.append(_remove_file(child, rest))
    return replace(node, children=tuple(children))


def _add_file(node: FileNode, path: Tuple[str, ...], new: FileNode) -> FileNode:
    if not path:
        return replace(node, children=tuple(sorted(node.children + (new,), key=_file_order)))
    head, rest = path[0], path[1:]
    return replace(
        node,
        children=tuple(_add_file(c, rest, new) if c.name == head else c for c in node.children),
    )


def add_to_cart(cart: Tuple[CartItem, ...], item: CartItem) -> Tuple[CartItem, ...]:
    """Add a line, merging quantities with an identical existing line."""
    for i, line in enumerate(cart):
        if line.sort_key() == item.sort_key():
            merged = replace(line, quantity=line.quantity + item.quantity)
            return cart[:i] + (merged,) + cart[i + 1:]
    return cart + (item,)


def next_seq(messages: Tuple[Message, ...]) -> int:
    return (messages[-1].seq + 1) if messages else 1


def _submit_event(state: EnvState) -> Union[EnvState, Rejection]:
    nav = state.nav
    title = norm_text(nav.field("calendar.title"))
    if not title:
        return _reject("missing_field", "calendar.title")
    raw_date = norm_text(nav.field("calendar.date"))
    try:
        date = _dt.date.fromisoformat(raw_date)
    except ValueError:
        return _reject("invalid_date", raw_date)
    invitees = [p for p in (s.strip() for s in norm_text(nav.field("calendar.invitees")).split(",")) if p]
    event = CalendarEvent(
        title=title,
        date=date,
        description=norm_text(nav.field("calendar.description")),
        url=norm_text(nav.field("calendar.url")) or None,
        location=norm_text(nav.field("calendar.location")) or None,
        invitees=tuple(invitees) if invitees else None,
    )
    nav = replace(nav.without_prefix("calendar."), focus=None, selected=False)
    return replace(state, calendar=state.calendar + (event,), nav=nav)


def _open_chat_peer(state: EnvState) -> Optional[str]:
    dialog = state.nav.open_dialog or ""
    return dialog[len("chat:"):] if dialog.startswith("chat:") else None


def _activate(state: EnvState, button: str, target: tuple) -> Union[EnvState, Rejection]:
    nav = state.nav
    if button == "add-todo":
        text = norm_text(nav.field("todo.text"))
        if not text:
            return _reject("missing_field", "todo.text")
        nav = replace(nav.with_fields(**{"todo.text": None}), focus=None, selected=False)
        return replace(state, todos=state.todos + (TodoItem(text, False),), nav=nav)

    if button == "delete-todo":
        (index,) = target
        if not 0 <= index < len(state.todos):
            return _reject("no_such_item", str(index))
        return replace(state, todos=state.todos[:index] + state.todos[index + 1:])

    if button == "add-event":
        return _submit_event(state)

    if button == "delete-event":
        title, date = target
        for i, event in enumerate(state.calendar):
            if event.title == title and event.date.isoformat() == date:
                return replace(state, calendar=state.calendar[:i] + state.calendar[i + 1:])
        return _reject("no_such_event", f"{title} {date}")

    if button == "copy-event":
        (index,) = target
        if not 0 <= index < len(state.calendar):
            return _reject("no_such_event", str(index))
        e = state.calendar[index]
        nav = nav.with_fields(**{
            "calendar.title": e.title,
            "calendar.date": e.date.isoformat(),
            "calendar.description": e.description,
            "calendar.url": e.url or "",
            "calendar.invitees": ", ".join(e.invitees or ()),
            "calendar.location": e.location or "",
        })
        return replace(state, nav=replace(nav, focus="calendar.title", selected=False))

    if button == "open-chat":
        (peer,) = target
        if state.conversation(peer) is None:
            return _reject("no_such_contact", peer)
        return replace(state, nav=replace(nav, open_dialog=f"chat:{peer}"))

    if button == "send-message":
        peer = _open_chat_peer(state)
        if peer is None:
            return _reject("no_open_chat")
        body = norm_text(nav.field("messenger.body"))
        if not body:
            return _reject("missing_field", "messenger.body")
        messages = state.conversation(peer)
        msg = Message(peer=peer, direction="sent", body=body, seq=next_seq(messages))
        new = state.with_conversation(peer, messages + (msg,))
        return replace(new, nav=replace(nav.with_fields(**{"messenger.body": None}), focus=None, selected=False))

    if button == "forward-message":
        peer, seq = target
        messages = state.conversation(peer) or ()
        msg = next((m for m in messages if m.seq == seq), None)
        if msg is None:
            return _reject("no_such_message", f"{peer}#{seq}")
        return replace(state, nav=_set_field(nav, "messenger.body", msg.body))

    if button == "search-place":
        query = norm_text(nav.field("maps.query"))
        if not query:
            return _reject("missing_field", "maps.query")
        return replace(state, nav=replace(nav, open_dialog=f"search:{query}"))

    if button == "save-place":
        dialog = nav.open_dialog or ""
        if not dialog.startswith("search:"):
            return _reject("no_search_result")
        query = dialog[len("search:"):]
        if any(p.name == query for p in state.places):
            return _reject("duplicate_place", query)
        return replace(state, places=state.places + (SavedPlace(query, query),))

    if button == "remove-place":
        (name,) = target
        if not any(p.name == name for p in state.places):
            return _reject("no_such_place", name)
        return replace(state, places=tuple(p for p in state.places if p.name != name))

    if button in ("new-file", "new-folder"):
        path = tuple(target)
        folder = state.files.find(path)
        if folder is None or folder.kind != "folder":
            return _reject("no_such_folder", "/".join(path))
        name = norm_text(nav.field("codeeditor.name"))
        if not name or "/" in name:
            return _reject("missing_field" if not name else "invalid_name", "codeeditor.name")
        if any(c.name == name for c in folder.children):
            return _reject("duplicate_name", name)
        node = FileNode("file" if button == "new-file" else "folder", name)
        nav = replace(nav.with_fields(**{"codeeditor.name": None}), focus=None, selected=False)
        return replace(state, files=_add_file(state.files, path, node), nav=nav)

    if button == "delete-node":
        path = tuple(target)
        if not path or state.files.find(path) is None:
            return _reject("no_such_node", "/".join(path))
        return replace(state, files=_remove_file(state.files, path))

    if button == "add-to-cart":
        (product_id,) = target
        product = state.product(product_id)
        if product is None:
            return _reject("no_such_product", product_id)
        chosen = []
        for option, _values in product.options:
            value = nav.field(f"shop.{product_id}.{option}")
            if not value:
                return _reject("missing_option", f"{product_id}.{option}")
            chosen.append((option, value))
        item = CartItem(product_id, tuple(sorted(chosen)), 1)
        nav = nav.without_prefix(f"shop.{product_id}.")
        return replace(state, cart=add_to_cart(state.cart, item), nav=nav)

    if button == "remove-cart-line":
        (index,) = target
        if not 0 <= index < len(state.cart):
            return _reject("no_such_item", str(index))
        return replace(state, cart=state.cart[:index] + state.cart[index + 1:])

    return _reject("unknown_button", button)


def _press(state: EnvState, key: str) -> Union[EnvState, Rejection]:
    nav = state.nav
    focus = nav.focus
    if focus is None:
        return _reject("no_focus")
    app = _field_app(focus)
    if key == "Enter":
        button = SUBMIT_BUTTONS.get(app)
        if button is None:
            return _reject("no_effect", "Enter")
        return _activate(state, button, ())
    if key == "Backspace":
        value = "" if nav.selected else nav.field(focus)[:-1]
        return replace(state, nav=_set_field(nav, focus, value))
    if key == "Tab":
        fields = FORM_FIELDS.get(app, ())
        i = fields.index(focus) if focus in fields else -1
        nxt = fields[(i + 1) % len(fields)]
        return replace(state, nav=replace(nav, focus=nxt, selected=False))
    if key == "select_all":
        return replace(state, nav=replace(nav, selected=True))
    return _reject("unsupported_key", key)


def _control_route(control: SemanticControl) -> Optional[str]:
    if isinstance(control, ActivateButton):
        return BUTTON_ROUTES.get(control.button)
    if isinstance(control, ToggleTodo):
        return "todo"
    if isinstance(control, SelectOption):
        return "shop"
    return None


def apply_control(state: EnvState, control: SemanticControl) -> Union[EnvState, Rejection]:
    """Apply one semantic control; pure in ``(state, control)``.

    Returns the successor with ``logical_clock`` advanced by one, or a
    :class:`Rejection` when the control does not apply (the caller keeps the
    old state).
    """
    nav = state.nav
    required = _control_route(control)
    if required is not None and nav.route != required:
        return _reject("not_on_page", f"{type(control).__name__} needs {required}")

    if isinstance(control, Navigate):
        result: Union[EnvState, Rejection] = _navigate(state, control.route)
    elif isinstance(control, GoBack):
        if not nav.back:
            return _reject("no_history")
        result = replace(
            state,
            nav=NavState(route=nav.back[-1], back=nav.back[:-1], forward=nav.forward + (nav.route,)),
        )
    elif isinstance(control, GoForward):
        if not nav.forward:
            return _reject("no_history")
        result = replace(
            state,
            nav=NavState(route=nav.forward[-1], back=nav.back + (nav.route,), forward=nav.forward[:-1]),
        )
    elif isinstance(control, Scroll):
        if control.offset < 0:
            return _reject("invalid_scroll", str(control.offset))
        result = replace(state, nav=replace(nav, scroll_offset=control.offset))
    elif isinstance(control, (Focus, SetField)):
        if _field_app(control.field) != route_app(nav.route) or control.field not in FORM_FIELDS.get(
            _field_app(control.field), ()
        ):
            return _reject("not_on_page", control.field)
        if isinstance(control, Focus):
            result = replace(state, nav=replace(nav, focus=control.field, selected=False))
        else:
            result = replace(state, nav=_set_field(nav, control.field, control.value))
    elif isinstance(control, TypeText):
        if nav.focus is None:
            return _reject("no_focus")
        base = "" if nav.selected else nav.field(nav.focus)
        result = replace(state, nav=_set_field(nav, nav.focus, base + control.text))
    elif isinstance(control, PressKey):
        result = _press(state, control.key)
    elif isinstance(control, ToggleTodo):
        if not 0 <= control.index < len(state.todos):
            return _reject("no_such_item", str(control.index))
        item = state.todos[control.index]
        todos = state.todos[: control.index] + (replace(item, done=not item.done),) + state.todos[control.index + 1:]
        result = replace(state, todos=todos)
    elif isinstance(control, SelectOption):
        product = state.product(control.product_id)
        values = product.option_values(control.option) if product else None
        if values is None or control.value not in values:
            return _reject("invalid_option", f"{control.product_id}.{control.option}={control.value}")
        key = f"shop.{control.product_id}.{control.option}"
        result = replace(state, nav=nav.with_fields(**{key: control.value}))
    elif isinstance(control, ActivateButton):
        result = _activate(state, control.button, tuple(control.target))
    else:
        return _reject("unknown_control", repr(control))

    if isinstance(result, Rejection):
        return result
    return replace(result, logical_clock=state.logical_clock + 1)
