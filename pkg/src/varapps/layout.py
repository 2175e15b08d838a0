"""Deterministic page layout, observations, hit testing and action resolution.

Every page is a single column. Each node takes its own row, and labels are
never wrapped. Row heights come from the app's typography and spacing, so
appearance variations move geometry without touching the set of
``(role, label)`` pairs, which is fixed by content alone.

Coordinates in ``UiNode.bbox`` are page pixels. Coordinate actions use
viewport pixels. The page y position is the viewport y plus the effective
scroll offset.
"""

from __future__ import annotations

import html as _html
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Tuple, Union
from urllib.parse import urlsplit

from .actions import Action
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
    external_route,
    is_external,
    route_app,
)
from .state import EnvState

ROLES = ("button", "link", "textbox", "checkbox", "option", "listitem", "section", "heading", "image", "text")
INTERACTIVE_ROLES = frozenset({"button", "link", "textbox", "checkbox", "option"})

BASE_URL = "http://openapps.local"
ROUTE_PATHS = {
    "home": "/",
    "calendar": "/calendar",
    "todo": "/todo",
    "messenger": "/messenger",
    "maps": "/maps",
    "codeeditor": "/codeeditor",
    "shop": "/shop",
    "cart": "/shop/cart",
}
_PATH_ROUTES = {path: route for route, path in ROUTE_PATHS.items()}
_ENV_HOSTS = ("openapps.local", "localhost", "127.0.0.1")


# ---------------------------------------------------------------------------
# Viewports


@dataclass(frozen=True)
class Viewport:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 240 or self.height < 240:
            raise ValueError(f"viewport {self.width}x{self.height} is smaller than 240x240")

    @classmethod
    def parse(cls, value: Union[str, dict, "Viewport"]) -> "Viewport":
        """Accept a preset name (``FHD``), ``WxH`` text or a mapping."""
        if isinstance(value, Viewport):
            return value
        if isinstance(value, dict):
            return cls(int(value["width"]), int(value["height"]))
        key = str(value).strip()
        if key.upper() in VIEWPORTS:
            return VIEWPORTS[key.upper()]
        m = re.fullmatch(r"(\d+)\s*[xX]\s*(\d+)", key)
        if not m:
            raise ValueError(f"unknown viewport {value!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def name(self) -> str:
        for name, vp in VIEWPORTS.items():
            if vp == self:
                return name
        return f"{self.width}x{self.height}"


VIEWPORTS = {
    "FHD": Viewport(1920, 1080),
    "HD": Viewport(1280, 720),
    "HVGA": Viewport(480, 320),
}


# ---------------------------------------------------------------------------
# Nodes and observations


@dataclass
class UiNode:
    role: str
    label: str
    children: List["UiNode"] = field(default_factory=list)
    bid: str = ""
    bbox: Tuple[int, int, int, int] = (0, 0, 0, 0)
    control: Optional[SemanticControl] = None  # effect of clicking
    field: Optional[str] = None  # textbox form field
    group: Optional[Tuple[str, str]] = None  # (product_id, option) of an option group
    attrs: Tuple[Tuple[str, object], ...] = ()
    href: Optional[str] = None
    placeholder: Optional[str] = None
    lines: int = 1

    @property
    def interactive(self) -> bool:
        return self.role in INTERACTIVE_ROLES

    @property
    def center(self) -> Tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + w / 2, y + h / 2)

    def walk(self) -> Iterator["UiNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def attr(self, name: str, default=None):
        return next((v for k, v in self.attrs if k == name), default)


@dataclass(frozen=True)
class Metrics:
    font_px: float
    heading_px: float
    line_factor: float
    text_h: int
    heading_h: int
    control_h: int
    char_w: int
    spacing: int
    pad_y: int
    pad_x: int
    container_w: int
    x0: int


@dataclass
class Observation:
    """One rendered page. ``ax_tree`` and ``html`` come from the same layout."""

    root: UiNode
    url: str
    route: str
    viewport: Viewport
    scroll_offset: int  # effective (clamped) offset
    max_scroll: int
    page_height: int
    focus: Optional[str]
    language: str
    style: dict
    metrics: Metrics
    nodes: Dict[str, UiNode] = field(default_factory=dict, repr=False)

    @property
    def visible_window(self) -> Tuple[int, Viewport]:
        return (self.scroll_offset, self.viewport)

    @cached_property
    def ax_tree(self) -> str:
        return ax_tree_text(self.root)

    @cached_property
    def html(self) -> str:
        return _render_html(self)

    def is_visible(self, node: UiNode) -> bool:
        x, y, w, h = node.bbox
        top, bottom = self.scroll_offset, self.scroll_offset + self.viewport.height
        return w > 0 and h > 0 and y < bottom and y + h > top and x < self.viewport.width and x + w > 0

    def visible_bids(self) -> List[str]:
        return [n.bid for n in self.root.walk() if self.is_visible(n)]

    def to_viewport(self, page_x: float, page_y: float) -> Tuple[float, float]:
        return (page_x, page_y - self.scroll_offset)


# ---------------------------------------------------------------------------
# Page construction


def _n(role: str, label: str, *children: UiNode, **kw) -> UiNode:
    return UiNode(role=role, label=label, children=list(children), **kw)


def _text(label: str) -> Optional[UiNode]:
    label = label.strip()
    if not label:
        return None
    return _n("text", label, lines=label.count("\n") + 1)


def _button(label: str, button: str, *target) -> UiNode:
    return _n("button", label, control=ActivateButton(button, tuple(target)))


def _textbox(state: EnvState, style: dict, app: str, name: str) -> UiNode:
    display_key = {
        "calendar": "add_event_display",
        "todo": "add_todo_display",
        "messenger": "compose_display",
        "maps": "search_display",
        "codeeditor": "new_file_display",
    }[app]
    display = style[display_key]
    fname = f"{app}.{name}"
    attrs: List[Tuple[str, object]] = []
    value = state.nav.field(fname)
    if value:
        attrs.append(("value", value))
    if state.nav.focus == fname:
        attrs.append(("focused", True))
    return _n(
        "textbox",
        display["aria_label"][name],
        field=fname,
        attrs=tuple(attrs),
        placeholder=display["placeholder"][name],
    )


def _compact(nodes) -> List[UiNode]:
    return [n for n in nodes if n is not None]


def _nav_bar(config) -> UiNode:
    home = config.globals["home"]
    links = [_n("link", home["home_link"], control=Navigate("home"), href=route_url("home"))]
    for app, label in home["links"].items():
        links.append(_n("link", label, control=Navigate(app), href=route_url(app)))
    return _n("section", "Navigation", *links)


def _calendar_body(state: EnvState, config) -> List[UiNode]:
    c = config.content("calendar")
    labels = c["labels"]
    style = config.style("calendar")
    form = _n(
        "section",
        labels["form"],
        *[_textbox(state, style, "calendar", f) for f in ("title", "date", "description", "url", "invitees", "location")],
        _button(labels["add"], "add-event"),
    )
    items = []
    order = sorted(range(len(state.calendar)), key=lambda i: (state.calendar[i].sort_key(), i))
    for i in order:
        e = state.calendar[i]
        children = _compact([
            _text(e.date.isoformat()),
            _text(e.description),
            _text(e.location or ""),
            _text(", ".join(e.invitees or ())),
            _n("link", e.url, control=Navigate(external_route(e.url)), href=e.url) if e.url else None,
            _button(labels["copy"], "copy-event", i),
            _button(labels["delete"], "delete-event", e.title, e.date.isoformat()),
        ])
        items.append(_n("listitem", e.title, *children))
    return [form, _n("section", labels["events"], *items)]


def _todo_body(state: EnvState, config) -> List[UiNode]:
    labels = config.content("todo")["labels"]
    style = config.style("todo")
    form = _n("section", labels["form"], _textbox(state, style, "todo", "text"), _button(labels["add"], "add-todo"))
    items = []
    for i, t in enumerate(state.todos):
        box = _n("checkbox", t.text, control=ToggleTodo(i), attrs=(("checked", t.done),))
        items.append(_n("listitem", t.text, box, _button(labels["delete"], "delete-todo", i)))
    return [form, _n("section", labels["list"], *items)]


def _messenger_body(state: EnvState, config) -> List[UiNode]:
    labels = config.content("messenger")["labels"]
    style = config.style("messenger")
    dialog = state.nav.open_dialog or ""
    open_peer = dialog[5:] if dialog.startswith("chat:") else None
    contacts = []
    for peer, _msgs in state.conversations:
        node = _button(peer, "open-chat", peer)
        if peer == open_peer:
            node.attrs = (("selected", True),)
        contacts.append(node)
    body = [_n("section", labels["contacts"], *contacts)]
    if open_peer is not None:
        items = []
        for m in state.conversation(open_peer) or ():
            sender = labels["you"] if m.direction == "sent" else m.peer
            label = f"{sender}: {m.body}"
            items.append(
                _n("listitem", label, _button(labels["forward"], "forward-message", m.peer, m.seq), lines=label.count("\n") + 1)
            )
        body.append(
            _n(
                "section",
                f"{labels['conversation']}: {open_peer}",
                *items,
                _textbox(state, style, "messenger", "body"),
                _button(labels["send"], "send-message"),
            )
        )
    return body


def _maps_body(state: EnvState, config) -> List[UiNode]:
    c = config.content("maps")
    labels = c["labels"]
    style = config.style("maps")
    body = [
        _n("section", labels["search"], _textbox(state, style, "maps", "query"), _button(labels["search"], "search-place")),
        _n("image", c["title"], lines=6),
    ]
    dialog = state.nav.open_dialog or ""
    if dialog.startswith("search:"):
        query = dialog[len("search:"):]
        body.append(_n("section", labels["result"], _n("text", query), _button(labels["save"], "save-place")))
    items = [_n("listitem", p.name, _button(labels["remove"], "remove-place", p.name)) for p in state.places]
    body.append(_n("section", labels["saved"], *items))
    return body


def _file_item(node, path: Tuple[str, ...], labels: dict) -> UiNode:
    children: List[UiNode] = []
    if node.kind == "folder":
        children.append(_button(labels["new_file"], "new-file", *path))
        children.append(_button(labels["new_folder"], "new-folder", *path))
    if path:
        children.append(_button(labels["delete"], "delete-node", *path))
    for child in node.children:
        children.append(_file_item(child, path + (child.name,), labels))
    label = node.name + ("/" if node.kind == "folder" else "")
    return _n("listitem", label, *children)


def _codeeditor_body(state: EnvState, config) -> List[UiNode]:
    labels = config.content("codeeditor")["labels"]
    style = config.style("codeeditor")
    return [
        _n(
            "section",
            labels["explorer"],
            _textbox(state, style, "codeeditor", "name"),
            _file_item(state.files, (), labels),
        )
    ]


def _cart_count(state: EnvState) -> int:
    return sum(line.quantity for line in state.cart)


def _shop_body(state: EnvState, config) -> List[UiNode]:
    labels = config.content("shop")["labels"]
    items = []
    for p in state.catalog:
        children = []
        for option, values in p.options:
            chosen = state.nav.field(f"shop.{p.id}.{option}")
            opts = [
                _n(
                    "option",
                    v,
                    control=SelectOption(p.id, option, v),
                    attrs=(("selected", True),) if v == chosen else (),
                )
                for v in values
            ]
            children.append(_n("section", option, *opts, group=(p.id, option)))
        children.append(_button(labels["add_to_cart"], "add-to-cart", p.id))
        items.append(_n("listitem", p.name, *children))
    cart_link = _n("link", f"{labels['cart']} ({_cart_count(state)})", control=Navigate("cart"), href=route_url("cart"))
    return [cart_link, _n("section", labels["products"], *items)]


def cart_line_label(state: EnvState, line) -> str:
    product = state.product(line.product_id)
    name = product.name if product else line.product_id
    if line.chosen_options:
        name += " (" + ", ".join(f"{k}: {v}" for k, v in line.chosen_options) + ")"
    return f"{name} x{line.quantity}"


def _cart_body(state: EnvState, config) -> List[UiNode]:
    labels = config.content("shop")["labels"]
    items = [
        _n("listitem", cart_line_label(state, line), _button(labels["remove"], "remove-cart-line", i))
        for i, line in enumerate(state.cart)
    ]
    section = _n("section", labels["cart"], *(items or [_n("text", labels["empty"])]))
    return [section, _n("link", labels["continue"], control=Navigate("shop"), href=route_url("shop"))]


_BODIES = {
    "calendar": _calendar_body,
    "todo": _todo_body,
    "messenger": _messenger_body,
    "maps": _maps_body,
    "codeeditor": _codeeditor_body,
    "shop": _shop_body,
    "cart": _cart_body,
}


def page_app(route: str) -> str:
    """App whose style dresses a route; home and external pages use the calendar's."""
    return route_app(route) or "calendar"


def build_page(state: EnvState, config) -> UiNode:
    """Unlaid page tree for the current route."""
    route = state.nav.route
    if route == "home":
        home = config.globals["home"]
        title, description, body = home["title"], home["description"], []
    elif is_external(route):
        url = route[len("external:"):]
        title, description, body = url, "", []
    else:
        content = config.content(route_app(route))
        title, description = content["title"], content["description"]
        body = _BODIES[route](state, config)
    return _n("section", title, _nav_bar(config), *_compact([_n("heading", title), _text(description)]), *body)


# ---------------------------------------------------------------------------
# Geometry

_LENGTH = re.compile(r"(\d+(?:\.\d+)?)(px|rem|em|%)")


def css_px(value: str, base: float = 16.0, ref: Optional[float] = None) -> float:
    """Pixels for a CSS length; ``em`` is relative to ``base``, ``%`` to ``ref``."""
    m = _LENGTH.fullmatch(value.strip())
    if not m:
        raise ValueError(f"bad CSS length {value!r}")
    number, unit = float(m.group(1)), m.group(2)
    if unit == "px":
        return number
    if unit == "rem":
        return number * 16.0
    if unit == "em":
        return number * base
    return number / 100.0 * (base if ref is None else ref)


def line_factor(font_family: str) -> float:
    return 1.9 if "brush script" in font_family.lower() else 1.5


def metrics(style: dict, viewport: Viewport) -> Metrics:
    typo = style["typography"]
    font_px = css_px(typo["base_font_size"])
    heading_px = css_px(typo["heading_size"], base=font_px)
    factor = line_factor(typo["font_family"])
    heading_factor = line_factor(typo["heading_font"]) - 0.25
    pads = style["buttons"]["padding"].split()
    pad_y = math.ceil(css_px(pads[0], base=font_px))
    pad_x = math.ceil(css_px(pads[1] if len(pads) > 1 else pads[0], base=font_px))
    text_h = math.ceil(font_px * factor)
    width = css_px(style["layout"]["container_width"], base=font_px, ref=viewport.width)
    container_w = max(1, min(viewport.width, math.floor(width)))
    return Metrics(
        font_px=font_px,
        heading_px=heading_px,
        line_factor=factor,
        text_h=text_h,
        heading_h=math.ceil(heading_px * heading_factor),
        control_h=text_h + 2 * pad_y,
        char_w=math.ceil(font_px * 0.6),
        spacing=math.ceil(css_px(style["layout"]["spacing"], base=font_px)),
        pad_y=pad_y,
        pad_x=pad_x,
        container_w=container_w,
        x0=(viewport.width - container_w) // 2,
    )


def _label_w(m: Metrics, label: str) -> int:
    longest = max((len(line) for line in label.split("\n")), default=0)
    return longest * m.char_w


def _leaf_size(node: UiNode, m: Metrics, avail: int) -> Tuple[int, int]:
    role = node.role
    if role == "heading":
        return avail, m.heading_h
    if role in ("text", "image"):
        return avail, m.text_h * node.lines
    if role == "textbox":
        return avail, m.control_h
    if role == "link":
        return min(avail, _label_w(m, node.label) + 1), m.text_h
    if role == "checkbox":
        return min(avail, m.text_h + m.pad_x + _label_w(m, node.label)), m.control_h
    # button, option
    return min(avail, _label_w(m, node.label) + 2 * m.pad_x), m.control_h


def _place(node: UiNode, m: Metrics, x: int, y: int, w: int, inset: int) -> int:
    if node.role not in ("section", "listitem"):
        lw, lh = _leaf_size(node, m, w)
        node.bbox = (x, y, lw, lh)
        return lh
    cursor = y + inset
    if node.role == "listitem":
        cursor += m.text_h * node.lines
        if node.children:
            cursor += m.spacing
    inner = max(1, w - 2 * inset)
    sub = m.spacing // 2
    for i, child in enumerate(node.children):
        if i:
            cursor += m.spacing
        cursor += _place(child, m, x + inset, cursor, inner, sub)
    height = cursor + inset - y
    node.bbox = (x, y, w, height)
    return height


def layout(root: UiNode, m: Metrics) -> int:
    """Assign page-pixel bboxes in place; returns the page height."""
    return _place(root, m, m.x0, 0, m.container_w, m.spacing)


def assign_bids(root: UiNode) -> Dict[str, UiNode]:
    """Number nodes depth-first in pre-order as decimal strings from ``"0"``."""
    nodes: Dict[str, UiNode] = {}
    for i, node in enumerate(root.walk()):
        node.bid = str(i)
        nodes[node.bid] = node
    return nodes


def render(state: EnvState, config, viewport: Viewport) -> Observation:
    root = build_page(state, config)
    app = page_app(state.nav.route)
    style = config.style(app)
    m = metrics(style, viewport)
    height = layout(root, m)
    nodes = assign_bids(root)
    max_scroll = max(0, height - viewport.height)
    language = config.content(app).get("language", "en") if route_app(state.nav.route) else "en"
    return Observation(
        root=root,
        url=route_url(state.nav.route),
        route=state.nav.route,
        viewport=viewport,
        scroll_offset=min(state.nav.scroll_offset, max_scroll),
        max_scroll=max_scroll,
        page_height=height,
        focus=state.nav.focus,
        language=language,
        style=style,
        metrics=m,
        nodes=nodes,
    )


# ---------------------------------------------------------------------------
# Text forms


def quote_label(label: str) -> str:
    escaped = label.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n").replace("\r", "\\r")
    return f"'{escaped}'"


def node_line(node: UiNode) -> str:
    parts = [node.bid, node.role, quote_label(node.label)]
    for key, value in node.attrs:
        if value is True:
            parts.append(key)
        elif value is False:
            continue
        else:
            parts.append(f"{key}={quote_label(str(value))}")
    return " ".join(parts)


def ax_tree_text(root: UiNode) -> str:
    lines: List[str] = []

    def visit(node: UiNode, depth: int) -> None:
        lines.append("  " * depth + node_line(node))
        for child in node.children:
            visit(child, depth + 1)

    visit(root, 0)
    return "\n".join(lines) + "\n"


def route_url(route: str) -> str:
    if is_external(route):
        return route[len("external:"):]
    return BASE_URL + ROUTE_PATHS[route]


def url_route(url: str) -> Optional[str]:
    """Route for a URL: an app route, ``external:<url>``, or None for an
    unknown path on the environment host."""
    text = url.strip()
    parts = urlsplit(text)
    if not parts.scheme and not parts.netloc:
        path = parts.path if parts.path.startswith("/") else "/" + parts.path
        host = "openapps.local"
    else:
        host = (parts.hostname or "").lower()
        path = parts.path or "/"
    if host not in _ENV_HOSTS:
        return external_route(text)
    if len(path) > 1:
        path = path.rstrip("/")
    return _PATH_ROUTES.get(path)


def _style_attr(pairs: List[Tuple[str, str]]) -> str:
    return ";".join(f"{k}:{v}" for k, v in pairs)


def _render_html(obs: Observation) -> str:
    colors = obs.style["colors"]
    typo = obs.style["typography"]
    buttons = obs.style["buttons"]
    m = obs.metrics
    esc = _html.escape
    out: List[str] = []

    def box(node: UiNode, parent: Tuple[int, int]) -> List[Tuple[str, str]]:
        x, y, w, h = node.bbox
        return [
            ("position", "absolute"),
            ("left", f"{x - parent[0]}px"),
            ("top", f"{y - parent[1]}px"),
            ("width", f"{w}px"),
            ("height", f"{h}px"),
            ("box-sizing", "border-box"),
            ("margin", "0"),
        ]

    def emit(node: UiNode, parent: Tuple[int, int], depth: int) -> None:
        pad = "  " * depth
        css = box(node, parent)
        bid = f' data-bid="{node.bid}"'
        label = esc(node.label)
        role = node.role
        if role in ("section", "listitem"):
            tag = "section" if role == "section" else "div"
            aria = f' aria-label="{label}"' + (' role="listitem"' if role == "listitem" else "")
            out.append(f'{pad}<{tag}{bid}{aria} style="{_style_attr(css)}">')
            if role == "listitem":
                out.append(f'{pad}  <span style="white-space:pre">{label}</span>')
            for child in node.children:
                emit(child, node.bbox[:2], depth + 1)
            out.append(f"{pad}</{tag}>")
            return
        if role == "heading":
            css += [("font-family", typo["heading_font"]), ("font-size", f"{m.heading_px:g}px")]
            out.append(f'{pad}<h1{bid} style="{_style_attr(css)}">{label}</h1>')
        elif role == "text":
            css += [("white-space", "pre"), ("overflow", "hidden")]
            out.append(f'{pad}<p{bid} style="{_style_attr(css)}">{label}</p>')
        elif role == "image":
            css += [("background", colors["secondary"]), ("color", colors["background"])]
            out.append(f'{pad}<div{bid} role="img" aria-label="{label}" style="{_style_attr(css)}"></div>')
        elif role == "link":
            css += [("color", colors["primary"]), ("white-space", "pre")]
            out.append(f'{pad}<a{bid} href="{esc(node.href or "")}" style="{_style_attr(css)}">{label}</a>')
        elif role == "textbox":
            css += [("border", f"1px solid {colors['border']}"), ("padding", buttons["padding"]), ("font", "inherit")]
            value = esc(str(node.attr("value", "")))
            ph = esc(node.placeholder or "")
            focus = " autofocus" if node.attr("focused") else ""
            out.append(
                f'{pad}<input{bid} type="text" aria-label="{label}" placeholder="{ph}" '
                f'value="{value}"{focus} style="{_style_attr(css)}">'
            )
        elif role == "checkbox":
            checked = " checked" if node.attr("checked") else ""
            out.append(
                f'{pad}<label{bid} style="{_style_attr(css)}"><input type="checkbox"{checked}> {label}</label>'
            )
        else:  # button, option
            selected = node.attr("selected")
            bg = colors["primary_hover"] if selected else colors["primary"]
            css += [
                ("background", bg),
                ("color", colors["background"]),
                ("border", "none"),
                ("border-radius", buttons["border_radius"]),
                ("padding", buttons["padding"]),
                ("font", "inherit"),
                ("white-space", "pre"),
            ]
            extra = ' role="option"' + (' aria-selected="true"' if selected else "") if role == "option" else ""
            out.append(f'{pad}<button{bid}{extra} style="{_style_attr(css)}">{label}</button>')

    body_css = _style_attr([
        ("margin", "0"),
        ("position", "relative"),
        ("height", f"{obs.page_height}px"),
        ("background", colors["background"]),
        ("color", colors["text"]),
        ("font-family", typo["font_family"]),
        ("font-size", f"{m.font_px:g}px"),
        ("line-height", f"{m.line_factor:g}"),
    ])
    out.append("<!DOCTYPE html>")
    out.append(f'<html lang="{esc(obs.language)}">')
    out.append(f'<head><meta charset="utf-8"><title>{esc(obs.root.label)}</title></head>')
    out.append(f'<body style="{body_css}">')
    emit(obs.root, (0, 0), 1)
    out.append("</body>")
    out.append("</html>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Resolution


def hit_test(obs: Observation, x: float, y: float) -> Optional[UiNode]:
    """Deepest interactive node under viewport point (x, y)."""
    page_y = y + obs.scroll_offset
    hit = None
    for node in obs.root.walk():
        nx, ny, nw, nh = node.bbox
        if node.interactive and nx <= x < nx + nw and ny <= page_y < ny + nh:
            hit = node
    return hit


_CTRL = {"ctrl", "control", "meta", "cmd", "command", "controlormeta"}
_KEYS = {"enter": "Enter", "return": "Enter", "backspace": "Backspace", "tab": "Tab"}


def normalize_key(key: str) -> Optional[str]:
    parts = [p.lower() for p in re.split(r"[+\s]+", key.strip()) if p]
    if len(parts) == 1:
        return _KEYS.get(parts[0])
    if len(parts) == 2 and parts[0] in _CTRL and parts[1] == "a":
        return "select_all"
    return None


def element_control(node: UiNode) -> Union[SemanticControl, Rejection]:
    """Effect of clicking a node."""
    if node.field is not None:
        return Focus(node.field)
    control = node.control
    if control is None:
        return Rejection("not_interactive", f"{node.role} {node.bid}")
    if isinstance(control, Navigate) and is_external(control.route):
        return Rejection("external_navigation", control.route[len("external:"):], effect=control)
    return control


def _node(obs: Observation, bid: str) -> Union[UiNode, Rejection]:
    node = obs.nodes.get(bid)
    if node is None:
        return Rejection("unknown_bid", bid)
    return node


def _goto(url: str) -> Union[SemanticControl, Rejection]:
    route = url_route(url)
    if route is None:
        return Rejection("not_found", url)
    if is_external(route):
        return Rejection("external_navigation", url, effect=Navigate(route))
    return Navigate(route)


def resolve(obs: Observation, action: Action) -> Union[SemanticControl, Rejection]:
    """Map a parsed action to a semantic control on the rendered page."""
    name = action.name
    if name in ("click", "dblclick"):
        node = _node(obs, action["bid"])
        if isinstance(node, Rejection):
            return node
        if action["button"] != "left":
            return Rejection("no_effect", f"{action['button']} button")
        return element_control(node)
    if name in ("fill", "clear"):
        node = _node(obs, action["bid"])
        if isinstance(node, Rejection):
            return node
        if node.field is None:
            return Rejection("not_fillable", f"{node.role} {node.bid}")
        return SetField(node.field, action["value"] if name == "fill" else "")
    if name == "select_option":
        node = _node(obs, action["bid"])
        if isinstance(node, Rejection):
            return node
        options = action["options"]
        values = options if isinstance(options, tuple) else (options,)
        if len(values) != 1:
            return Rejection("multiple_options", ", ".join(values))
        group = node
        if node.role == "option" and isinstance(node.control, SelectOption):
            group = next((g for g in obs.root.walk() if node in g.children), node)
        if group.group is None:
            return Rejection("not_selectable", f"{node.role} {node.bid}")
        for child in group.children:
            if child.label == values[0] and child.control is not None:
                return child.control
        return Rejection("no_such_option", values[0])
    if name in ("mouse_click", "mouse_dblclick"):
        x, y = action["x"], action["y"]
        if not (0 <= x < obs.viewport.width and 0 <= y < obs.viewport.height):
            return Rejection("off_screen", f"({x}, {y})")
        if action["button"] != "left":
            return Rejection("no_effect", f"{action['button']} button")
        node = hit_test(obs, x, y)
        if node is None:
            return Rejection("no_target", f"({x}, {y})")
        return element_control(node)
    if name == "scroll":
        target = obs.scroll_offset + int(round(action["delta_y"]))
        target = max(0, min(obs.max_scroll, target))
        if target == obs.scroll_offset:
            return Rejection("no_effect", "scroll")
        return Scroll(target)
    if name in ("keyboard_type", "keyboard_insert_text"):
        if obs.focus is None:
            return Rejection("no_focus")
        return TypeText(action["text"])
    if name == "keyboard_press":
        key = normalize_key(action["key"])
        if key is None:
            return Rejection("unsupported_key", action["key"])
        return PressKey(key)
    if name == "goto":
        return _goto(action["url"])
    if name == "go_back":
        return GoBack()
    if name == "go_forward":
        return GoForward()
    if name in ("hover", "mouse_move", "mouse_down", "mouse_up", "keyboard_down", "keyboard_up"):
        return Rejection("no_effect", name)
    return Rejection("unsupported", name)
