"""App configuration: YAML schema, validation, variations and the variant generator.

A configuration set holds one ``{style, content}`` block per app plus a
``globals`` block. Variations are declarative patch sets over key paths
(``apps.*.style.colors.background``) so new ones can be written as YAML
without touching code.
"""

from __future__ import annotations

import copy
import datetime as _dt
import functools
import hashlib
import itertools
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import fastjsonschema
import yaml
from jsonschema import Draft202012Validator

from .state import dump_yaml

SCHEMA_VERSION = 1
APPS = ("calendar", "todo", "messenger", "maps", "codeeditor", "shop")

_BaseLoader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)


class _Loader(_BaseLoader):
    """Safe loader with memoized implicit scalar resolution."""

    _scalar_tags: Dict[Tuple[str, Tuple[bool, bool]], str] = {}

    def resolve(self, kind, value, implicit):
        if kind is yaml.ScalarNode and not self.yaml_path_resolvers:
            key = (value, implicit)
            tag = self._scalar_tags.get(key)
            if tag is None:
                tag = super().resolve(kind, value, implicit)
                if len(self._scalar_tags) < 65536:
                    self._scalar_tags[key] = tag
            return tag
        return super().resolve(kind, value, implicit)


_STR_TAG = "tag:yaml.org,2002:str"
_SAFE = yaml.constructor.SafeConstructor()


class _Fallback(Exception):
    pass


def _construct(node, memo: dict):
    """SafeConstructor semantics for the common node kinds, without its overhead."""
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, yaml.ScalarNode):
        if node.tag == _STR_TAG:
            return node.value
        fn = _SAFE.yaml_constructors.get(node.tag)
        if fn is None:
            raise _Fallback
        value = fn(_SAFE, node)
    elif isinstance(node, yaml.MappingNode):
        if node.tag != "tag:yaml.org,2002:map":
            raise _Fallback
        value = memo[key] = {}
        for k, v in node.value:
            if k.tag == "tag:yaml.org,2002:merge":
                raise _Fallback
            name = _construct(k, memo)
            if isinstance(name, (list, dict)):
                raise _Fallback
            value[name] = _construct(v, memo)
        return value
    elif isinstance(node, yaml.SequenceNode):
        if node.tag != "tag:yaml.org,2002:seq":
            raise _Fallback
        value = memo[key] = []
        value.extend(_construct(c, memo) for c in node.value)
        return value
    else:  # pragma: no cover
        raise _Fallback
    memo[key] = value
    return value


def fast_load(text: str):
    """``yaml.safe_load`` equivalent that builds plain objects directly.

    Documents using merge keys or custom tags go through the standard loader.
    """
    node = yaml.compose(text, Loader=_Loader)
    if node is None:
        return None
    try:
        return _construct(node, {})
    except _Fallback:
        return yaml.load(text, Loader=_Loader)


class ConfigError(ValueError):
    """Configuration rejected. ``kind`` is ``"parse"`` or ``"schema"``."""

    def __init__(self, kind: str, errors: List[str], line: Optional[int] = None, column: Optional[int] = None):
        self.kind = kind
        self.errors = errors
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{kind} error{where}: " + "; ".join(errors))


class VariationError(ValueError):
    pass


class VariationConflict(VariationError):
    def __init__(self, path: str, first: str, second: str):
        self.path = path
        super().__init__(f"variations {first!r} and {second!r} both patch {path}")


# ---------------------------------------------------------------------------
# Schema

_STR = {"type": "string"}
_TEXT_OR_NULL = {"type": ["string", "null"]}
_UNIT = r"\d+(?:\.\d+)?(?:px|rem|em|%)"
_HEX = {"type": "string", "pattern": r"^#(?:[0-9a-fA-F]{3}|[0-9a-fA-F]{6})$"}
_SIZE = {"type": "string", "pattern": rf"^{_UNIT}$"}
_SIZES = {"type": "string", "pattern": rf"^{_UNIT}(?: {_UNIT}){{0,3}}$"}
# YAML turns bare ISO dates into date objects; both spellings are accepted and
# checked in _check_dates.
_DATE: dict = {}


def _obj(props: dict, required: Optional[Iterable[str]] = None) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(props) if required is None else list(required),
        "additionalProperties": False,
    }


def _display(fields: Sequence[str]) -> dict:
    strings = {f: _STR for f in fields}
    return _obj({"placeholder": _obj(strings), "aria_label": _obj(strings)})


_COMMON_STYLE = {
    "colors": _obj({k: _HEX for k in ("primary", "primary_hover", "secondary", "background", "text", "error", "border")}),
    "typography": _obj({
        "font_family": {"type": "string", "minLength": 1},
        "heading_font": {"type": "string", "minLength": 1},
        "base_font_size": _SIZE,
        "heading_size": _SIZE,
    }),
    "buttons": _obj({"border_radius": _SIZE, "padding": _SIZES}),
    "layout": _obj({"container_width": _SIZE, "spacing": _SIZE}),
}

FORM_DISPLAYS = {
    "calendar": ("add_event_display", ("title", "date", "description", "url", "invitees", "location")),
    "todo": ("add_todo_display", ("text",)),
    "messenger": ("compose_display", ("body",)),
    "maps": ("search_display", ("query",)),
    "codeeditor": ("new_file_display", ("name",)),
}

_LABELS = {
    "calendar": ("form", "add", "events", "copy", "delete"),
    "todo": ("form", "add", "list", "delete"),
    "messenger": ("contacts", "conversation", "send", "forward", "you"),
    "maps": ("search", "result", "save", "saved", "remove"),
    "codeeditor": ("explorer", "new_file", "new_folder", "delete"),
    "shop": ("products", "add_to_cart", "cart", "remove", "continue", "empty"),
}

_NONEMPTY = {"type": "string", "minLength": 1, "pattern": r"\S"}

_EVENT = _obj(
    {
        "title": _NONEMPTY,
        "date": _DATE,
        "description": _TEXT_OR_NULL,
        "url": _TEXT_OR_NULL,
        "location": _TEXT_OR_NULL,
        "invitees": {"type": ["array", "string", "null"], "items": _STR},
    },
    required=("title", "date"),
)

_FILE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["file", "folder"]},
        "name": _NONEMPTY,
        "children": {"type": "array", "items": {"$ref": "#/$defs/file"}},
    },
    "required": ["kind", "name"],
    "additionalProperties": False,
}

_APP_DATA = {
    "calendar": {"events": {"type": "array", "items": _EVENT}},
    "todo": {
        "todos": {"type": "array", "items": _obj({"text": _NONEMPTY, "done": {"type": "boolean"}}, required=("text",))}
    },
    "messenger": {
        "conversations": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": _obj({"direction": {"enum": ["sent", "received"]}, "body": _NONEMPTY}),
            },
        }
    },
    "maps": {"saved_places": {"type": "array", "items": _obj({"name": _NONEMPTY, "query": _STR}, required=("name",))}},
    "codeeditor": {"files": {"$ref": "#/$defs/file"}},
    "shop": {
        "products": {
            "type": "array",
            "items": _obj({
                "id": _NONEMPTY,
                "name": _NONEMPTY,
                "options": {"type": "object", "additionalProperties": {"type": "array", "items": _STR, "minItems": 1}},
            }),
        },
        "cart": {
            "type": "array",
            "items": _obj(
                {
                    "product_id": _NONEMPTY,
                    "options": {"type": "object", "additionalProperties": _STR},
                    "quantity": {"type": "integer", "minimum": 1},
                },
                required=("product_id",),
            ),
        },
    },
}


def _style_schema(app: str) -> dict:
    props = dict(_COMMON_STYLE)
    if app in FORM_DISPLAYS:
        key, fields = FORM_DISPLAYS[app]
        props = {key: _display(fields), **props}
    return _obj(props)


def _content_schema(app: str, partial: bool = False) -> dict:
    props = {
        "language": {"type": "string", "pattern": r"^[a-z]{2}(?:-[A-Z]{2})?$"},
        "title": _NONEMPTY,
        "description": _STR,
        "labels": _obj({k: _STR for k in _LABELS[app]}),
        **_APP_DATA[app],
    }
    return _obj(props, required=() if partial else None)


def _app_schema(app: str, partial: bool = False) -> dict:
    return _obj({"style": _style_schema(app), "content": _content_schema(app, partial)})


CONFIG_SCHEMA = {
    **_obj({
        "schema_version": {"const": SCHEMA_VERSION},
        "globals": _obj({
            "today": _DATE,
            "home": _obj({
                "title": _NONEMPTY,
                "description": _STR,
                "home_link": _NONEMPTY,
                "links": _obj({a: _NONEMPTY for a in APPS}),
            }),
        }),
        "apps": _obj({a: _app_schema(a) for a in APPS}),
    }),
    "$defs": {"file": _FILE},
}


def _schema_for(app: Optional[str], partial: bool) -> dict:
    if app is None:
        return CONFIG_SCHEMA
    return {**_app_schema(app, partial), "$defs": {"file": _FILE}}


@functools.lru_cache(maxsize=None)
def _fast_validator(app: Optional[str] = None, partial: bool = False):
    return fastjsonschema.compile(_schema_for(app, partial))


@functools.lru_cache(maxsize=None)
def _validator(app: Optional[str] = None, partial: bool = False):
    return Draft202012Validator(_schema_for(app, partial))


def _path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def _check_date(value: Any, where: str, errors: List[str]) -> None:
    if value is None or isinstance(value, _dt.date):
        return
    if not isinstance(value, str):
        errors.append(f"{where}: expected an ISO-8601 date, got {value!r}")
    else:
        try:
            _dt.date.fromisoformat(value)
        except ValueError:
            errors.append(f"{where}: not an ISO-8601 date: {value!r}")


def _check_dates(data: Any, app: Optional[str] = None) -> List[str]:
    """ISO checks for ``globals.today`` and calendar event dates."""
    errors: List[str] = []
    if not isinstance(data, dict):
        return errors
    if app is None:
        today = (data.get("globals") or {}).get("today") if isinstance(data.get("globals"), dict) else None
        _check_date(today, "globals.today", errors)
        try:
            content = data["apps"]["calendar"]["content"]
        except (KeyError, TypeError):
            return errors
        prefix = "apps.calendar.content.events"
    elif app == "calendar":
        content = data.get("content")
        prefix = "content.events"
    else:
        return errors
    events = content.get("events") if isinstance(content, dict) else None
    for i, event in enumerate(events if isinstance(events, list) else ()):
        if isinstance(event, dict):
            _check_date(event.get("date"), f"{prefix}.{i}.date", errors)
    return errors


def validate(data: Any, app: Optional[str] = None, partial: bool = False) -> List[str]:
    """Return a sorted list of path-qualified schema errors (empty when valid)."""
    if data is None:
        data = {}
    errors = _check_dates(data, app)
    try:
        _fast_validator(app, partial)(data)
    except fastjsonschema.JsonSchemaValueException:
        # The compiled validator stops at the first problem; collect them all.
        errors.extend(
            f"{_path(e.absolute_path)}: {e.message}" for e in _validator(app, partial).iter_errors(data)
        )
    return sorted(errors)


# ---------------------------------------------------------------------------
# Config values


@dataclass(frozen=True, eq=False)
class AppConfigSet:
    """A validated configuration for all six apps.

    ``name`` labels the variant (for example ``dark_theme+german``) and does
    not take part in equality.
    """

    data: dict
    name: str = field(default="default")

    def __eq__(self, other):
        return isinstance(other, AppConfigSet) and self.data == other.data

    __hash__ = None  # type: ignore[assignment]

    def app(self, name: str) -> dict:
        return self.data["apps"][name]

    def style(self, name: str) -> dict:
        return self.data["apps"][name]["style"]

    def content(self, name: str) -> dict:
        return self.data["apps"][name]["content"]

    @property
    def globals(self) -> dict:
        return self.data["globals"]

    @property
    def today(self) -> _dt.date:
        today = self.data["globals"]["today"]
        return today if isinstance(today, _dt.date) else _dt.date.fromisoformat(today)

    def to_yaml(self) -> str:
        return dump_yaml(self.data)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_yaml().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AppConfig:
    """Style and content for a single app."""

    app: str
    style: dict
    content: dict


def _parse_yaml(text: str):
    try:
        return fast_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise ConfigError("parse", [str(exc.problem or exc)], line, column) from None
    except yaml.YAMLError as exc:
        raise ConfigError("parse", [str(exc)]) from None


def load_config(yaml_text: str, name: str = "default") -> AppConfigSet:
    """Parse and validate a full configuration set."""
    data = _parse_yaml(yaml_text)
    errors = validate(data)
    if errors:
        raise ConfigError("schema", errors)
    return AppConfigSet(data, name=name)


def load_app_config(yaml_text: str, app: str) -> AppConfig:
    """Parse a single-app document.

    Accepts either ``{style, content}`` or the flat layout where every
    top-level key other than ``style`` is content (``events: [...]``). The
    style block must be complete; content may be partial.
    """
    if app not in APPS:
        raise ConfigError("schema", [f"unknown app {app!r}"])
    data = _parse_yaml(yaml_text) or {}
    if not isinstance(data, dict):
        raise ConfigError("schema", ["<root>: expected a mapping"])
    if "content" in data:
        doc = data
    else:
        doc = {"style": data.get("style"), "content": {k: v for k, v in data.items() if k != "style"}}
    errors = validate(doc, app=app, partial=True)
    if errors:
        raise ConfigError("schema", errors)
    return AppConfig(app=app, style=doc["style"], content=doc["content"])


def _data_text(name: str) -> str:
    node = resources.files("varapps").joinpath("data")
    for part in name.split("/"):
        node = node.joinpath(part)
    return node.read_text(encoding="utf-8")


@functools.lru_cache(maxsize=None)
def _default_config() -> AppConfigSet:
    return load_config(_data_text("default_config.yaml"))


def default_config() -> AppConfigSet:
    """The shipped default configuration (a fresh copy)."""
    return AppConfigSet(copy.deepcopy(_default_config().data))


def with_app_config(base: AppConfigSet, app_config: AppConfig) -> AppConfigSet:
    """Overlay a single-app config (style replaced, content keys merged)."""
    data = copy.deepcopy(base.data)
    data["apps"][app_config.app]["style"] = copy.deepcopy(app_config.style)
    data["apps"][app_config.app]["content"].update(copy.deepcopy(app_config.content))
    errors = validate(data)
    if errors:
        raise ConfigError("schema", errors)
    return AppConfigSet(data, name=base.name)


# ---------------------------------------------------------------------------
# Variations


@dataclass(frozen=True)
class Variation:
    id: str
    kind: str  # "appearance" | "content"
    patches: Tuple[Tuple[str, Any], ...] = ()
    description: str = ""
    bundle: Optional[str] = None


def _check_separation(v: Variation) -> None:
    for path, _ in v.patches:
        parts = path.split(".")
        in_style = len(parts) > 2 and parts[0] == "apps" and parts[2] == "style"
        if v.kind == "appearance" and not in_style:
            raise VariationError(f"appearance variation {v.id!r} patches non-style path {path}")
        if v.kind == "content" and in_style:
            raise VariationError(f"content variation {v.id!r} patches style path {path}")


def _load_bundle(name: str, search: Sequence[Path] = ()) -> dict:
    for folder in search:
        candidate = folder / f"{name}.yaml"
        if candidate.exists():
            return yaml.load(candidate.read_text(encoding="utf-8"), Loader=_Loader) or {}
    try:
        text = _data_text(f"bundles/{name}.yaml")
    except FileNotFoundError:
        raise VariationError(f"unknown bundle {name!r}") from None
    return yaml.load(text, Loader=_Loader) or {}


def parse_catalog(yaml_text: str, bundle_dirs: Sequence[Path] = ()) -> Dict[str, Variation]:
    """Parse a variation catalog: a YAML list of ``{id, kind, patches | bundle}``."""
    entries = _parse_yaml(yaml_text)
    if not isinstance(entries, list):
        raise ConfigError("schema", ["<root>: variation catalog must be a list"])
    catalog: Dict[str, Variation] = {}
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "id" not in entry or entry.get("kind") not in ("appearance", "content"):
            raise ConfigError("schema", [f"{i}: entries need an id and kind appearance|content"])
        extra = set(entry) - {"id", "kind", "patches", "bundle", "description"}
        if extra:
            raise ConfigError("schema", [f"{i}: unknown keys {sorted(extra)}"])
        patches = dict(entry.get("patches") or {})
        if entry.get("bundle"):
            patches.update(_load_bundle(entry["bundle"], bundle_dirs))
        v = Variation(
            id=str(entry["id"]),
            kind=entry["kind"],
            patches=tuple(patches.items()),
            description=str(entry.get("description", "")),
            bundle=entry.get("bundle"),
        )
        _check_separation(v)
        if v.id in catalog:
            raise ConfigError("schema", [f"{i}: duplicate variation id {v.id!r}"])
        catalog[v.id] = v
    return catalog


def load_catalog(path: Union[str, Path]) -> Dict[str, Variation]:
    path = Path(path)
    return parse_catalog(path.read_text(encoding="utf-8"), bundle_dirs=[path.parent, path.parent / "bundles"])


@functools.lru_cache(maxsize=None)
def shipped_catalog() -> Dict[str, Variation]:
    """The eight named variations (default plus seven alternatives)."""
    return parse_catalog(_data_text("variations.yaml"))


@functools.lru_cache(maxsize=None)
def popular_catalog() -> Dict[str, Variation]:
    """Variations drawn from popular web fonts, palettes and languages."""
    return parse_catalog(_data_text("popular_variations.yaml"))


@functools.lru_cache(maxsize=None)
def layout_catalog() -> Dict[str, Variation]:
    """Size and spacing variations used by the variant enumerator."""
    return parse_catalog(_data_text("layout_variations.yaml"))


def all_variations() -> Dict[str, Variation]:
    merged = dict(shipped_catalog())
    merged.update(popular_catalog())
    merged.update(layout_catalog())
    return merged


def get_variation(variation_id: str) -> Variation:
    try:
        return all_variations()[variation_id]
    except KeyError:
        raise VariationError(f"unknown variation id {variation_id!r}") from None


def _expand(v: Variation, base: dict, apps: Optional[Sequence[str]]) -> List[Tuple[str, Any]]:
    out = []
    for path, value in v.patches:
        parts = path.split(".")
        if parts[0] == "apps" and len(parts) > 1:
            targets = APPS if parts[1] == "*" else (parts[1],)
            for app in targets:
                if apps is None or app in apps:
                    out.append((".".join(["apps", app] + parts[2:]), value))
        elif apps is None:
            out.append((path, value))
    return out


def _set_path(data: dict, parts: Sequence[str], value: Any, full: str) -> dict:
    """Copy-on-write assignment; containers along the path are copied."""
    head = parts[0]
    if not isinstance(data, dict) or head not in data:
        raise VariationError(f"patch path not in schema: {full}")
    out = dict(data)
    if len(parts) == 1:
        out[head] = copy.deepcopy(value)
    else:
        out[head] = _set_path(data[head], parts[1:], value, full)
    return out


def _overlaps(a: str, b: str) -> bool:
    return a == b or a.startswith(b + ".") or b.startswith(a + ".")


def _resolve(v: Union[str, Variation]) -> Variation:
    return get_variation(v) if isinstance(v, str) else v


def compose_variations(
    base: AppConfigSet,
    variations: Sequence[Union[str, Variation]],
    apps: Optional[Sequence[str]] = None,
    name: Optional[str] = None,
) -> AppConfigSet:
    """Apply variations left to right.

    Two variations may not patch the same or nested key paths with different
    values; identical patches are merged, which makes repeats idempotent.
    """
    resolved = [_resolve(v) for v in variations]
    chosen: Dict[str, Tuple[Any, str]] = {}
    ordered: List[Tuple[str, Any]] = []
    for v in resolved:
        for path, value in _expand(v, base.data, apps):
            if path in chosen:
                if chosen[path][0] != value:
                    raise VariationConflict(path, chosen[path][1], v.id)
                continue
            for other, (_, owner) in chosen.items():
                if _overlaps(path, other):
                    raise VariationConflict(path, owner, v.id)
            chosen[path] = (value, v.id)
            ordered.append((path, value))
    data = base.data
    for path, value in ordered:
        data = _set_path(data, path.split("."), value, path)
    errors = validate(data)
    if errors:
        raise VariationError("variation produced an invalid config: " + "; ".join(errors))
    if name is None:
        ids = [v.id for v in resolved if v.id != "default"]
        name = "+".join(dict.fromkeys(ids)) or base.name
    return AppConfigSet(data, name=name)


def apply_variation(
    base: AppConfigSet, v: Union[str, Variation], apps: Optional[Sequence[str]] = None
) -> AppConfigSet:
    """Apply one variation; ``apps`` restricts it to some apps only."""
    return compose_variations(base, [v], apps=apps)


# ---------------------------------------------------------------------------
# Variant enumeration


@functools.lru_cache(maxsize=None)
def _shipped_axes_ids() -> Dict[str, Tuple[str, ...]]:
    doc = yaml.load(_data_text("variant_axes.yaml"), Loader=_Loader)
    return {axis: tuple(ids) for axis, ids in doc["axes"].items()}


def shipped_axes() -> Dict[str, List[Variation]]:
    """Font x palette x language x description axes of popular web choices."""
    return {axis: [get_variation(i) for i in ids] for axis, ids in _shipped_axes_ids().items()}


def load_axes(path: Union[str, Path], catalog: Optional[Mapping[str, Variation]] = None) -> Dict[str, List[Variation]]:
    """Load an axes file ``{axes: {name: [variation ids]}}``."""
    doc = yaml.load(Path(path).read_text(encoding="utf-8"), Loader=_Loader) or {}
    lookup = dict(all_variations())
    if catalog:
        lookup.update(catalog)
    axes = {}
    for axis, ids in (doc.get("axes") or {}).items():
        try:
            axes[axis] = [lookup[i] for i in ids]
        except KeyError as exc:
            raise VariationError(f"axis {axis!r}: unknown variation id {exc.args[0]!r}") from None
    return axes


def count_variants(axes: Mapping[str, Sequence[Variation]], per_app: bool = False) -> int:
    per = math.prod(len(vs) for vs in axes.values())
    return per ** len(APPS) if per_app else per


def _combo_name(combo: Sequence[Variation]) -> str:
    return "+".join(v.id for v in combo if v.id != "default") or "default"


def enumerate_variants(
    axes: Mapping[str, Sequence[Variation]],
    base: Optional[AppConfigSet] = None,
    limit: Optional[int] = None,
    per_app: bool = False,
) -> Iterator[AppConfigSet]:
    """Yield configs for the cartesian product of the axes, in a fixed order.

    With ``per_app`` each app independently takes its own combination, so the
    stream length is ``count_variants(axes) ** 6``; use ``limit`` to cut it.
    """
    base = base or default_config()
    combos = list(itertools.product(*axes.values()))
    if per_app:
        stream: Iterable = itertools.product(combos, repeat=len(APPS))
    else:
        stream = ((c,) for c in combos)
    for n, assignment in enumerate(stream):
        if limit is not None and n >= limit:
            return
        if not per_app:
            combo = assignment[0]
            yield compose_variations(base, list(combo), name=_combo_name(combo))
            continue
        data = base
        names = []
        for app, combo in zip(APPS, assignment):
            data = compose_variations(data, list(combo), apps=[app])
            names.append(f"{app}={_combo_name(combo)}")
        yield AppConfigSet(data.data, name=";".join(names))


def build_config(variations: Sequence[Union[str, Variation]] = (), base: Optional[AppConfigSet] = None) -> AppConfigSet:
    """Base config (default when omitted) with the named variations composed on top."""
    return compose_variations(base or default_config(), list(variations))
