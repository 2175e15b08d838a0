from __future__ import annotations

import itertools
import math

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from varapps.config import (
    APPS,
    SCHEMA_VERSION,
    ConfigError,
    Variation,
    VariationConflict,
    VariationError,
    all_variations,
    apply_variation,
    build_config,
    compose_variations,
    count_variants,
    default_config,
    enumerate_variants,
    fast_load,
    load_app_config,
    load_config,
    parse_catalog,
    popular_catalog,
    shipped_axes,
    shipped_catalog,
    validate,
)
from varapps.state import dump_yaml

SHIPPED = (
    "default",
    "black_and_white",
    "challenging_font",
    "dark_theme",
    "german",
    "long_descriptions",
    "misleading_descriptions",
    "adversarial_descriptions",
)


def _section(cfg, part: str) -> str:
    return dump_yaml({app: cfg.app(app)[part] for app in APPS})


# ---------------------------------------------------------------------------
# Loading and validation


def test_default_config_is_valid_and_versioned(base_config):
    assert validate(base_config.data) == []
    assert base_config.data["schema_version"] == SCHEMA_VERSION
    assert set(base_config.data["apps"]) == set(APPS)


def test_calendar_example_loads(calendar_example_text):
    cfg = load_app_config(calendar_example_text, "calendar")
    assert cfg.style["colors"]["primary"] == "#1095c1"
    assert cfg.style["typography"]["font_family"] == "sans-serif"
    assert len(cfg.content["events"]) == 2


def test_empty_document_lists_missing_keys():
    with pytest.raises(ConfigError) as info:
        load_config("")
    assert info.value.kind == "schema"
    text = " ".join(info.value.errors)
    for key in ("schema_version", "globals", "apps"):
        assert key in text


def test_parse_error_reports_position():
    with pytest.raises(ConfigError) as info:
        load_config("apps:\n  calendar: [1, 2\n")
    assert info.value.kind == "parse"
    assert info.value.line is not None and info.value.column is not None


def test_unknown_key_rejected_with_path(base_config):
    data = default_config().data
    data["apps"]["todo"]["style"]["colors"]["sparkle"] = "#ffffff"
    errors = validate(data)
    assert errors and any("apps.todo.style.colors" in e and "sparkle" in e for e in errors)


@pytest.mark.parametrize(
    "path,value",
    [
        (("colors", "primary"), "blue"),
        (("typography", "base_font_size"), "16"),
        (("buttons", "padding"), "0.5rem 1"),
    ],
)
def test_style_value_shapes(path, value):
    data = default_config().data
    data["apps"]["maps"]["style"][path[0]][path[1]] = value
    errors = validate(data)
    assert any(f"apps.maps.style.{path[0]}.{path[1]}" in e for e in errors)


def test_bad_date_rejected():
    data = default_config().data
    data["globals"]["today"] = "2025-13-01"
    assert any("globals.today" in e for e in validate(data))


def test_fast_load_matches_reference_loader(base_config):
    text = base_config.to_yaml()
    assert fast_load(text) == yaml.safe_load(text)
    anchored = "a: &x {k: [1, 2]}\nb: *x\nc: {<<: *x, d: 2025-07-01}\n"
    assert fast_load(anchored) == yaml.safe_load(anchored)


@given(st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=8) | st.dates().map(str),
    lambda kids: st.lists(kids, max_size=3) | st.dictionaries(st.text(max_size=5), kids, max_size=3),
    max_leaves=12,
))
def test_fast_load_round_trips_dumped_data(value):
    text = dump_yaml({"v": value})
    assert fast_load(text) == yaml.safe_load(text)


# ---------------------------------------------------------------------------
# Catalog


def test_shipped_catalog_ids():
    assert sorted(shipped_catalog()) == sorted(SHIPPED)


def test_popular_catalog_fonts():
    fonts = {
        dict(v.patches).get("apps.*.style.typography.font_family")
        for v in popular_catalog().values()
    }
    assert {"Inter", "Roboto", "Open Sans"} <= fonts


def test_dark_theme_separation(base_config):
    dark = apply_variation(base_config, "dark_theme")
    for app in APPS:
        colors = dark.style(app)["colors"]
        assert colors["background"] == "#121212" and colors["text"] == "#e6e6e6"
    assert _section(dark, "content") == _section(base_config, "content")


def test_german_separation(base_config):
    de = apply_variation(base_config, "german")
    assert _section(de, "style") == _section(base_config, "style")
    assert de.content("todo")["todos"] != base_config.content("todo")["todos"]
    assert de.content("calendar")["description"] != base_config.content("calendar")["description"]
    assert de.content("todo")["language"] == "de"


def test_challenging_font(base_config):
    cfg = apply_variation(base_config, "challenging_font")
    assert all(cfg.style(app)["typography"]["font_family"] == "Brush Script MT" for app in APPS)


def test_base_is_not_mutated(base_config):
    before = base_config.to_yaml()
    apply_variation(base_config, "dark_theme")
    compose_variations(base_config, ["german", "challenging_font"])
    assert base_config.to_yaml() == before


def test_unknown_variation_and_bad_path(base_config):
    with pytest.raises(VariationError):
        apply_variation(base_config, "neon")
    bogus = Variation("bogus", "appearance", (("apps.todo.style.colors.glow", "#ffffff"),))
    with pytest.raises(VariationError):
        apply_variation(base_config, bogus)
    nowhere = Variation("nowhere", "appearance", (("apps.todo.style.nope.x", "1px"),))
    with pytest.raises(VariationError, match="not in schema"):
        apply_variation(base_config, nowhere)


def test_catalog_rejects_mixed_kinds():
    text = "- id: sneaky\n  kind: appearance\n  patches:\n    apps.todo.content.title: X\n"
    with pytest.raises(VariationError):
        parse_catalog(text)


def test_compose_examples(base_config):
    both = compose_variations(base_config, ["dark_theme", "german"])
    assert both.style("todo")["colors"]["background"] == "#121212"
    assert both.content("todo")["language"] == "de"
    assert compose_variations(base_config, []) == base_config
    assert compose_variations(base_config, ["dark_theme", "dark_theme"]) == apply_variation(base_config, "dark_theme")


def test_conflict_names_path(base_config):
    with pytest.raises(VariationConflict) as info:
        compose_variations(base_config, ["dark_theme", "black_and_white"])
    assert info.value.path.startswith("apps.") and ".style.colors." in info.value.path


def _expanded_paths(v: Variation) -> dict:
    out = {}
    for path, value in v.patches:
        parts = path.split(".")
        apps = APPS if parts[1] == "*" else (parts[1],)
        for app in apps:
            out[".".join(["apps", app] + parts[2:])] = value
    return out


@pytest.mark.parametrize("vid", sorted(all_variations()))
def test_idempotence_over_full_catalog(base_config, vid):
    once = apply_variation(base_config, vid)
    assert apply_variation(once, vid) == once
    assert compose_variations(base_config, [vid, vid]) == once
    assert validate(load_config(once.to_yaml()).data) == []


def test_disjoint_commutativity_over_full_catalog(base_config):
    catalog = all_variations()
    checked = conflicts = 0
    for a, b in itertools.combinations(sorted(catalog), 2):
        pa, pb = _expanded_paths(catalog[a]), _expanded_paths(catalog[b])
        clash = any(
            (x == y and pa[x] != pb[y]) or x.startswith(y + ".") or y.startswith(x + ".") for x in pa for y in pb
        )
        if clash:
            with pytest.raises(VariationConflict):
                compose_variations(base_config, [a, b])
            conflicts += 1
            continue
        ab = compose_variations(base_config, [a, b])
        ba = compose_variations(base_config, [b, a])
        assert ab == ba, (a, b)
        checked += 1
    assert checked > 100 and conflicts > 0


# ---------------------------------------------------------------------------
# Enumeration


def _axes(n_per_axis: int, n_axes: int):
    fonts = ["default", "font_inter", "font_roboto", "font_open_sans"]
    palettes = ["default", "popular_colors_1", "popular_colors_2", "popular_colors_3"]
    languages = ["default", "todo_german", "todo_french", "todo_spanish"]
    descriptions = ["default", "long_descriptions", "misleading_descriptions", "adversarial_descriptions"]
    catalog = all_variations()
    names = [fonts, palettes, languages, descriptions][:n_axes]
    return {f"axis{i}": [catalog[v] for v in ids[:n_per_axis]] for i, ids in enumerate(names)}


def test_four_by_four_axes_give_256_distinct_variants():
    axes = _axes(4, 4)
    assert count_variants(axes) == 256 == 4 ** 4
    digests = {cfg.digest for cfg in enumerate_variants(axes)}
    assert len(digests) == 256


def test_per_app_assignment_exceeds_thousand():
    axes = _axes(4, 4)
    assert count_variants(axes, per_app=True) == 256 ** 6
    sample = list(enumerate_variants(axes, limit=1100, per_app=True))
    assert len(sample) == 1100
    assert len({cfg.name for cfg in sample}) == 1100
    assert sample[0].name == ";".join(f"{app}=default" for app in APPS)
    assert all(validate(cfg.data) == [] for cfg in sample[:50])


def test_empty_catalog_yields_base(base_config):
    variants = list(enumerate_variants({}, base=base_config))
    assert len(variants) == 1 and variants[0] == base_config
    assert count_variants({}) == 1


def test_enumeration_is_deterministic():
    axes = shipped_axes()
    a = [c.name for c in enumerate_variants(axes, limit=40)]
    b = [c.name for c in enumerate_variants(axes, limit=40)]
    assert a == b and len(set(a)) == 40


def test_shipped_axes_give_1024_distinct_valid_configs():
    axes = shipped_axes()
    assert count_variants(axes) == math.prod(len(v) for v in axes.values()) == 1024
    configs = list(enumerate_variants(axes))
    assert len(configs) == 1024
    assert len({cfg.digest for cfg in configs}) == 1024
    for cfg in configs[::64]:
        assert load_config(cfg.to_yaml()) == cfg


def test_build_config_default(base_config):
    assert build_config() == base_config
    assert build_config(["default"]) == base_config
