from __future__ import annotations

import re
from dataclasses import replace

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from varapps.actions import call
from varapps.config import all_variations, build_config
from varapps.controls import ROUTES, ActivateButton, Navigate, Rejection
from varapps.env import Env, EnvRequest
from varapps.layout import (
    VIEWPORTS,
    UiNode,
    Viewport,
    assign_bids,
    hit_test,
    render,
    resolve,
)
from varapps.state import TodoItem

from conftest import golden_text


def page_states(s0):
    """Every route plus each open chat and a maps search result."""
    states = [replace(s0, nav=replace(s0.nav, route=r)) for r in ROUTES]
    for peer, _ in s0.conversations:
        states.append(replace(s0, nav=replace(s0.nav, route="messenger", open_dialog=f"chat:{peer}")))
    states.append(replace(s0, nav=replace(s0.nav, route="maps", open_dialog="search:Bockelwitz, Germany")))
    return states


def _on(state, route):
    return replace(state, nav=replace(state.nav, route=route))


def test_todo_items_have_checkbox_and_delete(s0, base_config):
    state = replace(_on(s0, "todo"), todos=(TodoItem("a"), TodoItem("b"), TodoItem("c", True)))
    obs = render(state, base_config, VIEWPORTS["HD"])
    items = [n for n in obs.root.walk() if n.role == "listitem"]
    assert len(items) == 3
    for item in items:
        assert [c.role for c in item.children] == ["checkbox", "button"]
    assert "checked" in obs.ax_tree


def test_viewport_changes_geometry_not_structure(s0, base_config):
    state = _on(s0, "calendar")
    small = render(state, base_config, VIEWPORTS["HVGA"])
    large = render(state, base_config, VIEWPORTS["FHD"])
    assert [(n.bid, n.role, n.label) for n in small.root.walk()] == [
        (n.bid, n.role, n.label) for n in large.root.walk()
    ]
    assert small.visible_window != large.visible_window
    assert len(small.visible_bids()) < len(large.visible_bids())


def test_viewport_presets_and_bounds():
    assert VIEWPORTS["FHD"] == Viewport(1920, 1080)
    assert VIEWPORTS["HD"] == Viewport(1280, 720)
    assert VIEWPORTS["HVGA"] == Viewport(480, 320)
    assert Viewport.parse("800x600") == Viewport(800, 600)
    with pytest.raises(ValueError):
        Viewport(200, 600)


def test_golden_calendar_ax_tree(s0, base_config):
    obs = render(_on(s0, "calendar"), base_config, VIEWPORTS["HD"])
    assert obs.ax_tree == golden_text("calendar_axtree_HD.txt")
    bids = {bid: f"{n.role} {n.label}" for bid, n in obs.nodes.items()}
    assert bids == yaml.safe_load(golden_text("calendar_bids.yaml"))


AX_LINE = re.compile(r"^(  )*\d+ [a-z]+ '(?:[^'\\]|\\.)*'(?: [a-z_]+(?:='(?:[^'\\]|\\.)*')?)*$")


def test_ax_tree_line_format(s0, base_config):
    for state in page_states(s0):
        obs = render(state, base_config, VIEWPORTS["HD"])
        lines = obs.ax_tree.splitlines()
        assert len(lines) == len(obs.nodes)
        for line in lines:
            assert AX_LINE.match(line), line


def test_html_is_self_contained(s0, base_config):
    dark = build_config(["dark_theme"])
    for cfg in (base_config, dark):
        html = render(_on(s0, "shop"), cfg, VIEWPORTS["HD"]).html
        assert html.startswith("<!DOCTYPE html>")
        assert "<script" not in html and "<link" not in html and "src=" not in html
    assert "#121212" in render(s0, dark, VIEWPORTS["HD"]).html


def test_structure_invariants(s0, base_config):
    for vp in VIEWPORTS.values():
        for state in page_states(s0):
            obs = render(state, base_config, vp)
            bids = [n.bid for n in obs.root.walk()]
            assert bids == [str(i) for i in range(len(bids))]
            for node in obs.root.walk():
                if node.interactive:
                    assert node.bbox[2] > 0 and node.bbox[3] > 0
                x, y, w, h = node.bbox
                for child in node.children:
                    cx, cy, cw, ch = child.bbox
                    assert x <= cx and y <= cy and cx + cw <= x + w and cy + ch <= y + h


def test_render_is_deterministic(s0, base_config):
    for state in page_states(s0):
        a = render(state, base_config, VIEWPORTS["HD"])
        b = render(state, build_config(), VIEWPORTS["HD"])
        assert a.ax_tree == b.ax_tree and a.html == b.html


def test_visibility_monotone_in_viewport(s0, base_config):
    order = [VIEWPORTS["HVGA"], Viewport(800, 600), VIEWPORTS["HD"], VIEWPORTS["FHD"]]
    for state in page_states(s0):
        visible = [set(render(state, base_config, vp).visible_bids()) for vp in order]
        for smaller, larger in zip(visible, visible[1:]):
            assert smaller <= larger


def _role_labels(cfg, state):
    return {(n.role, n.label) for n in render(state, cfg, VIEWPORTS["HD"]).root.walk()}


@pytest.mark.parametrize("vid", sorted(v.id for v in all_variations().values() if v.kind == "appearance"))
def test_appearance_variations_keep_interface(s0, base_config, vid):
    cfg = build_config([vid])
    for state in page_states(s0):
        assert _role_labels(cfg, state) == _role_labels(base_config, state)


def test_content_variation_changes_labels(s0, base_config):
    de = build_config(["german"])
    todo = _on(s0, "todo")
    assert _role_labels(de, todo) != _role_labels(base_config, todo)


# ---------------------------------------------------------------------------
# Resolution


def _node(obs, role, label):
    return next(n for n in obs.root.walk() if n.role == role and n.label == label)


def test_click_add_button(s0, base_config):
    obs = render(_on(s0, "todo"), base_config, VIEWPORTS["HD"])
    add = _node(obs, "button", "Add")
    assert resolve(obs, call("click", add.bid)) == ActivateButton("add-todo")
    cx, cy = add.center
    assert resolve(obs, call("mouse_click", cx, cy)) == ActivateButton("add-todo")


def test_coordinates_include_scroll(s0, base_config):
    state = _on(s0, "calendar")
    obs = render(state, base_config, VIEWPORTS["HVGA"])
    last = [n for n in obs.root.walk() if n.interactive][-1]
    scrolled = render(replace(state, nav=replace(state.nav, scroll_offset=obs.max_scroll)), base_config,
                      VIEWPORTS["HVGA"])
    cx, cy = last.center
    assert hit_test(scrolled, cx, cy - scrolled.scroll_offset) is not None
    assert hit_test(scrolled, cx, cy - scrolled.scroll_offset).bid == last.bid


def test_goto_external_is_recorded():
    env = Env(EnvRequest("AddEventTask"))
    step = env.step("goto('https://leafletjs.com/')")
    assert step.rejection.reason == "external_navigation"
    assert env.state.nav.route == "external:https://leafletjs.com/"


@pytest.mark.parametrize(
    "action,reason",
    [
        (call("click", "9999"), "unknown_bid"),
        (call("fill", "0", "x"), "not_fillable"),
        (call("mouse_click", 5000, 10), "off_screen"),
        (call("keyboard_type", "hi"), "no_focus"),
        (call("keyboard_press", "F13"), "unsupported_key"),
        (call("goto", "not a url"), "not_found"),
    ],
)
def test_rejections(s0, base_config, action, reason):
    obs = render(s0, base_config, VIEWPORTS["HD"])
    result = resolve(obs, action)
    assert isinstance(result, Rejection) and result.reason == reason


def test_goto_inside_environment(s0, base_config):
    obs = render(s0, base_config, VIEWPORTS["HD"])
    assert resolve(obs, call("goto", "http://openapps.local/maps")) == Navigate("maps")


# ---------------------------------------------------------------------------
# Bid assignment


def test_single_button_page():
    root = UiNode("section", "page", [UiNode("button", "OK")])
    nodes = assign_bids(root)
    assert list(nodes) == ["0", "1"] and nodes["1"].role == "button"


@given(st.integers(0, 5), st.integers(0, 5))
def test_insertion_shifts_later_bids_by_constant(n_before, n_after):
    def page(extra: bool):
        items = [UiNode("listitem", f"a{i}", [UiNode("button", "x")]) for i in range(n_before)]
        if extra:
            items.append(UiNode("listitem", "new", [UiNode("button", "x")]))
        tail = [UiNode("button", f"b{i}") for i in range(n_after)]
        root = UiNode("section", "page", [UiNode("section", "list", items)] + tail)
        assign_bids(root)
        return {n.label: int(n.bid) for n in root.walk() if n.label.startswith("b")}

    before, after = page(False), page(True)
    assert {k: after[k] - before[k] for k in before} == {k: 2 for k in before}
