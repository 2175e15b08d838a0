from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from varapps.actions import (
    CATEGORIES,
    FULL_LISTING,
    MANIFEST_VERSION,
    SIGNATURES,
    VISUAL_LISTING,
    Action,
    InvalidAction,
    action_signatures,
    format_action,
    listing_tokens,
    parse_action,
    signature_manifest,
    split_actions,
)

# Invalid outputs collected from agent logs, with the category each falls in.
INVALID_CORPUS = [
    ("click(23)", "bad_arguments"),
    ("noop", "unknown_action"),
    ("check_ax_tree()", "unknown_action"),
    ("mouse_click(x=612 y)", "malformed"),
    ("click(bid)\n```", "malformed"),
    ("click(bid)\n<\\action>", "malformed"),
    ("click(bid)\n<\\action> \n```python\npyautogui.click(x=0.523, y=0.466)\n```", "malformed"),
    ("click(bid)\n```\n```python\npyautogui.click(x=0.000, y=0.000) \n```", "malformed"),
    ("click(bid)\n```python\npyautogui.click(x=0.000, y=0.000)\n```", "malformed"),
    ("remove_item(water plants)", "unknown_action"),
    ("duplicate(17)", "unknown_action"),
    ("click([67] link 'main-page'", "malformed"),
    ("enter(searchInput, Bockelwitz, Germany)", "unknown_action"),
    ("no-op", "malformed"),
    ("go_to('https://www.example.com/maps')", "unknown_action"),
    ("type(OWYN - 100% Vegan Plant-Based Protein Shakes | Cold Brew Coffee, 12 Fl Oz )", "unknown_action"),
    ("finished()", "unknown_action"),
    ("wait()", "unknown_action"),
    ("scroll(direction='down', point='(966,546)')", "bad_arguments"),
    ("finished", "unknown_action"),
    ("None", "unknown_action"),
    ("remove_item", "unknown_action"),
    ("click(bid)", "bad_arguments"),
]


@pytest.mark.parametrize("text,category", INVALID_CORPUS)
def test_invalid_corpus_categories(text, category):
    result = parse_action(text)
    assert isinstance(result, InvalidAction)
    assert result.category == category
    assert result.raw == text and result.detail


def test_examples():
    assert parse_action("mouse_click(x=612 y)").category == "malformed"
    assert parse_action("finished()").category == "unknown_action"
    assert parse_action("click('47')") == Action("click", (("bid", "47"),))
    assert parse_action("scroll(direction='down', point='(966,546)')").category == "bad_arguments"


def test_mixed_argument_styles():
    assert parse_action("keyboard_press(key='ctrl a')") == Action("keyboard_press", (("key", "ctrl a"),))
    assert parse_action('fill("12", value="Buy milk")') == parse_action("fill('12', 'Buy milk')")
    assert parse_action("  scroll( 0 , -300.5 )  ")["delta_y"] == -300.5
    assert parse_action("mouse_click(200, 300, button='left')")["x"] == 200
    assert parse_action("select_option('5', ['red'])")["options"] == ("red",)


@pytest.mark.parametrize(
    "text,category",
    [
        ("", "malformed"),
        ("click", "malformed"),
        ("click('1') click('2')", "malformed"),
        ("click('1')\n```", "malformed"),
        ("fill('1')", "bad_arguments"),
        ("fill('1', 'a', 'b')", "bad_arguments"),
        ("click('1', bid='2')", "bad_arguments"),
        ("click('1', button='side')", "bad_arguments"),
        ("click('1', colour='red')", "bad_arguments"),
        ("scroll(0, True)", "bad_arguments"),
        ("goto(url)", "bad_arguments"),
        ("click(*args)", "malformed"),
        ("os.system('x')", "malformed"),
        ("__import__('os')", "unknown_action"),
    ],
)
def test_edge_categories(text, category):
    assert parse_action(text).category == category


# ---------------------------------------------------------------------------
# Profiles


def test_listing_counts():
    full, visual = listing_tokens(FULL_LISTING), listing_tokens(VISUAL_LISTING)
    assert (len(full), len(set(full))) == (25, 23)
    assert (len(visual), len(set(visual))) == (18, 16)


def test_profiles_expose_listing_names():
    full = {name for name, _ in action_signatures("full")}
    visual = {name for name, _ in action_signatures("visual_only")}
    assert full == set(listing_tokens(FULL_LISTING))
    assert visual == set(listing_tokens(VISUAL_LISTING))
    assert visual < full
    assert {"select_option", "drag_and_drop"} <= full
    assert "click" not in visual and "fill" not in visual and "mouse_click" in visual
    assert {"goto", "go_back", "go_forward"} <= full & visual


def test_visual_profile_rejects_element_actions():
    result = parse_action("click('4')", "visual_only")
    assert result.category == "unknown_action"
    assert parse_action("mouse_click(10, 20)", "visual_only").ok


def _minimal_call(sig) -> str:
    samples = {"str": "'a'", "num": "1", "bool": "True", "strlist": "['Shift']", "str_or_strlist": "'a'"}
    return f"{sig.name}({', '.join(samples[p.kind] for p in sig.params if p.required)})"


@pytest.mark.parametrize("profile", ["full", "visual_only"])
def test_every_listed_name_parses_with_its_arity(profile):
    for name, sig in action_signatures(profile):
        required = [p for p in sig.params if p.required]
        result = parse_action(_minimal_call(sig), profile)
        assert isinstance(result, Action) and result.name == name
        if required:
            short = f"{name}({', '.join(['1'] * (len(required) - 1))})"
            assert parse_action(short, profile).category == "bad_arguments"
        too_many = f"{name}({', '.join(['1'] * (len(sig.params) + 1))})"
        assert parse_action(too_many, profile).category == "bad_arguments"


def test_manifest_is_versioned():
    manifest = signature_manifest("visual_only")
    assert manifest["manifest_version"] == MANIFEST_VERSION
    assert manifest["profile"] == "visual_only"
    assert [a["name"] for a in manifest["actions"]] == [n for n, _ in action_signatures("visual_only")]


# ---------------------------------------------------------------------------
# Properties

_str = st.text(max_size=12)
_num = st.integers(-5000, 5000) | st.floats(-5000, 5000, allow_nan=False, allow_infinity=False)


def _value(param):
    if param.choices is not None:
        if param.kind == "strlist":
            return st.lists(st.sampled_from(param.choices), max_size=2).map(tuple)
        return st.sampled_from(param.choices)
    return {
        "str": _str,
        "num": _num,
        "bool": st.booleans(),
        "strlist": st.lists(_str, max_size=3).map(tuple),
        "str_or_strlist": _str | st.lists(_str, min_size=1, max_size=3).map(tuple),
    }[param.kind]


@st.composite
def actions(draw):
    sig = SIGNATURES[draw(st.sampled_from(sorted(SIGNATURES)))]
    args = []
    for p in sig.params:
        if p.required or draw(st.booleans()):
            args.append((p.name, draw(_value(p))))
    return Action(sig.name, tuple(args))


@given(actions())
def test_format_parse_round_trip(action):
    text = format_action(action)
    back = parse_action(text)
    assert back == action
    assert format_action(back) == text


@given(st.text())
def test_parse_is_total_on_text(text):
    first = parse_action(text)
    assert first.ok or first.category in CATEGORIES
    assert parse_action(text) == first


@given(st.binary())
def test_parse_is_total_on_bytes(data):
    result = parse_action(data)
    assert result.ok or result.category in CATEGORIES


@given(actions(), st.sampled_from(["```", "Done.", "<\\action>", "click('2')", "I will now wait"]))
def test_trailing_prose_is_malformed(action, tail):
    result = parse_action(format_action(action) + "\n" + tail)
    assert result.category == "malformed"


def test_split_concatenated_calls():
    assert split_actions("click(47)click(47)click(47)") == ["click(47)"] * 3
    assert split_actions("fill('1', 'a)b')click('2')") == ["fill('1', 'a)b')", "click('2')"]
    assert split_actions("noise click('3') tail") == ["noise", "click('3')", "tail"]
