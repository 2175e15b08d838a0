"""Appearance changes the pixels, content changes the words, and both compose.

    python demos/02_variations.py
"""

from __future__ import annotations

from dataclasses import replace

from varapps.config import VariationConflict, build_config, shipped_catalog
from varapps.layout import VIEWPORTS, render
from varapps.state import init_state

print("shipped variations:", ", ".join(sorted(shipped_catalog())))

base = build_config()
dark = build_config(["dark_theme"])
german = build_config(["german"])
both = build_config(["dark_theme", "german"])



def on_todo(state):
    return replace(state, nav=replace(state.nav, route="todo"))


todo = on_todo(init_state(base))


def tree(cfg, state):
    return render(state, cfg, VIEWPORTS["HD"]).ax_tree


print("dark theme keeps the accessibility tree:", tree(dark, todo) == tree(base, todo))
print("dark theme background:", dark.style("todo")["colors"]["background"])

print("german todo page:")
print(tree(german, on_todo(init_state(german))))
print("dark + german digest differs from either alone:",
      len({base.digest, dark.digest, german.digest, both.digest}) == 4)

try:
    build_config(["dark_theme", "black_and_white"])
except VariationConflict as exc:
    print("conflict:", exc.path)
