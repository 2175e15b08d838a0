"""Random single side effects on an environment state, for reward tests."""

from __future__ import annotations

import datetime as dt
import random
from dataclasses import replace
from typing import Callable, List

from varapps.state import CalendarEvent, CartItem, EnvState, FileNode, Message, SavedPlace, TodoItem

_WORDS = ("alpha", "bravo", "Buy milk", "water plants", "Team lunch", "Bob", "notes", "x")


def _word(rng: random.Random) -> str:
    return rng.choice(_WORDS) + ("" if rng.random() < 0.5 else f" {rng.randint(1, 99)}")


def _drop(items: tuple, rng: random.Random) -> tuple:
    i = rng.randrange(len(items))
    return items[:i] + items[i + 1:]


def add_todo(s: EnvState, rng) -> EnvState:
    i = rng.randint(0, len(s.todos))
    return replace(s, todos=s.todos[:i] + (TodoItem(_word(rng), rng.random() < 0.3),) + s.todos[i:])


def toggle_todo(s: EnvState, rng) -> EnvState:
    if not s.todos:
        return add_todo(s, rng)
    i = rng.randrange(len(s.todos))
    return replace(s, todos=s.todos[:i] + (replace(s.todos[i], done=not s.todos[i].done),) + s.todos[i + 1:])


def remove_todo(s: EnvState, rng) -> EnvState:
    return replace(s, todos=_drop(s.todos, rng)) if s.todos else add_todo(s, rng)


def rename_todo(s: EnvState, rng) -> EnvState:
    if not s.todos:
        return add_todo(s, rng)
    i = rng.randrange(len(s.todos))
    item = replace(s.todos[i], text=s.todos[i].text + "!")
    return replace(s, todos=s.todos[:i] + (item,) + s.todos[i + 1:])


def add_event(s: EnvState, rng) -> EnvState:
    date = dt.date(2025, 7, 1) + dt.timedelta(days=rng.randint(0, 400))
    return replace(s, calendar=s.calendar + (CalendarEvent(_word(rng), date),))


def remove_event(s: EnvState, rng) -> EnvState:
    return replace(s, calendar=_drop(s.calendar, rng)) if s.calendar else add_event(s, rng)


def shift_event(s: EnvState, rng) -> EnvState:
    if not s.calendar:
        return add_event(s, rng)
    i = rng.randrange(len(s.calendar))
    e = s.calendar[i]
    moved = replace(e, date=e.date + dt.timedelta(days=rng.choice((-1, 1, 7))))
    return replace(s, calendar=s.calendar[:i] + (moved,) + s.calendar[i + 1:])


def edit_event_location(s: EnvState, rng) -> EnvState:
    if not s.calendar:
        return add_event(s, rng)
    i = rng.randrange(len(s.calendar))
    e = s.calendar[i]
    changed = replace(e, location=(e.location or "") + " Room 2")
    return replace(s, calendar=s.calendar[:i] + (changed,) + s.calendar[i + 1:])


def send_message(s: EnvState, rng) -> EnvState:
    peer, msgs = rng.choice(s.conversations)
    seq = (msgs[-1].seq + 1) if msgs else 1
    return s.with_conversation(peer, msgs + (Message(peer, rng.choice(("sent", "received")), _word(rng), seq),))


def drop_message(s: EnvState, rng) -> EnvState:
    peer, msgs = rng.choice(s.conversations)
    if not msgs:
        return send_message(s, rng)
    return s.with_conversation(peer, msgs[:-1])


def add_place(s: EnvState, rng) -> EnvState:
    name = f"{_word(rng)}, Place {rng.randint(100, 999)}"
    return replace(s, places=s.places + (SavedPlace(name, name),))


def remove_place(s: EnvState, rng) -> EnvState:
    return replace(s, places=_drop(s.places, rng)) if s.places else add_place(s, rng)


def add_cart(s: EnvState, rng) -> EnvState:
    product = rng.choice(s.catalog)
    chosen = tuple(sorted((name, rng.choice(values)) for name, values in product.options))
    line = CartItem(product.id, chosen, rng.randint(1, 2))
    return replace(s, cart=s.cart + (line,))


def bump_cart(s: EnvState, rng) -> EnvState:
    if not s.cart:
        return add_cart(s, rng)
    i = rng.randrange(len(s.cart))
    return replace(s, cart=s.cart[:i] + (replace(s.cart[i], quantity=s.cart[i].quantity + 1),) + s.cart[i + 1:])


def _folders(node: FileNode, path=()) -> List[tuple]:
    out = [path]
    for c in node.children:
        if c.kind == "folder":
            out.extend(_folders(c, path + (c.name,)))
    return out


def _insert(node: FileNode, path: tuple, new: FileNode) -> FileNode:
    if not path:
        kids = sorted(node.children + (new,), key=lambda c: (c.kind != "folder", c.name))
        return replace(node, children=tuple(kids))
    return replace(node, children=tuple(_insert(c, path[1:], new) if c.name == path[0] else c
                                        for c in node.children))


def add_file(s: EnvState, rng) -> EnvState:
    path = rng.choice(_folders(s.files))
    existing = {c.name for c in (s.files.find(path) or s.files).children}
    name = f"new_{rng.randint(0, 10_000)}.py"
    while name in existing:
        name = "_" + name
    return replace(s, files=_insert(s.files, path, FileNode(rng.choice(("file", "folder")), name)))


def remove_file(s: EnvState, rng) -> EnvState:
    def strip(node: FileNode) -> FileNode:
        if node.children and rng.random() < 0.5:
            kids = list(node.children)
            kids.pop(rng.randrange(len(kids)))
            return replace(node, children=tuple(kids))
        if node.children:
            i = rng.randrange(len(node.children))
            kids = list(node.children)
            kids[i] = strip(kids[i])
            return replace(node, children=tuple(kids))
        return node

    out = strip(s.files)
    return replace(s, files=out) if out != s.files else add_file(s, rng)


def change_route(s: EnvState, rng) -> EnvState:
    routes = ["home", "calendar", "todo", "messenger", "maps", "codeeditor", "shop", "cart"]
    routes.remove(s.nav.route) if s.nav.route in routes else None
    return replace(s, nav=replace(s.nav, route=rng.choice(routes)))


CONTENT_MUTATIONS: List[Callable] = [
    add_todo, toggle_todo, remove_todo, rename_todo,
    add_event, remove_event, shift_event, edit_event_location,
    send_message, drop_message,
    add_place, remove_place,
    add_cart, bump_cart,
    add_file, remove_file,
]


def mutate(state: EnvState, rng: random.Random, with_route: bool = False) -> EnvState:
    pool = CONTENT_MUTATIONS + ([change_route] if with_route else [])
    return rng.choice(pool)(state, rng)
