from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from varapps.config import default_config
from varapps.state import init_state

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TESTS = Path(__file__).resolve().parent
GOLDEN = TESTS / "golden"
FIXTURES = TESTS / "fixtures"


def golden_text(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


def golden_json(name: str):
    return json.loads(golden_text(name))


@pytest.fixture(scope="session")
def base_config():
    return default_config()


@pytest.fixture(scope="session")
def s0(base_config):
    return init_state(base_config)


@pytest.fixture
def calendar_example_text() -> str:
    return (FIXTURES / "calendar_example.yaml").read_text(encoding="utf-8")


def replay_transcript(client, exchanges) -> list:
    """Re-issue recorded exchanges; return (index, field, expected, actual) mismatches."""
    placeholder = "<session_id>"
    sid = None
    mismatches = []
    for i, ex in enumerate(exchanges):
        path = ex["path"] if sid is None else ex["path"].replace(placeholder, sid)
        resp = client.request(ex["method"], path, json=ex["body"])
        if sid is None and ex["method"] == "POST" and ex["path"] == "/sessions":
            sid = resp.json()["session_id"]
        text = resp.text.replace(sid, placeholder) if sid else resp.text
        for name, actual in (("status", resp.status_code), ("content_type", resp.headers["content-type"]),
                             ("text", text)):
            if actual != ex[name]:
                mismatches.append((i, name, ex[name], actual))
    return mismatches


@pytest.fixture(scope="session")
def live_server():
    """A real uvicorn server on a free local port, run in a daemon thread."""
    import socket
    import threading
    import time

    import uvicorn

    from varapps.server import create_app

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 20
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda line: int(line.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
