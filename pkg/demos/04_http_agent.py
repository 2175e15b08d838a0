"""Drive a session over HTTP as an external agent would.

Starts a server in this process on a free port, then talks to it with httpx.

    python demos/04_http_agent.py
"""

from __future__ import annotations

import socket
import threading
import time

import httpx
import uvicorn

from varapps.server import create_app

with socket.socket() as sock:
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
server = uvicorn.Server(uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="warning"))
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.05)

with httpx.Client(base_url=f"http://127.0.0.1:{port}") as client:
    created = client.post("/sessions", json={"protocol_version": 1, "task": "MessageXTask",
                                             "variations": ["challenging_font"]}).json()
    sid = created["session_id"]
    print("goal:", created["goal"])
    for action in ["click('5')", "click(bid)"]:
        body = client.post(f"/sessions/{sid}/actions", json={"protocol_version": 1, "action": action}).json()
        print(action, "->", body["step"]["parse"], body["step"]["route"])
    print(body["observation"]["text"])
    print(client.get(f"/sessions/{sid}/result").json()["result"])
    client.delete(f"/sessions/{sid}")

server.should_exit = True
