"""Transports: stdio (default, one session per process) and TCP (one session
per connection, connections handled concurrently, requests serially within
each)."""

from __future__ import annotations

import socketserver
import sys

from .models import make_model
from .session import BridgeSession


def serve_stdio(model_name: str, model_kwargs: dict | None = None,
                stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = BridgeSession(model=make_model(model_name, **(model_kwargs or {})),
                           model_name=model_name)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(session.handle_line(line) + "\n")
        stdout.flush()
        if session.closed:
            break
    return 0


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        session = BridgeSession(
            model=make_model(self.server.model_name, **self.server.model_kwargs),
            model_name=self.server.model_name,
        )
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            self.wfile.write((session.handle_line(line) + "\n").encode("utf-8"))
            self.wfile.flush()
            if session.closed:
                break


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, model_name: str, model_kwargs: dict):
        self.model_name = model_name
        self.model_kwargs = model_kwargs
        super().__init__(address, _Handler)


def serve_tcp(model_name: str, host: str = "127.0.0.1", port: int = 0,
              model_kwargs: dict | None = None, ready_callback=None) -> int:
    # validate the model once up front so a bad name fails fast
    make_model(model_name, **(model_kwargs or {}))
    with _Server((host, port), model_name, model_kwargs or {}) as server:
        if ready_callback is not None:
            ready_callback(server.server_address)
        else:
            print(f"listening on {server.server_address[0]}:{server.server_address[1]}",
                  file=sys.stderr, flush=True)
        server.serve_forever()
    return 0


def serve(model_name: str, transport: str = "stdio", host: str = "127.0.0.1",
          port: int = 0, model_kwargs: dict | None = None) -> int:
    if transport == "stdio":
        return serve_stdio(model_name, model_kwargs)
    if transport == "tcp":
        return serve_tcp(model_name, host, port, model_kwargs)
    raise ValueError(f"unknown transport {transport!r}; choose stdio or tcp")
