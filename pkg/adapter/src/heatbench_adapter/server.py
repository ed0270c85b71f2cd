"""The request loop: line-delimited JSON over stdio or TCP.

One request per line, one reply per line; score replies carry the request
id, so clients may pipeline and match answers out of order. The loop is
deliberately single threaded; a real model earns its throughput by batching
inside a request handler, not from concurrent handlers.

Failure policy: anything wrong with one request (undecodable line, unknown
op, unreadable tensor) is answered on the wire and the loop moves on. Only
a broken transport or a bad launch configuration stops the server.
"""

from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass
from typing import Callable, Iterable

from .container import read_tensor
from .errors import AdapterError, ArtifactError
from .models import load_model

TRANSPORTS = ("stdio", "tcp")


@dataclass
class AdapterConfig:
    """How to launch the adapter: which model, on which transport."""
    model: str = "stub"     # artifact path, or "stub" for the built-in scorer
    transport: str = "stdio"
    device: str = "cpu"     # recorded for real backends; the stubs ignore it
    batch_size: int = 8     # vectorization cap for models that batch per request
    host: str = "127.0.0.1"
    port: int = 0           # 0 lets the OS pick; the bound port goes to stderr

    def validate(self) -> None:
        if self.transport not in TRANSPORTS:
            raise ArtifactError(
                f"unknown transport {self.transport!r}; expected one of {TRANSPORTS}")
        if self.batch_size < 1:
            raise ArtifactError("batch_size must be at least 1")
        if not 0 <= self.port <= 65535:
            raise ArtifactError(f"port {self.port} out of range")


def handle_request(model, line: str) -> dict | None:
    """Map one raw request line to one reply object.

    Returns None for blank lines, which are ignored rather than answered.
    Error replies echo the request id whenever the request carried one, so
    the client can attribute the failure; a line that never parsed has no
    id to echo.
    """
    if not line.strip():
        return None
    try:
        msg = json.loads(line)
    except json.JSONDecodeError:
        return {"error": f"request is not valid JSON: {line.strip()[:80]!r}"}
    if not isinstance(msg, dict):
        return {"error": "request must be a JSON object"}
    op = msg.get("op")
    rid = msg.get("id")

    if op == "info":
        return {
            "n_classes": model.n_classes,
            "input_shape": [int(s) for s in model.input_shape],
            "modalities": [str(m) for m in model.modalities],
        }

    if op == "score":
        if rid is None:
            return {"error": "score request is missing 'id'"}
        uri = msg.get("tensor_uri")
        if not isinstance(uri, str) or not uri:
            return {"id": rid, "error": "score request is missing 'tensor_uri'"}
        try:
            volume = read_tensor(uri)
            probs = model.probs(volume)
        except AdapterError as exc:
            return {"id": rid, "error": str(exc)}
        return {"id": rid, "probs": [float(p) for p in probs]}

    reply: dict = {"error": f"unknown op {op!r}"}
    if rid is not None:
        reply["id"] = rid
    return reply


def serve_lines(model, lines: Iterable[str], emit: Callable[[str], None]) -> None:
    """Drive the request loop over an iterable of lines until it ends."""
    for line in lines:
        reply = handle_request(model, line)
        if reply is not None:
            emit(json.dumps(reply) + "\n")


def _serve_stdio(model) -> None:
    def emit(text: str) -> None:
        sys.stdout.write(text)
        sys.stdout.flush()

    serve_lines(model, sys.stdin, emit)


def _serve_tcp(model, config: AdapterConfig) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((config.host, config.port))
        srv.listen(1)
        host, port = srv.getsockname()
        print(f"listening on {host}:{port}", file=sys.stderr, flush=True)
        while True:
            conn, _ = srv.accept()
            # Read and write paths stay separate: a shared "rw" file object
            # pairs one raw stream with itself and drops buffered request
            # lines once replies interleave with a pipelining client.
            with conn, conn.makefile("r", encoding="utf-8", newline="\n") as reader:
                def emit(text: str) -> None:
                    conn.sendall(text.encode("utf-8"))

                try:
                    serve_lines(model, reader, emit)
                except OSError:
                    pass    # client vanished mid-reply; wait for the next one


def serve(config: AdapterConfig) -> None:
    """Load the model and answer requests until the transport closes.

    stdio serves its single stream and returns at EOF; tcp accepts clients
    one at a time, forever.
    """
    config.validate()
    model = load_model(config.model)
    if config.transport == "stdio":
        _serve_stdio(model)
    else:
        _serve_tcp(model, config)
