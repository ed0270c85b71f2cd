"""Test-side plumbing: artifacts on disk and a raw line-level client.

The client speaks the protocol one JSON line at a time with no matching or
validation of its own, which is exactly what the server tests need: they
assert on raw replies, including the malformed ones a real client would
reject.
"""

from __future__ import annotations

import json
import queue
import subprocess
import sys
import threading
from pathlib import Path

import numpy as np

from heatbench_adapter.container import write_tensor


def make_linear_artifact(root: Path, weights: np.ndarray, bias: float = 0.0,
                         modalities: list[str] | None = None) -> Path:
    write_tensor(root / "weights.tns", weights)
    doc: dict = {"kind": "linear", "weights_uri": "weights.tns", "bias": bias}
    if modalities is not None:
        doc["modalities"] = modalities
    path = root / "linear.json"
    path.write_text(json.dumps(doc))
    return path


class LineClient:
    """An adapter subprocess plus blocking-with-timeout line IO.

    A reader thread feeds a queue so a missing reply fails the test after
    ``timeout`` seconds instead of hanging it.
    """

    def __init__(self, *args: str) -> None:
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "heatbench_adapter", *args],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.PIPE, text=True, bufsize=1)
        self._lines: queue.Queue[str | None] = queue.Queue()
        threading.Thread(target=self._pump, daemon=True).start()

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def send(self, payload) -> None:
        line = payload if isinstance(payload, str) else json.dumps(payload)
        assert self.proc.stdin is not None
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv_raw(self, timeout: float = 10.0) -> str:
        line = self._lines.get(timeout=timeout)
        assert line is not None, "adapter closed stdout"
        return line

    def recv(self, timeout: float = 10.0) -> dict:
        return json.loads(self.recv_raw(timeout))

    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self) -> None:
        if self.proc.poll() is None:
            assert self.proc.stdin is not None
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
