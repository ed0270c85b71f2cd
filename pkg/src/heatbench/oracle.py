"""Model endpoints: how the harness obtains class probabilities.

Three kinds of endpoint share one small interface (``n_classes``,
``input_shape``, ``modalities``, ``predict_one``):

* glass-box oracles with known internals, used for self-checks;
* external model adapters spoken to over the line-delimited JSON wire
  protocol (subprocess stdio or TCP), documented in docs/oracle-protocol.md;
* a content-addressed caching wrapper around either.

Also home to input ablation (feature removal / modality subsets) and the
dataset-level performance metrics, since both are defined in terms of what
the endpoint sees and returns.
"""

from __future__ import annotations

import hashlib
import json
import math
import queue
import socket
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, OracleError, ProtocolError, UndefinedStatisticError
from .shapes import COMPACTNESS_THRESHOLD, compactness
from .tensorio import write_tensor

PROB_SUM_TOL = 1e-5
FILL_STRATEGIES = ("zero", "per-modality-mean")

# Intensity above which a pixel counts as lesion for the gated oracle's
# segmentation; generated tumors sit above, backgrounds below.
SEGMENT_THRESHOLD = 0.6


@dataclass
class PredictionRecord:
    case_id: str
    probs: np.ndarray
    predicted: int
    latency: float


def _validated_probs(raw: Sequence[float], n_classes: int, who: str) -> np.ndarray:
    probs = np.asarray(raw, dtype=np.float64)
    if probs.shape != (n_classes,):
        raise OracleError(f"{who}: expected {n_classes} probabilities, got shape {probs.shape}")
    if not np.isfinite(probs).all() or (probs < 0).any():
        raise OracleError(f"{who}: probabilities must be finite and non-negative")
    if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOL:
        raise OracleError(f"{who}: probability-sum violation (sum={float(probs.sum()):.8f})")
    return probs


def make_record(case_id: str, raw_probs: Sequence[float], n_classes: int,
                latency: float, who: str = "endpoint") -> PredictionRecord:
    probs = _validated_probs(raw_probs, n_classes, who)
    # argmax returns the first maximum, i.e. ties break to the lowest index.
    return PredictionRecord(case_id, probs, int(np.argmax(probs)), latency)


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationSpec:
    """What to remove and what to write in its place.

    kind "feature-removal" uses ``mask`` (boolean, volume-shaped);
    kind "modality-subset" keeps only the modalities in ``keep`` and fills
    every other plane entirely.
    """
    kind: str
    mask: np.ndarray | None = None
    keep: tuple[int, ...] = ()
    fill: str = "zero"


def _fill_values(volume: np.ndarray, fill: str) -> np.ndarray:
    if fill == "zero":
        return np.zeros(volume.shape[0], dtype=volume.dtype)
    if fill == "per-modality-mean":
        return volume.reshape(volume.shape[0], -1).mean(axis=1).astype(volume.dtype)
    raise ConfigError(f"unknown fill strategy {fill!r}; expected one of {FILL_STRATEGIES}")


def ablate(volume: np.ndarray, spec: AblationSpec) -> np.ndarray:
    """Return a copy of ``volume`` with the specified content removed.

    Untouched locations are bit-identical to the input; no re-normalization
    of the remaining values.
    """
    vol = np.asarray(volume)
    if vol.ndim < 2:
        raise ConfigError("ablate expects a [modalities, ...] volume")
    out = vol.copy()
    fills = _fill_values(vol, spec.fill)

    if spec.kind == "feature-removal":
        if spec.mask is None or spec.mask.shape != vol.shape:
            raise ConfigError("feature-removal needs a volume-shaped boolean mask")
        mask = spec.mask.astype(bool)
        for m in range(vol.shape[0]):
            out[m][mask[m]] = fills[m]
        return out

    if spec.kind == "modality-subset":
        keep = set(spec.keep)
        if any(not 0 <= k < vol.shape[0] for k in keep):
            raise ConfigError(f"modality index out of range in subset {sorted(keep)}")
        for m in range(vol.shape[0]):
            if m not in keep:
                out[m] = fills[m]
        return out

    raise ConfigError(f"unknown ablation kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# dataset-level performance
# ---------------------------------------------------------------------------

def performance(records: Sequence[PredictionRecord], labels: Sequence[int],
                metric: str) -> float:
    """Task performance of a set of predictions: accuracy or roc-auc.

    roc-auc uses the rank (Mann-Whitney) form on the class-1 probability:
    P(score_pos > score_neg) + 0.5 * P(tie); binary labels only.
    """
    if len(records) != len(labels) or not records:
        raise ConfigError("performance needs one label per record")
    y = np.asarray(labels, dtype=int)

    if metric == "accuracy":
        pred = np.asarray([r.predicted for r in records], dtype=int)
        return float(np.mean(pred == y))

    if metric == "roc-auc":
        if set(np.unique(y)) - {0, 1}:
            raise ConfigError("roc-auc requires binary labels 0/1")
        n_pos = int(np.sum(y == 1))
        n_neg = int(np.sum(y == 0))
        if n_pos == 0 or n_neg == 0:
            raise UndefinedStatisticError("AUC undefined: labels contain a single class")
        scores = np.asarray([float(r.probs[1]) for r in records])
        order = np.argsort(scores, kind="stable")
        ranks = np.empty(len(scores), dtype=np.float64)
        i = 0
        while i < len(scores):
            j = i
            while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
                j += 1
            ranks[order[i:j + 1]] = (i + j) / 2 + 1
            i = j + 1
        rank_sum_pos = float(ranks[y == 1].sum())
        return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    raise ConfigError(f"unknown task metric {metric!r}")


def _sigmoid(x: float) -> float:
    # Stable in both tails.
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# glass-box oracles
# ---------------------------------------------------------------------------

class GlassboxLinearOracle:
    """Two-class linear scorer with known ground-truth attribution |w|.

    logit = sum(w * x) + b; probabilities = softmax([0, logit]).
    """

    def __init__(self, weights: np.ndarray, bias: float = 0.0,
                 modalities: tuple[str, ...] | None = None) -> None:
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.ndim < 2:
            raise ConfigError("weights must be volume-shaped ([modalities, ...])")
        self.bias = float(bias)
        self.n_classes = 2
        self.input_shape = tuple(self.weights.shape)
        self.modalities = modalities or tuple(
            f"mod{i}" for i in range(self.weights.shape[0]))
        self.endpoint_id = "builtin:linear"

    def ground_truth_heatmap(self) -> np.ndarray:
        return np.abs(self.weights)

    def predict_one(self, volume: np.ndarray) -> np.ndarray:
        if volume.shape != self.input_shape:
            raise OracleError(f"shape mismatch: endpoint expects {self.input_shape}, "
                              f"got {volume.shape}")
        logit = float(np.sum(self.weights * volume)) + self.bias
        p1 = _sigmoid(logit)
        return np.array([1.0 - p1, p1])

    def close(self) -> None:
        pass


class ModalityGatedOracle:
    """Classifies solely from one named modality via blob roundness.

    The named plane is thresholded at SEGMENT_THRESHOLD; the compactness of
    the resulting mask drives a logistic on (threshold - compactness), so
    round lesions map to class 0 and irregular ones to class 1. An empty
    segmentation (e.g. the modality was ablated to zero) yields the uniform
    distribution.
    """

    def __init__(self, modalities: tuple[str, ...], discriminative: str,
                 input_shape: tuple[int, ...] | None = None,
                 steepness: float = 40.0) -> None:
        if discriminative not in modalities:
            raise ConfigError(f"discriminative modality {discriminative!r} "
                              f"not in {list(modalities)}")
        self.modalities = tuple(modalities)
        self.discriminative = discriminative
        self._index = self.modalities.index(discriminative)
        self.n_classes = 2
        self.input_shape = tuple(input_shape) if input_shape else None
        self.steepness = float(steepness)
        self.endpoint_id = f"builtin:modality-gated:{discriminative}"

    def predict_one(self, volume: np.ndarray) -> np.ndarray:
        if self.input_shape and volume.shape != self.input_shape:
            raise OracleError(f"shape mismatch: endpoint expects {self.input_shape}, "
                              f"got {volume.shape}")
        if volume.shape[0] != len(self.modalities):
            raise OracleError(f"expected {len(self.modalities)} modalities, "
                              f"got {volume.shape[0]}")
        plane = volume[self._index]
        if plane.ndim != 2:
            raise OracleError("gated oracle supports 2-D modalities")
        mask = plane > SEGMENT_THRESHOLD
        if not mask.any():
            return np.full(2, 0.5)
        c = compactness(mask)
        p1 = _sigmoid(self.steepness * (COMPACTNESS_THRESHOLD - c))
        return np.array([1.0 - p1, p1])

    def close(self) -> None:
        pass


# ---------------------------------------------------------------------------
# caching wrapper
# ---------------------------------------------------------------------------

class CachingOracle:
    """Content-addressed score cache in front of any endpoint.

    Key = hash of the (ablated) volume bytes + shape; the endpoint id is
    part of the on-disk location so caches of different endpoints never mix.
    """

    def __init__(self, inner, spill_dir: str | Path | None = None) -> None:
        self.inner = inner
        self.n_classes = inner.n_classes
        self.input_shape = inner.input_shape
        self.modalities = inner.modalities
        self.endpoint_id = inner.endpoint_id
        self._memory: dict[str, np.ndarray] = {}
        self.requests = 0
        self.misses = 0
        self._spill: Path | None = None
        if spill_dir is not None:
            safe = "".join(ch if ch.isalnum() else "_" for ch in inner.endpoint_id)
            self._spill = Path(spill_dir) / safe
            self._spill.mkdir(parents=True, exist_ok=True)

    def _key(self, volume: np.ndarray) -> str:
        h = hashlib.sha256()
        h.update(str(volume.shape).encode())
        h.update(np.ascontiguousarray(volume, dtype=np.float32).tobytes())
        return h.hexdigest()

    def _lookup(self, key: str) -> np.ndarray | None:
        hit = self._memory.get(key)
        if hit is not None:
            return hit
        if self._spill is not None:
            path = self._spill / f"{key}.json"
            if path.exists():
                probs = np.asarray(json.loads(path.read_text()), dtype=np.float64)
                self._memory[key] = probs
                return probs
        return None

    def _store(self, key: str, probs: np.ndarray) -> None:
        self._memory[key] = probs
        if self._spill is not None:
            (self._spill / f"{key}.json").write_text(json.dumps([float(p) for p in probs]))

    def predict_one(self, volume: np.ndarray) -> np.ndarray:
        self.requests += 1
        key = self._key(volume)
        probs = self._lookup(key)
        if probs is None:
            self.misses += 1
            probs = self.inner.predict_one(volume)
            self._store(key, probs)
        return probs

    def score_batch(self, cases: Sequence[tuple[str, np.ndarray]]) -> list[PredictionRecord]:
        """Serve hits from the cache, forward misses to the endpoint in one batch."""
        records: list[PredictionRecord | None] = [None] * len(cases)
        miss_keys: list[str] = []
        miss_positions: list[int] = []
        for pos, (case_id, volume) in enumerate(cases):
            self.requests += 1
            key = self._key(volume)
            probs = self._lookup(key)
            if probs is None:
                miss_keys.append(key)
                miss_positions.append(pos)
            else:
                records[pos] = make_record(case_id, probs, self.n_classes, 0.0,
                                           who=f"case {case_id}")
        if miss_positions:
            self.misses += len(miss_positions)
            fresh = score(self.inner, [cases[pos] for pos in miss_positions])
            for key, pos, record in zip(miss_keys, miss_positions, fresh):
                self._store(key, record.probs)
                records[pos] = record
        return [r for r in records if r is not None]

    def close(self) -> None:
        self.inner.close()


# ---------------------------------------------------------------------------
# scoring entry point
# ---------------------------------------------------------------------------

def score(endpoint, cases: Sequence[tuple[str, np.ndarray]]) -> list[PredictionRecord]:
    """Score (case_id, volume) pairs; one record per case, in request order."""
    if hasattr(endpoint, "score_batch"):
        return endpoint.score_batch(cases)
    records = []
    for case_id, volume in cases:
        start = time.perf_counter()
        probs = endpoint.predict_one(volume)
        latency = time.perf_counter() - start
        records.append(make_record(case_id, probs, endpoint.n_classes, latency,
                                   who=f"case {case_id}"))
    return records


# ---------------------------------------------------------------------------
# wire protocol client
# ---------------------------------------------------------------------------

@dataclass
class EndpointSpec:
    """Where and how to reach an external adapter."""
    transport: str                      # "subprocess-stdio" | "tcp"
    command: tuple[str, ...] = ()       # subprocess argv
    address: tuple[str, int] | None = None
    batch_size: int = 8
    max_in_flight: int = 2
    timeout: float = 30.0

    @property
    def endpoint_id(self) -> str:
        if self.transport == "subprocess-stdio":
            return "cmd:" + " ".join(self.command)
        if self.address:
            return f"tcp:{self.address[0]}:{self.address[1]}"
        return self.transport


class _StdioTransport:
    """Line transport over a child process; a reader thread feeds a queue so
    receives can time out without blocking on the pipe."""

    def __init__(self, command: Sequence[str]) -> None:
        try:
            self._proc = subprocess.Popen(
                list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        except OSError as exc:
            raise OracleError(f"cannot launch adapter {command!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def send_line(self, line: str) -> None:
        if self._proc.poll() is not None or self._proc.stdin is None:
            raise OracleError("adapter process exited")
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleError(f"adapter pipe closed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise OracleError(f"adapter response timed out after {timeout}s") from None
        if line is None:
            raise OracleError("adapter closed its output stream")
        return line

    def close(self) -> None:
        if self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class _TcpTransport:
    def __init__(self, address: tuple[str, int], timeout: float) -> None:
        try:
            self._sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise OracleError(f"cannot connect to adapter at {address}: {exc}") from exc
        # Reads go through a buffered reader, writes straight to the socket.
        # A single "rw" file object pairs one raw stream with itself and
        # drops buffered reply lines once pipelined requests interleave
        # with replies.
        self._file = self._sock.makefile("r", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self._sock.sendall((line + "\n").encode("utf-8"))
        except OSError as exc:
            raise OracleError(f"adapter connection lost: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        self._sock.settimeout(timeout)
        try:
            line = self._file.readline()
        except (socket.timeout, TimeoutError):
            raise OracleError(f"adapter response timed out after {timeout}s") from None
        if not line:
            raise OracleError("adapter closed the connection")
        return line

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass


class ProtocolClient:
    """Endpoint backed by the line-delimited JSON wire protocol.

    Volumes travel as container files referenced by ``tensor_uri``; requests
    are pipelined in batches and responses are matched back by ``id``, so
    adapters may answer out of order.
    """

    def __init__(self, spec: EndpointSpec) -> None:
        self.spec = spec
        self.endpoint_id = spec.endpoint_id
        if spec.transport == "subprocess-stdio":
            self._transport = _StdioTransport(spec.command)
        elif spec.transport == "tcp":
            if spec.address is None:
                raise ConfigError("tcp endpoint needs an address")
            self._transport = _TcpTransport(spec.address, spec.timeout)
        else:
            raise ConfigError(f"unknown transport {spec.transport!r}")
        self._tmp = tempfile.TemporaryDirectory(prefix="heatbench-oracle-")
        self._seq = 0
        info = self._handshake()
        self.n_classes = info["n_classes"]
        self.input_shape = info["input_shape"]
        self.modalities = info["modalities"]

    def _handshake(self) -> dict:
        self._transport.send_line(json.dumps({"op": "info"}))
        reply = self._read_json()
        for key in ("n_classes", "input_shape", "modalities"):
            if key not in reply:
                raise ProtocolError(f"handshake reply missing '{key}': {reply}")
        n_classes = int(reply["n_classes"])
        if n_classes < 2:
            raise ProtocolError(f"handshake declared n_classes={n_classes}")
        shape = tuple(int(s) for s in reply["input_shape"])
        modalities = tuple(str(m) for m in reply["modalities"])
        if shape and shape[0] != len(modalities):
            raise ProtocolError(
                f"handshake shape {shape} inconsistent with {len(modalities)} modalities")
        return {"n_classes": n_classes, "input_shape": shape, "modalities": modalities}

    def _read_json(self) -> dict:
        line = self._transport.recv_line(self.spec.timeout)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"adapter sent invalid JSON: {line!r}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError(f"adapter sent a non-object message: {line!r}")
        if "error" in msg:
            raise OracleError(f"adapter error: {msg['error']}")
        return msg

    def predict_one(self, volume: np.ndarray) -> np.ndarray:
        return self.score_batch([("adhoc", volume)])[0].probs

    def score_batch(self, cases: Sequence[tuple[str, np.ndarray]]) -> list[PredictionRecord]:
        spec = self.spec
        pending: dict[str, int] = {}           # wire id -> position
        sent_at: dict[str, float] = {}
        paths: dict[str, Path] = {}
        results: list[PredictionRecord | None] = [None] * len(cases)
        window = max(1, spec.batch_size * spec.max_in_flight)
        next_to_send = 0

        def drain_one() -> None:
            msg = self._read_json()
            if "id" not in msg or "probs" not in msg:
                raise ProtocolError(f"score reply missing id/probs: {msg}")
            wire_id = str(msg["id"])
            if wire_id not in pending:
                raise ProtocolError(f"adapter answered unknown id {wire_id!r}")
            pos = pending.pop(wire_id)
            latency = time.perf_counter() - sent_at.pop(wire_id)
            case_id = cases[pos][0]
            results[pos] = make_record(case_id, msg["probs"], self.n_classes,
                                       latency, who=f"case {case_id}")
            paths.pop(wire_id).unlink(missing_ok=True)

        while next_to_send < len(cases) or pending:
            while next_to_send < len(cases) and len(pending) < window:
                pos = next_to_send
                case_id, volume = cases[pos]
                if self.input_shape and tuple(volume.shape) != self.input_shape:
                    raise OracleError(
                        f"shape mismatch: endpoint expects {self.input_shape}, "
                        f"case {case_id} has {tuple(volume.shape)}")
                self._seq += 1
                wire_id = f"{self._seq}-{case_id}"
                path = Path(self._tmp.name) / f"{self._seq}.tns"
                write_tensor(path, volume)
                request = {"id": wire_id, "op": "score", "tensor_uri": str(path)}
                pending[wire_id] = pos
                paths[wire_id] = path
                sent_at[wire_id] = time.perf_counter()
                self._transport.send_line(json.dumps(request))
                next_to_send += 1
            drain_one()
        return [r for r in results if r is not None]

    def close(self) -> None:
        self._transport.close()
        self._tmp.cleanup()
