"""Acceptance gate for the adapter: one test and one verdict line per guarantee.

Run with ``pytest -s`` to see the checklist. The conformance test drives the
adapter through the harness's own protocol client, so the two packages are
exercised end to end with no shared code between their wire or container
implementations.
"""

import sys
import time

import numpy as np

from adapter_helpers import LineClient, make_linear_artifact
from heatbench.oracle import EndpointSpec, GlassboxLinearOracle, ProtocolClient, score
from heatbench_adapter.container import write_tensor


def _verdict(capsys, name: str, problems: list[str], detail: str = "") -> None:
    ok = not problems
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    with capsys.disabled():
        print(line)
    assert ok, f"{name}: " + "; ".join(problems)


def test_wire_replies_conform_to_schema(tmp_path, capsys):
    problems = []
    artifact = make_linear_artifact(tmp_path, np.ones((2, 3, 3)),
                                    modalities=["T1", "T2"])
    client = LineClient("serve", "--model", str(artifact), "--transport", "stdio")
    try:
        client.send({"op": "info"})
        info = client.recv()
        if set(info) != {"n_classes", "input_shape", "modalities"}:
            problems.append(f"handshake fields {sorted(info)}")
        if not isinstance(info.get("n_classes"), int) or info["n_classes"] < 2:
            problems.append(f"n_classes {info.get('n_classes')!r}")
        if info.get("input_shape") != [2, 3, 3]:
            problems.append(f"input_shape {info.get('input_shape')!r}")
        if info.get("modalities") != ["T1", "T2"]:
            problems.append(f"modalities {info.get('modalities')!r}")

        path = write_tensor(tmp_path / "x.tns", np.zeros((2, 3, 3), dtype=np.float32))
        client.send({"id": "s1", "op": "score", "tensor_uri": str(path)})
        reply = client.recv()
        if set(reply) != {"id", "probs"}:
            problems.append(f"score reply fields {sorted(reply)}")
        if reply.get("id") != "s1":
            problems.append(f"score reply id {reply.get('id')!r}")
        probs = reply.get("probs", [])
        if len(probs) != 2 or not all(isinstance(p, float) for p in probs):
            problems.append(f"probs {probs!r}")
        elif abs(sum(probs) - 1.0) > 1e-9 or min(probs) < 0.0:
            problems.append(f"probs not a distribution: {probs!r}")

        client.send({"id": "s2", "op": "explode"})
        err = client.recv()
        if set(err) != {"id", "error"} or err.get("id") != "s2":
            problems.append(f"error reply fields {sorted(err)}")
    finally:
        client.close()
    _verdict(capsys, "replies carry exactly the documented fields", problems)


def test_stub_matches_glassbox_linear_oracle(tmp_path, capsys):
    rng = np.random.default_rng(31)
    shape = (3, 6, 5)
    weights64 = rng.normal(size=shape)
    bias = 0.25
    artifact = make_linear_artifact(tmp_path, weights64, bias=bias)
    # both sides must see the container's float32 rendering of the weights
    weights = weights64.astype(np.float32)
    reference = GlassboxLinearOracle(weights, bias=bias)

    cases = [(f"c{i:03d}", rng.normal(size=shape).astype(np.float32))
             for i in range(100)]
    start = time.perf_counter()
    client = ProtocolClient(EndpointSpec(
        transport="subprocess-stdio",
        command=(sys.executable, "-m", "heatbench_adapter", "serve",
                 "--model", str(artifact), "--transport", "stdio")))
    try:
        records = score(client, cases)
    finally:
        client.close()
    elapsed = time.perf_counter() - start

    problems = []
    if len(records) != 100:
        problems.append(f"{len(records)} records for 100 cases")
    dev = 0.0
    for record, (case_id, volume) in zip(records, cases):
        if record.case_id != case_id:
            problems.append(f"record order broke at {case_id}")
            break
        dev = max(dev, float(np.max(np.abs(record.probs - reference.predict_one(volume)))))
    if not dev < 1e-6:
        problems.append(f"max probability deviation {dev:.3e} >= 1e-6")
    _verdict(capsys, "stub adapter matches the glass-box linear oracle", problems,
             f"max |dp| {dev:.2e} over 100 volumes, {elapsed:.1f}s")


def test_malformed_requests_do_not_kill_the_server(tmp_path, capsys):
    problems = []
    client = LineClient("serve", "--model", "stub", "--transport", "stdio")
    try:
        client.send("}{ definitely not json")
        reply = client.recv()
        if "error" not in reply:
            problems.append(f"garbage line got {reply!r}")
        if "id" in reply:
            problems.append("unattributable garbage was answered with an id")

        client.send({"id": "m1", "op": "score",
                     "tensor_uri": str(tmp_path / "never-written.tns")})
        reply = client.recv()
        if reply.get("id") != "m1" or "error" not in reply:
            problems.append(f"unreadable tensor got {reply!r}")

        client.send({"id": "m2", "op": "meditate"})
        reply = client.recv()
        if reply.get("id") != "m2" or "error" not in reply:
            problems.append(f"unknown op got {reply!r}")

        path = write_tensor(tmp_path / "ok.tns", np.zeros((2, 2, 2), dtype=np.float32))
        client.send({"id": "m3", "op": "score", "tensor_uri": str(path)})
        reply = client.recv()
        if reply != {"id": "m3", "probs": [0.5, 0.5]}:
            problems.append(f"valid request after failures got {reply!r}")
        if not client.alive():
            problems.append("server process exited")
    finally:
        client.close()
    _verdict(capsys, "malformed requests are answered and the server survives",
             problems)
