"""Container IO against hand-built bytes and the harness implementation."""

import json
import struct

import numpy as np
import pytest

from heatbench.tensorio import load_tensor as harness_load
from heatbench.tensorio import write_tensor as harness_write
from heatbench_adapter.container import read_tensor, write_tensor
from heatbench_adapter.errors import AdapterError


def _raw_container(shape, values, header: dict | None = None) -> bytes:
    if header is None:
        header = {"dtype": "float32", "endian": "LE", "layout": "C",
                  "shape": list(shape)}
    line = (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode()
    payload = struct.pack(f"<{len(values)}f", *values)
    return f"{len(line):08d}".encode() + line + payload


def test_reads_hand_built_bytes(tmp_path):
    path = tmp_path / "t.tns"
    path.write_bytes(_raw_container((2, 3), [1, 2, 3, 4, 5, 6]))
    arr = read_tensor(path)
    assert arr.dtype == np.float32
    assert arr.flags["C_CONTIGUOUS"] and arr.flags["WRITEABLE"]
    assert np.array_equal(arr, np.arange(1, 7, dtype=np.float32).reshape(2, 3))


def test_round_trip_preserves_bits(tmp_path):
    rng = np.random.default_rng(3)
    arr = rng.normal(size=(4, 5, 6)).astype(np.float32)
    write_tensor(tmp_path / "t.tns", arr)
    assert np.array_equal(read_tensor(tmp_path / "t.tns"), arr)


def test_writer_bytes_match_harness_writer(tmp_path):
    arr = np.linspace(-1.0, 1.0, 24, dtype=np.float32).reshape(2, 3, 4)
    write_tensor(tmp_path / "ours.tns", arr)
    harness_write(tmp_path / "theirs.tns", arr)
    assert (tmp_path / "ours.tns").read_bytes() == (tmp_path / "theirs.tns").read_bytes()


def test_reader_accepts_harness_writer_output(tmp_path):
    rng = np.random.default_rng(11)
    arr = rng.normal(size=(3, 7)).astype(np.float32)
    harness_write(tmp_path / "t.tns", arr)
    assert np.array_equal(read_tensor(tmp_path / "t.tns"), arr)


def test_harness_reader_accepts_our_output(tmp_path):
    rng = np.random.default_rng(12)
    arr = rng.normal(size=(2, 4, 4)).astype(np.float32)
    write_tensor(tmp_path / "t.tns", arr)
    assert np.array_equal(harness_load(tmp_path / "t.tns"), arr)


def test_missing_file_is_an_adapter_error(tmp_path):
    with pytest.raises(AdapterError, match="cannot read tensor"):
        read_tensor(tmp_path / "absent.tns")


def test_short_file_rejected(tmp_path):
    path = tmp_path / "t.tns"
    path.write_bytes(b"0004")
    with pytest.raises(AdapterError, match="too short"):
        read_tensor(path)


def test_non_numeric_prefix_rejected(tmp_path):
    path = tmp_path / "t.tns"
    path.write_bytes(b"badbytes" + b"{}" * 20)
    with pytest.raises(AdapterError, match="not numeric"):
        read_tensor(path)


def test_truncated_header_rejected(tmp_path):
    path = tmp_path / "t.tns"
    path.write_bytes(b"00000099" + b'{"dtype"')
    with pytest.raises(AdapterError, match="truncated header"):
        read_tensor(path)


def test_non_object_header_rejected(tmp_path):
    path = tmp_path / "t.tns"
    line = b'[1,2,3]\n'
    path.write_bytes(f"{len(line):08d}".encode() + line)
    with pytest.raises(AdapterError, match="not a JSON object"):
        read_tensor(path)


def test_missing_header_key_rejected(tmp_path):
    path = tmp_path / "t.tns"
    blob = _raw_container((1,), [0.0], header={"dtype": "float32", "shape": [1],
                                               "layout": "C"})
    path.write_bytes(blob)
    with pytest.raises(AdapterError, match="header missing.*endian"):
        read_tensor(path)


def test_wrong_dtype_rejected(tmp_path):
    path = tmp_path / "t.tns"
    blob = _raw_container((1,), [0.0], header={"dtype": "float64", "endian": "LE",
                                               "layout": "C", "shape": [1]})
    path.write_bytes(blob)
    with pytest.raises(AdapterError, match="only float32/C/LE"):
        read_tensor(path)


def test_negative_dimension_rejected(tmp_path):
    path = tmp_path / "t.tns"
    blob = _raw_container((1,), [0.0], header={"dtype": "float32", "endian": "LE",
                                               "layout": "C", "shape": [-1]})
    path.write_bytes(blob)
    with pytest.raises(AdapterError, match="negative dimension"):
        read_tensor(path)


def test_payload_size_mismatch_rejected(tmp_path):
    path = tmp_path / "t.tns"
    path.write_bytes(_raw_container((2, 2), [1.0, 2.0, 3.0]))
    with pytest.raises(AdapterError, match="expected 16 payload bytes, found 12"):
        read_tensor(path)


def test_non_finite_payload_rejected(tmp_path):
    path = tmp_path / "t.tns"
    path.write_bytes(_raw_container((2,), [1.0, float("inf")]))
    with pytest.raises(AdapterError, match="non-finite"):
        read_tensor(path)
