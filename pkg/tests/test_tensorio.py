import numpy as np
import pytest

from heatbench.errors import ConfigError
from heatbench.tensorio import (HEADER_LEN_DIGITS, load_manifest, load_tensor,
                                write_manifest, write_tensor)

from conftest import build_dataset


def test_round_trip_preserves_values_and_shape(tmp_path):
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4) / 7.0
    path = write_tensor(tmp_path / "a.tns", arr)
    back = load_tensor(path)
    assert back.dtype == np.float32
    assert back.shape == (2, 3, 4)
    np.testing.assert_array_equal(back, arr)


def test_rewrite_is_byte_identical(tmp_path):
    arr = np.random.default_rng(1).normal(size=(3, 5)).astype(np.float32)
    p1 = write_tensor(tmp_path / "a.tns", arr)
    p2 = write_tensor(tmp_path / "b.tns", load_tensor(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_float64_input_is_narrowed_to_float32(tmp_path):
    arr = np.array([1.0 + 1e-12], dtype=np.float64)
    back = load_tensor(write_tensor(tmp_path / "a.tns", arr))
    assert back.dtype == np.float32
    assert back[0] == np.float32(1.0 + 1e-12)


def test_single_element_and_empty_tensors(tmp_path):
    one = np.array([3.5], dtype=np.float32)
    assert load_tensor(write_tensor(tmp_path / "s.tns", one)).shape == (1,)
    empty = np.zeros((0, 4), dtype=np.float32)
    assert load_tensor(write_tensor(tmp_path / "e.tns", empty)).shape == (0, 4)


def test_header_is_canonical_json_line(tmp_path):
    path = write_tensor(tmp_path / "a.tns", np.zeros((2, 2), dtype=np.float32))
    blob = path.read_bytes()
    header_len = int(blob[:HEADER_LEN_DIGITS])
    header = blob[HEADER_LEN_DIGITS:HEADER_LEN_DIGITS + header_len]
    assert header == b'{"dtype":"float32","endian":"LE","layout":"C","shape":[2,2]}\n'


@pytest.mark.parametrize("mutate,msg", [
    (lambda b: b[:4], "too short"),
    (lambda b: b"ABCDEFGH" + b[8:], "bad length prefix"),
    (lambda b: b[:8] + b"{", "truncated header"),
    (lambda b: b[:12], "truncated header"),
])
def test_malformed_headers_are_rejected(tmp_path, mutate, msg):
    path = write_tensor(tmp_path / "a.tns", np.ones((2, 2), dtype=np.float32))
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(ConfigError, match=msg):
        load_tensor(path)


def test_byte_count_mismatch_is_rejected(tmp_path):
    path = write_tensor(tmp_path / "a.tns", np.ones((2, 2), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ConfigError, match="byte-count mismatch"):
        load_tensor(path)


def test_unsupported_dtype_is_rejected(tmp_path):
    header = b'{"dtype":"float64","endian":"LE","layout":"C","shape":[1]}\n'
    blob = f"{len(header):08d}".encode() + header + b"\x00" * 8
    path = tmp_path / "a.tns"
    path.write_bytes(blob)
    with pytest.raises(ConfigError, match="unsupported dtype"):
        load_tensor(path)


def test_non_finite_policy(tmp_path):
    arr = np.array([1.0, np.nan], dtype=np.float32)
    path = write_tensor(tmp_path / "a.tns", arr)
    with pytest.raises(ConfigError, match="non-finite"):
        load_tensor(path)
    back = load_tensor(path, require_finite=False)
    assert np.isnan(back[1])


def test_error_context_prefix(tmp_path):
    with pytest.raises(ConfigError, match="case c7 volume"):
        load_tensor(tmp_path / "missing.tns", context="case c7 volume")


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def test_manifest_round_trip(tmp_path):
    path = build_dataset(tmp_path, n_cases=3, gen_seconds=0.5,
                         ratings={0: {"r1": 2, "r2": 3}},
                         rating_scale=[1, 2, 3, 4, 5])
    manifest = load_manifest(path)
    assert manifest.name == "unit-fixture"
    assert manifest.n_classes == 2
    assert manifest.methods() == ("grad", "occ")
    assert len(manifest.cases) == 3
    assert manifest.rating_scale == [1.0, 2.0, 3.0, 4.0, 5.0]
    case = manifest.cases[0]
    assert case.heatmaps["grad"].gen_seconds == 0.5
    assert manifest.cases[1].heatmaps["grad"].gen_seconds == 1.5
    assert case.ratings == {"r1": 2.0, "r2": 3.0}
    vol = manifest.load_volume(case)
    assert vol.data.shape == (2, 4, 4)


def test_mask_is_binarized_on_load(tmp_path):
    path = build_dataset(tmp_path, n_cases=1)
    manifest = load_manifest(path)
    raw = np.array([[[0.0, 2.0], [-1.0, 0.5]]], dtype=np.float32)
    write_tensor(tmp_path / "masks" / "c000.tns", raw)
    mask = manifest.load_mask(manifest.cases[0]).data
    np.testing.assert_array_equal(mask, [[[0, 1], [0, 1]]])


def test_missing_heatmap_error_names_case_and_method(tmp_path):
    path = build_dataset(tmp_path, n_cases=1)
    manifest = load_manifest(path)
    (tmp_path / "heatmaps/grad/c000.tns").unlink()
    with pytest.raises(ConfigError) as err:
        manifest.load_heatmap(manifest.cases[0], "grad")
    assert "c000" in str(err.value) and "grad" in str(err.value)
    with pytest.raises(ConfigError, match="no heatmap for method 'lime'"):
        manifest.load_heatmap(manifest.cases[0], "lime")


def test_non_finite_heatmap_is_rejected_with_names(tmp_path):
    path = build_dataset(tmp_path, n_cases=1)
    manifest = load_manifest(path)
    bad = np.full((2, 4, 4), np.inf, dtype=np.float32)
    write_tensor(tmp_path / "heatmaps/grad/c000.tns", bad)
    with pytest.raises(ConfigError) as err:
        manifest.load_heatmap(manifest.cases[0], "grad")
    msg = str(err.value)
    assert "c000" in msg and "grad" in msg and "non-finite" in msg


def test_methods_is_intersection_across_cases(tmp_path):
    path = build_dataset(tmp_path, n_cases=2)
    import yaml
    doc = yaml.safe_load(path.read_text())
    del doc["cases"][1]["heatmaps"]["occ"]
    write_manifest(path, doc)
    assert load_manifest(path).methods() == ("grad",)


def test_unknown_manifest_keys_are_tolerated(tmp_path):
    path = build_dataset(tmp_path, n_cases=1)
    import yaml
    doc = yaml.safe_load(path.read_text())
    doc["generator"] = {"tool": "x", "version": 3}
    doc["cases"][0]["extra_note"] = "kept"
    write_manifest(path, doc)
    assert load_manifest(path).cases[0].case_id == "c000"


@pytest.mark.parametrize("corrupt,msg", [
    (lambda d: d.pop("n_classes"), "missing required field 'n_classes'"),
    (lambda d: d.update(schema_version=99), "unsupported schema_version"),
    (lambda d: d.update(n_classes=1), "n_classes must be >= 2"),
    (lambda d: d.update(modalities=["a", "a"]), "unique"),
    (lambda d: d.update(task_metric="f1"), "task_metric"),
    (lambda d: d.update(rating_scale=[3, 1]), "ascending"),
    (lambda d: d["cases"][0].update(label=5), "out of range"),
    (lambda d: d["cases"][0].pop("volume"), "missing 'volume'"),
    (lambda d: d.update(cases=[]), "no cases"),
    (lambda d: d.update(cases=d["cases"] + d["cases"]), "duplicate case id"),
])
def test_manifest_validation_errors(tmp_path, corrupt, msg):
    path = build_dataset(tmp_path, n_cases=1)
    import yaml
    doc = yaml.safe_load(path.read_text())
    corrupt(doc)
    write_manifest(path, doc)
    with pytest.raises(ConfigError, match=msg):
        load_manifest(path)


def test_volume_modality_mismatch(tmp_path):
    path = build_dataset(tmp_path, n_cases=1, shape=(3, 4, 4),
                         modalities=["a", "b", "c"])
    manifest = load_manifest(path)
    write_tensor(tmp_path / "volumes" / "c000.tns",
                 np.zeros((2, 4, 4), dtype=np.float32))
    with pytest.raises(ConfigError, match="does not match"):
        manifest.load_volume(manifest.cases[0])
