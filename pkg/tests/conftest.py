import numpy as np
import pytest

from heatbench.tensorio import write_manifest, write_tensor


def build_dataset(root, n_cases=4, shape=(2, 4, 4), methods=("grad", "occ"),
                  modalities=None, with_masks=True, ratings=None,
                  rating_scale=None, task_metric="accuracy", gen_seconds=None,
                  seed=0):
    """Write a small but complete dataset; returns the manifest path.

    Heatmaps are positive random fields, masks mark a fixed corner block,
    labels alternate. ``ratings`` maps case index -> {rater: value}.
    """
    rng = np.random.default_rng(seed)
    modalities = modalities or [f"m{i}" for i in range(shape[0])]
    cases = []
    for i in range(n_cases):
        case_id = f"c{i:03d}"
        volume = rng.normal(size=shape).astype(np.float32)
        write_tensor(root / "volumes" / f"{case_id}.tns", volume)
        entry = {
            "id": case_id,
            "label": i % 2,
            "volume": f"volumes/{case_id}.tns",
            "heatmaps": {},
        }
        if with_masks:
            mask = np.zeros(shape, dtype=np.float32)
            mask[..., :2, :2] = 1.0
            write_tensor(root / "masks" / f"{case_id}.tns", mask)
            entry["mask"] = f"masks/{case_id}.tns"
        for method in methods:
            hm = rng.random(shape).astype(np.float32)
            uri = f"heatmaps/{method}/{case_id}.tns"
            write_tensor(root / uri, hm)
            if gen_seconds is not None:
                entry["heatmaps"][method] = {"uri": uri,
                                             "gen_seconds": gen_seconds + i}
            else:
                entry["heatmaps"][method] = uri
        if ratings and i in ratings:
            entry["ratings"] = ratings[i]
        cases.append(entry)
    doc = {
        "schema_version": 1,
        "name": "unit-fixture",
        "n_classes": 2,
        "modalities": list(modalities),
        "task_metric": task_metric,
        "cases": cases,
    }
    if rating_scale is not None:
        doc["rating_scale"] = list(rating_scale)
    return write_manifest(root / "manifest.yaml", doc)


class CountingOracle:
    """Glass-box wrapper that counts every scoring call it serves."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.n_classes = inner.n_classes
        self.input_shape = inner.input_shape
        self.modalities = inner.modalities
        self.endpoint_id = inner.endpoint_id

    def predict_one(self, volume):
        self.calls += 1
        return self.inner.predict_one(volume)

    def close(self):
        self.inner.close()


@pytest.fixture
def tiny_manifest(tmp_path):
    return build_dataset(tmp_path)
