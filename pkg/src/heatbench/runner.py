"""Run orchestration: config resolution, dependency order, failure isolation.

A run loads the manifest, connects endpoints, then executes the enabled
metric families in dependency order: postprocessing first, Shapley modality
importance before MSFI, informativeness after plausibility. Per-method
failures are isolated (the method is reported as failed, the run continues);
endpoint or manifest failures abort.

The resulting report is a plain dict of JSON-safe values, deterministic for
a fixed config+seed and deterministic endpoints, except for the "timings"
section.
"""

from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, HeatbenchError, OracleError, UndefinedStatisticError
from .faithfulness import (Case, DEFAULT_REPEATS, diff_auc, random_baseline,
                           removal_curve)
from .heatmaps import DEFAULT_SCHEDULE, POSTPROCESS_MODES, postprocess, validate_schedule
from .modality import mi_correlation, modality_importance
from .oracle import (CachingOracle, EndpointSpec, FILL_STRATEGIES,
                     GlassboxLinearOracle, ModalityGatedOracle, ProtocolClient,
                     performance, score)
from .plausibility import feature_portion, normalize_mi, score_cases
from .stats import fleiss_kappa, informativeness_test, krippendorff_alpha
from .tensorio import DatasetManifest, load_manifest, load_tensor

METRIC_NAMES = ("faithfulness", "shapley", "plausibility", "informativeness",
                "agreement")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    manifest: str
    oracles: list[Any] = field(default_factory=list)
    methods: list[str] | None = None
    metrics: dict[str, bool] = field(default_factory=lambda: {m: True for m in METRIC_NAMES})
    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    postprocess: str = "positive-clip"
    fill: str = "zero"
    seed: int | None = None
    baseline_repeats: int = DEFAULT_REPEATS
    modality_importance: list[float] | None = None
    agreement_level: str = "ordinal"
    timing: bool = True
    out: str | None = None
    formats: tuple[str, ...] = ("json", "csv", "markdown", "svg")

    def validate(self) -> None:
        unknown = set(self.metrics) - set(METRIC_NAMES)
        if unknown:
            raise ConfigError(f"unknown metric toggles: {sorted(unknown)}")
        if not any(self.metrics.get(m) for m in METRIC_NAMES):
            raise ConfigError("at least one metric must be enabled")
        if self.postprocess not in POSTPROCESS_MODES:
            raise ConfigError(f"unknown postprocess mode {self.postprocess!r}")
        if self.fill not in FILL_STRATEGIES:
            raise ConfigError(f"unknown fill strategy {self.fill!r}")
        if self.agreement_level not in ("ordinal", "interval"):
            raise ConfigError(f"unknown agreement level {self.agreement_level!r}")
        validate_schedule(self.schedule)
        if self.metrics.get("faithfulness") and self.seed is None:
            raise ConfigError("seed is mandatory when faithfulness is enabled")
        if self.baseline_repeats < 2:
            raise ConfigError("baseline_repeats must be >= 2")

    def semantic_dict(self) -> dict:
        """The fields that influence results (hashed into provenance)."""
        return {
            "manifest": self.manifest,
            "oracles": self.oracles,
            "methods": self.methods,
            "metrics": {m: bool(self.metrics.get(m)) for m in METRIC_NAMES},
            "schedule": list(self.schedule),
            "postprocess": self.postprocess,
            "fill": self.fill,
            "seed": self.seed,
            "baseline_repeats": self.baseline_repeats,
            "modality_importance": self.modality_importance,
            "agreement_level": self.agreement_level,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def load_run_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None
                    ) -> RunConfig:
    """Build a RunConfig from an optional YAML file plus CLI overrides."""
    doc: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, Mapping):
            raise ConfigError(f"config {path}: top level must be a mapping")
        doc = dict(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value

    if "manifest" not in doc:
        raise ConfigError("config needs a 'manifest' entry")
    oracles = doc.get("oracle", doc.get("oracles", []))
    if isinstance(oracles, (str, Mapping)):
        oracles = [oracles]

    metrics = {m: True for m in METRIC_NAMES}
    if "metrics" in doc:
        if not isinstance(doc["metrics"], Mapping):
            raise ConfigError("'metrics' must map metric names to booleans")
        metrics = {m: bool(v) for m, v in doc["metrics"].items()}

    schedule = doc.get("schedule", DEFAULT_SCHEDULE)
    phi = doc.get("modality_importance")
    if phi is not None:
        phi = [float(v) for v in phi]

    config = RunConfig(
        manifest=str(doc["manifest"]),
        oracles=list(oracles),
        methods=[str(m) for m in doc["methods"]] if doc.get("methods") else None,
        metrics=metrics,
        schedule=tuple(float(q) for q in schedule),
        postprocess=str(doc.get("postprocess", "positive-clip")),
        fill=str(doc.get("fill", "zero")),
        seed=int(doc["seed"]) if doc.get("seed") is not None else None,
        baseline_repeats=int(doc.get("baseline_repeats", DEFAULT_REPEATS)),
        modality_importance=phi,
        agreement_level=str(doc.get("agreement_level", "ordinal")),
        timing=bool(doc.get("timing", True)),
        out=str(doc["out"]) if doc.get("out") else None,
        formats=tuple(doc.get("formats", ("json", "csv", "markdown", "svg"))),
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------
# endpoint construction
# ---------------------------------------------------------------------------

def _builtin_oracle(kind: str, params: Mapping[str, Any], manifest: DatasetManifest,
                    root: Path):
    if kind == "modality-gated":
        disc = str(params.get("discriminative", "T1C"))
        return ModalityGatedOracle(manifest.modalities, disc)
    if kind == "linear":
        if "weights" not in params:
            raise ConfigError("builtin linear oracle needs a 'weights' container URI")
        wpath = Path(str(params["weights"]))
        if not wpath.is_absolute():
            wpath = root / wpath
        weights = load_tensor(wpath, context="linear oracle weights")
        return GlassboxLinearOracle(weights, float(params.get("bias", 0.0)),
                                    modalities=manifest.modalities)
    raise ConfigError(f"unknown builtin oracle {kind!r}")


def build_endpoint(spec: Any, manifest: DatasetManifest, root: Path):
    """Construct one endpoint from its config entry (string or mapping)."""
    if isinstance(spec, str):
        if spec.startswith("builtin:"):
            parts = spec.split(":")
            kind = parts[1] if len(parts) > 1 else ""
            params: dict[str, Any] = {}
            if kind == "modality-gated" and len(parts) > 2:
                params["discriminative"] = parts[2]
            if kind == "linear":
                if len(parts) > 2:
                    params["weights"] = parts[2]
                if len(parts) > 3:
                    params["bias"] = float(parts[3])
            return _builtin_oracle(kind, params, manifest, root)
        if spec.startswith("cmd:"):
            return ProtocolClient(EndpointSpec(
                transport="subprocess-stdio", command=tuple(spec[4:].split())))
        if spec.startswith("tcp:"):
            host, _, port = spec[4:].rpartition(":")
            if not host or not port.isdigit():
                raise ConfigError(f"bad tcp endpoint {spec!r}; expected tcp:HOST:PORT")
            return ProtocolClient(EndpointSpec(
                transport="tcp", address=(host, int(port))))
        raise ConfigError(f"unrecognized oracle spec {spec!r}")
    if isinstance(spec, Mapping):
        if "builtin" in spec:
            return _builtin_oracle(str(spec["builtin"]), spec, manifest, root)
        common = {
            "batch_size": int(spec.get("batch_size", 8)),
            "max_in_flight": int(spec.get("max_in_flight", 2)),
            "timeout": float(spec.get("timeout", 30.0)),
        }
        if "command" in spec:
            cmd = spec["command"]
            command = tuple(cmd.split()) if isinstance(cmd, str) else tuple(map(str, cmd))
            return ProtocolClient(EndpointSpec(
                transport="subprocess-stdio", command=command, **common))
        if "tcp" in spec:
            host, _, port = str(spec["tcp"]).rpartition(":")
            return ProtocolClient(EndpointSpec(
                transport="tcp", address=(host, int(port)), **common))
        raise ConfigError(f"oracle mapping needs 'builtin', 'command' or 'tcp': {dict(spec)}")
    raise ConfigError(f"cannot interpret oracle spec {spec!r}")


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------

class StageTimer:
    """Monotonic wall-clock accounting per named stage."""

    def __init__(self, enabled: bool = True) -> None:
        self.enabled = enabled
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, label: str):
        start = time.monotonic()
        try:
            yield
        finally:
            if self.enabled:
                self.stages[label] = self.stages.get(label, 0.0) + (time.monotonic() - start)

    def time_stage(self, label: str, work):
        """Run ``work()`` under the timer; returns its result."""
        with self.stage(label):
            return work()


# ---------------------------------------------------------------------------
# aggregation helpers
# ---------------------------------------------------------------------------

def aggregate(values) -> dict[str, Any]:
    """mean/std/n summary; None entries count as undefined, never as zero."""
    vals = [v for v in values if v is not None]
    n_undefined = len(list(values)) - len(vals)
    out: dict[str, Any] = {"n": len(vals), "n_undefined": n_undefined}
    if not vals:
        out["mean"] = None
        out["std"] = None
        return out
    arr = np.asarray(vals, dtype=np.float64)
    out["mean"] = float(arr.mean())
    out["std"] = float(arr.std(ddof=1)) if len(vals) > 1 else None
    return out


def _subset_key(subset: frozenset[int], modalities: tuple[str, ...]) -> list[str]:
    return [modalities[i] for i in sorted(subset)]


# ---------------------------------------------------------------------------
# the run itself
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    report: dict
    failures: dict[str, str]

    @property
    def fully_succeeded(self) -> bool:
        return not self.failures


def _needs_oracle(config: RunConfig, phi_supplied: bool) -> bool:
    m = config.metrics
    if m.get("faithfulness") or m.get("shapley") or m.get("informativeness"):
        return True
    if m.get("plausibility") and not phi_supplied:
        return True  # MSFI needs Shapley phi
    return False


def run(config: RunConfig) -> RunResult:
    config.validate()
    timer = StageTimer(config.timing)
    failures: dict[str, HeatbenchError] = {}

    with timer.stage("setup"):
        manifest = load_manifest(config.manifest)
        manifest_hash = hashlib.sha256(
            Path(config.manifest).read_bytes()).hexdigest()
        methods = list(config.methods) if config.methods else list(manifest.methods())
        method_dependent = any(config.metrics.get(m) for m in
                               ("faithfulness", "plausibility", "informativeness"))
        if not methods and method_dependent:
            raise ConfigError("no heatmap methods to evaluate (empty method list)")
        missing = [m for m in methods if m not in manifest.methods()]
        if missing:
            raise ConfigError(
                f"methods not present on every case: {missing}; "
                f"available: {list(manifest.methods())}")
        metric = manifest.task_metric
        labels = [c.label for c in manifest.cases]

    phi_supplied = config.modality_importance is not None
    if phi_supplied and len(config.modality_importance) != len(manifest.modalities):
        raise ConfigError(
            f"modality_importance has {len(config.modality_importance)} entries, "
            f"manifest declares {len(manifest.modalities)} modalities")

    endpoints = []
    cases: list[Case] = []
    if _needs_oracle(config, phi_supplied):
        if not config.oracles:
            raise ConfigError("an oracle endpoint is required for the enabled metrics")
        with timer.stage("load-volumes"):
            cases = [Case(c.case_id,
                          manifest.load_volume(c).data.astype(np.float64), c.label)
                     for c in manifest.cases]
        with timer.stage("connect-endpoints"):
            for spec in config.oracles:
                inner = build_endpoint(spec, manifest, manifest.root)
                endpoints.append(CachingOracle(inner))
        for ep in endpoints:
            if ep.input_shape and tuple(cases[0].volume.shape) != tuple(ep.input_shape):
                raise OracleError(
                    f"endpoint {ep.endpoint_id} expects input shape "
                    f"{tuple(ep.input_shape)}, dataset has {tuple(cases[0].volume.shape)}")

    report: dict[str, Any] = {
        "schema_version": 1,
        "provenance": {
            "config_hash": config.config_hash(),
            "manifest_hash": manifest_hash,
            "seed": config.seed,
            "package_version": __version__,
        },
        "context": {
            "dataset": manifest.name,
            "task_metric": metric,
            "modalities": list(manifest.modalities),
            "n_cases": len(manifest.cases),
            "n_classes": manifest.n_classes,
            "methods": methods,
            "endpoints": [ep.endpoint_id for ep in endpoints],
            "postprocess": config.postprocess,
            "fill": config.fill,
            "schedule": list(config.schedule),
            "baseline_repeats": config.baseline_repeats,
            "phi_source": "config" if phi_supplied else "shapley",
            "agreement_level": config.agreement_level,
        },
    }

    try:
        _run_metrics(config, manifest, cases, labels, metric, endpoints,
                     methods, phi_supplied, report, failures, timer)
    finally:
        for ep in endpoints:
            ep.close()

    if config.timing:
        per_case = {}
        for ep in endpoints:
            per_case[ep.endpoint_id] = {"score_requests": ep.requests,
                                        "unique_scores": ep.misses}
        report["timings"] = {"stages": {k: v for k, v in timer.stages.items()},
                             "per_endpoint": per_case}

    if methods and failures and len(failures) == len(methods):
        # All-methods failure: nothing useful was produced. Surface it as an
        # oracle problem when any method died on the endpoint.
        first = next(iter(failures.values()))
        if any(isinstance(exc, OracleError) for exc in failures.values()):
            raise OracleError(f"all methods failed; first error: {first}")
        raise HeatbenchError(f"all methods failed; first error: {first}")

    return RunResult(report=report,
                     failures={m: str(exc) for m, exc in failures.items()})


def _run_metrics(config: RunConfig, manifest: DatasetManifest, cases, labels,
                 metric: str, endpoints, methods, phi_supplied: bool,
                 report: dict, failures: dict[str, HeatbenchError],
                 timer: StageTimer) -> None:
    m_toggle = config.metrics
    expected_shape = tuple(cases[0].volume.shape) if cases else None

    # Predictions on unablated volumes: dataset performance, correctness and
    # confidence per case (informativeness).
    predictions: dict[str, list] = {}
    if endpoints:
        with timer.stage("baseline-predictions"):
            report["endpoints"] = []
            for ep in endpoints:
                records = score(ep, [(c.case_id, c.volume) for c in cases])
                predictions[ep.endpoint_id] = records
                report["endpoints"].append({
                    "id": ep.endpoint_id,
                    "performance": performance(records, labels, metric),
                    "n_cases": len(cases),
                })

    # Ground-truth modality importance: supplied or computed per endpoint.
    phi_by_source: dict[str, np.ndarray] = {}
    if phi_supplied:
        phi_by_source["config"] = np.asarray(config.modality_importance, dtype=np.float64)
        report["modality_importance"] = {
            "supplied_phi": [float(v) for v in config.modality_importance],
            "per_endpoint": [],
        }
    need_phi = (m_toggle.get("plausibility") or m_toggle.get("informativeness")
                or m_toggle.get("shapley"))
    if not phi_supplied and need_phi:
        with timer.stage("shapley"):
            per_endpoint = []
            for ep in endpoints:
                mi = modality_importance(ep, cases, manifest.modalities, metric,
                                         config.fill)
                phi_by_source[ep.endpoint_id] = mi.phi
                entry = {
                    "endpoint": ep.endpoint_id,
                    "phi": [float(v) for v in mi.phi],
                    "v_table": [
                        {"subset": _subset_key(s, manifest.modalities),
                         "performance": float(v)}
                        for s, v in sorted(mi.v_table.items(),
                                           key=lambda kv: (len(kv[0]), sorted(kv[0])))
                    ],
                }
                try:
                    entry["phi_normalized"] = [float(v) for v in normalize_mi(mi.phi)]
                except UndefinedStatisticError as exc:
                    entry["phi_normalized"] = None
                    entry["phi_note"] = str(exc)
                per_endpoint.append(entry)
            report["modality_importance"] = {"supplied_phi": None,
                                             "per_endpoint": per_endpoint}

    # Normalized phi per source (for MSFI); sources with no positive modality
    # are recorded and skipped.
    phi_norm_by_source: dict[str, np.ndarray] = {}
    phi_norm_notes: dict[str, str] = {}
    for source, phi in phi_by_source.items():
        try:
            phi_norm_by_source[source] = normalize_mi(phi)
        except UndefinedStatisticError as exc:
            phi_norm_notes[source] = str(exc)

    # Shared random baseline per endpoint (method-independent).
    baselines = {}
    if m_toggle.get("faithfulness"):
        with timer.stage("random-baseline"):
            for ep in endpoints:
                baselines[ep.endpoint_id] = random_baseline(
                    ep, cases, config.schedule, metric, seed=int(config.seed),
                    repeats=config.baseline_repeats, fill=config.fill)

    masked_records = manifest.cases_with_masks() if m_toggle.get("plausibility") \
        or m_toggle.get("informativeness") else []
    masks = {rec.case_id: manifest.load_mask(rec).data for rec in masked_records}

    report["methods"] = {}
    for method in methods:
        with timer.stage(f"method:{method}"):
            try:
                report["methods"][method] = _evaluate_method(
                    method, config, manifest, cases, expected_shape, labels,
                    metric, endpoints, predictions, phi_by_source,
                    phi_norm_by_source, phi_norm_notes, baselines, masks)
            except HeatbenchError as exc:
                failures[method] = exc
                report["methods"][method] = {"status": "failed", "error": str(exc)}

    if m_toggle.get("agreement"):
        with timer.stage("agreement"):
            report["agreement"] = _agreement_block(manifest, config.agreement_level)


def _evaluate_method(method: str, config: RunConfig, manifest: DatasetManifest,
                     cases, expected_shape, labels, metric, endpoints,
                     predictions, phi_by_source, phi_norm_by_source,
                     phi_norm_notes, baselines, masks) -> dict:
    m_toggle = config.metrics
    block: dict[str, Any] = {"status": "ok"}

    heatmaps: dict[str, np.ndarray] = {}
    raw_gen_seconds = []
    for rec in manifest.cases:
        hm = manifest.load_heatmap(rec, method)
        shape = expected_shape or (next(iter(heatmaps.values())).shape
                                   if heatmaps else hm.data.shape)
        if hm.data.shape != tuple(shape):
            raise ConfigError(
                f"case {rec.case_id} heatmap {method!r}: shape {hm.data.shape} "
                f"does not match expected {tuple(shape)}")
        heatmaps[rec.case_id] = postprocess(hm.data, config.postprocess)
        ref = rec.heatmaps[method]
        raw_gen_seconds.append(ref.gen_seconds)

    if any(g is not None for g in raw_gen_seconds):
        block["gen_seconds"] = aggregate(raw_gen_seconds)

    if m_toggle.get("faithfulness"):
        per_endpoint = []
        aucs = []
        for ep in endpoints:
            curve = removal_curve(ep, cases, heatmaps, config.schedule, metric,
                                  config.fill)
            baseline = baselines[ep.endpoint_id]
            auc = diff_auc(curve, baseline)
            aucs.append(auc)
            per_endpoint.append({
                "endpoint": ep.endpoint_id,
                "diff_auc": auc,
                "curve": [float(v) for v in curve.values],
                "baseline_mean": [float(v) for v in baseline.mean],
                "baseline_ci_lo": [float(v) for v in baseline.ci_lo],
                "baseline_ci_hi": [float(v) for v in baseline.ci_hi],
            })
        block["faithfulness"] = {"per_endpoint": per_endpoint,
                                 "diff_auc": aggregate(aucs)}

    if m_toggle.get("shapley") or m_toggle.get("plausibility") \
            or m_toggle.get("informativeness"):
        sources = sorted(phi_by_source)
        if m_toggle.get("shapley") and sources:
            per_source = []
            pooled: list[float | None] = []
            for source in sources:
                values = [mi_correlation(heatmaps[rec.case_id], phi_by_source[source])
                          for rec in manifest.cases]
                pooled.extend(values)
                entry = {"source": source}
                entry.update(aggregate(values))
                per_source.append(entry)
            block["mi_correlation"] = {"per_source": per_source,
                                       "pooled": aggregate(pooled)}

    if m_toggle.get("plausibility") or m_toggle.get("informativeness"):
        plaus: dict[str, Any] = {"n_cases_with_masks": len(masks)}
        fp_values = None
        msfi_by_source: dict[str, dict[str, float | None]] = {}
        if masks:
            fp_values = {}
            for case_id, mask in masks.items():
                try:
                    fp_values[case_id] = feature_portion(heatmaps[case_id], mask)
                except UndefinedStatisticError:
                    fp_values[case_id] = None
            plaus["fp"] = aggregate(list(fp_values.values()))

            per_source = []
            for source in sorted(phi_norm_by_source):
                scored = score_cases(heatmaps, masks, phi_norm_by_source[source])
                msfi_by_source[source] = {cp.case_id: cp.msfi for cp in scored}
                entry = {"source": source}
                entry.update(aggregate([cp.msfi for cp in scored]))
                per_source.append(entry)
            for source in sorted(phi_norm_notes):
                per_source.append({"source": source, "mean": None, "std": None,
                                   "n": 0, "n_undefined": len(masks),
                                   "note": phi_norm_notes[source]})
            plaus["msfi"] = {"per_source": per_source}
            pooled = [v for source_vals in msfi_by_source.values()
                      for v in source_vals.values()]
            plaus["msfi"]["pooled"] = aggregate(pooled)
            plaus["per_case"] = {
                "fp": fp_values,
                "msfi": {source: dict(vals) for source, vals in
                         msfi_by_source.items()},
            }
        else:
            plaus["note"] = "no cases with masks; plausibility skipped"
        if m_toggle.get("plausibility"):
            block["plausibility"] = plaus

        if m_toggle.get("informativeness"):
            block["informativeness"] = _informativeness_block(
                endpoints, predictions, labels, cases, msfi_by_source)

    return block


def _informativeness_block(endpoints, predictions, labels, cases,
                           msfi_by_source) -> dict:
    """Per endpoint: correlate its own MSFI context with its predictions."""
    per_endpoint = []
    for ep in endpoints:
        source = ep.endpoint_id if ep.endpoint_id in msfi_by_source else "config"
        msfi_map = msfi_by_source.get(source)
        entry: dict[str, Any] = {"endpoint": ep.endpoint_id, "phi_source": source}
        if not msfi_map:
            entry["note"] = "no MSFI scores available for this endpoint"
            per_endpoint.append(entry)
            continue
        records = predictions[ep.endpoint_id]
        scores, confidences, correct = [], [], []
        for rec, case, label in zip(records, cases, labels):
            value = msfi_map.get(case.case_id)
            if value is None:
                continue  # unmasked or undefined case
            scores.append(value)
            confidences.append(float(rec.probs[rec.predicted]))
            correct.append(rec.predicted == label)
        if len(scores) < 2:
            entry["note"] = "fewer than two scored cases"
            per_endpoint.append(entry)
            continue
        result = informativeness_test(scores, confidences, correct)
        entry.update({
            "pearson_r": result.pearson,
            "u": result.u,
            "p": result.p,
            "exact": result.exact,
            "stars": result.stars,
            "n_correct": result.n_correct,
            "n_incorrect": result.n_incorrect,
            "n": result.n,
        })
        per_endpoint.append(entry)
    return {"per_endpoint": per_endpoint}


def _agreement_block(manifest: DatasetManifest, level: str) -> dict:
    rated = [(c.case_id, c.ratings) for c in manifest.cases if c.ratings]
    if not rated:
        return {"available": False, "note": "manifest carries no ratings"}
    raters = sorted({r for _, ratings in rated for r in ratings})
    matrix = [[ratings.get(r) for r in raters] for _, ratings in rated]
    block: dict[str, Any] = {
        "available": True,
        "level": level,
        "n_items": len(rated),
        "n_raters": len(raters),
    }
    try:
        block["krippendorff_alpha"] = krippendorff_alpha(
            matrix, level=level, categories=manifest.rating_scale)
    except (UndefinedStatisticError, ConfigError) as exc:
        block["krippendorff_alpha"] = None
        block["alpha_note"] = str(exc)

    complete = all(v is not None for row in matrix for v in row)
    if complete and len(raters) >= 2:
        categories = manifest.rating_scale or sorted(
            {v for row in matrix for v in row})
        counts = [[sum(1 for v in row if v == c) for c in categories]
                  for row in matrix]
        try:
            block["fleiss_kappa"] = fleiss_kappa(counts)
        except (UndefinedStatisticError, ConfigError) as exc:
            block["fleiss_kappa"] = None
            block["kappa_note"] = str(exc)
    else:
        block["fleiss_kappa"] = None
        block["kappa_note"] = "kappa needs a complete rating matrix with >= 2 raters"
    return block
