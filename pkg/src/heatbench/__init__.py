"""Evaluation harness for heatmap explanations of multi-modal classifiers.

The library scores feature-attribution heatmaps along four axes:
faithfulness (cumulative removal curves against a random baseline),
modality importance (exact Shapley values over modality subsets),
plausibility (feature portion and modality-aware portions against
annotation masks) and informativeness (do scores separate correct from
incorrect predictions). A synthetic generator with known ground truth and
a line-delimited JSON oracle protocol make the whole pipeline testable
without any trained model.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, HeatbenchError, OracleError, ProtocolError,
                     UndefinedStatisticError)
from .tensorio import (DatasetManifest, load_manifest, load_tensor,
                       write_manifest, write_tensor)
from .heatmaps import DEFAULT_SCHEDULE, postprocess, topk_mask
from .faithfulness import Case, diff_auc, random_baseline, removal_curve
from .modality import mi_correlation, modality_importance, modality_shapley
from .plausibility import feature_portion, msfi, normalize_mi
from .stats import (fleiss_kappa, informativeness_test, kendall_tau_b,
                    krippendorff_alpha, mann_whitney_u, pearson_r)
from .oracle import (CachingOracle, EndpointSpec, GlassboxLinearOracle,
                     ModalityGatedOracle, ProtocolClient, ablate, performance,
                     score)
from .synthgen import (SynthConfig, generate_dataset, generate_probe_sets,
                       ground_truth_mi)
from .runner import RunConfig, load_run_config, run
from .report import canonical_json, strip_timings, write_report

__all__ = [
    "__version__",
    "HeatbenchError", "ConfigError", "OracleError", "ProtocolError",
    "UndefinedStatisticError",
    "DatasetManifest", "load_manifest", "load_tensor", "write_manifest",
    "write_tensor",
    "DEFAULT_SCHEDULE", "postprocess", "topk_mask",
    "Case", "diff_auc", "random_baseline", "removal_curve",
    "mi_correlation", "modality_importance", "modality_shapley",
    "feature_portion", "msfi", "normalize_mi",
    "fleiss_kappa", "informativeness_test", "kendall_tau_b",
    "krippendorff_alpha", "mann_whitney_u", "pearson_r",
    "CachingOracle", "EndpointSpec", "GlassboxLinearOracle",
    "ModalityGatedOracle", "ProtocolClient", "ablate", "performance", "score",
    "SynthConfig", "generate_dataset", "generate_probe_sets", "ground_truth_mi",
    "RunConfig", "load_run_config", "run",
    "canonical_json", "strip_timings", "write_report",
]
