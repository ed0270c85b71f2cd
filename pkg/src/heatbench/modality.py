"""Ground-truth modality importance via exact Shapley values.

Each modality is a player; the characteristic function v(c) is dataset
performance when only the modalities in coalition c are left visible (the
rest are ablated). Shapley values are computed by exact enumeration of all
2^M coalitions with the classic factorial weights, which is practical for
the small modality counts of multi-modal imaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigError, UndefinedStatisticError
from .heatmaps import modality_positive_sum
from .oracle import AblationSpec, ablate, performance, score
from .stats import kendall_tau_b

# 2^M coalitions are enumerated; refuse anything beyond this.
MAX_MODALITIES = 16


@dataclass
class ModalityImportance:
    modalities: tuple[str, ...]
    phi: np.ndarray
    v_table: dict[frozenset[int], float]
    metric: str


def subset_performance(endpoint, cases, subset: frozenset[int] | set[int],
                       metric: str, fill: str = "zero") -> float:
    """v(c): performance with only the modalities in ``subset`` visible."""
    keep = tuple(sorted(subset))
    batch = []
    labels = []
    for case in cases:
        spec = AblationSpec(kind="modality-subset", keep=keep, fill=fill)
        batch.append((case.case_id, ablate(case.volume, spec)))
        labels.append(case.label)
    records = score(endpoint, batch)
    return performance(records, labels, metric)


def build_v_table(endpoint, cases, n_modalities: int, metric: str,
                  fill: str = "zero") -> dict[frozenset[int], float]:
    """Evaluate v on every coalition of modalities (exact enumeration)."""
    if n_modalities > MAX_MODALITIES:
        raise ConfigError(
            f"exact Shapley enumeration over {n_modalities} modalities "
            f"(2^{n_modalities} coalitions) is not supported")
    table: dict[frozenset[int], float] = {}
    for size in range(n_modalities + 1):
        for coalition in combinations(range(n_modalities), size):
            table[frozenset(coalition)] = subset_performance(
                endpoint, cases, frozenset(coalition), metric, fill)
    return table


def modality_shapley(v_table: dict[frozenset[int], float],
                     n_modalities: int) -> np.ndarray:
    """Exact Shapley values from a complete coalition table.

    phi_m = sum over coalitions c not containing m of
    |c|! * (M - |c| - 1)! / M! * (v(c + {m}) - v(c)).
    """
    m_count = n_modalities
    expected = 1 << m_count
    if len(v_table) != expected or frozenset() not in v_table:
        raise ConfigError(
            f"incomplete coalition table: expected {expected} entries, "
            f"got {len(v_table)}")
    fact = math.factorial
    total = fact(m_count)
    phi = np.zeros(m_count, dtype=np.float64)
    for m in range(m_count):
        others = [p for p in range(m_count) if p != m]
        acc = 0.0
        # Canonical enumeration order: coalitions of the remaining players by
        # size then combination rank, so symmetric tables give bitwise-equal
        # sums for symmetric players.
        for size in range(len(others) + 1):
            weight = fact(size) * fact(m_count - size - 1) / total
            for coalition in combinations(others, size):
                c = frozenset(coalition)
                acc += weight * (v_table[c | {m}] - v_table[c])
        phi[m] = acc
    return phi


def modality_importance(endpoint, cases, modalities: tuple[str, ...],
                        metric: str, fill: str = "zero") -> ModalityImportance:
    v_table = build_v_table(endpoint, cases, len(modalities), metric, fill)
    phi = modality_shapley(v_table, len(modalities))
    return ModalityImportance(tuple(modalities), phi, v_table, metric)


def mi_correlation(heatmap: np.ndarray, phi: np.ndarray) -> float | None:
    """Kendall Tau-b between ground-truth and estimated modality importance.

    Estimated importance is the per-modality sum of positive heatmap values.
    Returns None when either vector is constant (correlation undefined, the
    report renders it as a missing-value marker).
    """
    est = modality_positive_sum(heatmap)
    if est.shape != np.asarray(phi).shape:
        raise ConfigError(
            f"heatmap has {est.size} modalities but phi has {np.asarray(phi).size}")
    try:
        return kendall_tau_b(np.asarray(phi, dtype=np.float64), est)
    except UndefinedStatisticError:
        return None
