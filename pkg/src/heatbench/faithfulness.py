"""Cumulative feature-removal curves and the diffAUC score.

A removal curve tracks dataset performance while the top-ranked fraction q
of heatmap locations is ablated, for every q in the schedule. The random
baseline repeats the same protocol with fresh uniformly random orderings
(one per case per repeat) and aggregates a mean curve with a 95% CI band.
diffAUC is the trapezoidal area under the baseline mean curve minus the
area under the method curve: positive means the method finds removal-
sensitive features faster than chance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .heatmaps import ranking, topk_count, validate_schedule
from .oracle import AblationSpec, ablate, performance, score

DEFAULT_REPEATS = 15
# Two-sided 95% normal quantile for the CI band across repeats.
_Z95 = 1.959963984540054


@dataclass
class MethodCurve:
    schedule: tuple[float, ...]
    values: tuple[float, ...]
    metric: str


@dataclass
class BaselineCurve:
    schedule: tuple[float, ...]
    repeats: np.ndarray          # [n_repeats, n_points]
    mean: tuple[float, ...]
    ci_lo: tuple[float, ...]
    ci_hi: tuple[float, ...]
    metric: str


@dataclass
class Case:
    """One dataset entry, fully materialized for curve computation."""
    case_id: str
    volume: np.ndarray
    label: int


def _curve_from_orders(endpoint, cases: list[Case], orders: list[np.ndarray],
                       schedule: tuple[float, ...], metric: str,
                       fill: str) -> list[float]:
    """Performance at each q when case i removes locations orders[i][:k]."""
    labels = [c.label for c in cases]
    values = []
    for q in schedule:
        batch = []
        for case, order in zip(cases, orders):
            k = topk_count(q, case.volume.size)
            mask = np.zeros(case.volume.size, dtype=bool)
            if k:
                mask[order[:k]] = True
            spec = AblationSpec(kind="feature-removal",
                                mask=mask.reshape(case.volume.shape), fill=fill)
            batch.append((case.case_id, ablate(case.volume, spec)))
        records = score(endpoint, batch)
        values.append(performance(records, labels, metric))
    return values


def removal_curve(endpoint, cases: list[Case], heatmaps: dict[str, np.ndarray],
                  schedule, metric: str, fill: str = "zero") -> MethodCurve:
    """Curve for a heatmap method; ``heatmaps`` maps case id to the
    post-processed heatmap (same shape as the volume)."""
    sched = validate_schedule(schedule)
    if not cases:
        raise ConfigError("removal_curve needs at least one case")
    orders = []
    for case in cases:
        h = heatmaps.get(case.case_id)
        if h is None:
            raise ConfigError(f"case {case.case_id} has no heatmap")
        if h.shape != case.volume.shape:
            raise ConfigError(
                f"case {case.case_id}: heatmap shape {h.shape} does not match "
                f"volume shape {case.volume.shape}")
        orders.append(ranking(h))
    values = _curve_from_orders(endpoint, cases, orders, sched, metric, fill)
    return MethodCurve(sched, tuple(values), metric)


def random_baseline(endpoint, cases: list[Case], schedule, metric: str,
                    seed: int, repeats: int = DEFAULT_REPEATS,
                    fill: str = "zero") -> BaselineCurve:
    """Mean random-removal curve over ``repeats`` independent orderings.

    Each (repeat, case) pair draws its own ordering from a seed derived as
    SeedSequence([seed, repeat, case_index]), so runs are reproducible and
    insensitive to evaluation order.
    """
    sched = validate_schedule(schedule)
    if repeats < 2:
        raise ConfigError("random baseline needs at least two repeats for a CI")
    rows = []
    for rep in range(repeats):
        orders = []
        for idx, case in enumerate(cases):
            rng = np.random.default_rng(np.random.SeedSequence([seed, rep, idx]))
            orders.append(rng.permutation(case.volume.size))
        rows.append(_curve_from_orders(endpoint, cases, orders, sched, metric, fill))
    repeats_arr = np.asarray(rows, dtype=np.float64)
    mean = repeats_arr.mean(axis=0)
    sem = repeats_arr.std(axis=0, ddof=1) / np.sqrt(repeats)
    return BaselineCurve(
        schedule=sched,
        repeats=repeats_arr,
        mean=tuple(float(v) for v in mean),
        ci_lo=tuple(float(v) for v in mean - _Z95 * sem),
        ci_hi=tuple(float(v) for v in mean + _Z95 * sem),
        metric=metric,
    )


def diff_auc(method: MethodCurve, baseline: BaselineCurve | MethodCurve) -> float:
    """Area under the baseline (mean) curve minus area under the method curve."""
    base_values = baseline.mean if isinstance(baseline, BaselineCurve) else baseline.values
    if method.schedule != baseline.schedule:
        raise ConfigError("curves were computed on different removal schedules")
    if method.metric != baseline.metric:
        raise ConfigError("curves were computed with different task metrics")
    qs = np.asarray(method.schedule)
    trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy<2 fallback
    return float(trapezoid(np.asarray(base_values), qs) -
                 trapezoid(np.asarray(method.values), qs))
