"""Self-contained statistical kernel.

Implements exactly the statistics the harness reports: Pearson r,
Kendall Tau-b, the Mann-Whitney U test (exact enumeration for small
tie-free samples, normal approximation with tie and continuity correction
otherwise), Krippendorff's alpha (ordinal or interval, missing ratings
allowed) and Fleiss' kappa. No third-party stats dependency; tests
cross-check against independent oracles.

All p-values are two-sided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import ConfigError, UndefinedStatisticError

# Largest combined sample size for which the exact U distribution is
# enumerated (tie-free data only); C(12, 6) = 924 assignments.
EXACT_U_LIMIT = 12

STAR_THRESHOLDS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))


def star_level(p: float) -> str:
    """Significance marker: *** p<0.001, ** p<0.01, * p<0.05, else NS."""
    for threshold, marker in STAR_THRESHOLDS:
        if p < threshold:
            return marker
    return "NS"


# ---------------------------------------------------------------------------
# correlation
# ---------------------------------------------------------------------------

def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ConfigError("pearson_r expects two equal-length vectors")
    if xa.size < 2:
        raise UndefinedStatisticError("pearson_r needs at least two observations")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise UndefinedStatisticError("pearson_r undefined for constant input")
    return float(dx @ dy) / denom


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Tau-b: (C - D) / sqrt((n0 - n1) * (n0 - n2)) with tie terms n1, n2."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ConfigError("kendall_tau_b expects two equal-length vectors")
    n = xa.size
    if n < 2:
        raise UndefinedStatisticError("kendall_tau_b needs at least two observations")

    dx = np.sign(xa[:, None] - xa[None, :])
    dy = np.sign(ya[:, None] - ya[None, :])
    iu = np.triu_indices(n, k=1)
    prod = dx[iu] * dy[iu]
    s = float(prod.sum())                     # C - D
    n0 = n * (n - 1) // 2
    n1 = int(np.count_nonzero(dx[iu] == 0))   # pairs tied in x
    n2 = int(np.count_nonzero(dy[iu] == 0))   # pairs tied in y
    denom = math.sqrt(float(n0 - n1) * float(n0 - n2))
    if denom == 0.0:
        raise UndefinedStatisticError("kendall_tau_b undefined: constant vector")
    return s / denom


# ---------------------------------------------------------------------------
# Mann-Whitney U
# ---------------------------------------------------------------------------

def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float          # U statistic of the first sample
    p: float          # two-sided
    exact: bool


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test.

    Exact p by enumerating all C(n, |a|) group assignments when the combined
    sample is tie-free and no larger than EXACT_U_LIMIT; otherwise the normal
    approximation with midrank tie correction and a 0.5 continuity
    correction.
    """
    aa = np.asarray(a, dtype=np.float64)
    bb = np.asarray(b, dtype=np.float64)
    if aa.ndim != 1 or bb.ndim != 1 or aa.size == 0 or bb.size == 0:
        raise UndefinedStatisticError("mann_whitney_u needs two non-empty samples")
    na, nb = aa.size, bb.size
    n = na + nb
    pooled = np.concatenate([aa, bb])
    ranks = _midranks(pooled)
    u_a = float(ranks[:na].sum()) - na * (na + 1) / 2.0
    mu = na * nb / 2.0

    has_ties = np.unique(pooled).size < n
    if n <= EXACT_U_LIMIT and not has_ties:
        return MannWhitneyResult(u_a, _exact_two_sided_p(ranks[:na].astype(int), na, nb), True)

    # Tie-corrected variance; sigma == 0 means every value is identical.
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(((counts ** 3) - counts).sum())
    sigma_sq = na * nb / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0.0:
        return MannWhitneyResult(u_a, 1.0, False)
    z = (abs(u_a - mu) - 0.5) / math.sqrt(sigma_sq)
    z = max(z, 0.0)
    return MannWhitneyResult(u_a, min(1.0, 2.0 * _normal_sf(z)), False)


def _exact_two_sided_p(ranks_a: np.ndarray, na: int, nb: int) -> float:
    """P(|U - mu| >= |U_obs - mu|) over all rank assignments."""
    n = na + nb
    mu = na * nb / 2.0
    u_obs = float(ranks_a.sum()) - na * (na + 1) / 2.0
    dev = abs(u_obs - mu)
    hits = 0
    total = 0
    for group in combinations(range(1, n + 1), na):
        u = sum(group) - na * (na + 1) / 2.0
        if abs(u - mu) >= dev - 1e-12:
            hits += 1
        total += 1
    return hits / total


# ---------------------------------------------------------------------------
# inter-rater agreement
# ---------------------------------------------------------------------------

def krippendorff_alpha(ratings: Sequence[Sequence[float | None]],
                       level: str = "ordinal",
                       categories: Sequence[float] | None = None) -> float:
    """Krippendorff's alpha for an items x raters matrix with missing entries.

    ``level`` selects the difference function: "ordinal" (default, uses the
    coincidence marginals of the declared scale) or "interval" (squared
    numeric distance). Items with fewer than two ratings drop out; by
    convention alpha is 1.0 when no disagreement is observed.
    """
    if level not in ("ordinal", "interval"):
        raise ConfigError(f"unknown agreement level {level!r}")

    units: list[list[float]] = []
    for row in ratings:
        vals = [float(v) for v in row if v is not None and not (isinstance(v, float) and math.isnan(v))]
        if len(vals) >= 2:
            units.append(vals)
    if not units:
        raise UndefinedStatisticError(
            "krippendorff_alpha needs at least one item with two ratings")

    observed = sorted({v for vals in units for v in vals})
    if categories is None:
        cats = observed
    else:
        cats = sorted(float(c) for c in categories)
        if any(v not in cats for v in observed):
            raise ConfigError("rating outside the declared scale")
    index = {c: i for i, c in enumerate(cats)}
    k = len(cats)

    # Coincidence matrix: each ordered pair within a unit adds 1/(m-1).
    o = np.zeros((k, k), dtype=np.float64)
    for vals in units:
        m = len(vals)
        for a in vals:
            for b in vals:
                o[index[a], index[b]] += 1.0 / (m - 1)
        for a in vals:
            o[index[a], index[a]] -= 1.0 / (m - 1)
    marginals = o.sum(axis=1)
    n_total = marginals.sum()

    if level == "interval":
        diff = (np.asarray(cats)[:, None] - np.asarray(cats)[None, :]) ** 2
    else:
        cum = np.cumsum(marginals)
        diff = np.zeros((k, k), dtype=np.float64)
        for c in range(k):
            for d in range(c + 1, k):
                span = cum[d] - cum[c] + marginals[c] - (marginals[c] + marginals[d]) / 2.0
                diff[c, d] = diff[d, c] = span * span

    d_o = float((o * diff).sum()) / n_total
    d_e = float((marginals[:, None] * marginals[None, :] * diff).sum()) / (n_total * (n_total - 1))
    if d_o == 0.0:
        return 1.0
    if d_e == 0.0:
        raise UndefinedStatisticError("krippendorff_alpha undefined: no expected disagreement")
    return 1.0 - d_o / d_e


def fleiss_kappa(counts: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa from an items x categories count matrix.

    Every row must sum to the same number of raters (>= 2).
    """
    mat = np.asarray(counts, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 2:
        raise ConfigError("fleiss_kappa expects an items x categories matrix")
    row_sums = mat.sum(axis=1)
    r = row_sums[0]
    if r < 2 or not np.all(row_sums == r):
        raise ConfigError("fleiss_kappa needs the same number of raters (>= 2) per item")

    p_i = ((mat ** 2).sum(axis=1) - r) / (r * (r - 1))
    p_bar = float(p_i.mean())
    p_j = mat.sum(axis=0) / mat.sum()
    p_e = float((p_j ** 2).sum())
    if p_e == 1.0:
        raise UndefinedStatisticError("fleiss_kappa undefined: a single category was ever used")
    return (p_bar - p_e) / (1.0 - p_e)


# ---------------------------------------------------------------------------
# informativeness assembly
# ---------------------------------------------------------------------------

@dataclass
class InformativenessResult:
    """Does a plausibility score carry information about model behaviour?"""
    pearson: float | None
    u: float | None
    p: float | None
    exact: bool | None
    stars: str
    n_correct: int
    n_incorrect: int
    n: int


def informativeness_test(scores: Sequence[float],
                         confidences: Sequence[float],
                         correct: Sequence[bool]) -> InformativenessResult:
    """Correlate a per-case score with confidence and compare the score
    distributions of correctly vs incorrectly classified cases."""
    s = np.asarray(scores, dtype=np.float64)
    c = np.asarray(confidences, dtype=np.float64)
    ok = np.asarray(correct, dtype=bool)
    if not (s.shape == c.shape == ok.shape) or s.ndim != 1:
        raise ConfigError("informativeness_test expects aligned per-case vectors")

    try:
        r = pearson_r(s, c)
    except UndefinedStatisticError:
        r = None

    group_correct = s[ok]
    group_incorrect = s[~ok]
    if group_correct.size == 0 or group_incorrect.size == 0:
        return InformativenessResult(r, None, None, None, "NS",
                                     int(group_correct.size),
                                     int(group_incorrect.size), int(s.size))
    res = mann_whitney_u(group_correct, group_incorrect)
    return InformativenessResult(r, res.u, res.p, res.exact, star_level(res.p),
                                 int(group_correct.size),
                                 int(group_incorrect.size), int(s.size))
