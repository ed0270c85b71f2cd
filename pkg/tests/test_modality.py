import itertools
import math

import numpy as np
import pytest

from heatbench.errors import ConfigError
from heatbench.faithfulness import Case
from heatbench.modality import (build_v_table, mi_correlation,
                                modality_importance, modality_shapley,
                                subset_performance)
from heatbench.oracle import GlassboxLinearOracle, ModalityGatedOracle
from heatbench.stats import kendall_tau_b
from heatbench.synthgen import SynthConfig, generate_cases

from conftest import CountingOracle


def random_v_table(rng, m):
    return {frozenset(c): float(rng.random())
            for size in range(m + 1)
            for c in itertools.combinations(range(m), size)}


def shapley_by_permutation_enumeration(v_table, m):
    """Average marginal contribution over all M! orderings."""
    phi = np.zeros(m)
    perms = list(itertools.permutations(range(m)))
    for perm in perms:
        seen = set()
        for player in perm:
            before = v_table[frozenset(seen)]
            seen.add(player)
            phi[player] += v_table[frozenset(seen)] - before
    return phi / len(perms)


# ---------------------------------------------------------------------------
# shapley values
# ---------------------------------------------------------------------------

def test_shapley_frozen_two_modality_example():
    v = {frozenset(): 0.5, frozenset({0}): 0.9,
         frozenset({1}): 0.6, frozenset({0, 1}): 0.95}
    phi = modality_shapley(v, 2)
    np.testing.assert_allclose(phi, [0.375, 0.075], atol=1e-15)


def test_shapley_matches_permutation_enumeration():
    rng = np.random.default_rng(8)
    for m in (1, 2, 3, 4):
        for _ in range(10):
            v = random_v_table(rng, m)
            np.testing.assert_allclose(
                modality_shapley(v, m),
                shapley_by_permutation_enumeration(v, m), atol=1e-12)


def test_shapley_efficiency_on_random_tables():
    rng = np.random.default_rng(9)
    for _ in range(50):
        m = int(rng.integers(1, 7))
        v = random_v_table(rng, m)
        phi = modality_shapley(v, m)
        total = v[frozenset(range(m))] - v[frozenset()]
        assert abs(phi.sum() - total) < 1e-9


def test_shapley_symmetry_is_bitwise_exact():
    # v depends only on |S ∩ {0,1}| and the rest of S: players 0 and 1 are
    # interchangeable, so their values must come out identical, not close.
    rng = np.random.default_rng(10)
    m = 4
    base = {}
    for size in range(m + 1):
        for c in itertools.combinations(range(m), size):
            rest = frozenset(p for p in c if p >= 2)
            key = (rest, len([p for p in c if p < 2]))
            if key not in base:
                base[key] = float(rng.random())
    v = {frozenset(c): base[(frozenset(p for p in c if p >= 2),
                             len([p for p in c if p < 2]))]
         for size in range(m + 1) for c in itertools.combinations(range(m), size)}
    phi = modality_shapley(v, m)
    assert phi[0] == phi[1]


def test_shapley_null_player_is_exact_zero():
    rng = np.random.default_rng(11)
    m = 3
    v = {}
    for size in range(m + 1):
        for c in itertools.combinations(range(m), size):
            key = frozenset(p for p in c if p != 2)  # player 2 never matters
            v.setdefault(frozenset(c), None)
            v[frozenset(c)] = key
    values = {k: float(rng.random()) for k in set(v.values())}
    v = {k: values[key] for k, key in v.items()}
    phi = modality_shapley(v, m)
    assert phi[2] == 0.0


def test_shapley_validates_table_completeness():
    v = {frozenset(): 0.5, frozenset({0}): 0.9}
    with pytest.raises(ConfigError, match="incomplete coalition table"):
        modality_shapley(v, 2)


def test_shapley_rejects_too_many_modalities():
    with pytest.raises(ConfigError):
        modality_shapley({}, 20)


# ---------------------------------------------------------------------------
# v-table construction through an oracle
# ---------------------------------------------------------------------------

def _linear_cases(n, shape, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=shape).astype(np.float32)
    oracle = GlassboxLinearOracle(w)
    cases = []
    for i in range(n):
        x = rng.normal(size=shape)
        cases.append(Case(f"c{i}", x, 1 if float((w * x).sum()) > 0 else 0))
    return oracle, cases


def test_v_table_enumerates_all_subsets_with_expected_call_count():
    oracle, cases = _linear_cases(4, (3, 2, 2))
    counting = CountingOracle(oracle)
    v = build_v_table(counting, cases, 3, "accuracy", "zero")
    assert len(v) == 8
    assert counting.calls == 8 * len(cases)
    assert v[frozenset({0, 1, 2})] == 1.0  # labels defined by the oracle


def test_subset_performance_full_set_equals_unablated():
    oracle, cases = _linear_cases(5, (2, 3, 3), seed=3)
    full = subset_performance(oracle, cases, {0, 1}, "accuracy", "zero")
    assert full == 1.0


def test_gated_oracle_concentrates_importance_on_its_modality():
    config = SynthConfig(n=6, image_size=(64, 64), seed=13)
    cases = [Case(c.case_id, c.volume.astype(np.float64), c.label)
             for c in generate_cases(config)]
    oracle = ModalityGatedOracle(config.modalities, "T1C")
    result = modality_importance(oracle, cases, config.modalities, "accuracy",
                                 "zero")
    i_t1c = config.modalities.index("T1C")
    phi = result.phi
    assert phi[i_t1c] == pytest.approx(0.5, abs=1e-12)
    for i, name in enumerate(config.modalities):
        if i != i_t1c:
            assert phi[i] == 0.0


# ---------------------------------------------------------------------------
# correlation against heatmap modality mass
# ---------------------------------------------------------------------------

def test_mi_correlation_agrees_with_tau_on_positive_sums():
    hm = np.zeros((3, 2, 2))
    hm[0] = 0.1
    hm[1] = 0.3
    hm[2] = 0.2
    phi = np.array([0.05, 0.9, 0.4])
    expect = kendall_tau_b([0.4, 1.2, 0.8], list(phi))
    assert mi_correlation(hm, phi) == pytest.approx(expect, abs=1e-12)
    assert mi_correlation(hm, phi) == pytest.approx(1.0)


def test_mi_correlation_is_none_when_undefined():
    hm = np.zeros((2, 2, 2))  # constant mass vector
    assert mi_correlation(hm, np.array([0.2, 0.8])) is None


def test_mi_correlation_ignores_negative_mass():
    hm = np.stack([np.full((2, 2), -5.0), np.full((2, 2), 1.0),
                   np.full((2, 2), 2.0)])
    phi = np.array([0.0, 0.5, 1.0])
    assert mi_correlation(hm, phi) == pytest.approx(
        kendall_tau_b([0.0, 4.0, 8.0], list(phi)))


def test_mi_correlation_shape_check():
    with pytest.raises(ConfigError):
        mi_correlation(np.zeros((2, 2, 2)), np.array([1.0, 0.5, 0.2]))
