import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from refprofile.indices import (FrequencyVector, IndexClass, ResonanceDegeneracyError, DimensionError, basis,
                                classify, enumerate_A, enumerate_tables, monomial_eval, monomial_product_exponent,
                                nonresonance_witness, norm1, pair_bound, precedes)

from oracles import A_brute, brute_force_tables


def test_frequency_vector_validation():
    with pytest.raises(ValueError):
        FrequencyVector((-1.0,))
    with pytest.raises(ValueError):
        FrequencyVector((-1.0, 0.1))
    with pytest.raises(ValueError):
        FrequencyVector((-0.5, -1.0))
    with pytest.raises(DimensionError):
        FrequencyVector((-1.0, -0.5)).dot((1, 0, 0))


def test_classify():
    w = (-1.0, -0.1)
    assert classify((-1, 2), w).kind is IndexClass.RESONANT
    assert classify((2, -1), w).kind is IndexClass.NON_RESONANT
    assert classify((1, 1), w).kind is IndexClass.OFF_SHELL
    assert classify((-1, 2), w).value == pytest.approx(0.8)


@pytest.mark.parametrize("omega, n, m", [
    ((-1.0, -0.1), 1, (-1, 2)),
    ((-4.0, -1.0), 1, (-1, 2)),
    ((-1.0, -0.9), 10, (-10, 11)),
    ((-1.0, -0.895), 9, (-9, 10)),
])
def test_pair_bound(omega, n, m):
    assert pair_bound(0, 1, omega) == (n, m)
    assert classify(m, omega).kind is IndexClass.RESONANT


def test_pair_bound_is_smallest():
    rng = np.random.default_rng(1)
    for _ in range(200):
        w = np.sort(-rng.uniform(0.05, 3.0, 2))
        if w[1] - w[0] < 1e-3:
            continue
        n, _ = pair_bound(0, 1, w)
        assert n * (w[1] - w[0]) + w[1] > 0
        assert n == 0 or (n - 1) * (w[1] - w[0]) + w[1] <= 0


def test_default_example_tables():
    t = enumerate_tables((-1.0, -0.1))
    assert t.r_min == ((-1, 2),)
    assert set(t.nr1) == {(1, 0), (0, 1), (2, -1)}
    assert t.box == 2
    d = t.to_dict()
    assert d["bounds"] == [[0, 1, 1]] and d["box"] == [2, 4]


def test_near_threshold_index_is_minimal():
    t = enumerate_tables((-1.0, -0.895))
    assert (-9, 10) in t.r_min


def test_exact_degeneracy_raises():
    # (-9, 10).omega vanishes exactly for omega = (-1, -0.9)
    with pytest.raises(ResonanceDegeneracyError) as err:
        enumerate_tables((-1.0, -0.9))
    assert err.value.m == (-9, 10)


def test_three_modes_match_oracle():
    w = (-1.0, -0.6, -0.25)
    t = enumerate_tables(w)
    r_min, nr1 = brute_force_tables(w, 20)
    assert list(t.r_min) == r_min
    assert list(t.nr1) == nr1


def test_witness():
    assert nonresonance_witness((-1.0, -0.1), 12) == (1, -10)
    assert nonresonance_witness((-4.0, -1.0), 12, sum_one_only=True) is None
    assert nonresonance_witness((-1.0, -0.3 * np.sqrt(2)), 4) is None


def test_monomial_eval_conjugates_negative_entries():
    z = np.array([1 + 2j, 0.5 - 1j])
    assert monomial_eval(z, (-1, 2)) == pytest.approx(np.conj(z[0]) * z[1] ** 2)
    assert monomial_eval(z, (0, 0)) == 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=3, max_size=3),
       st.lists(st.integers(-4, 4), min_size=3, max_size=3),
       st.lists(st.integers(-4, 4), min_size=3, max_size=3))
def test_monomial_product_identity(z, m1, m2):
    z = np.asarray(z)
    d, s = monomial_product_exponent(m1, m2)
    assert all(v >= 0 and v % 2 == 0 for v in d)
    lhs = monomial_eval(z, m1) * monomial_eval(z, m2)
    rhs = np.prod(np.abs(z) ** np.array(d)) * monomial_eval(z, s)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_enumerate_A_examples():
    nr1 = enumerate_tables((-1.0, -0.1)).nr1
    assert enumerate_A(1, (-1, 2), nr1) == [((0, 1), (1, 0), (0, 1))]
    assert enumerate_A(1, (2, -1), nr1) == [((1, 0), (0, 1), (1, 0))]
    assert enumerate_A(2, (-1, 2), nr1) == []


@pytest.mark.parametrize("omega", [(-1.0, -0.1), (-1.0, -0.6, -0.25), (-1.0, -0.45)])
def test_enumerate_A_matches_exhaustive_product(omega):
    t = enumerate_tables(omega)
    pool = [m for m in t.nr1 if norm1(m) <= 3]
    for target in list(t.r_min) + list(t.nr1):
        if norm1(target) > 5:
            continue
        for k in ((1, 2) if len(pool) <= 6 else (1,)):
            assert enumerate_A(k, target, pool) == A_brute(k, target, pool)


def test_enumerate_A_structure():
    t = enumerate_tables((-1.0, -0.6, -0.25))
    for m in t.r_min:
        for k in range(1, (norm1(m) - 1) // 2 + 1):
            for tup in enumerate_A(k, m, t.nr1):
                assert len(tup) == 2 * k + 1
                assert sum(norm1(x) for x in tup) == norm1(m)
    with pytest.raises(ValueError):
        enumerate_A(0, (1, 0), t.nr1)


def test_tables_are_sorted_and_consistent():
    t = enumerate_tables((-1.0, -0.45))
    assert list(t.r_min) == sorted(t.r_min)
    for m in t.nr1:
        assert sum(m) == 1 and t.omega.dot(m) < 0
        assert not any(precedes(tuple(map(abs, r)), tuple(map(abs, m))) for r in t.r_min)
    for j in range(2):
        assert basis(j, 2) in t.nr1
