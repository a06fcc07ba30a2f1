import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsregret.bernstein import RunningStats, pairwise_variance, rho, update

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_single_sample():
    s = update(RunningStats(), 0.5)
    assert (s.n, s.mean, s.empirical_variance()) == (1, 0.5, 0.0)


def test_two_points():
    s = RunningStats.from_samples([0.0, 1.0])
    assert s.mean == 0.5 and s.empirical_variance() == pytest.approx(0.5)
    assert pairwise_variance([0.0, 1.0]) == pytest.approx(0.5)


def test_three_points():
    s = RunningStats.from_samples([0.2, 0.4, 0.6])
    assert s.mean == pytest.approx(0.4)
    assert s.empirical_variance() == pytest.approx(0.04)
    assert pairwise_variance([0.2, 0.4, 0.6]) == pytest.approx(0.04)


def test_update_is_pure():
    s = RunningStats.from_samples([0.1])
    t = update(s, 0.9)
    assert s.n == 1 and t.n == 2


@pytest.mark.parametrize("x", [-0.01, 1.01, math.nan])
def test_rejects_out_of_range(x):
    with pytest.raises(ValueError):
        RunningStats().push(x)


@settings(max_examples=300, deadline=None)
@given(st.lists(unit, min_size=2, max_size=50))
def test_welford_matches_pairwise_and_batch(xs):
    s = RunningStats.from_samples(xs)
    assert abs(s.empirical_variance() - pairwise_variance(xs)) <= 1e-9
    assert abs(s.empirical_variance() - np.var(xs, ddof=1)) <= 1e-9
    assert abs(s.mean - np.mean(xs)) <= 1e-9
    assert s.m2 >= 0.0


def test_rho_second_term_only():
    assert rho(4, 0.0, 0.05) == pytest.approx(7 * math.log(40) / 9, abs=1e-12)
    assert rho(4, 0.0, 0.05) == pytest.approx(2.8692, abs=1e-4)


def test_rho_worked_example():
    assert rho(101, 0.25, 0.05) == pytest.approx(0.2212, abs=1e-4)


def test_rho_vectorised():
    n = np.array([2, 10, 100])
    v = np.array([0.1, 0.2, 0.0])
    expected = [rho(int(a), float(b), 0.1) for a, b in zip(n, v)]
    assert np.allclose(rho(n, v, 0.1), expected)


@pytest.mark.parametrize("args", [(1, 0.1, 0.1), (5, -0.1, 0.1), (5, 0.1, 0.0), (5, 0.1, 1.0)])
def test_rho_preconditions(args):
    with pytest.raises(ValueError):
        rho(*args)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 10_000), st.integers(1, 100), st.floats(0.0, 0.25), st.floats(0.0, 0.25),
       st.floats(1e-6, 0.99), st.floats(1e-6, 0.99))
def test_rho_monotone(n, dn, v1, v2, d1, d2):
    v_lo, v_hi = sorted((v1, v2))
    d_lo, d_hi = sorted((d1, d2))
    assert rho(n, v_lo, d_lo) <= rho(n, v_hi, d_lo) + 1e-12
    assert rho(n, v_lo, d_hi) <= rho(n, v_lo, d_lo) + 1e-12
    assert rho(n + dn, v_lo, d_lo) <= rho(n, v_lo, d_lo) + 1e-12


def test_coverage_small_grid():
    r = np.random.default_rng(0)
    for p in (0.1, 0.5):
        x = (r.random((4000, 30)) < p).astype(float)
        rate = np.mean(np.abs(x.mean(1) - p) > rho(30, x.var(1, ddof=1), 0.05))
        assert rate <= 0.05
