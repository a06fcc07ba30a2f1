import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsregret.gdexperts import GdState, OptimisticGD, play, project_simplex, theorem3_eta, theorem4_block, update


def grid_projection(y, h=1e-3):
    """Exhaustive search over the K=3 simplex at resolution h."""
    a = np.arange(0.0, 1.0 + h / 2, h)
    A, B = np.meshgrid(a, a, indexing="ij")
    C = 1.0 - A - B
    ok = C >= -1e-12
    pts = np.stack([A[ok], B[ok], np.clip(C[ok], 0.0, None)], axis=1)
    return pts[np.argmin(((pts - y) ** 2).sum(axis=1))]


class TestProjection:
    def test_fixed_point_on_simplex(self):
        y = np.array([0.2, 0.3, 0.5])
        assert np.allclose(project_simplex(y), y)

    def test_symmetric(self):
        assert np.allclose(project_simplex([0.9, 0.9]), [0.5, 0.5])

    def test_worked_example(self):
        assert np.allclose(project_simplex([1.2, 0.2, -0.4]), [1.0, 0.0, 0.0])
        assert np.abs(grid_projection(np.array([1.2, 0.2, -0.4])) - [1, 0, 0]).max() <= 1e-3

    def test_against_grid_oracle(self):
        r = np.random.default_rng(7)
        for _ in range(20):
            y = r.normal(0.3, 0.8, size=3)
            assert np.abs(project_simplex(y) - grid_projection(y)).max() <= 1e-3

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, st.integers(1, 12), elements=st.floats(-50, 50)))
    def test_output_on_simplex_and_optimal(self, y):
        x = project_simplex(y)
        assert abs(x.sum() - 1.0) <= 1e-9 and x.min() >= 0.0
        # KKT: positive coordinates share the largest y - x, zero coordinates sit below it.
        shift = y - x
        pos = x > 1e-12
        theta = shift[pos].mean()
        assert np.allclose(shift[pos], theta, atol=1e-7)
        assert np.all(y[~pos] <= theta + 1e-7)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            project_simplex([np.nan, 1.0])


class TestPlayUpdate:
    def test_first_play_is_uniform(self):
        assert np.allclose(play(GdState.initial(4, eta=0.3)), 0.25)

    def test_infinite_rate_plays_vertex(self):
        s = GdState.initial(2)
        s.last_loss = np.array([0.2, 0.7])
        assert np.array_equal(play(s), [1.0, 0.0])

    def test_worked_step(self):
        s = GdState(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 1.0, 10)
        assert np.allclose(play(s), [0.25, 0.75])

    def test_adaptive_rate_from_deviation(self):
        s = GdState.initial(2)
        update(s, [0.25, 0.0])
        assert s.dev_accum == pytest.approx(0.0625) and s.current_eta() == pytest.approx(2.0)

    def test_repeated_losses_keep_infinite_rate(self):
        s = GdState.initial(2)
        s.last_loss = np.array([0.3, 0.6])
        update(s, [0.3, 0.6])
        assert s.current_eta() == math.inf and np.array_equal(play(s), [1.0, 0.0])

    def test_constant_losses_move_monotonically(self):
        agent = OptimisticGD(3, eta=0.2)
        last = 0.0
        for _ in range(60):
            agent.update([0.9, 0.1, 0.5])
            assert agent.state.x[1] >= last - 1e-15
            last = agent.state.x[1]
        assert last == pytest.approx(1.0)

    def test_restart_resets_rate_not_iterate(self):
        s = GdState.initial(2, block_length=2)
        update(s, [0.5, 0.0])
        update(s, [0.0, 0.5])
        assert s.dev_accum == 0.0 and s.current_eta() == math.inf
        assert not np.allclose(s.x, 0.5)

    def test_rejects_bad_loss(self):
        with pytest.raises(ValueError):
            update(GdState.initial(2, eta=0.1), [0.5, 1.5])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.sampled_from([None, 0.05, 1.0]))
    def test_plays_stay_on_simplex(self, K, seed, eta):
        r = np.random.default_rng(seed)
        agent = OptimisticGD(K, eta=eta, block_length=7)
        for _ in range(40):
            p = agent.play()
            assert abs(p.sum() - 1) <= 1e-9 and p.min() >= 0
            agent.update(r.random(K))


class TestRates:
    def test_theorem3_eta(self):
        assert theorem3_eta(2, 0.0, 2) == pytest.approx(math.sqrt(0.5))
        assert theorem3_eta(1, 0.0, 1) == 1.0
        assert theorem3_eta(3, 1e9, 2) < 1e-3

    def test_theorem4_block(self):
        assert theorem4_block(8.0, 2.0, 1000) == 13
        assert theorem4_block(0.001, 2.0, 1000) == 1
        assert theorem4_block(5.0, 0.0, 700) == 700
