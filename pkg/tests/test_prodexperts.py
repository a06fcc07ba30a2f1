import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsregret.envmodel import gen_drifting, gen_switching, sample_matrix
from nsregret.harness.runner import run_fullinfo
from nsregret.prodexperts import (
    InvariantViolation,
    OptimisticProd,
    ProdExpertState,
    SleepingProd,
    fixed_point_alpha,
    play,
    update,
)

E = math.exp(-0.25)


class TestFixedPoint:
    def test_single_expert(self):
        assert fixed_point_alpha(ProdExpertState.initial(1), [0.7], 1e-6) == 0.7

    def test_closed_form_for_equal_rates(self):
        alpha = fixed_point_alpha(ProdExpertState.initial(2), [0.0, 1.0], 1e-9)
        assert alpha == pytest.approx(E / (1 + E), abs=1e-8)
        assert alpha == pytest.approx(0.43782, abs=1e-5)

    def test_constant_previous_loss(self):
        assert fixed_point_alpha(ProdExpertState.initial(5), [0.4] * 5, 1e-3) == 0.4

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(1e-6, 1e-2))
    def test_residual_within_tolerance(self, K, seed, tol):
        r = np.random.default_rng(seed)
        s = ProdExpertState.initial(K)
        s.log_w = r.normal(0, 3, K)
        s.eta = r.uniform(0.01, 0.25, K)
        prev = r.random(K)
        alpha = fixed_point_alpha(s, prev, tol)
        p = s.distribution(alpha - prev)
        assert 0.0 <= alpha <= 1.0 and abs(p @ prev - alpha) <= tol


class TestPlayUpdate:
    def test_first_play_uniform(self):
        p, m = play(ProdExpertState.initial(3), np.zeros(3), 1e-3)
        assert np.allclose(p, 1 / 3) and np.allclose(m, 0.0)

    def test_worked_play(self):
        p, _ = play(ProdExpertState.initial(2), [0.0, 1.0], 1e-10)
        assert np.allclose(p, [1 / (1 + E), E / (1 + E)], atol=1e-8)

    def test_hand_evaluated_step(self):
        s = ProdExpertState.initial(2)
        p, m = play(s, np.zeros(2), 1e-6)
        r = update(s, [0.0, 1.0], p, m)
        assert np.allclose(r, [0.5, -0.5])
        eta0 = 0.25
        eta1 = min(0.25, math.sqrt(math.log(2) / 1.25))
        w = [0.5 * math.exp(eta0 * x - eta0 ** 2 * x ** 2) ** (eta1 / eta0) for x in (0.5, -0.5)]
        assert np.allclose(np.exp(s.log_w), w, rtol=0, atol=1e-12)
        assert np.allclose(s.eta, eta1, atol=1e-12) and np.allclose(s.c, 0.25)

    def test_zero_error_step(self):
        s = ProdExpertState.initial(3)
        r = np.array([0.1, -0.05, -0.05])
        before = s.log_w.copy()
        s.apply(r, r)
        assert np.allclose(s.log_w, before + 0.25 * r)

    def test_rejects_bad_loss(self):
        s = ProdExpertState.initial(2)
        with pytest.raises(ValueError):
            update(s, [0.0, 2.0], np.array([0.5, 0.5]), np.zeros(2))


class TestOptimisticProd:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_strict_run_holds_invariants(self, K, seed):
        seq = gen_drifting(K, 300, 2.0, 0.05, np.random.default_rng(seed))
        agent = OptimisticProd(K, 300)
        run_fullinfo(agent, seq, np.random.default_rng(seed + 1))
        ck = agent.checks
        assert ck.max_residual <= 1 / 300 and ck.max_sum_pr <= 1e-9 and ck.eta_monotone
        assert ck.max_rm_excess <= 1e-12

    def test_single_arm(self, rng):
        agent = OptimisticProd(1, 10)
        for _ in range(10):
            assert agent.play()[0] == 1.0
            agent.update([rng.random()])

    def test_learning_rates_capped_and_nonincreasing(self, rng):
        agent = OptimisticProd(3, 200)
        prev = agent.state.eta.copy()
        for _ in range(200):
            agent.play()
            agent.update(rng.random(3))
            assert np.all(agent.state.eta <= prev) and np.all(agent.state.eta <= 0.25)
            prev = agent.state.eta.copy()

    def test_loose_tolerance_trips_strict_check(self, rng):
        agent = OptimisticProd(2, 10, tolerance=0.5)
        agent._resid = 0.6  # simulate a residual the search should never leave behind
        agent.tol = 0.5
        agent._p, agent._m = np.array([0.5, 0.5]), np.zeros(2)
        with pytest.raises(InvariantViolation):
            agent.update([0.2, 0.4])


class TestSleepingProd:
    def test_first_play_uniform(self):
        assert np.allclose(SleepingProd(4, 50).play(), 0.25)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(2, 4), st.integers(0, 2**32 - 1))
    def test_lazy_matches_explicit(self, K, seed):
        T = 60
        seq = gen_switching(K, T, 3, 0.3, np.random.default_rng(seed), sigma2=0.04)
        ell = sample_matrix(seq, np.random.default_rng(seed + 1))
        lazy, full = SleepingProd(K, T), SleepingProd(K, T, lazy=False)
        for t in range(T):
            assert np.allclose(lazy.play(), full.play(), atol=1e-12)
            lazy.update(ell[t])
            full.update(ell[t])
        n = K * T
        assert np.allclose(lazy.state.log_w[:n], full.state.log_w, atol=1e-12)
        assert np.allclose(lazy.state.eta[:n], full.state.eta, atol=1e-12)

    def test_asleep_state_never_moves(self, rng):
        K, T = 3, 40
        agent = SleepingProd(K, T, lazy=False)
        init = agent.state.log_w.copy(), agent.state.eta.copy(), agent.state.c.copy()
        for t in range(1, T + 1):
            agent.play()
            agent.update(rng.random(K))
            n = K * t
            assert agent.state.log_w[n:].tobytes() == init[0][n:].tobytes()
            assert agent.state.eta[n:].tobytes() == init[1][n:].tobytes()
            assert agent.state.c[n:].tobytes() == init[2][n:].tobytes()

    def test_touched_count(self, rng):
        K, T = 3, 30
        agent = SleepingProd(K, T)
        for t in range(1, T + 1):
            agent.play()
            assert agent.touched == K * t
            agent.update(rng.random(K))
        assert agent.state.log_w.size <= K * T

    def test_unwoken_expert_reports_initial_state(self):
        agent = SleepingProd(2, 10)
        agent.play()
        agent.update([0.1, 0.9])
        assert agent.expert_state(5, 1) == (agent.log_w0, agent.eta0, 0.0)
        assert agent.expert_state(1, 0)[2] > 0.0

    def test_identities_hold(self, rng):
        seq = gen_switching(3, 200, 4, 0.3, rng, sigma2=0.05)
        agent = SleepingProd(3, 200)
        run_fullinfo(agent, seq, rng)
        ck = agent.checks
        assert ck.max_identity_err <= 1e-9 and ck.max_lemma6_err <= 1e-9 and ck.max_sleeping_regret <= 1e-9

    def test_horizon_exhausted(self):
        agent = SleepingProd(2, 1)
        agent.play()
        agent.update([0.0, 1.0])
        with pytest.raises(RuntimeError):
            agent.play()
