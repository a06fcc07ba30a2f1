"""Acceptance suites, each runnable on its own via ``nsregret validate --suite <name>``.

Every suite returns a :class:`SuiteResult`.  A suite passes only when all of
its checks hold *and* it finished inside its runtime budget.  Runs shared
between suites (the Prod runs feeding ``fixed-point-residual``) are cached
per process.
"""
from __future__ import annotations

import copy
import functools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import adversary
from ..agents import agent_factory, make_agent
from ..bernstein import RunningStats, pairwise_variance, rho
from ..envmodel import (
    DistributionSequence,
    NonStationarityParams,
    compute_params,
    gen_drifting,
    gen_switching,
    sample_matrix,
)
from ..gdexperts import OptimisticGD, project_simplex, theorem3_eta
from ..prodexperts import InvariantViolation, OptimisticProd, SleepingProd
from .experiments import ENV_STREAM, ExperimentConfig, run_experiment, run_on_sequence, traces_csv
from .runner import run_bandit, run_fullinfo, stream

__all__ = ["SuiteResult", "SUITES", "run_suite", "run_suites"]


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name} ({self.seconds:.1f}s): {self.detail}"


SUITES: dict[str, tuple[Callable[[], tuple[bool, str, dict]], float | None]] = {}


def suite(name: str, budget: float | None):
    def register(fn):
        SUITES[name] = (fn, budget)
        return fn
    return register


def run_suite(name: str) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    fn, budget = SUITES[name]
    t0 = time.perf_counter()
    try:
        ok, detail, metrics = fn()
    except InvariantViolation as exc:
        ok, detail, metrics = False, f"invariant violated: {exc}", {}
    elapsed = time.perf_counter() - t0
    if budget is not None and elapsed > budget:
        ok = False
        detail += f"; exceeded runtime budget {budget:.0f}s"
    return SuiteResult(name, ok, detail, metrics, elapsed, budget)


def run_suites(names: list[str] | None = None) -> list[SuiteResult]:
    return [run_suite(n) for n in (names or list(SUITES))]


# -- shared environments ------------------------------------------------------

def switching_env(T: int, seed: int = 0) -> DistributionSequence:
    """Two arms, one switch at T/2, gap 1/2, point masses."""
    return gen_switching(2, T, 2, 0.5, stream(seed, ENV_STREAM))


@functools.lru_cache(maxsize=None)
def _static_runs() -> tuple:
    out = []
    for i in range(20):
        K, T = (2, 5)[i % 2], 2000
        rng = stream(100 + i, ENV_STREAM)
        kind = i % 4
        if kind == 0:
            seq = gen_switching(K, T, int(rng.integers(1, 9)), float(rng.uniform(0.05, 0.5)), rng, sigma2=0.04)
        elif kind == 1:
            seq = gen_drifting(K, T, float(rng.uniform(1.0, 6.0)), float(rng.uniform(0.0, 0.1)), rng)
        elif kind == 2:
            means = rng.uniform(0.0, 1.0, size=K)
            p = np.tile(means, (T, 1))
            seq = DistributionSequence.from_arrays(np.zeros((T, K)), np.ones((T, K)), p)
        else:
            seq = gen_switching(K, T, int(rng.integers(2, 40)), float(rng.uniform(0.05, 0.9)), rng)
        agent = OptimisticProd(K, T)
        losses_rng = stream(100 + i, 1)
        run_fullinfo(agent, seq, losses_rng)
        # Replay the same draws to compute the path-length term.
        ell = sample_matrix(seq, stream(100 + i, 1))
        prev = np.vstack([np.zeros(K), ell[:-1]])
        path = float((np.abs(ell - prev).max(axis=1) ** 2).sum())
        lnk = math.log(K)
        env = 10.0 * (math.sqrt(path * lnk) + lnk * (1.0 + math.log(math.log(T))))
        out.append((K, float(agent.cum_regret.max()), env, agent.checks, T))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _sleeping_identity_runs() -> tuple:
    out = []
    for i in range(10):
        rng = stream(200 + i, ENV_STREAM)
        seq = gen_switching(3, 500, int(rng.integers(1, 6)), float(rng.uniform(0.1, 0.6)), rng, sigma2=0.03)
        agent = SleepingProd(3, 500)
        run_fullinfo(agent, seq, stream(200 + i, 1))
        out.append((agent.checks, 500))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _sleeping_dynamic_runs() -> tuple:
    out = []
    for T in (2000, 8000):
        agent = SleepingProd(2, T)
        tr = run_fullinfo(agent, switching_env(T), stream(0, 1))
        out.append((T, tr.final, agent.checks))
    return tuple(out)


# -- suites -------------------------------------------------------------------

@suite("bernstein-coverage", 30.0)
def bernstein_coverage():
    trials = 10_000
    rng = stream(1, 7)
    worst, rows = -math.inf, []
    ok = True
    for p in (0.1, 0.5):
        for n in (30, 100):
            x = (rng.random((trials, n)) < p).astype(float)
            mean = x.mean(axis=1)
            v = x.var(axis=1, ddof=1)
            for delta in (0.05, 0.2):
                rate = float(np.mean(np.abs(mean - p) > rho(n, v, delta)))
                rows.append({"p": p, "n": n, "delta": delta, "violation_rate": rate})
                ok &= rate <= delta
                worst = max(worst, rate - delta)
    return ok, f"max(violation rate - delta) = {worst:.4f} over {len(rows)} cells, {trials} trials each", {"cells": rows}


@suite("lemma1-conditions", 1.0)
def lemma1_conditions():
    tol = 1e-9
    worst = {"gap_err": 0.0, "var_excess": -math.inf, "kl_excess": -math.inf}
    n = 0
    for sigma in np.linspace(0.05, 0.5, 10):
        for frac in (0.2, 0.4, 0.6, 0.8, 1.0):
            eps = frac * sigma / math.sqrt(2.0)
            c = adversary.lemma1_conditions(float(sigma), float(eps))
            worst["gap_err"] = max(worst["gap_err"], abs(float(c["mean_gap"]) - eps))
            worst["var_excess"] = max(worst["var_excess"], float(max(c["var_p"], c["var_q"]) - sigma ** 2))
            worst["kl_excess"] = max(worst["kl_excess"], c["ln2_kl"] - c["kl_bound"])
            n += 1
    ok = worst["gap_err"] <= tol and worst["var_excess"] <= tol and worst["kl_excess"] <= tol
    shown = ", ".join(f"{k}={v:.2e}" for k, v in worst.items())
    return ok, f"{n} grid points; worst {shown}", {"points": n, **worst}


def _oracle_projection(y: np.ndarray) -> np.ndarray:
    """Brute-force argmin of ||x - y|| over a coarse then a fine simplex grid (K = 3)."""
    def search(c0, c1, h, radius):
        a = np.arange(max(0.0, c0 - radius), min(1.0, c0 + radius) + h / 2, h)
        b = np.arange(max(0.0, c1 - radius), min(1.0, c1 + radius) + h / 2, h)
        A, Bm = np.meshgrid(a, b, indexing="ij")
        C = 1.0 - A - Bm
        ok = C >= -1e-12
        pts = np.stack([A[ok], Bm[ok], np.maximum(C[ok], 0.0)], axis=1)
        d = ((pts - y) ** 2).sum(axis=1)
        return pts[int(np.argmin(d))]

    coarse = search(0.5, 0.5, 0.01, 0.51)
    return search(coarse[0], coarse[1], 1e-4, 0.02)


@suite("simplex-projection-oracle", 10.0)
def simplex_projection_oracle():
    rng = stream(3, 7)
    worst = 0.0
    for _ in range(200):
        y = rng.normal(0.3, 1.0, size=3)
        worst = max(worst, float(np.abs(project_simplex(y) - _oracle_projection(y)).max()))
    return worst <= 1e-3, f"max l_inf distance to grid oracle = {worst:.2e} over 200 inputs", {"max_err": worst}


@suite("gd-constant-regret", 5.0)
def gd_constant_regret():
    finals = {}
    for T in (2000, 8000):
        seq = switching_env(T)
        p = compute_params(seq)
        agent = OptimisticGD(2, eta=theorem3_eta(p.gamma, p.variance_budget, 2))
        finals[T] = run_fullinfo(agent, seq, stream(0, 1)).final
    diff = finals[8000] - finals[2000]
    return diff <= 1.0, f"R(8000) - R(2000) = {diff:.4f} (R(2000) = {finals[2000]:.4f})", {"finals": finals, "diff": diff}


@suite("bandit-T-dependence-contrast", 600.0)
def bandit_t_dependence_contrast():
    gamma, ok, parts, metrics = 2, True, [], {}
    for T in (2048, 8192):
        hint = NonStationarityParams(gamma, float(gamma), 0.0)
        factory = agent_factory("rerun-ucbv", 2, T, hint)
        seq, plan = adversary.build_switching_adversary(factory, T, gamma, 200, stream(T, 5))
        bandit = [run_bandit(factory(stream(s, 2)), seq, stream(s, 1)).final for s in range(100)]
        mean = float(np.mean(bandit))
        gd = run_on_sequence({"name": "gd-fixed"}, seq, 0).final
        need = 0.04 * math.sqrt(gamma * T)
        ok &= mean >= need and gd <= 20.0
        parts.append(f"T={T}: rerun-ucbv {mean:.1f} (>= {need:.2f}), gd-fixed {gd:.2f} (<= 20)")
        metrics[T] = {"rerun_ucbv": mean, "threshold": need, "gd_fixed": gd,
                      "decisions": [d["decision"] for d in plan.diagnostics]}
    return ok, "; ".join(parts), metrics


@suite("rerun-ucbv-scaling", 600.0)
def rerun_ucbv_scaling():
    horizons, reps = (1000, 4000, 16000), 50
    means = []
    for T in horizons:
        finals = []
        for rep in range(reps):
            seq = gen_drifting(2, T, 4.0, 1.0 / 16.0, stream(rep, ENV_STREAM))
            finals.append(run_on_sequence({"name": "rerun-ucbv"}, seq, rep, rep).final)
        means.append(float(np.mean(finals)))
    slope = float(np.polyfit(np.log(horizons), np.log(means), 1)[0])
    linear_ok = all(m <= 0.5 * T for m, T in zip(means, horizons))
    ok = 0.45 <= slope <= 0.85 and linear_ok
    shown = ", ".join(f"T={T}: {m:.1f}" for T, m in zip(horizons, means))
    return ok, f"log-log slope {slope:.3f} (window [0.45, 0.85]); mean regret {shown}", \
        {"slope": slope, "means": dict(zip(horizons, means))}


@suite("prod-static-envelope", 120.0)
def prod_static_envelope():
    runs = _static_runs()
    ratios = [reg / env for _, reg, env, _, _ in runs]
    ok = all(r <= 1.0 for r in ratios)
    return ok, f"max regret/envelope = {max(ratios):.3f} over {len(runs)} sequences", {"ratios": ratios}


@suite("sleeping-identities", 60.0)
def sleeping_identities():
    runs = _sleeping_identity_runs()
    ident = max(c.max_identity_err for c, _ in runs)
    lemma6 = max(max(c.max_lemma6_err, c.max_sleeping_regret) for c, _ in runs)
    ok = ident <= 1e-9 and lemma6 <= 1e-9
    return ok, f"max |<p~,l~> - <p,l>| = {ident:.2e}; max sleeping-regret error = {lemma6:.2e} over 10 runs", \
        {"identity": ident, "lemma6": lemma6}


@suite("prod-sleeping-dynamic", 300.0)
def prod_sleeping_dynamic():
    (_, r2, _), (_, r8, _) = _sleeping_dynamic_runs()
    bound = 3.0 * math.log(2 * 8000)
    diff = r8 - r2
    return diff <= bound, f"R(8000) - R(2000) = {diff:.3f} (<= {bound:.3f})", {"diff": diff, "bound": bound}


@suite("drifting-lowerbound-budgets", 300.0)
def drifting_lowerbound_budgets():
    T, K, V, lam = 4096, 2, 1.0, 64.0
    factory = agent_factory("uniform", K, T, None)
    seq, env = adversary.build_drifting_lowerbound(factory, T, K, V, lam, 50, stream(10, 5))
    p = compute_params(seq)
    c = adversary.lemma1_conditions(env.sigma, env.epsilon)
    pair_ok = (abs(c["mean_gap"] - env.epsilon) <= 1e-9 and max(c["var_p"], c["var_q"]) <= env.sigma ** 2 + 1e-9
               and c["ln2_kl"] <= c["kl_bound"] + 1e-9)
    finals = [run_bandit(factory(stream(s, 2)), seq, stream(s, 1)).final for s in range(100)]
    mean = float(np.mean(finals))
    need = env.epsilon * T / 8.0
    ok = p.variance_budget <= lam and p.drift <= V and pair_ok and mean >= need
    return ok, (f"Lambda'={p.variance_budget:.3f} (<= {lam}), V'={p.drift:.4f} (<= {V}), pair ok={pair_ok}, "
                f"uniform regret {mean:.2f} (>= {need:.2f})"), \
        {"params": p, "B": env.interval_length, "sigma": env.sigma, "epsilon": env.epsilon, "regret": mean}


@suite("fixed-point-residual", None)
def fixed_point_residual():
    worst, count = 0.0, 0
    for _, _, _, checks, T in _static_runs():
        worst, count = max(worst, checks.max_residual * T), count + 1
    for checks, T in _sleeping_identity_runs():
        worst, count = max(worst, checks.max_residual * T), count + 1
    for T, _, checks in _sleeping_dynamic_runs():
        worst, count = max(worst, checks.max_residual * T), count + 1
    return worst <= 1.0, f"max residual * T = {worst:.3f} over {count} Prod runs", {"worst_scaled": worst}


class _SimplexGuard:
    """Wraps a full-information agent and records the worst simplex violation of its plays."""

    def __init__(self, agent) -> None:
        self.agent, self.worst = agent, 0.0
        self.feedback = "full"
        self.T, self.K = getattr(agent, "T", None), getattr(agent, "K", None)

    def play(self):
        p = self.agent.play()
        self.worst = max(self.worst, abs(float(p.sum()) - 1.0), float(-p.min()))
        return p

    def update(self, loss):
        self.agent.update(loss)


@suite("invariant-suite", 120.0)
def invariant_suite():
    checks: dict[str, bool] = {}
    rng = stream(12, 7)

    # Monotone traces (RegretTrace rejects violations) and simplex plays for every agent.
    simplex_worst = 0.0
    seq = gen_switching(3, 400, 4, 0.3, stream(12, ENV_STREAM), sigma2=0.05)
    params = compute_params(seq)
    for name in ("rerun-ucbv", "uniform", "fixed-arm", "gd-fixed", "gd-adaptive", "prod", "prod-sleeping"):
        agent = make_agent(name, 3, 400, params, stream(1, 2))
        if getattr(agent, "feedback", "bandit") == "full":
            guard = _SimplexGuard(agent)
            run_fullinfo(guard, seq, stream(1, 1))
            simplex_worst = max(simplex_worst, guard.worst)
        else:
            run_bandit(agent, seq, stream(1, 1))
    checks["trace monotonicity"] = True
    checks["simplex validity"] = simplex_worst <= 1e-9

    # Prod per-step identities on a fresh batch (strict agents raise on violation).
    prod_ok = True
    for i in range(4):
        s = gen_drifting(2 + i, 300, 2.0, 0.05, stream(300 + i, ENV_STREAM))
        for agent in (OptimisticProd(2 + i, 300), SleepingProd(2 + i, 300)):
            run_fullinfo(agent, s, stream(300 + i, 1))
            ck = agent.checks
            prod_ok &= ck.max_sum_pr <= 1e-9 and ck.eta_monotone and ck.max_rm_excess <= 1e-12
    checks["sum p r = 0, eta monotone, (r - m) bound"] = prod_ok

    # Welford against the pairwise form.
    err = 0.0
    for _ in range(1000):
        xs = rng.random(int(rng.integers(2, 51)))
        err = max(err, abs(RunningStats.from_samples(xs).empirical_variance() - pairwise_variance(xs)))
    checks["pairwise-variance identity"] = err <= 1e-9

    # Asleep experts keep their initial bytes until they wake; lazy and explicit pools agree.
    K, T = 3, 120
    s = gen_switching(K, T, 3, 0.4, stream(13, ENV_STREAM), sigma2=0.05)
    ell = sample_matrix(s, stream(13, 1))
    explicit, lazy = SleepingProd(K, T, lazy=False), SleepingProd(K, T)
    init = explicit.state.log_w.tobytes(), explicit.state.eta.tobytes(), explicit.state.c.tobytes()
    immutable, agree = True, 0.0
    for t in range(T):
        pe, pl = explicit.play(), lazy.play()
        agree = max(agree, float(np.abs(pe - pl).max()))
        explicit.update(ell[t])
        lazy.update(ell[t])
        n = K * (t + 1)
        st = explicit.state
        immutable &= (st.log_w[n:].tobytes() == init[0][8 * n:] and st.eta[n:].tobytes() == init[1][8 * n:]
                      and st.c[n:].tobytes() == init[2][8 * n:])
    checks["asleep-expert immutability"] = immutable
    checks["lazy pool matches explicit pool"] = agree <= 1e-9

    # CSV bytes are a function of (config, seed).
    cfg = ExperimentConfig(env={"kind": "drifting", "drift": 1.5, "sigma2": 0.05}, alg={"name": "rerun-ucbv"},
                           T=300, K=2, replications=3, base_seed=5)
    a, b = traces_csv(run_experiment(cfg)), traces_csv(run_experiment(copy.deepcopy(cfg)))
    checks["CSV determinism"] = a == b

    failed = [k for k, v in checks.items() if not v]
    detail = f"{len(checks) - len(failed)}/{len(checks)} invariants hold"
    if failed:
        detail += f"; failed: {', '.join(failed)}"
    return not failed, detail, {"checks": checks, "simplex_worst": simplex_worst, "lazy_vs_explicit": agree}
