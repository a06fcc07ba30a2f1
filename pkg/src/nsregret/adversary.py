"""Executable lower-bound constructions.

Each builder returns an ordinary :class:`DistributionSequence` that can be
replayed against any agent, plus a diagnostics record.  The two adaptive
builders choose each interval's distributions from Monte-Carlo estimates of
how the target algorithm behaves *given the already-fixed prefix*.  They
keep ``mc_runs`` independent particles (agent copies that have lived
through the materialised prefix) and probe each candidate interval on deep
copies of those particles.
"""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .envmodel import (
    ArmDistribution,
    DistributionSequence,
    kl_two_point,
    lemma1_pair,
    partition,
)

logger = logging.getLogger(__name__)

__all__ = [
    "SwitchingAdversaryPlan",
    "DriftingLowerBoundEnv",
    "build_switching_adversary",
    "build_drifting_lowerbound",
    "build_fullinfo_gamma_lowerbound",
    "build_fullinfo_variance_lowerbound",
    "LOSS_HOLD",
    "LOSS_SWITCH",
    "lemma1_conditions",
]

LOSS_HOLD = (0.5, 1.0)    # arm 0 optimal
LOSS_SWITCH = (0.5, 0.0)  # arm 1 optimal

AgentFactory = Callable[[np.random.Generator], object]


def _is_full(agent) -> bool:
    return getattr(agent, "feedback", "bandit") == "full"


def _live(agent, losses: np.ndarray, arm: int) -> np.ndarray:
    """Run ``agent`` through ``losses`` (rows = steps); per-step (expected) plays of ``arm``."""
    out = np.empty(losses.shape[0])
    if _is_full(agent):
        for t, row in enumerate(losses):
            out[t] = agent.play()[arm]
            agent.update(row)
    else:
        rows = losses.tolist()
        for t, row in enumerate(rows):
            a = agent.select()
            out[t] = 1.0 if a == arm else 0.0
            agent.observe(a, row[a])
    return out


def _half_width(samples: np.ndarray) -> float:
    if samples.size < 2:
        return math.inf
    return 1.96 * float(samples.std(ddof=1)) / math.sqrt(samples.size)


@dataclass
class SwitchingAdversaryPlan:
    """Per-interval decisions of the switching adversary."""

    interval_lengths: list[int]
    block_lengths: list[int]
    switch_offsets: list[int | None] = field(default_factory=list)  # None = hold throughout
    diagnostics: list[dict] = field(default_factory=list)

    def segments(self) -> int:
        return sum(1 if s is None or s == 0 else 2 for s in self.switch_offsets)


def build_switching_adversary(alg_factory: AgentFactory, T: int, gamma: int, mc_runs: int,
                              rng: np.random.Generator) -> tuple[DistributionSequence, SwitchingAdversaryPlan]:
    """Two-arm deterministic sequence that forces regret of order sqrt(gamma T).

    The horizon is cut into ``gamma // 2`` intervals.  Each interval starts
    on ``(1/2, 1)``.  If the target is estimated to play arm 1 at least
    ``sqrt(B) / 2`` times in the interval under that vector, it is kept;
    otherwise the interval is cut into blocks of ``sqrt(B)`` steps and the
    loss switches to ``(1/2, 0)`` at the start of the block where the target
    is least likely to look at arm 1.
    """
    if gamma < 2:
        raise ValueError("the switching construction needs gamma >= 2")
    if mc_runs < 1:
        raise ValueError("mc_runs must be positive")
    if mc_runs < 50:
        logger.warning("mc_runs=%d is below 50; threshold decisions may be noisy", mc_runs)
    n_int = gamma // 2
    if gamma % 2:
        logger.info("odd gamma=%d: using %d intervals", gamma, n_int)
    sizes = partition(T, n_int)
    hold, switch = np.array(LOSS_HOLD), np.array(LOSS_SWITCH)
    means = np.empty((T, 2))
    seeds = rng.integers(2**63, size=mc_runs)
    particles = [alg_factory(np.random.default_rng(int(s))) for s in seeds]
    plan = SwitchingAdversaryPlan(list(sizes), [])

    start = 0
    for j, B in enumerate(sizes):
        held = np.tile(hold, (B, 1))
        counts = np.vstack([_live(copy.deepcopy(a), held, 1) for a in particles])
        n2 = counts.sum(axis=1)
        n2_hat, hw = float(n2.mean()), _half_width(n2)
        threshold = math.sqrt(B) / 2.0
        b = max(1, int(math.floor(math.sqrt(B) + 0.5)))
        n_blocks = math.ceil(B / b)
        per_block = np.array([counts[:, k * b:(k + 1) * b].sum(axis=1).mean() for k in range(n_blocks)])
        if abs(n2_hat - threshold) < hw:
            logger.warning("interval %d: N2 estimate %.3f within %.3f of threshold %.3f",
                           j, n2_hat, hw, threshold)
        interval = held.copy()
        if n2_hat >= threshold:
            offset = None
        else:
            k = int(np.argmin(per_block))
            if per_block[k] >= 0.5:
                logger.warning("interval %d: no block with estimated arm-1 count < 1/2", j)
            offset = k * b
            interval[offset:] = switch
        means[start:start + B] = interval
        for a in particles:
            _live(a, interval, 1)
        plan.block_lengths.append(b)
        plan.switch_offsets.append(offset)
        plan.diagnostics.append({
            "interval": j,
            "start": start + 1,
            "length": B,
            "block_length": b,
            "n2_hat": n2_hat,
            "n2_half_width": hw,
            "threshold": threshold,
            "decision": "hold" if offset is None else "switch",
            "switch_step": None if offset is None else start + offset + 1,
            "block_counts_hat": per_block.tolist(),
        })
        start += B
    return DistributionSequence.from_point_means(means), plan


@dataclass
class DriftingLowerBoundEnv:
    """Parameters of the drifting construction for given (T, K, V, Lambda)."""

    T: int
    K: int
    interval_length: int
    sigma: float
    epsilon: float
    chosen_arms: list[int] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)

    @classmethod
    def design(cls, T: int, K: int, drift: float, variance: float) -> "DriftingLowerBoundEnv":
        """Interval length ``cbrt(Lambda T / (32 K V^2))``, ``sigma = sqrt(Lambda / (4 K T))``.

        The gap is ``(V - sigma) B / T`` rather than ``V B / T``: the first
        mean vector already costs ``sigma`` of drift against the all-zero
        start, and the remaining budget pays for at most ``T / B`` switches.
        """
        if variance * T < 32 * K * drift ** 2:
            raise ValueError("needs Lambda * T >= 32 K V^2")
        raw = (variance * T / (32.0 * K * drift ** 2)) ** (1.0 / 3.0)
        B = int(min(max(math.floor(raw + 0.5), 1), T))
        sigma = math.sqrt(variance / (4.0 * K * T))
        if sigma > 0.5:
            raise ValueError(f"sigma={sigma} exceeds 1/2; variance budget too large for T")
        if drift <= sigma:
            raise ValueError(f"drift budget {drift} cannot exceed the initial cost sigma={sigma}")
        eps = (drift - sigma) * B / T
        if eps > sigma / math.sqrt(2.0):
            raise ValueError("gap exceeds sigma/sqrt(2)")
        return cls(T, K, B, sigma, eps)

    def pair(self) -> tuple[ArmDistribution, ArmDistribution]:
        return lemma1_pair(self.sigma, self.epsilon)

    def interval_arrays(self, best: int, length: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p, q = self.pair()
        probs = np.full((length, self.K), q.p_high)
        probs[:, best] = p.p_high
        return np.zeros((length, self.K)), np.full((length, self.K), q.high), probs


def build_drifting_lowerbound(alg_factory: AgentFactory, T: int, K: int, V: float, Lam: float,
                              mc_runs: int, rng: np.random.Generator
                              ) -> tuple[DistributionSequence, DriftingLowerBoundEnv]:
    """Pick, interval by interval, the arm whose turn as the optimal arm the target notices least.

    Arm ``i*`` gets the lower-mean distribution P and every other arm gets Q.
    ``i*`` minimises the Monte-Carlo estimate of ``E_i[N_i]``, the expected
    number of plays of arm ``i`` in the interval when ``i`` is optimal.
    """
    if mc_runs < 1:
        raise ValueError("mc_runs must be positive")
    if mc_runs < 50:
        logger.warning("mc_runs=%d is below 50; arm choices may be noisy", mc_runs)
    env = DriftingLowerBoundEnv.design(T, K, V, Lam)
    sizes = partition(T, max(1, T // env.interval_length))
    seeds = rng.integers(2**63, size=(mc_runs, 2))
    particles = [(alg_factory(np.random.default_rng(int(a))), np.random.default_rng(int(b)))
                 for a, b in seeds]
    low, high, prob = [], [], []
    start = 0
    for j, B in enumerate(sizes):
        estimates, widths, probes = [], [], []
        for i in range(K):
            lo_i, hi_i, p_i = env.interval_arrays(i, B)
            counts, runs = np.empty(mc_runs), []
            for r, (agent, loss_rng) in enumerate(particles):
                agent, loss_rng = copy.deepcopy(agent), copy.deepcopy(loss_rng)
                u = loss_rng.random((B, K))
                losses = np.where(u < p_i, hi_i, lo_i)
                counts[r] = _live(agent, losses, i).sum()
                runs.append((agent, loss_rng))
            estimates.append(float(counts.mean()))
            widths.append(_half_width(counts))
            probes.append(runs)
        best = int(np.argmin(estimates))
        particles = probes[best]
        lo_b, hi_b, p_b = env.interval_arrays(best, B)
        low.append(lo_b)
        high.append(hi_b)
        prob.append(p_b)
        env.chosen_arms.append(best)
        env.diagnostics.append({
            "interval": j,
            "start": start + 1,
            "length": B,
            "chosen_arm": best,
            "n_hat": estimates,
            "n_half_width": widths,
            "bound_3B_over_4": 0.75 * B,
        })
        start += B
    seq = DistributionSequence.from_arrays(np.vstack(low), np.vstack(high), np.vstack(prob))
    return seq, env


def lemma1_conditions(sigma: float, epsilon: float) -> dict:
    """Mean gap, variances and the scaled KL of the pair at (sigma, epsilon)."""
    p, q = lemma1_pair(sigma, epsilon)
    return {
        "mean_gap": q.mean() - p.mean(),
        "var_p": p.variance(),
        "var_q": q.variance(),
        "ln2_kl": math.log(2.0) * kl_two_point(q, p),
        "kl_bound": epsilon ** 2 / sigma ** 2,
    }


def build_fullinfo_gamma_lowerbound(K: int, T: int, gamma: int,
                                    rng: np.random.Generator) -> DistributionSequence:
    """First ``gamma`` steps draw uniformly among the K one-hot-zero vectors; the last one is kept."""
    if not 1 <= gamma <= T:
        raise ValueError(f"gamma={gamma} must lie in [1, T={T}]")
    picks = rng.integers(K, size=gamma)
    means = np.ones((T, K))
    means[np.arange(gamma), picks] = 0.0
    means[gamma:] = means[gamma - 1]
    return DistributionSequence.from_point_means(means)


def build_fullinfo_variance_lowerbound(K: int, T: int, gamma: int, Lam: float,
                                       rng: np.random.Generator) -> DistributionSequence:
    """Gamma intervals, each opening with a noisy stationary prefix that hides its best arm.

    Prefix cells are two-point on {0, 1} with probability ``1/2 -+ eps`` of
    the upper point (``eps = 1 / (4 sqrt(Lambda / gamma))``), the hidden best
    arm getting the minus sign.  The prefix length ``floor(4 Lambda / (gamma K))``
    keeps the total variance within ``Lambda``.  The rest of each interval is
    the zero-variance vector with the same means.
    """
    if not Lam > gamma:
        raise ValueError("needs Lambda > gamma")
    if Lam > T:
        raise ValueError("needs Lambda <= T")
    sizes = partition(T, gamma)
    prefix = int(math.floor(Lam / (gamma * K / 4.0)))
    prefix = min(prefix, min(sizes))
    if prefix < 1:
        raise ValueError("variance budget too small for a non-empty noisy prefix")
    eps = 0.25 / math.sqrt(Lam / gamma)
    low = np.zeros((T, K))
    high = np.ones((T, K))
    prob = np.empty((T, K))
    point = np.zeros((T, K), dtype=bool)
    start = 0
    for size in sizes:
        best = int(rng.integers(K))
        p_row = np.full(K, 0.5 + eps)
        p_row[best] = 0.5 - eps
        prob[start:start + size] = p_row
        rest = slice(start + prefix, start + size)
        low[rest] = p_row
        high[rest] = p_row
        prob[rest] = 0.0
        point[rest] = True
        start += size
    return DistributionSequence(low, high, prob, point)
