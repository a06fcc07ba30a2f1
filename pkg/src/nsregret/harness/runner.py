"""Simulation loops that turn an agent and a sequence into a regret trace.

Regret is dynamic pseudo-regret: each step is charged the gap between the
true mean of what was played and the smallest true mean at that step.
Sampled losses only ever reach the agent, never the comparator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from ..envmodel import DistributionSequence, sample_matrix

__all__ = ["RegretTrace", "run_bandit", "run_fullinfo", "stream", "LOSS_STREAM", "ALG_STREAM"]

LOSS_STREAM = 1
ALG_STREAM = 2


def stream(seed: int, tag: int) -> np.random.Generator:
    """Independent generator for ``(seed, purpose tag)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tag)]))


@dataclass
class RegretTrace:
    cum_regret: np.ndarray
    alg: str = ""
    env: str = ""
    seed: int = 0
    rep: int = 0
    plays: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.cum_regret = np.asarray(self.cum_regret, dtype=float)
        if np.any(np.diff(self.cum_regret) < 0.0) or (self.cum_regret.size and self.cum_regret[0] < 0):
            raise AssertionError("cumulative pseudo-regret must be nondecreasing")

    def __len__(self) -> int:
        return self.cum_regret.size

    @property
    def final(self) -> float:
        return float(self.cum_regret[-1]) if self.cum_regret.size else 0.0


def _gaps(seq: DistributionSequence) -> np.ndarray:
    mu = seq.means
    return mu - mu.min(axis=1, keepdims=True)


def _check_horizon(agent, seq: DistributionSequence) -> None:
    T = getattr(agent, "T", None) or getattr(getattr(agent, "config", None), "horizon", None)
    if T is not None and T != seq.horizon:
        raise ValueError(f"agent horizon {T} does not match sequence horizon {seq.horizon}")
    K = getattr(agent, "K", None) or getattr(getattr(agent, "config", None), "arms", None)
    if K is not None and K != seq.arms:
        raise ValueError(f"agent has {K} arms, sequence has {seq.arms}")


def run_bandit(agent, seq: DistributionSequence, rng: np.random.Generator, *,
               alg: str = "", env: str = "", seed: int = 0, rep: int = 0,
               record_plays: bool = False) -> RegretTrace:
    """Bandit feedback: only the chosen arm's sampled loss is revealed."""
    _check_horizon(agent, seq)
    losses = sample_matrix(seq, rng).tolist()
    gaps = _gaps(seq).tolist()
    select, observe = agent.select, agent.observe
    inc = [0.0] * seq.horizon
    plays = [0] * seq.horizon
    for t in range(seq.horizon):
        a = select()
        inc[t] = gaps[t][a]
        plays[t] = a
        observe(a, losses[t][a])
    return RegretTrace(np.fromiter(accumulate(inc), float, seq.horizon), alg, env, seed, rep,
                       np.array(plays) if record_plays else None)


def run_fullinfo(agent, seq: DistributionSequence, rng: np.random.Generator, *,
                 alg: str = "", env: str = "", seed: int = 0, rep: int = 0) -> RegretTrace:
    """Full feedback: the whole sampled loss vector is revealed.

    The per-step charge is the exact expectation ``<p_t, mu_t> - min mu_t``
    over the agent's own randomisation.
    """
    _check_horizon(agent, seq)
    losses = sample_matrix(seq, rng)
    gaps = _gaps(seq)
    inc = np.empty(seq.horizon)
    for t in range(seq.horizon):
        p = agent.play()
        inc[t] = float(p @ gaps[t])
        agent.update(losses[t])
    return RegretTrace(np.cumsum(inc), alg, env, seed, rep)
