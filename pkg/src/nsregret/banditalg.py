"""Rerun-UCB-V and trivial bandit baselines.

Rerun-UCB-V splits the horizon into blocks of ``B`` steps and runs a fresh
UCB-V instance in each block, choosing the arm with the smallest
optimistic index ``mean - radius`` where the radius is the
empirical-Bernstein ``rho`` (radius 1 for arms with fewer than two samples,
mean 0 for unplayed arms).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .bernstein import RunningStats

logger = logging.getLogger(__name__)

__all__ = [
    "RerunUcbVConfig",
    "UcbVState",
    "RerunUcbV",
    "UniformRandom",
    "FixedArm",
    "block_length",
    "select_arm",
    "observe",
    "run_baseline",
]


def _round_clamp(x: float, T: int) -> int:
    return int(min(max(math.floor(x + 0.5), 1), T))


def block_length(K: int, T: int, drift: float, variance: float) -> int:
    """Restart period: cube-root branch when ``K * Lambda^2 >= T * V``, square-root branch otherwise.

    Rounded to the nearest integer and clamped to ``[1, T]``.  Zero drift
    means restarts are pointless, so ``V <= 0`` yields a single block.
    """
    if T < 1:
        raise ValueError("horizon must be positive")
    if drift <= 0.0:
        logger.warning("drift estimate %r <= 0; using a single block (B = T)", drift)
        return T
    if K * variance ** 2 >= T * drift:
        raw = (K * K * variance * T / drift ** 2) ** (1.0 / 3.0)
    else:
        raw = math.sqrt(K * T / drift)
    return _round_clamp(raw, T)


@dataclass
class RerunUcbVConfig:
    arms: int
    horizon: int
    block_length: int
    delta: float | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.block_length <= self.horizon:
            raise ValueError(f"block length {self.block_length} outside [1, {self.horizon}]")
        if self.delta is None:
            self.delta = 1.0 / (self.arms * self.horizon)
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta={self.delta} must lie in (0, 1)")


@dataclass
class UcbVState:
    stats: list[RunningStats]
    block_length: int
    step_in_block: int = 0

    @classmethod
    def fresh(cls, K: int, block_length: int) -> "UcbVState":
        return cls([RunningStats() for _ in range(K)], block_length)


def _index(s: RunningStats, log_term: float) -> float:
    if s.n == 0:
        return -1.0
    if s.n == 1:
        return s.mean - 1.0
    v = s.m2 / (s.n - 1)
    return s.mean - (math.sqrt(2.0 * v * log_term / s.n) + 7.0 * log_term / (3.0 * (s.n - 1)))


def arm_indices(state: UcbVState, delta: float) -> list[float]:
    log_term = math.log(2.0 / delta)
    return [_index(s, log_term) for s in state.stats]


def select_arm(state: UcbVState, delta: float) -> int:
    """Argmin of the optimistic indices; lowest arm wins ties."""
    idx = arm_indices(state, delta)
    best, best_val = 0, idx[0]
    for i in range(1, len(idx)):
        if idx[i] < best_val:
            best, best_val = i, idx[i]
    return best


def observe(state: UcbVState, arm: int, loss: float) -> UcbVState:
    """Fold ``loss`` into ``arm``'s statistics; wipe everything at a block boundary."""
    state.stats[arm].push(loss)
    state.step_in_block += 1
    if state.step_in_block >= state.block_length:
        state.stats = [RunningStats() for _ in state.stats]
        state.step_in_block = 0
    return state


class RerunUcbV:
    """Bandit agent: ``select()`` then ``observe(arm, loss)`` once per step."""

    feedback = "bandit"

    def __init__(self, config: RerunUcbVConfig) -> None:
        self.config = config
        self.state = UcbVState.fresh(config.arms, config.block_length)
        self._log_term = math.log(2.0 / config.delta)

    @classmethod
    def from_params(cls, K: int, T: int, drift: float, variance: float,
                    delta: float | None = None, block: int | None = None) -> "RerunUcbV":
        B = block if block is not None else block_length(K, T, drift, variance)
        return cls(RerunUcbVConfig(K, T, B, delta))

    def select(self) -> int:
        stats = self.state.stats
        best, best_val = 0, _index(stats[0], self._log_term)
        for i in range(1, len(stats)):
            v = _index(stats[i], self._log_term)
            if v < best_val:
                best, best_val = i, v
        return best

    def observe(self, arm: int, loss: float) -> None:
        observe(self.state, arm, loss)


class UniformRandom:
    """Plays a uniformly random arm (bandit) or the uniform distribution (full information)."""

    feedback = "bandit"

    def __init__(self, K: int, rng: np.random.Generator) -> None:
        self.K = K
        self.rng = rng
        self._p = np.full(K, 1.0 / K)

    def select(self) -> int:
        return int(self.rng.integers(self.K))

    def observe(self, arm: int, loss: float) -> None:
        pass

    def play(self) -> np.ndarray:
        return self._p

    def update(self, loss) -> None:
        pass


class FixedArm:
    """Always plays ``arm``."""

    feedback = "bandit"

    def __init__(self, K: int, arm: int) -> None:
        if not 0 <= arm < K:
            raise ValueError(f"arm {arm} outside [0, {K})")
        self.K, self.arm = K, arm
        self._p = np.zeros(K)
        self._p[arm] = 1.0

    def select(self) -> int:
        return self.arm

    def observe(self, arm: int, loss: float) -> None:
        pass

    def play(self) -> np.ndarray:
        return self._p

    def update(self, loss) -> None:
        pass


def run_baseline(policy: str, seq, rng: np.random.Generator, arm: int = 0):
    """Play ``"uniform-random"`` or ``"fixed-arm"`` on ``seq`` with bandit feedback."""
    from .harness.runner import run_bandit

    if policy in ("uniform-random", "uniform"):
        agent = UniformRandom(seq.arms, np.random.default_rng(rng.integers(2**63)))
    elif policy in ("fixed-arm", "fixed"):
        agent = FixedArm(seq.arms, arm)
    else:
        raise ValueError(f"unknown baseline policy {policy!r}")
    return run_bandit(agent, seq, rng, alg=policy)
