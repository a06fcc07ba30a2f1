"""Running per-arm statistics and the empirical-Bernstein confidence radius."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["RunningStats", "update", "rho", "pairwise_variance"]


@dataclass
class RunningStats:
    """Count, mean and sum of squared deviations of a stream of losses.

    ``empirical_variance`` is the unbiased sample variance, which equals the
    unordered pairwise form ``sum_{i<j} (x_i - x_j)^2 / (n (n - 1))``.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        """Welford update in place."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"loss {x!r} outside [0, 1]")
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)
        if self.m2 < 0.0:
            self.m2 = 0.0

    def empirical_variance(self) -> float:
        if self.n <= 1:
            return 0.0
        return self.m2 / (self.n - 1)

    @classmethod
    def from_samples(cls, xs) -> "RunningStats":
        s = cls()
        for x in xs:
            s.push(float(x))
        return s


def update(stats: RunningStats, x: float) -> RunningStats:
    """Return a new :class:`RunningStats` with ``x`` folded in."""
    out = RunningStats(stats.n, stats.mean, stats.m2)
    out.push(x)
    return out


def pairwise_variance(xs) -> float:
    """Brute-force ``sum_{i<j} (x_i - x_j)^2 / (n (n - 1))``; O(n^2)."""
    x = np.asarray(xs, dtype=float)
    n = x.size
    if n <= 1:
        return 0.0
    diff = x[:, None] - x[None, :]
    return float(np.triu(diff * diff, k=1).sum() / (n * (n - 1)))


def rho(n, v_hat, delta):
    """Empirical-Bernstein radius ``sqrt(2 V ln(2/delta) / n) + 7 ln(2/delta) / (3 (n - 1))``.

    Accepts scalars or numpy arrays (broadcast).  Requires ``n >= 2``; the
    ``n <= 1`` convention (radius 1) belongs to the caller.
    """
    if np.any(np.asarray(n) < 2):
        raise ValueError("rho needs at least two samples")
    if np.any(np.asarray(v_hat) < 0):
        raise ValueError("empirical variance must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta={delta} must lie in (0, 1)")
    log_term = math.log(2.0 / delta)
    if np.isscalar(n) and np.isscalar(v_hat):
        return math.sqrt(2.0 * v_hat * log_term / n) + 7.0 * log_term / (3.0 * (n - 1))
    n = np.asarray(n, dtype=float)
    return np.sqrt(2.0 * np.asarray(v_hat) * log_term / n) + 7.0 * log_term / (3.0 * (n - 1))
