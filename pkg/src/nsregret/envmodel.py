"""Non-stationary loss-distribution sequences.

A :class:`DistributionSequence` is a T x K grid of per-step, per-arm loss
distributions, each either a point mass or a two-point (Bernoulli-type)
distribution on [0, 1].  The grid is stored column-wise as numpy arrays so
that means, variances and whole-horizon loss draws are vectorised.

Conventions used throughout the package:

* steps are 1-based (``t = 1..T``) wherever a function takes a step index;
* arms are 0-based (arm ``0`` is the first arm).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ArmDistribution",
    "DistributionSequence",
    "NonStationarityParams",
    "compute_params",
    "sample_losses",
    "sample_matrix",
    "lemma1_pair",
    "kl_two_point",
    "gen_switching",
    "gen_drifting",
    "partition",
    "POINT_MASS",
    "TWO_POINT",
]

POINT_MASS = "PointMass"
TWO_POINT = "TwoPoint"


def _check_unit(name: str, x: float) -> None:
    if not (0.0 <= x <= 1.0) or math.isnan(x):
        raise ValueError(f"{name}={x!r} must lie in [0, 1]")


@dataclass(frozen=True)
class ArmDistribution:
    """Loss distribution of one arm at one step.

    A point mass is stored with ``low == high == value`` and ``p_high == 0``
    so that the two-point mean formula returns ``value`` exactly.
    """

    kind: str
    low: float
    high: float
    p_high: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (POINT_MASS, TWO_POINT):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        _check_unit("low", self.low)
        _check_unit("high", self.high)
        _check_unit("p_high", self.p_high)
        if self.low > self.high:
            raise ValueError(f"low={self.low} exceeds high={self.high}")
        if self.kind == POINT_MASS and (self.low != self.high or self.p_high != 0.0):
            raise ValueError("a point mass needs low == high and p_high == 0")

    @classmethod
    def point_mass(cls, value: float) -> "ArmDistribution":
        return cls(POINT_MASS, float(value), float(value), 0.0)

    @classmethod
    def two_point(cls, low: float, high: float, p_high: float) -> "ArmDistribution":
        return cls(TWO_POINT, float(low), float(high), float(p_high))

    @property
    def value(self) -> float:
        if self.kind != POINT_MASS:
            raise AttributeError("only a point mass has a single value")
        return self.low

    def mean(self) -> float:
        if self.kind == POINT_MASS:
            return self.low
        return self.p_high * self.high + (1.0 - self.p_high) * self.low

    def variance(self) -> float:
        if self.kind == POINT_MASS:
            return 0.0
        return self.p_high * (1.0 - self.p_high) * (self.high - self.low) ** 2

    def to_dict(self) -> dict:
        if self.kind == POINT_MASS:
            return {"kind": POINT_MASS, "value": self.low}
        return {"kind": TWO_POINT, "low": self.low, "high": self.high, "p_high": self.p_high}

    @classmethod
    def from_dict(cls, d: dict) -> "ArmDistribution":
        if d["kind"] == POINT_MASS:
            return cls.point_mass(d["value"])
        if d["kind"] == TWO_POINT:
            return cls.two_point(d["low"], d["high"], d["p_high"])
        raise ValueError(f"unknown distribution kind {d['kind']!r}")


class DistributionSequence:
    """Immutable T x K grid of :class:`ArmDistribution`.

    Build one with :meth:`from_grid`, :meth:`from_point_means` or
    :meth:`from_arrays`.  The raw arrays (``low``, ``high``, ``p_high``,
    ``is_point``) are read-only views; ``means`` and ``variances`` are
    computed once at construction.
    """

    def __init__(self, low, high, p_high, is_point) -> None:
        low = np.array(low, dtype=float)
        high = np.array(high, dtype=float)
        p_high = np.array(p_high, dtype=float)
        is_point = np.array(is_point, dtype=bool)
        if low.ndim != 2 or low.shape[0] < 1 or low.shape[1] < 1:
            raise ValueError("grid must be a non-empty T x K array")
        for arr in (high, p_high, is_point):
            if arr.shape != low.shape:
                raise ValueError("grid arrays must share one T x K shape")
        if np.any(low < 0) or np.any(high > 1) or np.any(low > high):
            raise ValueError("loss support must satisfy 0 <= low <= high <= 1")
        if np.any(p_high < 0) or np.any(p_high > 1):
            raise ValueError("p_high must lie in [0, 1]")
        if np.any(is_point & ((low != high) | (p_high != 0.0))):
            raise ValueError("point-mass cells need low == high and p_high == 0")

        self.low, self.high, self.p_high, self.is_point = low, high, p_high, is_point
        self.means = np.where(is_point, low, p_high * high + (1.0 - p_high) * low)
        self.variances = np.where(is_point, 0.0, p_high * (1.0 - p_high) * (high - low) ** 2)
        for arr in (self.low, self.high, self.p_high, self.is_point, self.means, self.variances):
            arr.flags.writeable = False

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_grid(cls, grid: Sequence[Sequence[ArmDistribution]]) -> "DistributionSequence":
        K = len(grid[0]) if grid else 0
        if any(len(row) != K for row in grid):
            raise ValueError("every row of the grid must have K entries")
        low = [[d.low for d in row] for row in grid]
        high = [[d.high for d in row] for row in grid]
        p = [[d.p_high for d in row] for row in grid]
        pt = [[d.kind == POINT_MASS for d in row] for row in grid]
        return cls(low, high, p, pt)

    @classmethod
    def from_point_means(cls, means) -> "DistributionSequence":
        m = np.array(means, dtype=float)
        return cls(m, m, np.zeros_like(m), np.ones(m.shape, dtype=bool))

    @classmethod
    def from_arrays(cls, low, high, p_high) -> "DistributionSequence":
        """Two-point cells everywhere (variance may still be zero)."""
        low = np.asarray(low, dtype=float)
        return cls(low, high, p_high, np.zeros(low.shape, dtype=bool))

    @classmethod
    def concat(cls, parts: Iterable["DistributionSequence"]) -> "DistributionSequence":
        parts = list(parts)
        return cls(
            np.vstack([p.low for p in parts]),
            np.vstack([p.high for p in parts]),
            np.vstack([p.p_high for p in parts]),
            np.vstack([p.is_point for p in parts]),
        )

    # -- accessors ----------------------------------------------------------
    @property
    def horizon(self) -> int:
        return self.low.shape[0]

    @property
    def arms(self) -> int:
        return self.low.shape[1]

    def _row(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise IndexError(f"step t={t} outside [1, {self.horizon}]")
        return t - 1

    def dist(self, t: int, arm: int) -> ArmDistribution:
        r = self._row(t)
        if self.is_point[r, arm]:
            return ArmDistribution.point_mass(self.low[r, arm])
        return ArmDistribution.two_point(self.low[r, arm], self.high[r, arm], self.p_high[r, arm])

    def mean_vector(self, t: int) -> np.ndarray:
        return self.means[self._row(t)]

    @property
    def grid(self) -> list[list[ArmDistribution]]:
        return [[self.dist(t, i) for i in range(self.arms)] for t in range(1, self.horizon + 1)]

    def __len__(self) -> int:
        return self.horizon

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DistributionSequence):
            return NotImplemented
        return all(
            np.array_equal(a, b)
            for a, b in (
                (self.low, other.low),
                (self.high, other.high),
                (self.p_high, other.p_high),
                (self.is_point, other.is_point),
            )
        )

    def __repr__(self) -> str:
        return f"DistributionSequence(T={self.horizon}, K={self.arms})"

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "K": self.arms,
            "T": self.horizon,
            "grid": [[d.to_dict() for d in row] for row in self.grid],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DistributionSequence":
        grid = [[ArmDistribution.from_dict(d) for d in row] for row in doc["grid"]]
        seq = cls.from_grid(grid)
        if seq.horizon != doc["T"] or seq.arms != doc["K"]:
            raise ValueError("declared T/K disagree with the grid shape")
        return seq

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "DistributionSequence":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class NonStationarityParams:
    """Switch count ``gamma``, total drift ``drift`` and variance budget."""

    gamma: int
    drift: float
    variance_budget: float


def compute_params(seq: DistributionSequence) -> NonStationarityParams:
    """Switch count, total drift and total variance of a sequence.

    The drift sum starts at t=1 against an all-zero mean vector, so it always
    includes ``max(mu_1)``.  Switches are detected by exact equality of the
    stored mean vectors.
    """
    mu = seq.means
    changed = np.any(mu[1:] != mu[:-1], axis=1)
    gamma = 1 + int(np.count_nonzero(changed))
    prev = np.vstack([np.zeros((1, seq.arms)), mu[:-1]])
    drift = float(np.abs(mu - prev).max(axis=1).sum())
    return NonStationarityParams(gamma, drift, float(seq.variances.sum()))


def sample_losses(seq: DistributionSequence, t: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the loss vector of step ``t`` (1-based), one independent draw per arm."""
    r = seq._row(t)
    u = rng.random(seq.arms)
    return np.where(u < seq.p_high[r], seq.high[r], seq.low[r])


def sample_matrix(seq: DistributionSequence, rng: np.random.Generator) -> np.ndarray:
    """Draw the whole T x K loss matrix at once.

    Entry (t, i) depends only on the generator state and its position in the
    grid, so a run that consumes this matrix is reproducible from its seed
    regardless of which entries it reads.
    """
    u = rng.random((seq.horizon, seq.arms))
    return np.where(u < seq.p_high, seq.high, seq.low)


def lemma1_pair(sigma: float, epsilon: float) -> tuple[ArmDistribution, ArmDistribution]:
    """The pair (P, Q) on {0, 2*sigma} with mean gap ``epsilon``.

    Q takes each support point with probability 1/2 (mean sigma, variance
    sigma^2); P puts mass (sigma - epsilon) / (2 sigma) on the upper point,
    so its mean is sigma - epsilon and its variance sigma^2 - epsilon^2.
    """
    if not 0.0 < sigma <= 0.5:
        raise ValueError(f"sigma={sigma} must lie in (0, 1/2]")
    if not 0.0 <= epsilon <= sigma / math.sqrt(2.0) * (1.0 + 1e-12):
        raise ValueError(f"epsilon={epsilon} must lie in [0, sigma/sqrt(2)]")
    top = 2.0 * sigma
    q = ArmDistribution.two_point(0.0, top, 0.5)
    p = ArmDistribution.two_point(0.0, top, (sigma - epsilon) / top)
    return p, q


def kl_two_point(q: ArmDistribution, p: ArmDistribution) -> float:
    """KL(q || p) in bits for two distributions on the same two-point support."""
    if q.low != p.low or q.high != p.high:
        raise ValueError("KL needs both distributions on the identical support")
    if q.low == q.high:
        return 0.0
    total = 0.0
    for qx, px in ((q.p_high, p.p_high), (1.0 - q.p_high, 1.0 - p.p_high)):
        if qx == 0.0:
            continue
        if px == 0.0:
            return math.inf
        total += qx * math.log2(qx / px)
    return max(total, 0.0)


def partition(total: int, parts: int) -> list[int]:
    """Split ``total`` steps into ``parts`` contiguous sizes; earliest parts get the remainder."""
    if not 1 <= parts <= total:
        raise ValueError(f"cannot split {total} steps into {parts} parts")
    base, extra = divmod(total, parts)
    return [base + 1 if j < extra else base for j in range(parts)]


def _centered(means: np.ndarray, sigma2: float) -> DistributionSequence:
    if sigma2 == 0.0:
        return DistributionSequence.from_point_means(means)
    s = math.sqrt(sigma2)
    return DistributionSequence.from_arrays(means - s, means + s, np.full(means.shape, 0.5))


def gen_switching(
    K: int,
    T: int,
    gamma: int,
    gap: float,
    rng: np.random.Generator,
    sigma2: float = 0.0,
) -> DistributionSequence:
    """Piecewise-stationary sequence with exactly ``gamma`` stationary intervals.

    In every interval one uniformly drawn arm has mean ``(1 - gap) / 2`` and
    the others ``(1 + gap) / 2``.  The best arm is redrawn until it differs
    from the previous interval's, so the switch count comes out exact.  With
    ``sigma2 > 0`` each cell is a symmetric two-point distribution of that
    variance around its mean.
    """
    if not 1 <= gamma <= T:
        raise ValueError(f"gamma={gamma} must lie in [1, T={T}]")
    if not 0.0 < gap < 1.0:
        raise ValueError(f"gap={gap} must lie in (0, 1)")
    if gamma > 1 and K < 2:
        raise ValueError("switching needs at least two arms")
    if not 0.0 <= sigma2 <= 0.25:
        raise ValueError("sigma2 must lie in [0, 1/4]")
    good, bad = (1.0 - gap) / 2.0, (1.0 + gap) / 2.0
    if math.sqrt(sigma2) > good:
        raise ValueError("sigma2 too large for this gap: support would leave [0, 1]")

    means = np.empty((T, K))
    start, prev = 0, -1
    for size in partition(T, gamma):
        best = int(rng.integers(K))
        while best == prev:
            best = int(rng.integers(K))
        means[start:start + size] = bad
        means[start:start + size, best] = good
        start, prev = start + size, best
    return _centered(means, sigma2)


def gen_drifting(
    K: int,
    T: int,
    drift_budget: float,
    variance_per_step: float,
    rng: np.random.Generator,
    initial_means: Sequence[float] | None = None,
) -> DistributionSequence:
    """Drifting sequence whose total drift lands in ``[0.9 V, V]``.

    Means start at ``initial_means`` (or a uniform draw kept below ``V / 2``)
    and then follow a random walk with uniform per-coordinate increments,
    rescaled so the increments' sup-norms sum to the budget left after the
    initial ``max(mu_1)`` term.  A coordinate that would leave the feasible
    box bounces (its increment is negated), which keeps every step's
    sup-norm exactly as drawn.  Each cell is a symmetric two-point
    distribution with variance ``variance_per_step`` (a point mass if 0).
    """
    V, sigma2 = float(drift_budget), float(variance_per_step)
    if not 0.0 <= sigma2 <= 0.25:
        raise ValueError("variance_per_step must lie in [0, 1/4]")
    s = math.sqrt(sigma2)
    lo, hi = s, 1.0 - s
    if initial_means is None:
        if V < lo:
            raise ValueError(f"drift budget {V} cannot cover the initial means (>= {lo})")
        cap = min(hi, max(lo, V / 2.0))
        mu1 = rng.uniform(lo, cap, size=K)
    else:
        mu1 = np.array(initial_means, dtype=float)
        if mu1.shape != (K,) or np.any(mu1 < lo) or np.any(mu1 > hi):
            raise ValueError(f"initial means must be K values in [{lo}, {hi}]")
    remaining = V - float(np.max(mu1))
    if remaining < 0.0:
        raise ValueError(f"drift budget {V} is below max(mu_1)={np.max(mu1)}")

    means = np.empty((T, K))
    means[0] = mu1
    if T > 1 and remaining > 0.0:
        steps = rng.uniform(-1.0, 1.0, size=(T - 1, K))
        norms = np.abs(steps).max(axis=1)
        scale = remaining * (1.0 - 1e-9) / norms.sum()
        steps *= scale
        if np.abs(steps).max() > hi - lo:
            raise ValueError("drift budget too large for the horizon: steps exceed the feasible box")
        m = mu1.copy()
        for t in range(1, T):
            d = steps[t - 1]
            nxt = m + d
            out = (nxt < lo) | (nxt > hi)
            if out.any():
                nxt[out] = m[out] - d[out]
            m = np.clip(nxt, lo, hi)
            means[t] = m
    else:
        means[1:] = mu1
    return _centered(means, sigma2)
