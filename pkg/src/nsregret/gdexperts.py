"""Optimistic gradient descent over the probability simplex.

Each step plays ``x_hat = argmin <l_{t-1}, x> + ||x - x_t||^2 / eta`` and then
moves the mirror point to ``x_{t+1} = argmin <l_t, x> + ||x - x_t||^2 / eta``.
Both argmins are a gradient step of size ``eta / 2`` followed by Euclidean
projection onto the simplex.

Two learning-rate modes are supported:

* fixed ``eta`` for the whole horizon (see :func:`theorem3_eta`);
* adaptive, restarted every ``B`` steps: ``eta_t = 1 / sqrt(4 D_t)`` with
  ``D_t`` the squared loss deviations accumulated since the interval start,
  and ``eta = inf`` while ``D_t == 0``.  An infinite rate plays the vertex
  minimising the reference loss.  Only the rate restarts; the mirror point
  carries over.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "project_simplex",
    "GdState",
    "OptimisticGD",
    "play",
    "update",
    "theorem3_eta",
    "theorem4_block",
]


def project_simplex(y) -> np.ndarray:
    """Euclidean projection of ``y`` onto the probability simplex (sort-and-threshold)."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("project_simplex expects a non-empty vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("project_simplex expects finite input")
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, y.size + 1)
    k = ks[u - css / ks > 0][-1]
    theta = css[k - 1] / k
    x = np.maximum(y - theta, 0.0)
    return x / x.sum()


def _vertex(loss: np.ndarray) -> np.ndarray:
    x = np.zeros(loss.size)
    x[int(np.argmin(loss))] = 1.0
    return x


@dataclass
class GdState:
    x: np.ndarray
    last_loss: np.ndarray
    eta: float | None  # None selects the adaptive mode
    block_length: int
    dev_accum: float = 0.0
    step: int = 0  # completed steps

    @classmethod
    def initial(cls, K: int, eta: float | None = None, block_length: int | None = None) -> "GdState":
        B = block_length if block_length is not None else 2**62
        return cls(np.full(K, 1.0 / K), np.zeros(K), eta, B)

    @property
    def adaptive(self) -> bool:
        return self.eta is None

    def current_eta(self) -> float:
        """Learning rate for the coming step; ``math.inf`` is the infinite-rate sentinel."""
        if not self.adaptive:
            return self.eta
        if self.dev_accum == 0.0:
            return math.inf
        return 1.0 / math.sqrt(4.0 * self.dev_accum)


def _step(x: np.ndarray, loss: np.ndarray, eta: float) -> np.ndarray:
    if math.isinf(eta):
        return _vertex(loss)
    return project_simplex(x - 0.5 * eta * loss)


def play(state: GdState) -> np.ndarray:
    return _step(state.x, state.last_loss, state.current_eta())


def update(state: GdState, loss) -> GdState:
    loss = np.asarray(loss, dtype=float)
    if loss.shape != state.x.shape:
        raise ValueError("loss vector has the wrong dimension")
    if np.any(loss < 0.0) or np.any(loss > 1.0):
        raise ValueError("losses must lie in [0, 1]")
    eta = state.current_eta()
    state.x = _step(state.x, loss, eta)
    if state.adaptive:
        d = loss - state.last_loss
        state.dev_accum += float(d @ d)
    state.last_loss = loss
    state.step += 1
    if state.adaptive and state.step % state.block_length == 0:
        state.dev_accum = 0.0
    return state


class OptimisticGD:
    """Full-information agent: ``play()`` returns a simplex point, ``update(loss)`` follows."""

    feedback = "full"

    def __init__(self, K: int, eta: float | None = None, block_length: int | None = None) -> None:
        if eta is not None and not eta > 0:
            raise ValueError("a fixed learning rate must be positive")
        self.state = GdState.initial(K, eta, block_length)

    def play(self) -> np.ndarray:
        return play(self.state)

    def update(self, loss) -> None:
        update(self.state, loss)


def theorem3_eta(gamma: float, variance: float, K: int) -> float:
    """Fixed rate ``sqrt(gamma / (variance + K * gamma))`` for switching sequences."""
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    return math.sqrt(gamma / (variance + K * gamma))


def theorem4_block(variance: float, drift: float, T: int) -> int:
    """Restart period ``cbrt(variance * T / drift^2)`` when ``variance * T > drift^2``, else 1."""
    if drift <= 0.0:
        return T
    if variance * T > drift ** 2:
        raw = (variance * T / drift ** 2) ** (1.0 / 3.0)
        return int(min(max(math.floor(raw + 0.5), 1), T))
    return 1
