"""Optimistic Adapt-ML-Prod and its sleeping-experts extension.

The base learner keeps, for every expert, a log-weight, a learning rate
``eta_k = min(1/4, sqrt(ln N / (1 + c_k)))`` and the running sum ``c_k`` of
squared prediction errors ``(r_k - m_k)^2``, where ``r_k`` is the
instantaneous regret against expert ``k`` and ``m_k`` its optimistic estimate.
The estimate is ``m_k = <p_t, l_{t-1}> - l_{t-1,k}``; since ``p_t`` itself
depends on ``m``, the scalar ``alpha = <p_t, l_{t-1}>`` is found by bisection
on ``alpha -> <p_t(alpha), l_{t-1}> - alpha`` over [0, 1].

:class:`SleepingProd` runs the base learner over K*T experts ``(s, k)`` that
sleep before step ``s`` and then follow arm ``k``.  A sleeping expert has
zero instantaneous regret and zero estimate, so its state never moves; the
lazy mode therefore only materialises experts once they wake up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProdExpertState",
    "InvariantViolation",
    "fixed_point_alpha",
    "play",
    "update",
    "OptimisticProd",
    "SleepingProd",
]

ETA_CAP = 0.25


class InvariantViolation(RuntimeError):
    """A per-step identity that must hold by construction did not."""


def _eta(log_n: float, c) -> np.ndarray:
    return np.minimum(ETA_CAP, np.sqrt(log_n / (1.0 + c)))


def _logsumexp(a: np.ndarray) -> float:
    m = float(a.max())
    return m + math.log(float(np.exp(a - m).sum()))


@dataclass
class ProdExpertState:
    """Per-expert log-weights, learning rates and cumulative squared errors.

    ``log_n`` is the logarithm of the expert count used inside the
    learning-rate formula.  Weights live in log space.
    """

    log_w: np.ndarray
    eta: np.ndarray
    c: np.ndarray
    log_n: float

    @classmethod
    def initial(cls, n: int, log_n: float | None = None, log_w0: float | None = None) -> "ProdExpertState":
        log_n = math.log(n) if log_n is None else log_n
        log_w0 = -math.log(n) if log_w0 is None else log_w0
        c = np.zeros(n)
        return cls(np.full(n, log_w0), _eta(log_n, c), c, log_n)

    def logits(self, m: np.ndarray) -> np.ndarray:
        """Log of ``eta_k * w_k * exp(eta_k * m_k)``."""
        return np.log(self.eta) + self.log_w + self.eta * m

    def distribution(self, m: np.ndarray) -> np.ndarray:
        z = self.logits(m)
        z = np.exp(z - z.max())
        return z / z.sum()

    def apply(self, r: np.ndarray, m: np.ndarray) -> None:
        """Weight and learning-rate update given instantaneous regrets and estimates."""
        err = (r - m) ** 2
        self.c = self.c + err
        eta_new = _eta(self.log_n, self.c)
        self.log_w = (eta_new / self.eta) * (self.log_w + self.eta * r - self.eta ** 2 * err)
        self.eta = eta_new


def _bisect(base: np.ndarray, eta: np.ndarray, lvec: np.ndarray, tol: float) -> tuple[float, float]:
    """Root of ``g(a) = <softmax(base + eta (a - lvec)), lvec> - a`` on [0, 1].

    Returns ``(alpha, |g(alpha)|)``.  ``g(0) >= 0 >= g(1)`` brackets a root.
    """
    if lvec.max() == lvec.min():
        return float(lvec[0]), 0.0
    shifted = base - eta * lvec

    def g(a: float) -> float:
        z = shifted + eta * a
        w = np.exp(z - z.max())
        return float(w @ lvec / w.sum()) - a

    lo, hi = 0.0, 1.0
    max_iter = 2 + math.ceil(math.log2(1.0 / tol)) if tol < 1.0 else 2
    mid, gm = 0.5, g(0.5)
    for _ in range(max_iter + 60):
        if abs(gm) <= tol:
            break
        if gm > 0.0:
            lo = mid
        else:
            hi = mid
        mid = 0.5 * (lo + hi)
        gm = g(mid)
    return mid, abs(gm)


def fixed_point_alpha(state: ProdExpertState, prev_loss, tolerance: float) -> float:
    """``alpha`` with ``|<p(alpha), l_{t-1}> - alpha| <= tolerance``."""
    prev = np.asarray(prev_loss, dtype=float)
    if prev.max() == prev.min():
        return float(prev[0])
    alpha, _ = _bisect(np.log(state.eta) + state.log_w, state.eta, prev, tolerance)
    return alpha


def play(state: ProdExpertState, prev_loss, tolerance: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(p_t, m_t)`` for the plain learner."""
    prev = np.asarray(prev_loss, dtype=float)
    alpha = fixed_point_alpha(state, prev, tolerance)
    m = alpha - prev
    return state.distribution(m), m


def update(state: ProdExpertState, loss, p: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Feed loss vector ``loss`` after playing ``p`` with estimate ``m``; returns the regrets ``r``."""
    loss = np.asarray(loss, dtype=float)
    if np.any(loss < 0.0) or np.any(loss > 1.0):
        raise ValueError("losses must lie in [0, 1]")
    r = float(p @ loss) - loss
    state.apply(r, m)
    return r


@dataclass
class StepChecks:
    """Worst values of the per-step identities seen during a run."""

    max_residual: float = 0.0
    max_sum_pr: float = 0.0
    max_rm_excess: float = -math.inf
    eta_monotone: bool = True
    max_identity_err: float = 0.0
    max_sleeping_regret: float = 0.0
    max_lemma6_err: float = 0.0
    steps: int = 0


class OptimisticProd:
    """Full-information agent running optimistic Adapt-ML-Prod over K arms."""

    feedback = "full"

    def __init__(self, K: int, T: int, tolerance: float | None = None, strict: bool = True) -> None:
        self.K, self.T = K, T
        self.tol = 1.0 / T if tolerance is None else tolerance
        self.state = ProdExpertState.initial(K)
        self.prev = np.zeros(K)
        self.strict = strict
        self.checks = StepChecks()
        self.cum_regret = np.zeros(K)  # sum_t r_{t,k}: static regret against each arm
        self._p = self._m = None
        self._resid = 0.0

    def play(self) -> np.ndarray:
        if self.K == 1:
            self._p, self._m, self._resid = np.ones(1), np.zeros(1), 0.0
            return self._p
        alpha, self._resid = _bisect(np.log(self.state.eta) + self.state.log_w,
                                     self.state.eta, self.prev, self.tol)
        self._m = alpha - self.prev
        self._p = self.state.distribution(self._m)
        return self._p

    def update(self, loss) -> None:
        loss = np.asarray(loss, dtype=float)
        ck = self.checks
        ck.steps += 1
        ck.max_residual = max(ck.max_residual, self._resid)
        if self.K == 1:
            self.prev = loss
            return
        eta_before = self.state.eta
        r = update(self.state, loss, self._p, self._m)
        self.cum_regret += r
        sum_pr = abs(float(self._p @ r))
        bound = 2.0 * float(np.abs(loss - self.prev).max()) + self._resid
        rm_excess = float(np.abs(r - self._m).max()) - bound
        ck.max_sum_pr = max(ck.max_sum_pr, sum_pr)
        ck.max_rm_excess = max(ck.max_rm_excess, rm_excess)
        ck.eta_monotone &= bool(np.all(self.state.eta <= eta_before)) and bool(np.all(self.state.eta <= ETA_CAP))
        if self.strict:
            _verify(self._resid <= self.tol, f"fixed-point residual {self._resid} > {self.tol}")
            _verify(sum_pr <= 1e-9, f"sum_k p_k r_k = {sum_pr}")
            _verify(rm_excess <= 1e-12, f"|r - m| exceeds 2 max|l_t - l_t-1| by {rm_excess}")
            _verify(ck.eta_monotone, "learning rate increased or exceeded 1/4")
        self.prev = loss


def _verify(ok: bool, msg: str) -> None:
    if not ok:
        raise InvariantViolation(msg)


class SleepingProd:
    """Dynamic-regret learner: optimistic Adapt-ML-Prod over K*T sleeping experts.

    Expert ``e`` is the pair ``(s, k) = (e // K + 1, e % K)``.  In lazy mode
    only experts with ``s <= t`` are ever stored; in explicit mode every
    expert exists from the start and the full update is applied to all of
    them, which makes the lazy shortcut checkable.
    """

    feedback = "full"

    def __init__(self, K: int, T: int, tolerance: float | None = None,
                 lazy: bool = True, strict: bool = True) -> None:
        self.K, self.T = K, T
        self.n_total = K * T
        self.tol = 1.0 / T if tolerance is None else tolerance
        self.lazy, self.strict = lazy, strict
        log_n = math.log(self.n_total)
        self.log_w0 = -log_n
        self.eta0 = float(_eta(log_n, 0.0))
        cap = K if lazy else self.n_total
        self.state = ProdExpertState.initial(cap, log_n=log_n, log_w0=self.log_w0)
        self.arm_of = np.arange(self.n_total) % K
        self.t = 0
        self.touched = 0 if lazy else self.n_total
        self.prev = np.zeros(K)
        self.checks = StepChecks()
        self._p = self._m = self._pt_awake = None
        self._resid = 0.0
        self._asleep_mass = 0.0

    # -- storage ------------------------------------------------------------
    def _grow(self, n: int) -> None:
        st = self.state
        have = st.log_w.size
        if n <= have:
            return
        new = max(n, min(2 * have, self.n_total))
        extra = new - have
        st.log_w = np.concatenate([st.log_w, np.full(extra, self.log_w0)])
        st.eta = np.concatenate([st.eta, np.full(extra, self.eta0)])
        st.c = np.concatenate([st.c, np.zeros(extra)])

    @property
    def n_awake(self) -> int:
        return self.K * self.t

    def expert_state(self, s: int, k: int) -> tuple[float, float, float]:
        """``(log_w, eta, c)`` of expert ``(s, k)``; never-touched experts report their initial state."""
        e = (s - 1) * self.K + k
        if e >= self.state.log_w.size or (self.lazy and e >= self.touched):
            return self.log_w0, self.eta0, 0.0
        return float(self.state.log_w[e]), float(self.state.eta[e]), float(self.state.c[e])

    # -- protocol -----------------------------------------------------------
    def play(self) -> np.ndarray:
        if self.t >= self.T:
            raise RuntimeError("horizon exhausted")
        self.t += 1
        n = self.n_awake
        if self.lazy:
            self._grow(n)
            self.touched = n
        st = self.state
        eta, log_w = st.eta[:n], st.log_w[:n]
        base = np.log(eta) + log_w
        lvec = self.prev[self.arm_of[:n]]
        alpha, self._resid = _bisect(base, eta, lvec, self.tol)
        m = alpha - self.prev
        self._m = m

        # Unnormalised awake masses eta * w * exp(eta * m); asleep experts have m = 0.
        awake_logits = base + eta * m[self.arm_of[:n]]
        asleep = self.n_total - n
        if self.lazy:
            asleep_logit = math.log(self.eta0) + self.log_w0
            log_awake = _logsumexp(awake_logits)
            if asleep:
                log_asleep = math.log(asleep) + asleep_logit
                log_z = np.logaddexp(log_awake, log_asleep)
                self._asleep_mass = math.exp(log_asleep - log_z)
            else:
                log_z, self._asleep_mass = log_awake, 0.0
            pt_awake = np.exp(awake_logits - log_z)
        else:
            m_full = np.zeros(self.n_total)
            m_full[:n] = m[self.arm_of[:n]]
            pt = st.distribution(m_full)
            pt_awake = pt[:n]
            self._asleep_mass = float(pt[n:].sum())
        self._pt_awake = pt_awake
        p = pt_awake.reshape(self.t, self.K).sum(axis=0)
        self._p = p / p.sum()
        return self._p

    def update(self, loss) -> None:
        loss = np.asarray(loss, dtype=float)
        if np.any(loss < 0.0) or np.any(loss > 1.0):
            raise ValueError("losses must lie in [0, 1]")
        n = self.n_awake
        p, m = self._p, self._m
        arm = self.arm_of[:n]
        ck = self.checks
        ck.steps += 1
        ck.max_residual = max(ck.max_residual, self._resid)

        expected = float(p @ loss)
        r = expected - loss
        # <p~, l~>: awake experts pay l_{t,k}, asleep ones pay <p_t, l_t>.
        tilde_expected = float(self._pt_awake @ loss[arm]) + self._asleep_mass * expected
        identity_err = abs(tilde_expected - expected)
        r_awake = tilde_expected - loss[arm]
        lemma6_err = float(np.abs(r_awake - r[arm]).max())
        r_asleep = tilde_expected - expected

        st = self.state
        eta_before = st.eta.copy()
        if self.lazy:
            cut = slice(0, n)
            sub = ProdExpertState(st.log_w[:n], st.eta[:n], st.c[:n], st.log_n)
            sub.apply(r_awake, m[arm])
            st.log_w[cut], st.eta[cut], st.c[cut] = sub.log_w, sub.eta, sub.c
        else:
            r_full = np.zeros(self.n_total)
            m_full = np.zeros(self.n_total)
            r_full[:n] = r_awake
            m_full[:n] = m[arm]
            # Sleeping regret is zero exactly; only rounding noise is discarded here.
            if abs(r_asleep) > 1e-9 and self.strict:
                raise InvariantViolation(f"asleep instantaneous regret {r_asleep}")
            st.apply(r_full, m_full)

        bound = 2.0 * float(np.abs(loss - self.prev).max()) + self._resid
        rm_excess = float(np.abs(r - m).max()) - bound
        sum_pr = abs(float(p @ r))
        ck.max_sum_pr = max(ck.max_sum_pr, sum_pr)
        ck.max_rm_excess = max(ck.max_rm_excess, rm_excess)
        ck.max_identity_err = max(ck.max_identity_err, identity_err)
        ck.max_lemma6_err = max(ck.max_lemma6_err, lemma6_err)
        ck.max_sleeping_regret = max(ck.max_sleeping_regret, abs(r_asleep))
        k = min(st.eta.size, eta_before.size)
        ck.eta_monotone &= bool(np.all(st.eta[:k] <= eta_before[:k])) and bool(np.all(st.eta <= ETA_CAP))
        if self.strict:
            _verify(self._resid <= self.tol, f"fixed-point residual {self._resid} > {self.tol}")
            _verify(identity_err <= 1e-9, f"<p~, l~> differs from <p, l> by {identity_err}")
            _verify(lemma6_err <= 1e-9, f"awake regret differs from r_t,k by {lemma6_err}")
            _verify(abs(r_asleep) <= 1e-9, f"asleep regret {r_asleep}")
            _verify(sum_pr <= 1e-9, f"sum_k p_k r_k = {sum_pr}")
            _verify(rm_excess <= 1e-12, f"|r - m| exceeds its bound by {rm_excess}")
            _verify(ck.eta_monotone, "learning rate increased or exceeded 1/4")
        self.prev = loss
