"""Name-based construction of agents, shared by the harness, CLI and adversaries."""
from __future__ import annotations

from functools import partial
from typing import Callable

import numpy as np

from .banditalg import FixedArm, RerunUcbV, UniformRandom
from .envmodel import NonStationarityParams
from .gdexperts import OptimisticGD, theorem3_eta, theorem4_block
from .prodexperts import OptimisticProd, SleepingProd

__all__ = ["ALGORITHMS", "make_agent", "agent_factory", "feedback_of"]

ALGORITHMS = ("rerun-ucbv", "gd-fixed", "gd-adaptive", "prod", "prod-sleeping", "uniform", "fixed-arm")


def make_agent(name: str, K: int, T: int, params: NonStationarityParams | None,
               rng: np.random.Generator, **opts):
    """Build a fresh agent.

    ``params`` supplies the (gamma, V, Lambda) knowledge the parameter-dependent
    algorithms need; options override individual choices (``delta``,
    ``block``, ``gamma``, ``eta``, ``arm``, ``feedback``).
    """
    opts = {k: v for k, v in opts.items() if v is not None}
    feedback = opts.pop("feedback", None)
    if name == "rerun-ucbv":
        if params is None and "block" not in opts:
            raise ValueError("rerun-ucbv needs (V, Lambda) or an explicit block length")
        drift = params.drift if params else 0.0
        var = params.variance_budget if params else 0.0
        agent = RerunUcbV.from_params(K, T, drift, var, delta=opts.get("delta"), block=opts.get("block"))
    elif name == "gd-fixed":
        eta = opts.get("eta")
        if eta is None:
            gamma = opts.get("gamma", params.gamma if params else 1)
            var = params.variance_budget if params else 0.0
            eta = theorem3_eta(gamma, var, K)
        agent = OptimisticGD(K, eta=eta)
        agent.T = T
    elif name == "gd-adaptive":
        block = opts.get("block")
        if block is None:
            block = theorem4_block(params.variance_budget, params.drift, T) if params else T
        agent = OptimisticGD(K, eta=None, block_length=block)
        agent.T = T
    elif name == "prod":
        agent = OptimisticProd(K, T)
    elif name == "prod-sleeping":
        agent = SleepingProd(K, T)
    elif name in ("uniform", "uniform-random"):
        agent = UniformRandom(K, rng)
    elif name in ("fixed-arm", "fixed"):
        agent = FixedArm(K, int(opts.get("arm", 0)))
    else:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    if feedback is not None:
        if feedback not in ("bandit", "full"):
            raise ValueError("feedback must be 'bandit' or 'full'")
        agent.feedback = feedback
    return agent


def agent_factory(name: str, K: int, T: int, params: NonStationarityParams | None,
                  **opts) -> Callable[[np.random.Generator], object]:
    """Replayable constructor ``rng -> fresh agent``."""
    return partial(_build, name, K, T, params, opts)


def _build(name, K, T, params, opts, rng):
    return make_agent(name, K, T, params, rng, **opts)


def feedback_of(agent) -> str:
    return getattr(agent, "feedback", "bandit")
