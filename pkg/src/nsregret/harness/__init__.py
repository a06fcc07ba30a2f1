"""Experiment harness: simulation loops, configs, sweeps, plots and acceptance suites."""
from .runner import ALG_STREAM, LOSS_STREAM, RegretTrace, run_bandit, run_fullinfo, stream

__all__ = ["RegretTrace", "run_bandit", "run_fullinfo", "stream", "LOSS_STREAM", "ALG_STREAM"]
