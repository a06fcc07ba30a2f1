"""Acceptance gate: every criterion at its stated tolerance, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v``; the per-criterion lines
are repeated in the terminal summary.
"""
import pytest

from nsregret.harness.suites import run_suite

CRITERIA = [
    "bernstein-coverage",
    "lemma1-conditions",
    "simplex-projection-oracle",
    "gd-constant-regret",
    "bandit-T-dependence-contrast",
    "rerun-ucbv-scaling",
    "prod-static-envelope",
    "sleeping-identities",
    "prod-sleeping-dynamic",
    "drifting-lowerbound-budgets",
    "fixed-point-residual",
    "invariant-suite",
]

RESULTS: list = []


@pytest.mark.slow
@pytest.mark.parametrize("name", CRITERIA)
def test_criterion(name):
    result = run_suite(name)
    RESULTS.append(result)
    print(result.line())
    assert result.passed, result.detail
