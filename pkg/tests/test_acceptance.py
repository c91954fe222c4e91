"""Acceptance suite: one test per numbered criterion, default resolution.

Each test prints the criterion's one-line verdict (visible with ``-s`` or in
the captured output on failure) and asserts it passed within its runtime
budget.
"""

import pytest

from restriction_lab.acceptance import CRITERIA, Context, run_criterion

IDS = {n: f"{n:02d}_{fn.__name__.removeprefix('criterion_')}" for n, fn in CRITERIA.items()}


@pytest.fixture(scope="module")
def ctx():
    return Context(quick=False)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=[IDS[n] for n in sorted(CRITERIA)])
def test_criterion(ctx, number):
    result = run_criterion(number, ctx)
    print(result.line())
    assert result.passed, result.line()
