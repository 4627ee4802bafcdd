"""Shipping gate: every acceptance criterion at its pinned tolerance.

Runs the same harness as ``mfcal selftest`` and asserts each criterion
individually so a failure names its criterion.  One PASS/FAIL line per
criterion is printed (visible with ``pytest -s`` or on failure).
"""

import pytest

from mfcal.selftest import CRITERIA, run_acceptance

NAMES = [name for _, name, _, _ in CRITERIA]


@pytest.fixture(scope="module")
def results():
    outcome = run_acceptance(strict=False, threads=2)
    for result in outcome:
        print(result.line())
    return {r.name: r for r in outcome}


@pytest.mark.parametrize("name", NAMES)
def test_criterion(results, name):
    result = results[name]
    assert result.passed, result.line()
    if result.limit is not None:
        assert result.seconds <= result.limit, (
            f"{name} took {result.seconds:.2f}s, budget {result.limit:.0f}s"
        )


def test_strict_mode_holds_for_the_parameterized_criteria():
    """The bias-free strict configuration changes criteria 6 and 7 only."""
    from mfcal.selftest import (
        _criterion_gradient_checks,
        _criterion_recalibration_contracts,
    )

    ctx = {"strict": True, "artifacts_dir": None, "threads": 1}
    for check in (_criterion_recalibration_contracts, _criterion_gradient_checks):
        passed, detail = check(ctx)
        assert passed, detail
