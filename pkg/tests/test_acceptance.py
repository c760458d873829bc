"""Acceptance criteria at their stated tolerances, one PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines; they are
also printed by ``pwbrownian check``.
"""

import pytest

from pwbrownian.acceptance import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
