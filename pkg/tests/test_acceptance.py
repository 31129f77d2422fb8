"""Acceptance gate: every criterion at its stated tolerance.

Runs the same callables as the CLI `verify` subcommand and prints one
pass/fail line per criterion (run pytest with -s to see them live).
"""

import pytest

from stochsoliton import acceptance


@pytest.mark.parametrize("index", sorted(acceptance.CRITERIA))
def test_criterion(index):
    result = acceptance.CRITERIA[index]()
    assert result["passed"], (
        f"criterion {index} ({result['name']}) failed: {result['details']}"
    )
