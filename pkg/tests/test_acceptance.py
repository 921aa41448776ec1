"""Acceptance gate: every numbered criterion runs at its stated tolerance.

Each criterion prints its one-line verdict (visible with -s or in the
failure report); the suite fails if any criterion fails.
"""

import pytest

from minsurf.acceptance import REGISTRY

NAMES = [name for name, _ in REGISTRY]
FNS = dict(REGISTRY)


@pytest.mark.parametrize("name", NAMES)
def test_criterion(name):
    result = FNS[name]()
    print(result.line())
    assert result.passed, result.line()
