"""Runs every acceptance check at its stated tolerance and runtime limit.

Each test prints the check's one-line PASS/FAIL summary (uncaptured, so it
shows up in ``pytest -v`` output) and then asserts on it.
"""
import pytest

from anita import verify


@pytest.mark.parametrize("check", verify.REGISTRY, ids=lambda c: f"criterion{c.number:02d}")
def test_acceptance(check, capsys):
    result = check.run(verify.Context())
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()


def test_registry_covers_all_criteria():
    assert [c.number for c in verify.REGISTRY] == list(range(1, 11))
