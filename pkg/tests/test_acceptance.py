"""Acceptance gate: one printed PASS/FAIL line per criterion."""

import pytest

from berkson import acceptance


@pytest.fixture
def report(capsys):
    def emit(result):
        with capsys.disabled():
            print("\n" + result.line())
        return result

    return emit


@pytest.mark.parametrize("criterion", acceptance.ALL, ids=lambda f: f.__name__)
def test_criterion(criterion, report):
    result = report(criterion())
    assert result.passed, result.summary
