"""One test per acceptance criterion; the PASS/FAIL lines are collected into the terminal summary."""

import pytest

from conftest import ACCEPTANCE_LINES
from qpl.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, tmp_path):
    fn = CRITERIA[number]
    result = fn(tmp_path) if number == 8 else fn()
    print(result.line())
    ACCEPTANCE_LINES.append(result.line())
    assert result.passed, result.line()
