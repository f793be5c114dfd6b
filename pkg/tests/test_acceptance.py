"""Acceptance suite: one test per criterion.

Each test prints its ``criterion N PASS|FAIL ...`` line; the lines are
repeated in the terminal summary. Run this file directly to print only
the lines.
"""
import pytest

from isoga.verify import CRITERIA, run_criterion

LINES = {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    c = run_criterion(number)
    LINES[number] = c.line()
    print(c.line())
    for ch in c.checks:
        print(f"    {'ok  ' if ch.passed else 'FAIL'} {ch.name}: {ch.value} (need {ch.requirement})")
    assert c.passed, c.line()


if __name__ == "__main__":
    for n in sorted(CRITERIA):
        print(run_criterion(n).line())
