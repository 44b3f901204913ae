"""The thirteen acceptance criteria at full desk scale, one test each.

Every criterion prints a single ``[PASS]``/``[FAIL]`` line; the lines are
repeated in the terminal summary.  ``python tests/test_acceptance.py`` runs
the same checks without pytest.
"""

import sys

import pytest

from singdrift.harness.criteria import CRITERIA, LEVELS, run_criterion

LINES: list[str] = []


@pytest.mark.slow
@pytest.mark.parametrize("entry", CRITERIA, ids=[f"{n:02d}-{slug}" for n, slug, _, _ in CRITERIA])
def test_criterion(entry):
    res = run_criterion(entry, LEVELS["full"])
    LINES.append(res.line())
    print(res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    results = [run_criterion(e, LEVELS["full"]) for e in CRITERIA]
    for r in results:
        print(r.line(), flush=True)
    sys.exit(0 if all(r.passed for r in results) else 3)
