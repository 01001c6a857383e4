import itertools

import pytest
from hypothesis import settings

from bellcert.bell_stats import TrialRecord

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

# criterion label -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: (int(s.split()[0]), s)):
        ok, detail = ACCEPTANCE_RESULTS[label]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")


def make_records(rows, start=0):
    """Build records from (x, y, a, b[, herald_time]) tuples."""
    out = []
    for i, row in enumerate(rows, start=start):
        x, y, a, b, *rest = row
        out.append(TrialRecord(i, x, y, a, b, herald_time=rest[0] if rest else None))
    return out


@pytest.fixture
def all_16_records():
    return make_records(list(itertools.product((0, 1), repeat=4)))
