import time
from contextlib import contextmanager

import pytest

from poscert.poly import poly

ACCEPTANCE = []


@pytest.fixture
def P():
    """``P("x^2 - y", "x y")`` shorthand."""
    return poly


@pytest.fixture
def criterion():
    """Times a block and records one pass/fail line for the acceptance summary."""

    @contextmanager
    def run(number, title, tolerance="exact", limit=None):
        t0 = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            dt = time.perf_counter() - t0
            if ok and limit is not None and dt >= limit:
                ok = False
            lim = f"< {limit} s" if limit is not None else "none"
            line = (f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} "
                    f"(tolerance: {tolerance}; limit: {lim}; took {dt:.2f} s)")
            ACCEPTANCE.append(line)
            print(line)
        if limit is not None:
            assert dt < limit, f"criterion {number} took {dt:.2f} s, limit {limit} s"

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
