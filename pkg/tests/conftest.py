import contextlib

import pytest

RESULTS: dict = {}


@contextlib.contextmanager
def record(number: int, title: str):
    """Record PASS or FAIL for an acceptance criterion; failures still raise."""
    try:
        yield
    except BaseException as e:
        RESULTS[number] = ("FAIL", title, f"{type(e).__name__}: {e}".splitlines()[0][:160])
        raise
    RESULTS[number] = ("PASS", title, "")


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        verdict, title, why = RESULTS[n]
        line = f"{verdict} criterion {n}: {title}"
        terminalreporter.write_line(line + (f" ({why})" if why else ""))
