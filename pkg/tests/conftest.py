import pytest

RESULTS: list[str] = []


@pytest.fixture
def record():
    """Store one acceptance line; printed together at the end of the run."""
    def _record(tag: str, ok: bool | None, detail: str):
        word = "INFO" if ok is None else "PASS" if ok else "FAIL"
        RESULTS.append(f"{tag}: {word}  {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
