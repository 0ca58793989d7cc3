from collections import defaultdict

import pytest

_VERDICTS: dict[int, list[tuple[bool, str]]] = defaultdict(list)


@pytest.fixture
def verdict():
    """Record one checked part of an acceptance criterion."""

    def record(criterion: int, ok: bool, detail: str):
        _VERDICTS[criterion].append((bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_VERDICTS):
        parts = _VERDICTS[criterion]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        details = "; ".join(f"{d}{'' if ok else ' [fail]'}" for ok, d in parts)
        terminalreporter.write_line(f"criterion {criterion:2d}: {status}  {details}")
