import pytest

from pointer_collapse.kernels import available

_ACCEPTANCE_LINES: list[tuple[int, str]] = []


@pytest.fixture(params=available())
def backend(request):
    """Every kernel backend that is importable in this environment."""
    return request.param


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion; returns ``ok``."""

    def _report(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES, key=lambda item: item[0]):
            terminalreporter.write_line(line)
