import pytest

from hybridlab.fields import Grid

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class AcceptanceLog:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, number: int, title: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} {detail}")
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


@pytest.fixture(scope="session")
def grid65():
    return Grid.square(65)


@pytest.fixture(scope="session")
def grid17():
    return Grid.square(17)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}  {detail}")
