import pytest

_ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def _line(number: int, title: str, passed: bool, detail: str) -> str:
    verdict = "PASS" if passed else "FAIL"
    return f"[{verdict}] {number:2d}. {title}" + (f" | {detail}" if detail else "")


class _Recorder:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def __call__(self, number: int, title: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((number, title, bool(passed), detail))
        print(_line(number, title, bool(passed), detail))
        return bool(passed)


@pytest.fixture
def report():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(_line(number, title, passed, detail))
