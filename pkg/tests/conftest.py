"""Collects acceptance verdicts and prints one PASS/FAIL line per criterion."""
import pytest

_VERDICTS: list[tuple[str, bool, list[str]]] = []


class Criterion:
    """Accumulates named sub-checks so every one is evaluated before failing."""

    def __init__(self, title: str):
        self.title = title
        self.notes: list[str] = []
        self.ok = True

    def check(self, ok: bool, detail: str) -> bool:
        ok = bool(ok)
        self.ok &= ok
        self.notes.append(("ok    " if ok else "FAILED ") + detail)
        return ok

    def conclude(self) -> None:
        failed = [n for n in self.notes if n.startswith("FAILED")]
        assert self.ok, f"{self.title}: " + "; ".join(failed)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(title): acceptance criterion reported in the summary")


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(marker.args[0] if marker else request.node.name)
    yield c
    _VERDICTS.append((c.title, c.ok and bool(c.notes), c.notes))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for title, ok, notes in _VERDICTS:
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {title}")
        for note in notes:
            tr.write_line(f"        {note}")
