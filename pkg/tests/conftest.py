import pytest

CRITERIA = pytest.StashKey[list]()
DETAIL = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.stash[CRITERIA] = []


@pytest.fixture
def detail(request):
    """Append human-readable measurements to the criterion's summary line."""
    notes = []
    request.node.stash[DETAIL] = notes
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    number, title = marker.args
    notes = item.stash.get(DETAIL, [])
    item.config.stash[CRITERIA].append((number, title, rep.passed, "; ".join(notes)))


def pytest_terminal_summary(terminalreporter, config):
    rows = sorted(config.stash.get(CRITERIA, []))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, notes in rows:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}"
        if notes:
            line += f"  [{notes}]"
        terminalreporter.write_line(line)
