import pytest

from corechisel import corpus

CORPUS = corpus.names()

_acceptance: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture(scope="session")
def sendrec():
    return corpus.load("sendrec")


@pytest.fixture(scope="session", params=CORPUS)
def design(request):
    return request.param, corpus.load(request.param)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    number, title = marker.args
    detail = ""
    if rep.failed:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    _acceptance[number] = (rep.passed, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        passed, title, detail = _acceptance[number]
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
