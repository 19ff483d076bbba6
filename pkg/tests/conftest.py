import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile("default")

# acceptance number -> list of (test id, outcome, message)
_ACCEPTANCE = {}
_MESSAGES = {}


@pytest.fixture
def note(request):
    """Attach a one-line summary to the current acceptance test."""
    def _note(msg):
        _MESSAGES.setdefault(request.node.nodeid, []).append(str(msg))
    return _note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _ACCEPTANCE.setdefault(mark.args[0], []).append((item.nodeid, rep.passed, item.name))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        rows = _ACCEPTANCE[n]
        ok = all(p for _, p, _ in rows)
        msgs = [m for nodeid, _, _ in rows for m in _MESSAGES.get(nodeid, [])]
        names = ", ".join(name for _, _, name in rows)
        line = f"acceptance {n:2d}: {'PASS' if ok else 'FAIL'}  [{names}]"
        terminalreporter.write_line(line)
        for m in msgs:
            terminalreporter.write_line(f"    {m}")
