import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# one pass/fail line per acceptance criterion, printed after the run
_ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    ok = call.excinfo is None
    prev = _ACCEPTANCE.get(number)
    _ACCEPTANCE[number] = (title, ok and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {title}")
