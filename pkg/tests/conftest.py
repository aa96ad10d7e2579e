import time

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SUITE_BUDGET_S = 300.0
_START = time.perf_counter()
CRITERIA: dict = {}


def record(number, ok: bool, detail: str) -> str:
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    CRITERIA[str(number)] = line
    print(line)
    return line


def _order(key: str):
    digits = "".join(ch for ch in key if ch.isdigit())
    return (int(digits or 0), key)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _START
    if not CRITERIA and "test_acceptance" not in " ".join(config.args):
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=_order):
        terminalreporter.write_line(CRITERIA[key])
    terminalreporter.write_line(
        f"CRITERION 11 (session): {'PASS' if elapsed < SUITE_BUDGET_S else 'FAIL'} | "
        f"whole pytest session {elapsed:.1f}s < {SUITE_BUDGET_S:.0f}s")


def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - _START >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
