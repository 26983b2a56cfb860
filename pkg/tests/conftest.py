import pytest

# (criterion, passed, detail) rows collected by tests/test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def record_acceptance():
    def record(criterion: str, passed: bool, detail: str):
        ACCEPTANCE.append((criterion, bool(passed), detail))
        print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} | {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}  | {detail}")
