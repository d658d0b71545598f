ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    marker = "test_acceptance.py::test_criterion_"
    if report.when == "call" and marker in report.nodeid:
        number = int(report.nodeid.split(marker)[1].split("_")[0])
        passed, seconds = ACCEPTANCE_RESULTS.get(number, (True, 0.0))
        ACCEPTANCE_RESULTS[number] = (passed and report.passed, seconds + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, seconds = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status} ({seconds:.2f} s)")
