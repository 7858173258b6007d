import re

ACCEPTANCE_FILE = "test_acceptance.py"
CRITERION_RE = re.compile(r"test_criterion_(\d+)[a-z]?_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if getattr(report, "when", "call") != "call" and outcome != "error":
                continue
            nodeid = report.nodeid
            if ACCEPTANCE_FILE not in nodeid:
                continue
            match = CRITERION_RE.search(nodeid)
            if not match:
                continue
            number, name = int(match.group(1)), match.group(2).replace("_", " ")
            status = "PASS" if outcome == "passed" else "FAIL"
            # any failing parametrization or sub-test fails the whole criterion
            prev_name, prev_status = lines.get(number, (name, "PASS"))
            if prev_status == "FAIL":
                status = "FAIL"
            lines[number] = (prev_name, status)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        name, status = lines[number]
        terminalreporter.write_line(f"criterion {number:02d} ({name}): {status}")
