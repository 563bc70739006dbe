"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

_criteria = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    number = props.get("criterion")
    if number is None:
        return
    if report.when == "call" or report.failed:
        entry = _criteria.setdefault(number, {"passed": True, "details": []})
        entry["passed"] &= report.passed
        if "detail" in props and report.when == "call":
            entry["details"].append(props["detail"])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        verdict = "PASS" if entry["passed"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
