"""Per-criterion PASS/FAIL summary for the acceptance suite."""
from collections import OrderedDict

_results: "OrderedDict[int, dict]" = OrderedDict()


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            num, title = mark.args
            _results.setdefault(num, {"title": title, "tests": {}})
            item.user_properties.append(("criterion", num))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    num = props.get("criterion")
    if num is None:
        return
    tests = _results[num]["tests"]
    if report.when == "call" or report.outcome != "passed":
        prev = tests.get(report.nodeid, "passed")
        tests[report.nodeid] = report.outcome if prev == "passed" else prev
        notes = [v for k, v in report.user_properties if k == "measured"]
        if notes:
            _results[num].setdefault("notes", []).extend(notes)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_results):
        r = _results[num]
        outcomes = list(r["tests"].values())
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        elif any(o == "failed" for o in outcomes):
            status = "FAIL"
        else:
            status = "SKIP"
        note = "; ".join(r.get("notes", []))
        tr.write_line(f"criterion {num}: {status}  {r['title']}" + (f"  [{note}]" if note else ""))
