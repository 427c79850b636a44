"""Per-criterion summary for the acceptance suite."""

import re

_outcomes: dict[int, tuple[str, str]] = {}
_titles: dict[int, str] = {}


def _criterion(item_or_report):
    m = re.search(r"test_criterion_(\d+)_", item_or_report.nodeid)
    return int(m.group(1)) if m else None


def pytest_collection_modifyitems(items):
    for item in items:
        n = _criterion(item)
        if n is not None:
            _titles[n] = (item.function.__doc__ or item.name).strip().splitlines()[0]


def pytest_deselected(items):
    for item in items:
        n = _criterion(item)
        if n is not None:
            _titles.setdefault(n, (item.function.__doc__ or item.name).strip().splitlines()[0])
            timing = item.get_closest_marker("timing") is not None
            _outcomes[n] = ("DESELECTED", "timing-marked; run with -m timing" if timing else "")


def pytest_runtest_logreport(report):
    n = _criterion(report)
    if n is None:
        return
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        if report.skipped:
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
            _outcomes[n] = ("SKIP", reason.removeprefix("Skipped: "))
        elif report.failed:
            _outcomes[n] = ("FAIL", report.longreprtext.strip().splitlines()[-1] if report.longreprtext else "")
        elif n not in _outcomes or _outcomes[n][0] != "FAIL":
            _outcomes[n] = ("PASS", f"{report.duration:.1f}s")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_titles):
        status, detail = _outcomes.get(n, ("NOT RUN", ""))
        terminalreporter.write_line(f"criterion {n:>2} {status:<10} {_titles[n]}" + (f"  [{detail}]" if detail else ""))
