import csv
import io
import json

import pytest
from hypothesis import given, strategies as st

from test_store import make_record
from tunekit.experiment.report import ReportError, best_run, prefix_min, render, report


def episode(values, episode_id="ep", direction="minimize", kind="rs", strategy="all_at_once"):
    runs = []
    for i, v in enumerate(values):
        r = make_record(i, episode=episode_id, value=v, direction=direction)
        r.optimizer = {"kind": kind, "seed": 0, "strategy": strategy, "slice": 10}
        runs.append(r)
    return runs


def test_best_and_trace():
    (e,) = report(episode([3.0, 1.0, 2.0])).episodes
    assert e.best.iteration == 1
    assert list(e.trace) == [3.0, 1.0, 1.0]


def test_single_run():
    (e,) = report(episode([5.0])).episodes
    assert e.best.iteration == 0 and list(e.trace) == [5.0]


def test_zero_runs():
    with pytest.raises(ReportError):
        report([])


def test_ties_go_to_earliest_iteration():
    assert best_run(episode([2.0, 1.0, 1.0])).iteration == 1


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_trace_matches_fold(values):
    (e,) = report(episode(values)).episodes
    acc, expected = None, []
    for v in values:
        acc = v if acc is None or v < acc else acc
        expected.append(acc)
    assert list(e.trace) == expected
    assert all(a >= b for a, b in zip(e.trace, e.trace[1:]))
    assert e.best_value == min(values)


def test_maximize_renders_user_orientation():
    (e,) = report(episode([3.0, 7.0, 5.0], direction="maximize")).episodes
    assert e.best.iteration == 1 and e.best_value == 7.0
    assert e.trace_user == [3.0, 7.0, 7.0]
    assert list(e.trace) == [-3.0, -7.0, -7.0]


def test_comparison_rows():
    runs = (
        episode([5.0, 4.0], "a", kind="rs")
        + episode([3.0, 6.0], "b", kind="rs")
        + episode([9.0, 1.0], "c", kind="bo")
    )
    rows = {row.kind: row for row in report(runs).comparison}
    assert rows["rs"].episodes == 2
    assert (rows["rs"].median_best, rows["rs"].best, rows["rs"].worst) == (3.5, 3.0, 4.0)
    assert (rows["bo"].episodes, rows["bo"].best) == (1, 1.0)


def test_comparison_maximize():
    runs = episode([5.0, 4.0], "a", direction="maximize") + episode([3.0, 9.0], "b", direction="maximize")
    (row,) = report(runs).comparison
    assert (row.best, row.worst, row.median_best) == (9.0, 5.0, 7.0)


def test_csv_long_format():
    rep = report(episode([3.0, 1.0, 2.0], "a") + episode([4.0], "b"))
    rows = list(csv.DictReader(io.StringIO(render(rep, "csv"))))
    assert len(rows) == 4
    assert [float(r["best_so_far"]) for r in rows if r["episode_id"] == "a"] == [3.0, 1.0, 1.0]


def test_json():
    doc = json.loads(render(report(episode([3.0, 1.0, 2.0])), "json"))
    (e,) = doc["episodes"]
    assert e["best"]["iteration"] == 1 and e["trace"] == [3.0, 1.0, 1.0]
    assert doc["comparison"][0]["episodes"] == 1


def test_table_and_unknown_format():
    text = render(report(episode([3.0, 1.0])), "table")
    assert "comparison" in text and "ep" in text
    with pytest.raises(ReportError):
        render(report(episode([1.0])), "xml")


def test_prefix_min_empty():
    assert prefix_min([]) == []
