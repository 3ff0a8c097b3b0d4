"""Acceptance criteria 1-10.

The suite scenario runs twice with seed 7; criteria 1-9 are read from the
first report and criterion 10 compares the two report.json files byte for
byte.  One PASS/FAIL line per criterion is printed (visible with -s and in
the terminal summary).
"""

import json

import pytest

from asymexp import acceptance, cli

TITLES = {}


@pytest.fixture(scope="module")
def suite_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("suite")
    statuses = []
    for name in ("first", "second"):
        statuses.append(cli.main(["run", "--scenario", "suite", "--seed", "7",
                                  "--out", str(root / name), "--quiet"]))
    first = (root / "first" / "report.json").read_bytes()
    second = (root / "second" / "report.json").read_bytes()
    return statuses, first, second


@pytest.fixture(scope="module")
def criteria(suite_runs):
    report = json.loads(suite_runs[1])
    return {c["number"]: c for c in report["results"]["criteria"]}


def _announce(number, title, passed, metrics):
    line = f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}"
    print(line)
    TITLES[number] = line
    return metrics


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(criteria, number):
    c = criteria[number]
    _announce(number, c["title"], c["passed"], c["metrics"])
    assert c["passed"], json.dumps(c["metrics"], indent=1, sort_keys=True)


def test_criterion_10_determinism(suite_runs):
    statuses, first, second = suite_runs
    c = acceptance.determinism(lambda: (first, second))
    _announce(10, c.title, c.passed, c.metrics)
    assert c.passed
    assert statuses == [0, 0]


def test_suite_covers_every_criterion(criteria):
    assert sorted(criteria) == list(range(1, 10))

