import json

import numpy as np

from lingamkit import report
from lingamkit.bootstrap import BootstrapSummary


def test_to_json_non_finite():
    out = json.loads(report.to_json({"a": np.float64("nan"), "b": np.inf, "c": np.arange(2), "d": np.bool_(1)}))
    assert out == {"a": None, "b": "inf", "c": [0, 1], "d": True}


def test_delimited_and_table():
    assert report.delimited(["x", "y"], [[1, "a,b"]]).splitlines() == ["x,y", '1,"a,b"']
    lines = report.table(["name", "v"], [["long name", 1], ["s", 22]]).splitlines()
    assert len({len(line.rstrip()) for line in lines[:1]}) == 1 and "long name" in lines[-2]


def test_effects_grid_omits_pruned():
    z = np.zeros((2, 2))
    tp = np.array([[0.0, 0.0], [0.9, 0.0]])
    te = np.array([[0.0, 0.0], [0.4, 0.0]])
    s = BootstrapSummary(("a", "b"), 10, z, z, tp, te, threshold=0.3)
    grid = report.effects_grid(s)
    assert list(grid["effects"]) == ["a->b"]
    assert grid["effects"]["a->b"]["median_total_effect"] == 0.4
    assert report.effects_csv(grid).splitlines()[0].startswith("cause")
