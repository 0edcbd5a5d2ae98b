"""Acceptance gate for the exporter.

One test per model family: a random forest and a gradient-boosted
classifier are trained on real data, exported, and replayed through the
verifier's predict command on a thousand sampled inputs.  Passing means
zero class disagreements and raw scores within a relative 1e-9.
"""
import sys

import numpy as np
from sklearn.datasets import load_iris
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier

from treecert_exporter.export import ExportConfig, check_equivalence, export_model

TREECERT_CMD = (sys.executable, "-m", "treecert.cli")
SAMPLES = 1000


def iris_bounds(x):
    return tuple((float(lo) - 0.5, float(hi) + 0.5)
                 for lo, hi in zip(x.min(axis=0), x.max(axis=0)))


def report_for(model, x, tmp_path, name):
    cfg = ExportConfig(model=model, output=tmp_path / name,
                       feature_bounds=iris_bounds(x))
    export_model(cfg)
    return check_equivalence(cfg, sample_count=SAMPLES, seed=0,
                             command=TREECERT_CMD)


def test_random_forest_export_is_equivalent(tmp_path):
    x, y = load_iris(return_X_y=True)
    model = RandomForestClassifier(n_estimators=20, max_depth=4,
                                   random_state=0).fit(x, y)
    report = report_for(model, x, tmp_path, "iris_rf.tree")
    line = (f"forest: {report.class_disagreements} disagreements in "
            f"{report.samples}, max score deviation "
            f"{report.max_score_deviation:.3g}")
    print(("PASS " if report.ok else "FAIL ") + line)
    assert report.class_disagreements == 0, line
    assert report.ok, line


def test_gradient_boosting_export_is_equivalent(tmp_path):
    x, y = load_iris(return_X_y=True)
    model = GradientBoostingClassifier(n_estimators=8, max_depth=2,
                                       random_state=0).fit(x, y)
    report = report_for(model, x, tmp_path, "iris_gb.tree")
    line = (f"boosting: {report.class_disagreements} disagreements in "
            f"{report.samples}, max score deviation "
            f"{report.max_score_deviation:.3g}")
    print(("PASS " if report.ok else "FAIL ") + line)
    assert report.class_disagreements == 0, line
    assert report.ok, line


def test_binary_gradient_boosting_export_is_equivalent(tmp_path):
    x, y = load_iris(return_X_y=True)
    keep = y != 0
    x, y = x[keep], y[keep]
    model = GradientBoostingClassifier(n_estimators=10, max_depth=2,
                                       random_state=0).fit(x, y)
    report = report_for(model, x, tmp_path, "iris_gb2.tree")
    line = (f"binary boosting: {report.class_disagreements} disagreements "
            f"in {report.samples}, max score deviation "
            f"{report.max_score_deviation:.3g}")
    print(("PASS " if report.ok else "FAIL ") + line)
    assert report.class_disagreements == 0, line
    assert report.ok, line
