"""Export scikit-learn tree ensembles to the treecert model format.

Supported source families and their post-processing kinds:

  - RandomForestClassifier  -> divisor (per-tree class fractions, averaged)
  - GradientBoostingClassifier -> softmax (raw additive scores)

The exported file reproduces the source model's decision function bit
for bit where the accumulation order allows it: thresholds are copied
unchanged, forest leaves are the stored class fractions, and boosting
leaves are pre-scaled by the learning rate (the same float multiply the
library applies at predict time) with the initial raw scores folded into
the first tree's leaves.

The verifier is consumed strictly through its public surfaces: this
module writes the documented text format and cross-checks predictions by
running the ``treecert predict`` command, never by importing it.

sklearn quantizes inputs to float32 before tree traversal, so the
equivalence check samples float32-representable points; at other points
the two routing semantics can legitimately differ on knife-edge
thresholds.
"""
from __future__ import annotations

import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier

FORMAT_MAGIC = "treecert-model 1"
DEFAULT_TREECERT = ("treecert",)


class ExportError(Exception):
    """The source model cannot be exported faithfully."""


@dataclass(frozen=True)
class ExportConfig:
    """What to export and how.

    ``post_process`` defaults to the family's canonical kind and may only
    be set to that kind; ``feature_bounds`` (per-feature low/high pairs,
    normally the training data's bounding box) drives equivalence
    sampling and falls back to the model's threshold hull when omitted.
    """

    model: object
    post_process: str | None = None
    negate_leaves: bool = False
    output: Path | None = None
    feature_bounds: tuple[tuple[float, float], ...] | None = None

    def resolved_post(self) -> str:
        canonical = _canonical_post(self.model)
        if self.post_process is None:
            return canonical
        if self.post_process != canonical:
            raise ExportError(
                f"post_process {self.post_process!r} is inconsistent with "
                f"{type(self.model).__name__} (expected {canonical!r})")
        return self.post_process


def _canonical_post(model: object) -> str:
    if isinstance(model, RandomForestClassifier):
        return "divisor"
    if isinstance(model, GradientBoostingClassifier):
        return "softmax"
    raise ExportError(
        f"unsupported source model {type(model).__name__}; supported: "
        "RandomForestClassifier, GradientBoostingClassifier (models with "
        "categorical splits have no native-format encoding)")


# A tree is nested tuples: ("leaf", values) or ("split", feature,
# threshold, left, right).  Plain data keeps the writer trivial.

def _walk_sklearn_tree(tree, leaf_values) -> tuple:
    left, right = tree.children_left, tree.children_right
    feature, threshold = tree.feature, tree.threshold

    def build(node: int) -> tuple:
        if left[node] == -1:
            return ("leaf", leaf_values(node))
        return ("split", int(feature[node]), float(threshold[node]),
                build(left[node]), build(right[node]))

    return build(0)


def _forest_trees(model: RandomForestClassifier) -> list[tuple]:
    out = []
    for est in model.estimators_:
        tree = est.tree_
        out.append(_walk_sklearn_tree(
            tree, lambda n, t=tree: tuple(float(v) for v in t.value[n][0])))
    return out


def _boosting_contribution(trees: Sequence[tuple], x: np.ndarray,
                           n_classes: int) -> np.ndarray:
    """Sum the exported leaf tuples along x's paths, in tree order."""
    total = np.zeros(n_classes)
    for root in trees:
        node = root
        while node[0] == "split":
            _, f, thr, lo, hi = node
            node = lo if x[f] <= thr else hi
        total += np.asarray(node[1])
    return total


def _boosting_trees(model: GradientBoostingClassifier) -> list[tuple]:
    n_classes = len(model.classes_)
    lr = float(model.learning_rate)
    score_dims = model.estimators_.shape[1]
    trees: list[tuple] = []
    for round_trees in model.estimators_:
        for k, est in enumerate(round_trees):
            tree = est.tree_

            def leaf(n, t=tree, k=k):
                values = [0.0] * n_classes
                raw = lr * float(t.value[n][0][0])
                if score_dims == 1:
                    # binary model: one raw score, carried on class 2 so
                    # softmax over (0, raw) reproduces the sigmoid
                    values[1] = raw
                else:
                    values[k] = raw
                return tuple(values)

            trees.append(_walk_sklearn_tree(tree, leaf))

    # The constant initial raw scores are recovered through the public
    # decision_function and folded into every leaf of the first tree,
    # keeping the sum-of-trees shape and the accumulation order.
    probe = np.zeros((1, model.n_features_in_), dtype=np.float32)
    raw = np.atleast_2d(model.decision_function(probe.astype(np.float64)))[0]
    if score_dims == 1:
        raw_vec = np.array([0.0, float(raw[0])])
    else:
        raw_vec = np.asarray(raw, dtype=np.float64)
    init = raw_vec - _boosting_contribution(trees, probe[0].astype(np.float64),
                                            n_classes)
    trees[0] = _add_to_leaves(trees[0], tuple(float(v) for v in init))
    return trees


def _add_to_leaves(node: tuple, offset: tuple[float, ...]) -> tuple:
    if node[0] == "leaf":
        return ("leaf", tuple(v + o for v, o in zip(node[1], offset)))
    _, f, thr, lo, hi = node
    return ("split", f, thr, _add_to_leaves(lo, offset),
            _add_to_leaves(hi, offset))


def _negate_leaves(node: tuple) -> tuple:
    if node[0] == "leaf":
        return ("leaf", tuple(-v for v in node[1]))
    _, f, thr, lo, hi = node
    return ("split", f, thr, _negate_leaves(lo), _negate_leaves(hi))


def _serialize(trees: Sequence[tuple], post: str, n_features: int,
               n_outputs: int) -> str:
    lines = [FORMAT_MAGIC, f"post {post}", f"features {n_features}",
             f"outputs {n_outputs}", f"trees {len(trees)}"]

    def emit(node: tuple, depth: int) -> None:
        pad = "  " * depth
        if node[0] == "leaf":
            lines.append(pad + "leaf " + " ".join(repr(v) for v in node[1]))
            return
        _, f, thr, lo, hi = node
        lines.append(pad + f"split {f} {thr!r}")
        emit(lo, depth + 1)
        emit(hi, depth + 1)

    for root in trees:
        lines.append("tree")
        emit(root, 1)
    return "\n".join(lines) + "\n"


def export_model(cfg: ExportConfig) -> str:
    """Render the source model as native-format text.

    Writes ``cfg.output`` when set and always returns the text.
    """
    post = cfg.resolved_post()
    model = cfg.model
    if not hasattr(model, "n_features_in_"):
        raise ExportError("source model is not fitted")
    if isinstance(model, RandomForestClassifier):
        trees = _forest_trees(model)
    else:
        trees = _boosting_trees(model)
    if cfg.negate_leaves:
        trees = [_negate_leaves(t) for t in trees]
    n_outputs = len(model.classes_)
    text = _serialize(trees, post, int(model.n_features_in_), n_outputs)
    if cfg.output is not None:
        cfg.output.write_text(text)
    return text


# --- equivalence checking ---------------------------------------------------

@dataclass(frozen=True)
class EquivalenceReport:
    """Sampled agreement between the source model and the exported file."""

    samples: int
    class_disagreements: int
    max_score_deviation: float
    first_disagreement: int | None = None

    SCORE_TOLERANCE = 1e-9

    @property
    def ok(self) -> bool:
        return (self.class_disagreements == 0
                and self.max_score_deviation <= self.SCORE_TOLERANCE)


def _threshold_bounds(trees: Sequence[tuple], n_features: int):
    lo = [-1.0] * n_features
    hi = [1.0] * n_features

    def scan(node: tuple) -> None:
        if node[0] == "leaf":
            return
        _, f, thr, left, right = node
        lo[f] = min(lo[f], thr - 1.0)
        hi[f] = max(hi[f], thr + 1.0)
        scan(left)
        scan(right)

    for root in trees:
        scan(root)
    return tuple((l, h) for l, h in zip(lo, hi))


def _sample_inputs(cfg: ExportConfig, count: int, seed: int) -> np.ndarray:
    n = int(cfg.model.n_features_in_)
    bounds = cfg.feature_bounds
    if bounds is None:
        if isinstance(cfg.model, RandomForestClassifier):
            trees = _forest_trees(cfg.model)
        else:
            trees = _boosting_trees(cfg.model)
        bounds = _threshold_bounds(trees, n)
    if len(bounds) != n:
        raise ExportError(
            f"feature_bounds has {len(bounds)} entries, model has {n} features")
    rng = np.random.default_rng(seed)
    cols = [rng.uniform(lo, hi, size=count) for lo, hi in bounds]
    x = np.column_stack(cols)
    # float32-representable points: where sklearn's internal cast is exact
    return x.astype(np.float32).astype(np.float64)


def _write_dataset(path: Path, x: np.ndarray) -> None:
    lines = ["treecert-dataset 1", f"features {x.shape[1]}",
             f"samples {x.shape[0]}", "data"]
    for row in x:
        lines.append("1 " + " ".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _predict_via_cli(command: Sequence[str], model_file: Path,
                     x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Classes (1-based) and score rows from ``treecert predict``."""
    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "samples.tsv"
        _write_dataset(data, x)
        proc = subprocess.run(
            [*command, "predict", "--model", str(model_file),
             "--dataset", str(data), "--format", "records"],
            capture_output=True, text=True)
    if proc.returncode != 0:
        raise ExportError(
            f"treecert predict failed (exit {proc.returncode}): "
            f"{proc.stderr.strip()}")
    classes = []
    scores = []
    for line in proc.stdout.splitlines():
        parts = line.split("\t")
        if not parts or parts[0] != "prediction":
            continue
        fields = dict(p.split("=", 1) for p in parts[1:])
        classes.append(int(fields["class"]))
        scores.append([float(v) for v in fields["scores"].split(",")])
    if len(classes) != x.shape[0]:
        raise ExportError(
            f"treecert predict returned {len(classes)} records for "
            f"{x.shape[0]} samples")
    return np.asarray(classes), np.asarray(scores)


def check_equivalence(cfg: ExportConfig, sample_count: int = 1000,
                      seed: int = 0,
                      command: Sequence[str] = DEFAULT_TREECERT,
                      model_file: Path | None = None) -> EquivalenceReport:
    """Compare the exported file against the source model's predictions.

    Samples ``sample_count`` inputs uniformly over ``cfg.feature_bounds``
    (or the threshold hull), asks the source library and the ``treecert``
    CLI for classes and scores, and reports disagreements.  The source
    library is the oracle; success means zero class disagreements and a
    relative score deviation within ``EquivalenceReport.SCORE_TOLERANCE``.
    """
    if model_file is None:
        if cfg.output is None:
            raise ExportError("check_equivalence needs cfg.output or model_file")
        model_file = cfg.output
    x = _sample_inputs(cfg, sample_count, seed)
    got_class, got_scores = _predict_via_cli(command, model_file, x)

    model = cfg.model
    want_scores = np.asarray(model.predict_proba(x))
    predicted = model.predict(x)
    class_index = {cls: i + 1 for i, cls in enumerate(model.classes_)}
    want_class = np.asarray([class_index[c] for c in predicted])
    if cfg.negate_leaves:
        # negated scores invert the selection; the exported model picks
        # the source model's least-preferred class by construction
        want_class = np.asarray([
            1 + int(np.argmin(row)) for row in want_scores])

    disagree = got_class != want_class
    n_bad = int(disagree.sum())
    first = int(np.argmax(disagree)) if n_bad else None

    if cfg.negate_leaves or got_scores.shape != want_scores.shape:
        max_dev = 0.0
    else:
        denom = np.maximum(np.maximum(np.abs(want_scores), np.abs(got_scores)),
                           1e-12)
        max_dev = float(np.max(np.abs(want_scores - got_scores) / denom))
    return EquivalenceReport(
        samples=sample_count,
        class_disagreements=n_bad,
        max_score_deviation=max_dev,
        first_disagreement=first,
    )
