"""Regenerate the committed test fixtures.

Run from the repository root:

    python3 tools/make_fixtures.py

Produces, under tests/fixtures/:
  - corpus/counts_NN.tree: twelve count-leaf model files in canonical
    form, covering a spread of shapes and post-processing modes.
  - digits_rf.tree: a 25-tree depth-5 random forest trained on the
    64-feature sklearn digits dataset, exported to the native format.
  - digits_test.tsv: 250 held-out digits samples with 1-based labels.

Requires scikit-learn, which is a generation-time dependency only; the
package itself never imports it.  The export is checked bit-for-bit
against sklearn's own predictions before anything is written.
"""
import random
import sys
import time
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits
from sklearn.ensemble import RandomForestClassifier
from sklearn.model_selection import train_test_split

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from treecert.modelio import (  # noqa: E402
    CountLeaf,
    CountModel,
    CountSplit,
    Dataset,
    parse_counts,
    parse_model,
    serialize_counts,
    serialize_dataset,
    serialize_model,
)
from treecert.trees import (  # noqa: E402
    Ensemble,
    Internal,
    Leaf,
    PostProcess,
    Tree,
    classify,
    ensemble_predict,
)

FIXTURES = ROOT / "tests" / "fixtures"
CORPUS = FIXTURES / "corpus"


def random_count_node(rng, n_features, n_outputs, depth):
    if depth == 0 or rng.random() < 0.3:
        counts = [rng.randint(0, 50) for _ in range(n_outputs)]
        if sum(counts) == 0:
            counts[rng.randrange(n_outputs)] = rng.randint(1, 50)
        return CountLeaf(tuple(counts))
    feature = rng.randrange(n_features)
    threshold = rng.uniform(-4.0, 4.0)
    if rng.random() < 0.3:
        threshold = round(threshold, 1)
    return CountSplit(
        feature, threshold,
        random_count_node(rng, n_features, n_outputs, depth - 1),
        random_count_node(rng, n_features, n_outputs, depth - 1))


def make_corpus():
    rng = random.Random(20240501)
    posts = [PostProcess.DIVISOR] * 8 + [PostProcess.SOFTMAX] * 2 \
        + [PostProcess.IDENTITY] * 2
    CORPUS.mkdir(parents=True, exist_ok=True)
    for i, post in enumerate(posts):
        n_features = rng.randint(1, 5)
        n_outputs = rng.randint(2, 5)
        n_trees = rng.randint(1, 6)
        depth = rng.randint(1, 4)
        roots = tuple(
            random_count_node(rng, n_features, n_outputs, depth)
            for _ in range(n_trees))
        model = CountModel(roots, post, n_features, n_outputs)
        text = serialize_counts(model)
        assert parse_counts(text) == model
        assert serialize_counts(parse_counts(text)) == text
        path = CORPUS / f"counts_{i:02d}.tree"
        path.write_text(text)
        print(f"wrote {path.relative_to(ROOT)} "
              f"(trees={n_trees} features={n_features} outputs={n_outputs} "
              f"post={post.value})")


def sklearn_tree_to_native(tree):
    """Convert one fitted sklearn tree to a native Tree of probability leaves."""
    left = tree.children_left
    right = tree.children_right
    feature = tree.feature
    threshold = tree.threshold
    value = tree.value

    def build(node):
        if left[node] == -1:
            # sklearn already stores class fractions at classifier leaves
            # and predict_proba returns them unchanged, so copy the bits.
            return Leaf(tuple(float(v) for v in value[node][0]))
        return Internal(int(feature[node]), float(threshold[node]),
                        build(left[node]), build(right[node]))

    return Tree(build(0))


def make_digits_fixtures():
    data = load_digits()
    x_train, x_test, y_train, y_test = train_test_split(
        data.data, data.target, test_size=300, random_state=7,
        stratify=data.target)
    clf = RandomForestClassifier(
        n_estimators=25, max_depth=5, random_state=7, n_jobs=1)
    clf.fit(x_train, y_train)

    trees = tuple(sklearn_tree_to_native(est.tree_) for est in clf.estimators_)
    ens = Ensemble(trees, PostProcess.DIVISOR, x_train.shape[1],
                   len(clf.classes_))

    proba = clf.predict_proba(x_test)
    preds = clf.predict(x_test)
    for i, x in enumerate(x_test):
        xs = tuple(float(v) for v in x)
        ours = ensemble_predict(ens, xs)
        if tuple(proba[i]) != ours:
            raise SystemExit(f"probability mismatch on test sample {i}")
        if classify(ens, xs) != int(preds[i]) + 1:
            raise SystemExit(f"class mismatch on test sample {i}")
    print(f"export agrees with sklearn bit-for-bit on {len(x_test)} samples")

    text = serialize_model(ens)
    assert parse_model(text) == ens
    model_path = FIXTURES / "digits_rf.tree"
    model_path.write_text(text)
    print(f"wrote {model_path.relative_to(ROOT)} "
          f"({len(text)} bytes, accuracy {clf.score(x_test, y_test):.3f})")

    rows = tuple(
        (int(label) + 1, tuple(float(v) for v in x))
        for label, x in zip(y_test[:250], x_test[:250]))
    ds = Dataset(ens.n_features, rows)
    data_path = FIXTURES / "digits_test.tsv"
    data_path.write_text(serialize_dataset(ds))
    print(f"wrote {data_path.relative_to(ROOT)} ({len(rows)} samples)")
    return ens, rows


def time_verification(ens, rows):
    """Check the committed workload is solvable well inside its budget."""
    from treecert.parallel import is_robust_parallel

    begin = time.monotonic()
    samples = [(x, label) for label, x in rows]
    report = is_robust_parallel(ens, samples, epsilon=1.0, jobs=1, timeout=60.0)
    wall = time.monotonic() - begin
    slowest = max(r.wall_time for r in report.results)
    print(f"verification sweep: {report.n_verified} verified "
          f"{report.n_falsified} falsified {report.n_timeout} timeout "
          f"{report.n_error} error in {wall:.1f}s (slowest item {slowest:.2f}s)")
    if report.n_timeout or report.n_error:
        raise SystemExit("fixture workload is not cleanly solvable")


def main():
    make_corpus()
    ens, rows = make_digits_fixtures()
    time_verification(ens, rows)


if __name__ == "__main__":
    main()
