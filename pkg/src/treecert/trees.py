"""Concrete semantics of decision trees and tree ensembles.

Everything the abstract machinery proves is conservative with respect to
the functions defined here: threshold routing, summation over trees in
serialized order, and the post-processing step.  Routing is inclusive on
the left: an input goes left iff ``x[feature] <= threshold``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .boxes import Box, Interval


class PostProcess(enum.Enum):
    """Final transform applied to the sum of tree outputs."""

    DIVISOR = "divisor"      # divide by the number of trees (random forests)
    SOFTMAX = "softmax"      # gradient-boosted classifiers
    IDENTITY = "identity"


@dataclass(frozen=True, slots=True)
class Leaf:
    value: tuple[float, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.value, tuple):
            object.__setattr__(self, "value", tuple(self.value))
        for v in self.value:
            if not math.isfinite(v):
                raise ValueError("leaf values must be finite")


@dataclass(frozen=True, slots=True)
class Internal:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"

    def __post_init__(self) -> None:
        if self.feature < 0:
            raise ValueError("feature index must be non-negative")
        if not math.isfinite(self.threshold):
            raise ValueError("split threshold must be finite")


Node = Internal | Leaf


@dataclass(frozen=True, slots=True)
class Tree:
    root: Node

    @property
    def leaf_count(self) -> int:
        return sum(1 for _ in _iter_leaves(self.root))

    @property
    def depth(self) -> int:
        """Maximum number of edges from the root to a leaf."""
        def d(node: Node) -> int:
            if isinstance(node, Leaf):
                return 0
            return 1 + max(d(node.left), d(node.right))
        return d(self.root)


def _iter_leaves(node: Node) -> Iterator[Leaf]:
    if isinstance(node, Leaf):
        yield node
        return
    yield from _iter_leaves(node.left)
    yield from _iter_leaves(node.right)


@dataclass(frozen=True, slots=True)
class Ensemble:
    """An ordered list of trees with shared dimensions.

    Tree order is significant: it fixes both the summation order of the
    prediction function and the refinement order of the verifier.
    """

    trees: tuple[Tree, ...]
    post_process: PostProcess
    n_features: int
    n_outputs: int

    def __post_init__(self) -> None:
        if not isinstance(self.trees, tuple):
            object.__setattr__(self, "trees", tuple(self.trees))
        if len(self.trees) < 1:
            raise ValueError("an ensemble needs at least one tree")
        if self.n_features < 1 or self.n_outputs < 1:
            raise ValueError("n_features and n_outputs must be >= 1")
        for ti, tree in enumerate(self.trees):
            _validate_node(tree.root, self.n_features, self.n_outputs, ti)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _validate_node(node: Node, n_features: int, n_outputs: int, tree_index: int) -> None:
    if isinstance(node, Leaf):
        if len(node.value) != n_outputs:
            raise ValueError(
                f"tree {tree_index}: leaf has {len(node.value)} components, expected {n_outputs}"
            )
        return
    if node.feature >= n_features:
        raise ValueError(
            f"tree {tree_index}: split on feature {node.feature}, only {n_features} features"
        )
    _validate_node(node.left, n_features, n_outputs, tree_index)
    _validate_node(node.right, n_features, n_outputs, tree_index)


def _check_input(x: Sequence[float], n: int) -> None:
    if len(x) != n:
        raise ValueError(f"input has {len(x)} components, model expects {n}")


def tree_predict(tree: Tree, x: Sequence[float], n_features: int | None = None) -> tuple[float, ...]:
    """Route ``x`` through the tree and return the leaf value reached."""
    if n_features is not None:
        _check_input(x, n_features)
    node = tree.root
    while isinstance(node, Internal):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value


def stable_softmax(v: Sequence[float]) -> tuple[float, ...]:
    """Softmax with the shift-by-max formulation."""
    m = max(v)
    exps = [math.exp(c - m) for c in v]
    total = sum(exps)
    return tuple(e / total for e in exps)


def _apply_post(total: list[float], post: PostProcess, n_trees: int) -> tuple[float, ...]:
    if post is PostProcess.DIVISOR:
        return tuple(v / n_trees for v in total)
    if post is PostProcess.SOFTMAX:
        return stable_softmax(total)
    return tuple(total)


def ensemble_predict(ens: Ensemble, x: Sequence[float]) -> tuple[float, ...]:
    """Sum the tree outputs in serialized order, then post-process."""
    _check_input(x, ens.n_features)
    total = [0.0] * ens.n_outputs
    for tree in ens.trees:
        node = tree.root
        while isinstance(node, Internal):
            node = node.left if x[node.feature] <= node.threshold else node.right
        for j, v in enumerate(node.value):
            total[j] += v
    return _apply_post(total, ens.post_process, len(ens.trees))


def argmax_class(scores: Sequence[float]) -> int:
    """1-based index of the largest score; ties break to the lowest index."""
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best + 1


def classify(ens: Ensemble, x: Sequence[float]) -> int:
    """Class index in {1, ..., m} of the ensemble prediction."""
    return argmax_class(ensemble_predict(ens, x))


def leaf_regions(tree: Tree, n_features: int) -> list[tuple[Box, tuple[float, ...]]]:
    """Recover the (region, value) pairs from the node representation.

    The region of a leaf is the conjunction of its path constraints: a
    ``<=`` edge closes the upper end, a ``>`` edge opens the lower end.
    The regions partition the whole input space.
    """
    out: list[tuple[Box, tuple[float, ...]]] = []

    def rec(node: Node, box: Box) -> None:
        if isinstance(node, Leaf):
            out.append((box, node.value))
            return
        f, thr = node.feature, node.threshold
        iv = box.dims[f]
        left_iv = iv.intersect(Interval(lo=float("-inf"), hi=thr, hi_inclusive=True))
        if not left_iv.is_empty:
            rec(node.left, box.replace(f, left_iv))
        right_iv = iv.intersect(Interval(lo=thr, hi=float("inf"), lo_inclusive=False))
        if not right_iv.is_empty:
            rec(node.right, box.replace(f, right_iv))

    rec(tree.root, Box.unbounded(n_features))
    return out


DEFAULT_CELL_CAP = 10**6


def enumerate_cells(
    ens: Ensemble,
    within: Box | None = None,
    cap: int = DEFAULT_CELL_CAP,
) -> Iterator[tuple[Box, tuple[float, ...]]]:
    """All feasible intersections of one leaf region per tree, with the
    exact ensemble output on each.

    The cells partition the input space (or ``within``, when given).
    Intended as a brute-force oracle for small ensembles: refuses to run
    when the product of leaf counts exceeds ``cap``.
    """
    product = 1
    for tree in ens.trees:
        product *= tree.leaf_count
        if product > cap:
            raise ValueError(
                f"cell enumeration refused: product of leaf counts exceeds cap {cap}"
            )
    start = Box.unbounded(ens.n_features) if within is None else within
    if start.n != ens.n_features:
        raise ValueError(f"box has {start.n} dimensions, model expects {ens.n_features}")
    if start.is_empty:
        return

    trees = ens.trees
    n_trees = len(trees)

    def rec(ti: int, box: Box, acc: list[float]) -> Iterator[tuple[Box, tuple[float, ...]]]:
        if ti == n_trees:
            yield box, _apply_post(list(acc), ens.post_process, n_trees)
            return

        # Depth-first, left-first walk of one tree restricted to `box`.
        def walk(node: Node, b: Box) -> Iterator[tuple[Box, tuple[float, ...]]]:
            if isinstance(node, Leaf):
                nxt = [a + v for a, v in zip(acc, node.value)]
                yield from rec(ti + 1, b, nxt)
                return
            f, thr = node.feature, node.threshold
            iv = b.dims[f]
            left_iv = iv.intersect(Interval(hi=thr, hi_inclusive=True))
            if not left_iv.is_empty:
                yield from walk(node.left, b.replace(f, left_iv))
            right_iv = iv.intersect(Interval(lo=thr))
            if not right_iv.is_empty:
                yield from walk(node.right, b.replace(f, right_iv))

        yield from walk(trees[ti].root, box)

    yield from rec(0, start, [0.0] * ens.n_outputs)
