"""Shared generators for randomized oracle tests.

Everything is driven by an explicit ``random.Random`` so failures are
reproducible from the seed alone.  Thresholds mix a coarse grid with
continuous draws so that splits frequently coincide with region
endpoints, which is where inclusivity bugs hide.
"""
from __future__ import annotations

import random

from treecert.boxes import Box, Interval
from treecert.trees import Ensemble, Internal, Leaf, PostProcess, Tree

THRESHOLD_GRID = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]


def random_threshold(rng: random.Random) -> float:
    if rng.random() < 0.5:
        return rng.choice(THRESHOLD_GRID)
    return rng.uniform(-3.0, 3.0)


def random_leaf(rng: random.Random, n_outputs: int) -> Leaf:
    return Leaf(tuple(round(rng.uniform(0.0, 1.0), 3) for _ in range(n_outputs)))


def random_node(rng: random.Random, n_features: int, n_outputs: int, depth: int):
    if depth == 0 or rng.random() < 0.25:
        return random_leaf(rng, n_outputs)
    return Internal(
        rng.randrange(n_features),
        random_threshold(rng),
        random_node(rng, n_features, n_outputs, depth - 1),
        random_node(rng, n_features, n_outputs, depth - 1),
    )


def random_ensemble(
    rng: random.Random,
    n_trees: int = 3,
    n_features: int = 2,
    n_outputs: int = 2,
    depth: int = 3,
    post: PostProcess = PostProcess.DIVISOR,
) -> Ensemble:
    trees = tuple(
        Tree(random_node(rng, n_features, n_outputs, depth)) for _ in range(n_trees)
    )
    return Ensemble(trees, post, n_features, n_outputs)


def random_interval(rng: random.Random) -> Interval:
    kind = rng.random()
    if kind < 0.1:
        return Interval.unbounded()
    a = random_threshold(rng)
    if kind < 0.2:
        return Interval(float("-inf"), a, False, rng.random() < 0.5)
    if kind < 0.3:
        return Interval(a, float("inf"), rng.random() < 0.5, False)
    b = a + abs(rng.uniform(0.0, 3.0))
    return Interval(a, b, rng.random() < 0.5, rng.random() < 0.5)


def random_box(rng: random.Random, n: int) -> Box:
    while True:
        box = Box(tuple(random_interval(rng) for _ in range(n)))
        if not box.is_empty:
            return box


def random_point_in(rng: random.Random, box: Box) -> tuple[float, ...]:
    """A point of the box, biased toward interior but occasionally at an
    included endpoint."""
    point = []
    for iv in box.dims:
        lo_fin = iv.lo != float("-inf")
        hi_fin = iv.hi != float("inf")
        if lo_fin and hi_fin:
            if iv.lo_inclusive and rng.random() < 0.15:
                point.append(iv.lo)
                continue
            if iv.hi_inclusive and rng.random() < 0.15:
                point.append(iv.hi)
                continue
            if iv.is_point:
                point.append(iv.inner_point())
                continue
            x = rng.uniform(iv.lo, iv.hi)
            if not iv.contains(x):
                x = iv.inner_point()
            point.append(x)
        elif lo_fin:
            if iv.lo_inclusive and rng.random() < 0.15:
                point.append(iv.lo)
            else:
                point.append(iv.lo + rng.uniform(0.001, 5.0))
        elif hi_fin:
            if iv.hi_inclusive and rng.random() < 0.15:
                point.append(iv.hi)
            else:
                point.append(iv.hi - rng.uniform(0.001, 5.0))
        else:
            point.append(rng.uniform(-5.0, 5.0))
    return tuple(point)


def node_paths(node, path: str = ""):
    """Yield (path, node) for every node, path as L/R steps from the root."""
    yield path, node
    if isinstance(node, Internal):
        yield from node_paths(node.left, path + "L")
        yield from node_paths(node.right, path + "R")


def replace_node(node, path: str, fn):
    """Rebuild a tree with ``fn`` applied to the node at L/R ``path``."""
    if not path:
        return fn(node)
    child = node.left if path[0] == "L" else node.right
    rebuilt = replace_node(child, path[1:], fn)
    if path[0] == "L":
        return Internal(node.feature, node.threshold, rebuilt, node.right)
    return Internal(node.feature, node.threshold, node.left, rebuilt)


def with_tree(ens: Ensemble, idx: int, root) -> Ensemble:
    trees = list(ens.trees)
    trees[idx] = Tree(root)
    return Ensemble(tuple(trees), ens.post_process, ens.n_features, ens.n_outputs)


def hand_pair() -> Ensemble:
    """The two-tree stump pair used across the unit tests: both split on
    feature 0 (at 0 and at 2) and vote (1,0) left, (0,1) right, averaged."""
    t1 = Tree(Internal(0, 0.0, Leaf((1.0, 0.0)), Leaf((0.0, 1.0))))
    t2 = Tree(Internal(0, 2.0, Leaf((1.0, 0.0)), Leaf((0.0, 1.0))))
    return Ensemble((t1, t2), PostProcess.DIVISOR, 1, 2)
