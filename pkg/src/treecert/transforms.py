"""Conservative abstract transformers for trees and ensembles.

The transformers map an input hyperrectangle to an output box that
contains every concrete output the model can produce on that region.
Traversal prunes subtrees whose split is decided by the region, so a
fully constrained region yields a singleton (exactness at the bottom of
the refinement).

Internally the walk works on a mutable scratch region (parallel lo/hi
arrays with inclusivity flags) so restricting one dimension and undoing
it are O(1); the immutable :class:`~treecert.boxes.Box` type is the
public currency.
"""
from __future__ import annotations

from typing import Iterable, Sequence

from .boxes import NEG_INF, POS_INF, Box, Interval
from .trees import Ensemble, Internal, Leaf, Node, PostProcess, Tree, stable_softmax


class Scratch:
    """Mutable region used during tree walks.  Not part of the public API."""

    __slots__ = ("lo", "hi", "lo_inc", "hi_inc")

    def __init__(self, box: Box):
        self.lo = [iv.lo for iv in box.dims]
        self.hi = [iv.hi for iv in box.dims]
        self.lo_inc = [iv.lo_inclusive for iv in box.dims]
        self.hi_inc = [iv.hi_inclusive for iv in box.dims]

    def snapshot(self) -> Box:
        return Box(
            tuple(
                Interval(l, h, li, hi_)
                for l, h, li, hi_ in zip(self.lo, self.hi, self.lo_inc, self.hi_inc)
            )
        )


def leaf_value_bounds(
    node: Node, reg: Scratch, out_lo: list[float], out_hi: list[float]
) -> None:
    """Join the values of all leaves reachable from ``node`` within ``reg``
    into ``out_lo``/``out_hi`` (component-wise min/max).

    Splits decided by the region route one way without branching; only
    genuinely undecided splits restrict the region and visit both sides,
    so every visited leaf has a non-empty meet with the region.
    """
    lo, hi, lo_inc, hi_inc = reg.lo, reg.hi, reg.lo_inc, reg.hi_inc
    while True:
        if type(node) is Leaf:
            for j, v in enumerate(node.value):
                if v < out_lo[j]:
                    out_lo[j] = v
                if v > out_hi[j]:
                    out_hi[j] = v
            return
        f = node.feature
        thr = node.threshold
        if hi[f] <= thr:
            node = node.left
            continue
        l = lo[f]
        if l > thr or (l == thr and not lo_inc[f]):
            node = node.right
            continue
        # Undecided: visit the left side under x_f <= thr, then the right
        # side under x_f > thr, restoring the region in between.
        old_h, old_hinc = hi[f], hi_inc[f]
        hi[f] = thr
        hi_inc[f] = True
        leaf_value_bounds(node.left, reg, out_lo, out_hi)
        hi[f] = old_h
        hi_inc[f] = old_hinc
        old_l, old_linc = lo[f], lo_inc[f]
        lo[f] = thr
        lo_inc[f] = False
        leaf_value_bounds(node.right, reg, out_lo, out_hi)
        lo[f] = old_l
        lo_inc[f] = old_linc
        return


def _softmax_bounds(lo: list[float], hi: list[float]) -> tuple[list[float], list[float]]:
    # softmax_i is increasing in component i and decreasing in the others,
    # so per-component extremes are attained at mixed corner vectors.
    m = len(lo)
    out_lo = []
    out_hi = []
    for i in range(m):
        worst = list(hi)
        worst[i] = lo[i]
        out_lo.append(stable_softmax(worst)[i])
        best = list(lo)
        best[i] = hi[i]
        out_hi.append(stable_softmax(best)[i])
    return out_lo, out_hi


def apply_post_bounds(
    lo: list[float],
    hi: list[float],
    post: PostProcess,
    n_trees: int,
    argmax_only: bool = False,
) -> tuple[list[float], list[float]]:
    """Abstract counterpart of the concrete post-processing step.

    Division by the tree count uses plain float division on endpoints.
    Softmax is argmax-invariant, so it may be skipped when the consumer
    only inspects the argmax; otherwise it is evaluated monotonically
    per component.
    """
    if post is PostProcess.DIVISOR:
        return [v / n_trees for v in lo], [v / n_trees for v in hi]
    if post is PostProcess.SOFTMAX and not argmax_only:
        return _softmax_bounds(lo, hi)
    return lo, hi


def tree_transform(tree: Tree, box: Box) -> Box:
    """Join of the leaf values over all leaves whose region meets ``box``."""
    if box.is_empty:
        raise ValueError("tree_transform requires a non-empty box")
    reg = Scratch(box)
    out_lo: list[float] = []
    out_hi: list[float] = []
    # Probe one leaf to size the output, then join properly.
    node = tree.root
    while type(node) is Internal:
        node = node.left
    m = len(node.value)
    out_lo = [POS_INF] * m
    out_hi = [NEG_INF] * m
    leaf_value_bounds(tree.root, reg, out_lo, out_hi)
    return Box(tuple(Interval.closed(l, h) for l, h in zip(out_lo, out_hi)))


def ensemble_transform(
    ens: Ensemble,
    box: Box,
    pinned: Sequence[float] | None = None,
    remaining: Iterable[int] | None = None,
    argmax_only: bool = False,
) -> Box:
    """Interval sum of per-tree transforms plus an exact pinned offset,
    followed by abstract post-processing.

    ``pinned`` must be the exact partial sum of the trees not in
    ``remaining`` (each constant on ``box``); ``remaining`` defaults to
    all trees.  With no remaining trees the result is the singleton
    post-processed pinned sum.
    """
    if box.is_empty:
        raise ValueError("ensemble_transform requires a non-empty box")
    if box.n != ens.n_features:
        raise ValueError(f"box has {box.n} dimensions, model expects {ens.n_features}")
    m = ens.n_outputs
    if pinned is None:
        pinned = [0.0] * m
    elif len(pinned) != m:
        raise ValueError(f"pinned sum has {len(pinned)} components, expected {m}")
    if remaining is None:
        idx = range(len(ens.trees))
    else:
        idx = sorted(set(remaining))
        for i in idx:
            if not 0 <= i < len(ens.trees):
                raise ValueError(f"tree index {i} out of range")
    total_lo = list(pinned)
    total_hi = list(pinned)
    reg = Scratch(box)
    for i in idx:
        t_lo = [POS_INF] * m
        t_hi = [NEG_INF] * m
        leaf_value_bounds(ens.trees[i].root, reg, t_lo, t_hi)
        for j in range(m):
            total_lo[j] += t_lo[j]
            total_hi[j] += t_hi[j]
    total_lo, total_hi = apply_post_bounds(
        total_lo, total_hi, ens.post_process, len(ens.trees), argmax_only
    )
    return Box(tuple(Interval.closed(l, h) for l, h in zip(total_lo, total_hi)))
