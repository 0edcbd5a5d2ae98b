"""Verification engine: abstract evaluation with stepwise refinement.

The engine checks a property over an input region.  It first evaluates
the whole ensemble abstractly; if the property checker cannot decide
the resulting output box, the region is split along the leaves of one
tree at a time.  Each refined sub-region makes that tree constant, so
its contribution moves into an exact pinned sum and the abstraction
only covers the trees not yet refined.  At full depth the output is a
single concrete point and the checker must decide it.

Refinement depth is bounded by the number of trees, which keeps memory
linear in the model size regardless of how many sub-regions the search
visits: the walk is depth-first and undoes its region restrictions on
the way back up.
"""
from __future__ import annotations

import enum
import sys
import time
from dataclasses import dataclass
from typing import Protocol

from .boxes import NEG_INF, POS_INF, Box, Interval, TransformStats
from .trees import Ensemble, Internal, Leaf, PostProcess, ensemble_predict
from .transforms import Scratch, apply_post_bounds, leaf_value_bounds


class CheckOutcome(enum.Enum):
    """Three-valued answer from a property checker."""

    PASS = "pass"
    FAIL = "fail"
    UNSURE = "unsure"


class Verdict(enum.Enum):
    """Final engine answer for a region."""

    TRUE = "true"
    FALSE = "false"
    TIMEOUT = "timeout"


class PropertyChecker(Protocol):
    """What the engine needs from a property.

    ``check`` receives the current input region and a box bounding every
    output the model can produce on it.  PASS and FAIL must hold for the
    whole region; UNSURE requests refinement.  Checkers that only depend
    on the argmax of the output should set ``argmax_invariant`` to let
    the engine skip order-preserving post-processing.
    """

    argmax_invariant: bool

    def check(self, region: Box, outputs: Box) -> CheckOutcome: ...


class CheckerContractError(Exception):
    """A checker returned UNSURE for a singleton output box."""


class _DeadlineReached(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Counterexample:
    """A fully refined region on which the property fails, with the exact
    model output attained there (constant across the region up to the
    final post-processing, and evaluated at ``witness``)."""

    region: Box
    witness: tuple[float, ...]
    output: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class EngineResult:
    verdict: Verdict
    stats: TransformStats
    counterexample: Counterexample | None = None


def find_concrete_witness(region: Box) -> tuple[float, ...]:
    """Pick a concrete point inside a (non-empty) region."""
    return region.inner_point()


def verify_region(
    ens: Ensemble,
    box: Box,
    checker: PropertyChecker,
    deadline: float | None = None,
) -> EngineResult:
    """Decide whether ``checker`` passes on every point of ``box``.

    Returns TRUE when every sub-region passed, FALSE with a
    counterexample as soon as one sub-region fails, and TIMEOUT when
    ``deadline`` seconds elapse first.  The deadline is polled before
    each checker invocation, so overshoot is bounded by the cost of a
    single abstract evaluation.
    """
    if box.is_empty:
        raise ValueError("verify_region requires a non-empty box")
    if box.n != ens.n_features:
        raise ValueError(f"box has {box.n} dimensions, model expects {ens.n_features}")
    trees = ens.trees
    n_trees = len(trees)
    m = ens.n_outputs
    post = ens.post_process
    # The refinement recurses once per pinned tree plus once per split on
    # the walk through each tree, so make room on the interpreter stack.
    needed = n_trees * (max(t.depth for t in trees) + 2) + 200
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed)
    argmax_only = bool(getattr(checker, "argmax_invariant", False))
    stats = TransformStats()
    reg = Scratch(box)
    lo, hi, lo_inc, hi_inc = reg.lo, reg.hi, reg.lo_inc, reg.hi_inc
    deadline_at = None if deadline is None else time.monotonic() + deadline
    found: list[Counterexample] = []

    def evaluate(k: int, pinned: list[float]) -> bool:
        """Check the region with trees[0:k] pinned; refine on UNSURE."""
        if deadline_at is not None and time.monotonic() >= deadline_at:
            raise _DeadlineReached
        if k > stats.max_recursion_depth:
            stats.max_recursion_depth = k
        total_lo = list(pinned)
        total_hi = list(pinned)
        for ti in range(k, n_trees):
            t_lo = [POS_INF] * m
            t_hi = [NEG_INF] * m
            leaf_value_bounds(trees[ti].root, reg, t_lo, t_hi)
            for j in range(m):
                total_lo[j] += t_lo[j]
                total_hi[j] += t_hi[j]
        total_lo, total_hi = apply_post_bounds(total_lo, total_hi, post, n_trees, argmax_only)
        region = reg.snapshot()
        outputs = Box(
            tuple(Interval.closed(l, h) for l, h in zip(total_lo, total_hi))
        )
        stats.checker_calls += 1
        outcome = checker.check(region, outputs)
        if outcome is CheckOutcome.PASS:
            return True
        if outcome is CheckOutcome.FAIL:
            found.append(_build_counterexample(ens, reg, region, k))
            return False
        if k == n_trees:
            raise CheckerContractError(
                "checker returned UNSURE for a singleton output box"
            )
        stats.refinement_count += 1
        return refine(trees[k].root, k, pinned)

    def refine(node, k: int, pinned: list[float]) -> bool:
        """Descend tree ``k`` over the current region, leaf by leaf in
        serialized order, pinning each leaf's exact contribution."""
        while type(node) is Internal:
            f = node.feature
            thr = node.threshold
            if hi[f] <= thr:
                node = node.left
                continue
            l = lo[f]
            if l > thr or (l == thr and not lo_inc[f]):
                node = node.right
                continue
            old_h, old_hinc = hi[f], hi_inc[f]
            hi[f] = thr
            hi_inc[f] = True
            ok = refine(node.left, k, pinned)
            hi[f] = old_h
            hi_inc[f] = old_hinc
            if not ok:
                return False
            old_l, old_linc = lo[f], lo_inc[f]
            lo[f] = thr
            lo_inc[f] = False
            ok = refine(node.right, k, pinned)
            lo[f] = old_l
            lo_inc[f] = old_linc
            return ok
        new_pinned = [p + v for p, v in zip(pinned, node.value)]
        return evaluate(k + 1, new_pinned)

    try:
        verified = evaluate(0, [0.0] * m)
    except _DeadlineReached:
        return EngineResult(Verdict.TIMEOUT, stats, None)
    if verified:
        return EngineResult(Verdict.TRUE, stats, None)
    return EngineResult(Verdict.FALSE, stats, found[0])


def _build_counterexample(
    ens: Ensemble, reg: Scratch, region: Box, k: int
) -> Counterexample:
    """Refine the failing region down to one concrete witness point and
    the equivalence cell it lives in (constant across all trees)."""
    witness = region.inner_point()
    lo = list(reg.lo)
    hi = list(reg.hi)
    lo_inc = list(reg.lo_inc)
    hi_inc = list(reg.hi_inc)
    for tree in ens.trees[k:]:
        node = tree.root
        while type(node) is Internal:
            f = node.feature
            thr = node.threshold
            if witness[f] <= thr:
                if thr < hi[f]:
                    hi[f] = thr
                    hi_inc[f] = True
                node = node.left
            else:
                if thr > lo[f]:
                    lo[f] = thr
                    lo_inc[f] = False
                elif thr == lo[f]:
                    lo_inc[f] = False
                node = node.right
    cell = Box(
        tuple(
            Interval(l, h, li, hin)
            for l, h, li, hin in zip(lo, hi, lo_inc, hi_inc)
        )
    )
    output = ensemble_predict(ens, witness)
    return Counterexample(region=cell, witness=witness, output=output)
