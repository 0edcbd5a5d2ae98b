"""Batch verification across many regions, optionally in parallel.

Each work item is independent: one input region plus one checker, with
its own deadline that starts when a worker picks the item up.  Workers
receive the model once at pool start and results come back in
submission order, so a batch run with ``jobs > 1`` reports exactly the
same verdicts as a sequential run, only faster on spare cores.
"""
from __future__ import annotations

import enum
import pickle
import time
import warnings
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .boxes import Box, Interval, TransformStats
from .engine import Counterexample, Verdict, verify_region
from .properties import (
    AssertionChecker,
    PropertySpec,
    RobustnessChecker,
    perturbation_region,
)
from .trees import Ensemble


class ItemOutcome(enum.Enum):
    VERIFIED = "verified"
    FALSIFIED = "falsified"
    TIMEOUT = "timeout"
    ERROR = "error"


@dataclass(frozen=True, slots=True)
class WorkItem:
    """One verification job: decide ``checker`` over ``region``."""

    index: int
    region: Box
    checker: object
    deadline: float | None = None


@dataclass(frozen=True, slots=True)
class ItemResult:
    index: int
    outcome: ItemOutcome
    wall_time: float
    stats: TransformStats | None = None
    counterexample: Counterexample | None = None
    error: str | None = None


@dataclass(frozen=True, slots=True)
class BatchReport:
    """Per-item results (in submission order) plus batch-level timing."""

    results: tuple[ItemResult, ...]
    wall_time: float
    jobs: int

    @property
    def n_items(self) -> int:
        return len(self.results)

    def count(self, outcome: ItemOutcome) -> int:
        return sum(1 for r in self.results if r.outcome is outcome)

    @property
    def n_verified(self) -> int:
        return self.count(ItemOutcome.VERIFIED)

    @property
    def n_falsified(self) -> int:
        return self.count(ItemOutcome.FALSIFIED)

    @property
    def n_timeout(self) -> int:
        return self.count(ItemOutcome.TIMEOUT)

    @property
    def n_error(self) -> int:
        return self.count(ItemOutcome.ERROR)

    @property
    def all_verified(self) -> bool:
        return all(r.outcome is ItemOutcome.VERIFIED for r in self.results)

    @property
    def overall(self) -> ItemOutcome:
        """Falsified beats timeout beats verified: one concrete
        counterexample settles the batch no matter what timed out."""
        outcomes = {r.outcome for r in self.results}
        if ItemOutcome.FALSIFIED in outcomes:
            return ItemOutcome.FALSIFIED
        if ItemOutcome.ERROR in outcomes:
            return ItemOutcome.ERROR
        if ItemOutcome.TIMEOUT in outcomes:
            return ItemOutcome.TIMEOUT
        return ItemOutcome.VERIFIED


_VERDICT_TO_OUTCOME = {
    Verdict.TRUE: ItemOutcome.VERIFIED,
    Verdict.FALSE: ItemOutcome.FALSIFIED,
    Verdict.TIMEOUT: ItemOutcome.TIMEOUT,
}


def run_work_item(ens: Ensemble, item: WorkItem) -> ItemResult:
    start = time.monotonic()
    try:
        res = verify_region(ens, item.region, item.checker, deadline=item.deadline)
    except Exception as exc:  # noqa: BLE001 - batch must survive bad items
        return ItemResult(
            index=item.index,
            outcome=ItemOutcome.ERROR,
            wall_time=time.monotonic() - start,
            error=f"{type(exc).__name__}: {exc}",
        )
    return ItemResult(
        index=item.index,
        outcome=_VERDICT_TO_OUTCOME[res.verdict],
        wall_time=time.monotonic() - start,
        stats=res.stats,
        counterexample=res.counterexample,
    )


_worker_model: Ensemble | None = None


def _worker_init(payload: bytes) -> None:
    global _worker_model
    _worker_model = pickle.loads(payload)


def _worker_run(item: WorkItem) -> ItemResult:
    assert _worker_model is not None, "worker used before initialization"
    return run_work_item(_worker_model, item)


def run_batch(ens: Ensemble, items: list[WorkItem], jobs: int = 1) -> BatchReport:
    """Run all items and collect results in submission order.

    ``jobs == 1`` stays in-process; more jobs fan out over a process
    pool whose workers unpickle the model once each.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    start = time.monotonic()
    if jobs == 1 or len(items) <= 1:
        results = [run_work_item(ens, item) for item in items]
    else:
        payload = pickle.dumps(ens, protocol=pickle.HIGHEST_PROTOCOL)
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(payload,)
        ) as pool:
            results = list(pool.map(_worker_run, items, chunksize=1))
    return BatchReport(
        results=tuple(results), wall_time=time.monotonic() - start, jobs=jobs
    )


def is_robust_parallel(
    ens: Ensemble,
    samples: list[tuple[tuple[float, ...], int]],
    epsilon: float,
    jobs: int = 1,
    timeout: float | None = None,
    domain: Box | None = None,
) -> BatchReport:
    """Check pointwise robustness for a batch of ``(x, label)`` samples.

    Each sample becomes one work item over its open perturbation box;
    ``timeout`` is the per-item deadline in seconds.
    """
    items = []
    for i, (x, label) in enumerate(samples):
        if len(x) != ens.n_features:
            raise ValueError(
                f"sample {i} has {len(x)} features, model expects {ens.n_features}"
            )
        checker = RobustnessChecker(label, ens.n_outputs)
        region = perturbation_region(x, epsilon, domain)
        items.append(WorkItem(index=i, region=region, checker=checker, deadline=timeout))
    return run_batch(ens, items, jobs=jobs)


def split_region(box: Box, parts: int) -> list[Box]:
    """Split a box into up to ``parts`` disjoint pieces whose union is the
    box, by repeatedly bisecting the widest finite dimension of the
    oldest piece.  Pieces with no finite positive-width dimension cannot
    be split; if nothing is splittable a warning is issued and the
    available pieces are returned as-is.
    """
    if parts < 1:
        raise ValueError("parts must be at least 1")
    if box.is_empty:
        raise ValueError("cannot split an empty box")
    queue: deque[Box] = deque([box])
    unsplittable_streak = 0
    while len(queue) < parts and unsplittable_streak < len(queue):
        candidate = queue.popleft()
        halves = _bisect_widest(candidate)
        if halves is None:
            queue.append(candidate)
            unsplittable_streak += 1
        else:
            queue.extend(halves)
            unsplittable_streak = 0
    if len(queue) < parts:
        warnings.warn(
            f"requested {parts} pieces but only {len(queue)} could be formed; "
            "remaining dimensions are unbounded or too narrow to bisect",
            stacklevel=2,
        )
    return list(queue)


def _bisect_widest(box: Box) -> tuple[Box, Box] | None:
    best_i = -1
    best_w = 0.0
    for i, iv in enumerate(box.dims):
        if not iv.is_finite:
            continue
        w = iv.width
        if w > best_w:
            best_w = w
            best_i = i
    if best_i < 0:
        return None
    iv = box.dims[best_i]
    mid = iv.lo + (iv.hi - iv.lo) / 2
    if not iv.lo < mid < iv.hi:
        return None
    left = box.replace(best_i, Interval(iv.lo, mid, iv.lo_inclusive, True))
    right = box.replace(best_i, Interval(mid, iv.hi, False, iv.hi_inclusive))
    return left, right


def verify_property_parallel(
    ens: Ensemble,
    spec: PropertySpec,
    split: int = 1,
    jobs: int = 1,
    timeout: float | None = None,
) -> BatchReport:
    """Verify a property over its whole input region, optionally cut into
    ``split`` independently checked pieces."""
    if spec.n_features != ens.n_features:
        raise ValueError(
            f"property expects {spec.n_features} features, model has {ens.n_features}"
        )
    if spec.n_outputs != ens.n_outputs:
        raise ValueError(
            f"property expects {spec.n_outputs} outputs, model has {ens.n_outputs}"
        )
    checker = AssertionChecker.for_spec(spec)
    pieces = split_region(spec.input_region, split)
    items = [
        WorkItem(index=i, region=piece, checker=checker, deadline=timeout)
        for i, piece in enumerate(pieces)
    ]
    return run_batch(ens, items, jobs=jobs)
