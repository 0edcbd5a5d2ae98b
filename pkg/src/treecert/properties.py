"""Property checkers, the assertion language, and a brute-force oracle.

Checkers answer PASS, FAIL, or UNSURE for a box of possible outputs.
PASS and FAIL must be sound for every concrete output inside the box;
anything else is UNSURE, which makes the engine refine.  All class
labels here are 1-based, and ties in the argmax go to the lowest index.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .boxes import NEG_INF, POS_INF, Box, Interval
from .trees import Ensemble, argmax_class, enumerate_cells

from .engine import CheckOutcome


def _argmax_pass(lo: list[float], hi: list[float], label0: int) -> bool:
    # Label wins on every concrete point: strictly above earlier classes
    # (they would steal the tie), at least level with later ones.
    l_lo = lo[label0]
    for j in range(label0):
        if not l_lo > hi[j]:
            return False
    for j in range(label0 + 1, len(lo)):
        if not l_lo >= hi[j]:
            return False
    return True


def _argmax_fail(lo: list[float], hi: list[float], label0: int) -> bool:
    # Some other class beats the label on every concrete point.
    l_hi = hi[label0]
    for j in range(label0):
        if lo[j] >= l_hi:
            return True
    for j in range(label0 + 1, len(lo)):
        if lo[j] > l_hi:
            return True
    return False


def _can_win(lo: list[float], hi: list[float], i: int) -> bool:
    """Whether class ``i`` (0-based) attains the argmax for some point of
    the box: its best score beats every rival's worst, strictly so for
    earlier classes since those win ties."""
    best = hi[i]
    for j in range(i):
        if not best > lo[j]:
            return False
    for j in range(i + 1, len(lo)):
        if not best >= lo[j]:
            return False
    return True


@dataclass(frozen=True, slots=True)
class RobustnessSpec:
    """The expected class label (1-based) that should win the argmax."""

    label: int

    def __post_init__(self):
        if self.label < 1:
            raise ValueError(f"label {self.label} must be at least 1")


def robustness_check(spec: RobustnessSpec, in_box: Box, out_box: Box) -> CheckOutcome:
    """Three-valued robustness verdict for a box of possible outputs."""
    lo = [iv.lo for iv in out_box.dims]
    hi = [iv.hi for iv in out_box.dims]
    if spec.label > len(lo):
        raise ValueError(f"label {spec.label} outside 1..{len(lo)}")
    label0 = spec.label - 1
    if _argmax_pass(lo, hi, label0):
        return CheckOutcome.PASS
    if _argmax_fail(lo, hi, label0):
        return CheckOutcome.FAIL
    return CheckOutcome.UNSURE


@dataclass(frozen=True, slots=True)
class RobustnessChecker:
    """Engine adapter for :func:`robustness_check`, validated eagerly
    against the model's output count."""

    label: int
    n_outputs: int
    argmax_invariant: bool = field(default=True, init=False)

    def __post_init__(self):
        if not 1 <= self.label <= self.n_outputs:
            raise ValueError(f"label {self.label} outside 1..{self.n_outputs}")

    def check(self, region: Box, outputs: Box) -> CheckOutcome:
        return robustness_check(RobustnessSpec(self.label), region, outputs)


# --- assertion language ----------------------------------------------------

@dataclass(frozen=True, slots=True)
class ClassIn:
    """The predicted class is one of ``classes`` (1-based)."""

    classes: frozenset[int]

    def __post_init__(self):
        if not self.classes:
            raise ValueError("class-in needs at least one class")


@dataclass(frozen=True, slots=True)
class ScoreLE:
    """Output component ``cls`` (1-based) is <= ``bound``."""

    cls: int
    bound: float


@dataclass(frozen=True, slots=True)
class ScoreGE:
    """Output component ``cls`` (1-based) is >= ``bound``."""

    cls: int
    bound: float


@dataclass(frozen=True, slots=True)
class Dominates:
    """Output component ``a`` is strictly greater than component ``b``."""

    a: int
    b: int


@dataclass(frozen=True, slots=True)
class And:
    children: tuple["Assertion", ...]

    def __post_init__(self):
        if not self.children:
            raise ValueError("and needs at least one child")


@dataclass(frozen=True, slots=True)
class Or:
    children: tuple["Assertion", ...]

    def __post_init__(self):
        if not self.children:
            raise ValueError("or needs at least one child")


Assertion = ClassIn | ScoreLE | ScoreGE | Dominates | And | Or


def validate_assertion(assertion: Assertion, n_outputs: int) -> None:
    """Reject class indices outside 1..n_outputs anywhere in the tree."""
    match assertion:
        case ClassIn(classes):
            for c in classes:
                if not 1 <= c <= n_outputs:
                    raise ValueError(f"class {c} outside 1..{n_outputs}")
        case ScoreLE(cls, _) | ScoreGE(cls, _):
            if not 1 <= cls <= n_outputs:
                raise ValueError(f"class {cls} outside 1..{n_outputs}")
        case Dominates(a, b):
            for c in (a, b):
                if not 1 <= c <= n_outputs:
                    raise ValueError(f"class {c} outside 1..{n_outputs}")
            if a == b:
                raise ValueError("dominates needs two distinct classes")
        case And(children) | Or(children):
            for child in children:
                validate_assertion(child, n_outputs)


def _eval_assertion(a: Assertion, lo: list[float], hi: list[float]) -> CheckOutcome:
    match a:
        case ClassIn(classes):
            wanted = {c - 1 for c in classes}
            others = [i for i in range(len(lo)) if i not in wanted]
            # can_win is exact for a box: class i attains the argmax at the
            # point (lo_0, .., hi_i, .., lo_m).  So the verdict is decided
            # exactly when the can-win set is contained in the wanted set
            # (PASS) or disjoint from it (FAIL).
            if not any(_can_win(lo, hi, i) for i in others):
                return CheckOutcome.PASS
            if not any(_can_win(lo, hi, i) for i in sorted(wanted)):
                return CheckOutcome.FAIL
            return CheckOutcome.UNSURE
        case ScoreLE(cls, bound):
            if hi[cls - 1] <= bound:
                return CheckOutcome.PASS
            if lo[cls - 1] > bound:
                return CheckOutcome.FAIL
            return CheckOutcome.UNSURE
        case ScoreGE(cls, bound):
            if lo[cls - 1] >= bound:
                return CheckOutcome.PASS
            if hi[cls - 1] < bound:
                return CheckOutcome.FAIL
            return CheckOutcome.UNSURE
        case Dominates(a_cls, b_cls):
            if lo[a_cls - 1] > hi[b_cls - 1]:
                return CheckOutcome.PASS
            if hi[a_cls - 1] <= lo[b_cls - 1]:
                return CheckOutcome.FAIL
            return CheckOutcome.UNSURE
        case And(children):
            saw_unsure = False
            for child in children:
                r = _eval_assertion(child, lo, hi)
                if r is CheckOutcome.FAIL:
                    return CheckOutcome.FAIL
                if r is CheckOutcome.UNSURE:
                    saw_unsure = True
            return CheckOutcome.UNSURE if saw_unsure else CheckOutcome.PASS
        case Or(children):
            saw_unsure = False
            for child in children:
                r = _eval_assertion(child, lo, hi)
                if r is CheckOutcome.PASS:
                    return CheckOutcome.PASS
                if r is CheckOutcome.UNSURE:
                    saw_unsure = True
            return CheckOutcome.UNSURE if saw_unsure else CheckOutcome.FAIL
    raise TypeError(f"unknown assertion node: {a!r}")


def _assertion_is_argmax_only(a: Assertion) -> bool:
    match a:
        case ClassIn(_):
            return True
        case And(children) | Or(children):
            return all(_assertion_is_argmax_only(c) for c in children)
        case _:
            return False


class PostInterpretation(enum.Enum):
    """How the assertion reads the model output.

    ARGMAX means only the winning class matters, which lets the engine
    skip order-preserving post-processing such as softmax.  RAW_SCORES
    means the assertion constrains actual score values.
    """

    ARGMAX = "argmax"
    RAW_SCORES = "raw-scores"


@dataclass(frozen=True, slots=True)
class PropertySpec:
    """An input region paired with an assertion over the outputs.

    ``n_features``/``n_outputs`` tie the property to a model shape, and
    every class index in the assertion must fit ``n_outputs``.  When
    ``post_interpretation`` is omitted it is inferred: ARGMAX when the
    assertion only looks at the winning class, RAW_SCORES otherwise.
    """

    n_features: int
    n_outputs: int
    input_region: Box
    assertion: Assertion
    post_interpretation: PostInterpretation | None = None

    def __post_init__(self):
        if self.n_features < 1 or self.n_outputs < 1:
            raise ValueError("property needs at least one feature and output")
        if self.input_region.n != self.n_features:
            raise ValueError(
                f"input region has {self.input_region.n} dimensions, "
                f"expected {self.n_features}"
            )
        if self.input_region.is_empty:
            raise ValueError("property input region is empty")
        validate_assertion(self.assertion, self.n_outputs)
        if self.post_interpretation is None:
            inferred = (
                PostInterpretation.ARGMAX
                if _assertion_is_argmax_only(self.assertion)
                else PostInterpretation.RAW_SCORES
            )
            object.__setattr__(self, "post_interpretation", inferred)
        elif self.post_interpretation is PostInterpretation.ARGMAX:
            if not _assertion_is_argmax_only(self.assertion):
                raise ValueError(
                    "argmax interpretation requires an assertion built only "
                    "from class-in, and, or"
                )


@dataclass(frozen=True, slots=True)
class AssertionChecker:
    """Adapts an assertion to the engine's checker protocol."""

    assertion: Assertion
    argmax_invariant: bool

    @classmethod
    def for_spec(cls, spec: PropertySpec) -> "AssertionChecker":
        return cls(
            spec.assertion,
            spec.post_interpretation is PostInterpretation.ARGMAX,
        )

    def check(self, region: Box, outputs: Box) -> CheckOutcome:
        lo = [iv.lo for iv in outputs.dims]
        hi = [iv.hi for iv in outputs.dims]
        return _eval_assertion(self.assertion, lo, hi)


def assertion_check(spec: PropertySpec, in_box: Box, out_box: Box) -> CheckOutcome:
    """Evaluate a property's assertion against a box of possible outputs."""
    lo = [iv.lo for iv in out_box.dims]
    hi = [iv.hi for iv in out_box.dims]
    return _eval_assertion(spec.assertion, lo, hi)


# --- brute-force oracle ----------------------------------------------------

def perturbation_region(
    x: tuple[float, ...] | list[float],
    epsilon: float,
    domain: Box | None = None,
) -> Box:
    """Open box of points within ``epsilon`` of ``x`` in every feature,
    optionally intersected with a domain box (e.g. valid pixel range)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    dims = tuple(Interval.open(v - epsilon, v + epsilon) for v in x)
    box = Box(dims)
    if domain is not None:
        if domain.n != box.n:
            raise ValueError("domain dimension mismatch")
        box = Box(tuple(a.intersect(b) for a, b in zip(box.dims, domain.dims)))
        if box.is_empty:
            raise ValueError("perturbation region lies outside the domain")
    return box


def brute_force_robustness(
    ens: Ensemble,
    x: tuple[float, ...] | list[float],
    label: int,
    epsilon: float,
    cap: int = 10**6,
) -> bool:
    """Ground-truth robustness by enumerating every output-constant cell
    overlapping the perturbation region.  Exponential in the tree count;
    only viable for small ensembles, which is exactly what makes it a
    trustworthy oracle for the engine."""
    if not 1 <= label <= ens.n_outputs:
        raise ValueError(f"label {label} outside 1..{ens.n_outputs}")
    box = perturbation_region(x, epsilon)
    for _, output in enumerate_cells(ens, within=box, cap=cap):
        if argmax_class(output) != label:
            return False
    return True
