"""Text formats and translation validation.

Four line-oriented formats share one tokenizer: native models (float
leaves), count models (integer leaves, e.g. per-class sample counts),
datasets, and properties.  Floats are written with ``repr`` so parsing
a serialized file reproduces every bit; that makes byte comparison of
canonical files a meaningful equality test.

Count models are imported by normalizing each leaf to frequencies.
Conversion keeps the original integer tuples as provenance so it can be
inverted exactly, and ``roundtrip_validate`` checks that a converted
model inverts back to the file it came from, field for field.
"""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

from .boxes import NEG_INF, POS_INF, Box, Interval
from .properties import (
    And,
    Assertion,
    ClassIn,
    Dominates,
    Or,
    PostInterpretation,
    PropertySpec,
    ScoreGE,
    ScoreLE,
)
from .trees import Ensemble, Internal, Leaf, Node, PostProcess, Tree, classify

MODEL_MAGIC = "treecert-model"
COUNTS_MAGIC = "treecert-counts"
DATASET_MAGIC = "treecert-dataset"
PROPERTY_MAGIC = "treecert-property"
FORMAT_VERSION = "1"

MAX_LEAF_COUNT = 2**32 - 1


class FormatError(ValueError):
    """Malformed file; the message starts with the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonInvertibleError(ValueError):
    """The model cannot be mapped back to integer-leaf form."""


# --- tokenizer -------------------------------------------------------------

class _Lines:
    """Non-blank, comment-stripped lines with their numbers and indents."""

    def __init__(self, text: str):
        self.rows: list[tuple[int, int, list[str]]] = []
        for n, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0]
            if not body.strip():
                continue
            if "\t" in body:
                raise FormatError(n, "tabs are not allowed, indent with spaces")
            indent = len(body) - len(body.lstrip(" "))
            self.rows.append((n, indent, body.split()))
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.rows)

    def peek(self) -> tuple[int, int, list[str]]:
        if self.eof():
            last = self.rows[-1][0] if self.rows else 1
            raise FormatError(last, "unexpected end of file")
        return self.rows[self.pos]

    def take(self) -> tuple[int, int, list[str]]:
        row = self.peek()
        self.pos += 1
        return row


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(line, f"{what} is not a number: {token!r}") from None


def _parse_int(token: str, line: int, what: str, minimum: int = 0) -> int:
    try:
        value = int(token)
    except ValueError:
        raise FormatError(line, f"{what} is not an integer: {token!r}") from None
    if value < minimum:
        raise FormatError(line, f"{what} must be at least {minimum}, got {value}")
    return value


def _expect_magic(lines: _Lines, magic: str) -> None:
    n, _, toks = lines.take()
    if len(toks) != 2 or toks[0] != magic:
        raise FormatError(n, f"expected header {magic!r} <version>")
    if toks[1] != FORMAT_VERSION:
        raise FormatError(n, f"unsupported {magic} version {toks[1]!r}")


def _parse_headers(lines: _Lines, keys: set[str], until: str) -> dict[str, str]:
    """Read required ``key value`` lines (any order, no repeats) until
    the ``until`` marker line."""
    seen: dict[str, str] = {}
    while True:
        n, _, toks = lines.peek()
        if toks[0] == until:
            break
        if toks[0] not in keys:
            raise FormatError(n, f"unknown key {toks[0]!r}, expected one of "
                              f"{sorted(keys)} then {until!r}")
        if toks[0] in seen:
            raise FormatError(n, f"duplicate key {toks[0]!r}")
        if len(toks) != 2:
            raise FormatError(n, f"key {toks[0]!r} takes exactly one value")
        seen[toks[0]] = toks[1]
        lines.take()
    missing = sorted(keys - seen.keys())
    if missing:
        n, _, _ = lines.peek()
        raise FormatError(n, f"missing header keys: {missing}")
    return seen


_POST_NAMES = {p.value: p for p in PostProcess}


# --- model files (shared recursive node grammar) ---------------------------

def _parse_node(
    lines: _Lines,
    leaf_parse: Callable[[list[str], int, int], object],
    n_features: int,
    n_outputs: int,
    tree_idx: int,
) -> object:
    n, _, toks = lines.take()
    if toks[0] == "leaf":
        if len(toks) - 1 != n_outputs:
            raise FormatError(
                n, f"tree {tree_idx}: leaf has {len(toks) - 1} values, "
                f"expected {n_outputs}")
        return leaf_parse(toks[1:], n, n_outputs)
    if toks[0] == "split":
        if len(toks) != 3:
            raise FormatError(n, "split takes a feature index and a threshold")
        feature = _parse_int(toks[1], n, "feature index")
        if feature >= n_features:
            raise FormatError(
                n, f"tree {tree_idx}: feature {feature} out of range "
                f"(model has {n_features} features)")
        threshold = _parse_float(toks[2], n, "threshold")
        if threshold != threshold or threshold in (POS_INF, NEG_INF):
            raise FormatError(n, "threshold must be finite")
        left = _parse_node(lines, leaf_parse, n_features, n_outputs, tree_idx)
        right = _parse_node(lines, leaf_parse, n_features, n_outputs, tree_idx)
        return ("split", feature, threshold, left, right)
    raise FormatError(n, f"expected 'split' or 'leaf', got {toks[0]!r}")


def _parse_model_body(
    text: str, magic: str, leaf_parse: Callable[[list[str], int, int], object]
) -> tuple[PostProcess, int, int, list[object]]:
    lines = _Lines(text)
    _expect_magic(lines, magic)
    keys = {"post", "features", "outputs", "trees"}
    n0, _, _ = lines.peek()
    headers = _parse_headers(lines, keys, "tree")
    if headers["post"] not in _POST_NAMES:
        raise FormatError(n0, f"unknown post kind {headers['post']!r}, "
                          f"expected one of {sorted(_POST_NAMES)}")
    post = _POST_NAMES[headers["post"]]
    n_features = _parse_int(headers["features"], n0, "features", minimum=1)
    n_outputs = _parse_int(headers["outputs"], n0, "outputs", minimum=1)
    n_trees = _parse_int(headers["trees"], n0, "trees", minimum=1)
    roots = []
    for t in range(n_trees):
        n, _, toks = lines.take()
        if toks != ["tree"]:
            raise FormatError(n, f"expected tree {t + 1} of {n_trees}")
        roots.append(_parse_node(lines, leaf_parse, n_features, n_outputs, t))
    if not lines.eof():
        n, _, _ = lines.peek()
        raise FormatError(n, f"trailing content after {n_trees} trees")
    return post, n_features, n_outputs, roots


def _build_float_node(raw: object) -> Node:
    if isinstance(raw, tuple) and raw and raw[0] == "split":
        _, f, thr, left, right = raw
        return Internal(f, thr, _build_float_node(left), _build_float_node(right))
    return raw  # already a Leaf


def parse_model(text: str) -> Ensemble:
    """Parse a native model file."""

    def leaf(tokens: list[str], line: int, n_outputs: int) -> Leaf:
        values = []
        for t in tokens:
            v = _parse_float(t, line, "leaf value")
            if v != v or v in (POS_INF, NEG_INF):
                raise FormatError(line, "leaf values must be finite")
            values.append(v)
        return Leaf(tuple(values))

    post, n_features, n_outputs, roots = _parse_model_body(text, MODEL_MAGIC, leaf)
    trees = tuple(Tree(_build_float_node(raw)) for raw in roots)
    return Ensemble(trees, post, n_features, n_outputs)


def _write_node(
    out: list[str], node: object, depth: int, leaf_fmt: Callable[[object], str]
) -> None:
    pad = " " * (2 * (depth + 1))
    if isinstance(node, Internal) or (
        isinstance(node, CountSplit)
    ):
        out.append(f"{pad}split {node.feature} {node.threshold!r}")
        _write_node(out, node.left, depth + 1, leaf_fmt)
        _write_node(out, node.right, depth + 1, leaf_fmt)
    else:
        out.append(pad + leaf_fmt(node))


def _serialize_model_body(
    magic: str,
    post: PostProcess,
    n_features: int,
    n_outputs: int,
    roots: Sequence[object],
    leaf_fmt: Callable[[object], str],
) -> str:
    out = [f"{magic} {FORMAT_VERSION}",
           f"post {post.value}",
           f"features {n_features}",
           f"outputs {n_outputs}",
           f"trees {len(roots)}"]
    for root in roots:
        out.append("tree")
        _write_node(out, root, 0, leaf_fmt)
    return "\n".join(out) + "\n"


def serialize_model(ens: Ensemble) -> str:
    """Canonical text encoding; floats keep their exact bit patterns."""
    return _serialize_model_body(
        MODEL_MAGIC, ens.post_process, ens.n_features, ens.n_outputs,
        [t.root for t in ens.trees],
        lambda leaf: "leaf " + " ".join(repr(v) for v in leaf.value),
    )


# --- count models ----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class CountLeaf:
    counts: tuple[int, ...]

    def __post_init__(self):
        total = 0
        for c in self.counts:
            if not isinstance(c, int) or isinstance(c, bool):
                raise ValueError(f"leaf count {c!r} is not an integer")
            if not 0 <= c <= MAX_LEAF_COUNT:
                raise ValueError(f"leaf count {c} outside 0..{MAX_LEAF_COUNT}")
            total += c
        if total == 0:
            raise ValueError("leaf counts must have a positive sum")


@dataclass(frozen=True, slots=True)
class CountSplit:
    feature: int
    threshold: float
    left: "CountNode"
    right: "CountNode"


CountNode = CountSplit | CountLeaf


@dataclass(frozen=True, slots=True)
class CountModel:
    """Integer-leaf twin of :class:`Ensemble`; same structure, same file
    layout, leaves hold tuples of counts instead of floats."""

    roots: tuple[CountNode, ...]
    post_process: PostProcess
    n_features: int
    n_outputs: int


def parse_counts(text: str) -> CountModel:
    """Parse a count-leaf model file."""

    def leaf(tokens: list[str], line: int, n_outputs: int) -> CountLeaf:
        counts = tuple(_parse_int(t, line, "leaf count") for t in tokens)
        try:
            return CountLeaf(counts)
        except ValueError as exc:
            raise FormatError(line, str(exc)) from None

    post, n_features, n_outputs, roots = _parse_model_body(text, COUNTS_MAGIC, leaf)

    def build(raw: object) -> CountNode:
        if isinstance(raw, tuple) and raw and raw[0] == "split":
            _, f, thr, left, right = raw
            return CountSplit(f, thr, build(left), build(right))
        assert isinstance(raw, CountLeaf)
        return raw

    return CountModel(tuple(build(r) for r in roots), post, n_features, n_outputs)


def serialize_counts(model: CountModel) -> str:
    return _serialize_model_body(
        COUNTS_MAGIC, model.post_process, model.n_features, model.n_outputs,
        model.roots,
        lambda leaf: "leaf " + " ".join(str(c) for c in leaf.counts),
    )


# --- conversion and translation validation ---------------------------------

def leaf_normalize(counts: Sequence[int]) -> tuple[float, ...]:
    """Counts to frequencies: divide each component by the tuple's sum."""
    total = sum(counts)
    if total <= 0:
        raise ValueError("leaf counts must have a positive sum")
    return tuple(c / total for c in counts)


@dataclass(frozen=True, slots=True)
class ConvertedModel:
    """A float ensemble plus the integer tuples its leaves came from
    (per tree, leaves in depth-first left-first order), kept so the
    conversion can be inverted exactly."""

    ensemble: Ensemble
    leaf_counts: tuple[tuple[tuple[int, ...], ...], ...]


def convert(model: CountModel) -> ConvertedModel:
    """Import a count model by normalizing every leaf to frequencies."""
    trees = []
    provenance = []
    for root in model.roots:
        counts_here: list[tuple[int, ...]] = []

        def build(node: CountNode) -> Node:
            if isinstance(node, CountLeaf):
                counts_here.append(node.counts)
                return Leaf(leaf_normalize(node.counts))
            return Internal(node.feature, node.threshold,
                            build(node.left), build(node.right))

        trees.append(Tree(build(root)))
        provenance.append(tuple(counts_here))
    ens = Ensemble(tuple(trees), model.post_process,
                   model.n_features, model.n_outputs)
    return ConvertedModel(ens, tuple(provenance))


def invert(model: ConvertedModel | Ensemble) -> CountModel:
    """Map a converted ensemble back to its count model.

    Requires the provenance captured by :func:`convert`; a bare ensemble
    has none, and float leaves admit no well-posed reconstruction, so
    that case is refused.  Each leaf is checked against its recorded
    counts bit-for-bit, so a leaf value that changed since conversion is
    reported rather than silently papered over.
    """
    if isinstance(model, Ensemble):
        raise NonInvertibleError(
            "ensemble has no conversion provenance; only models produced by "
            "convert() can be inverted exactly")
    ens = model.ensemble
    roots = []
    for t, tree in enumerate(ens.trees):
        counts = model.leaf_counts[t] if t < len(model.leaf_counts) else ()
        pos = 0

        def build(node: Node) -> CountNode:
            nonlocal pos
            if isinstance(node, Leaf):
                if pos >= len(counts):
                    raise NonInvertibleError(
                        f"tree {t}: more leaves than recorded provenance")
                recorded = counts[pos]
                pos += 1
                expected = leaf_normalize(recorded)
                if expected != node.value or len(recorded) != len(node.value):
                    raise NonInvertibleError(
                        f"tree {t}: leaf {pos - 1} no longer matches its "
                        f"recorded counts {recorded} (value {node.value})")
                return CountLeaf(recorded)
            return CountSplit(node.feature, node.threshold,
                              build(node.left), build(node.right))

        root = build(tree.root)
        if pos != len(counts):
            raise NonInvertibleError(
                f"tree {t}: fewer leaves than recorded provenance")
        roots.append(root)
    return CountModel(tuple(roots), ens.post_process,
                      ens.n_features, ens.n_outputs)


@dataclass(frozen=True, slots=True)
class Discrepancy:
    """One structural difference; ``tree_index`` is -1 for header fields
    and ``node_path`` is a string of L/R steps from the tree root."""

    tree_index: int
    node_path: str
    field: str
    left: object
    right: object


def _float_bits(x: float) -> bytes:
    return struct.pack("<d", x)


def diff_count_models(a: CountModel, b: CountModel) -> list[Discrepancy]:
    """Every field where the two models differ, headers included.
    Thresholds compare by bit pattern, so -0.0 and 0.0 differ."""
    out: list[Discrepancy] = []
    for name in ("post_process", "n_features", "n_outputs"):
        va, vb = getattr(a, name), getattr(b, name)
        if va != vb:
            out.append(Discrepancy(-1, "", name, va, vb))
    if len(a.roots) != len(b.roots):
        out.append(Discrepancy(-1, "", "n_trees", len(a.roots), len(b.roots)))

    def walk(t: int, path: str, na: CountNode, nb: CountNode) -> None:
        kind_a = type(na).__name__
        kind_b = type(nb).__name__
        if kind_a != kind_b:
            out.append(Discrepancy(t, path, "kind", kind_a, kind_b))
            return
        if isinstance(na, CountLeaf):
            if na.counts != nb.counts:
                out.append(Discrepancy(t, path, "counts", na.counts, nb.counts))
            return
        assert isinstance(nb, CountSplit)
        if na.feature != nb.feature:
            out.append(Discrepancy(t, path, "feature", na.feature, nb.feature))
        if _float_bits(na.threshold) != _float_bits(nb.threshold):
            out.append(Discrepancy(t, path, "threshold", na.threshold, nb.threshold))
        walk(t, path + "L", na.left, nb.left)
        walk(t, path + "R", na.right, nb.right)

    for t, (ra, rb) in enumerate(zip(a.roots, b.roots)):
        walk(t, "", ra, rb)
    return out


@dataclass(frozen=True, slots=True)
class ValidationReport:
    discrepancies: tuple[Discrepancy, ...]
    bytes_identical: bool | None
    semantic_checked: int
    semantic_mismatches: int

    @property
    def ok(self) -> bool:
        return (not self.discrepancies
                and self.bytes_identical is not False
                and self.semantic_mismatches == 0)


def _sampling_box(ens: Ensemble) -> list[tuple[float, float]]:
    lo = [-1.0] * ens.n_features
    hi = [1.0] * ens.n_features
    seen = [False] * ens.n_features

    def visit(node: Node) -> None:
        if isinstance(node, Internal):
            f, thr = node.feature, node.threshold
            if not seen[f]:
                lo[f] = hi[f] = thr
                seen[f] = True
            else:
                lo[f] = min(lo[f], thr)
                hi[f] = max(hi[f], thr)
            visit(node.left)
            visit(node.right)

    for tree in ens.trees:
        visit(tree.root)
    return [(l - 1.0, h + 1.0) for l, h in zip(lo, hi)]


def roundtrip_validate(
    original: str | CountModel,
    converted: ConvertedModel | None = None,
    samples: int = 1000,
    seed: int = 0,
) -> ValidationReport:
    """Check that converting and inverting reproduces the original count
    model exactly, then spot-check that classification agrees between
    the original and the round-tripped model on random inputs.

    ``original`` may be file text (enabling the byte-identity check) or
    an already parsed model.  ``converted`` defaults to a fresh
    conversion; tests inject tampered conversions through it.
    """
    if isinstance(original, str):
        model = parse_counts(original)
        original_text = original
    else:
        model = original
        original_text = None
    if converted is None:
        converted = convert(model)
    try:
        back = invert(converted)
    except NonInvertibleError as exc:
        return ValidationReport(
            discrepancies=(Discrepancy(-1, "", "invertibility", str(exc), None),),
            bytes_identical=None if original_text is None else False,
            semantic_checked=0,
            semantic_mismatches=0,
        )
    discrepancies = tuple(diff_count_models(model, back))
    bytes_identical = None
    if original_text is not None:
        bytes_identical = serialize_counts(back) == original_text
    rng = random.Random(seed)
    bounds = _sampling_box(converted.ensemble)
    reference = convert(model).ensemble
    mismatches = 0
    checked = 0
    for _ in range(samples):
        x = tuple(rng.uniform(l, h) for l, h in bounds)
        checked += 1
        if classify(reference, x) != classify(converted.ensemble, x):
            mismatches += 1
    return ValidationReport(
        discrepancies=discrepancies,
        bytes_identical=bytes_identical,
        semantic_checked=checked,
        semantic_mismatches=mismatches,
    )


# --- dataset files ----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Dataset:
    """Labeled samples; labels are 1-based class indices."""

    n_features: int
    samples: tuple[tuple[int, tuple[float, ...]], ...]


def parse_dataset(text: str) -> Dataset:
    lines = _Lines(text)
    _expect_magic(lines, DATASET_MAGIC)
    n0, _, _ = lines.peek()
    headers = _parse_headers(lines, {"features": "required", "samples": "required"},
                             until="data")
    n_features = _parse_int(headers["features"], n0, "features", minimum=1)
    n_samples = _parse_int(headers["samples"], n0, "samples", minimum=0)
    n, _, toks = lines.take()
    if toks != ["data"]:
        raise FormatError(n, "expected 'data' before sample records")
    records = []
    for _ in range(n_samples):
        n, _, toks = lines.take()
        if len(toks) != n_features + 1:
            raise FormatError(
                n, f"record has {len(toks)} fields, expected label + "
                f"{n_features} features")
        label = _parse_int(toks[0], n, "label", minimum=1)
        values = []
        for tok in toks[1:]:
            v = _parse_float(tok, n, "feature value")
            if v != v or v in (POS_INF, NEG_INF):
                raise FormatError(n, "feature values must be finite")
            values.append(v)
        records.append((label, tuple(values)))
    if not lines.eof():
        n, _, _ = lines.peek()
        raise FormatError(n, f"trailing content after {n_samples} records")
    return Dataset(n_features, tuple(records))


def serialize_dataset(ds: Dataset) -> str:
    out = [f"{DATASET_MAGIC} {FORMAT_VERSION}",
           f"features {ds.n_features}",
           f"samples {len(ds.samples)}",
           "data"]
    for label, values in ds.samples:
        out.append(f"{label} " + " ".join(repr(v) for v in values))
    return "\n".join(out) + "\n"


# --- property files ---------------------------------------------------------

_INTERPRETATIONS = {p.value: p for p in PostInterpretation}


def _parse_interval(tokens: list[str], line: int) -> Interval:
    text = "".join(tokens)
    if len(text) < 5 or text[0] not in "[(" or text[-1] not in ")]":
        raise FormatError(line, f"malformed interval {text!r}, "
                          "expected e.g. [0.0, 1.0) or (-inf, inf)")
    parts = text[1:-1].split(",")
    if len(parts) != 2:
        raise FormatError(line, f"interval {text!r} needs exactly two endpoints")
    lo = _parse_float(parts[0], line, "interval lower endpoint")
    hi = _parse_float(parts[1], line, "interval upper endpoint")
    lo_inc = text[0] == "["
    hi_inc = text[-1] == "]"
    if lo != lo or hi != hi:
        raise FormatError(line, "interval endpoints must not be NaN")
    if (lo == NEG_INF and lo_inc) or (hi == POS_INF and hi_inc):
        raise FormatError(line, "an infinite endpoint cannot be inclusive")
    iv = Interval(lo, hi, lo_inc, hi_inc)
    if iv.is_empty:
        raise FormatError(line, f"interval {text!r} is empty")
    return iv


def _format_interval(iv: Interval) -> str:
    left = "[" if iv.lo_inclusive else "("
    right = "]" if iv.hi_inclusive else ")"
    return f"{left}{iv.lo!r}, {iv.hi!r}{right}"


def _parse_assertion_block(lines: _Lines, parent_indent: int,
                           n_outputs: int) -> Assertion:
    n, indent, toks = lines.take()
    if indent <= parent_indent:
        raise FormatError(n, "expected an indented assertion")
    op = toks[0]

    def check_class(c: int) -> int:
        if not 1 <= c <= n_outputs:
            raise FormatError(n, f"class {c} outside 1..{n_outputs}")
        return c

    if op in ("and", "or"):
        if len(toks) != 1:
            raise FormatError(n, f"{op!r} takes no arguments on its own line")
        children = []
        child_indent = None
        while not lines.eof():
            cn, ci, _ = lines.peek()
            if ci <= indent:
                break
            if child_indent is None:
                child_indent = ci
            elif ci != child_indent:
                raise FormatError(cn, "inconsistent indentation among siblings")
            children.append(_parse_assertion_block(lines, indent, n_outputs))
        if not children:
            raise FormatError(n, f"{op!r} needs at least one child")
        return And(tuple(children)) if op == "and" else Or(tuple(children))
    if op == "class-in":
        if len(toks) < 2:
            raise FormatError(n, "class-in needs at least one class")
        classes = frozenset(
            check_class(_parse_int(t, n, "class", minimum=1)) for t in toks[1:])
        return ClassIn(classes)
    if op in ("score-le", "score-ge"):
        if len(toks) != 3:
            raise FormatError(n, f"{op} takes a class and a bound")
        cls = check_class(_parse_int(toks[1], n, "class", minimum=1))
        bound = _parse_float(toks[2], n, "bound")
        return ScoreLE(cls, bound) if op == "score-le" else ScoreGE(cls, bound)
    if op == "dominates":
        if len(toks) != 3:
            raise FormatError(n, "dominates takes two classes")
        a = check_class(_parse_int(toks[1], n, "class", minimum=1))
        b = check_class(_parse_int(toks[2], n, "class", minimum=1))
        if a == b:
            raise FormatError(n, "dominates needs two distinct classes")
        return Dominates(a, b)
    raise FormatError(n, f"unknown assertion {op!r}")


def parse_property(text: str) -> PropertySpec:
    lines = _Lines(text)
    _expect_magic(lines, PROPERTY_MAGIC)
    n0, _, _ = lines.peek()
    keys = {"features": "required", "outputs": "required", "post": "optional"}
    headers: dict[str, str] = {}
    bounds: dict[int, Interval] = {}
    while True:
        n, _, toks = lines.peek()
        if toks[0] == "assert":
            break
        if toks[0] == "bound":
            lines.take()
            if len(toks) < 3:
                raise FormatError(n, "bound takes a dimension and an interval")
            dim = _parse_int(toks[1], n, "dimension")
            if dim in bounds:
                raise FormatError(n, f"duplicate bound for dimension {dim}")
            bounds[dim] = _parse_interval(toks[2:], n)
            continue
        if toks[0] in keys:
            if toks[0] in headers:
                raise FormatError(n, f"duplicate key {toks[0]!r}")
            if len(toks) != 2:
                raise FormatError(n, f"key {toks[0]!r} takes exactly one value")
            headers[toks[0]] = toks[1]
            lines.take()
            continue
        raise FormatError(n, f"unknown key {toks[0]!r}")
    for key in ("features", "outputs"):
        if key not in headers:
            raise FormatError(n0, f"missing header key {key!r}")
    n_features = _parse_int(headers["features"], n0, "features", minimum=1)
    n_outputs = _parse_int(headers["outputs"], n0, "outputs", minimum=1)
    interpretation = None
    if "post" in headers:
        if headers["post"] not in _INTERPRETATIONS:
            raise FormatError(n0, f"unknown post interpretation "
                              f"{headers['post']!r}, expected one of "
                              f"{sorted(_INTERPRETATIONS)}")
        interpretation = _INTERPRETATIONS[headers["post"]]
    for dim in bounds:
        if dim >= n_features:
            raise FormatError(n0, f"bound dimension {dim} out of range "
                              f"(property has {n_features} features)")
    an, a_indent, a_toks = lines.take()
    if a_toks != ["assert"]:
        raise FormatError(an, "expected 'assert'")
    assertion = _parse_assertion_block(lines, a_indent, n_outputs)
    if not lines.eof():
        n, _, _ = lines.peek()
        raise FormatError(n, "trailing content after the assertion")
    dims = tuple(bounds.get(i, Interval.unbounded()) for i in range(n_features))
    try:
        return PropertySpec(
            n_features=n_features,
            n_outputs=n_outputs,
            input_region=Box(dims),
            assertion=assertion,
            post_interpretation=interpretation,
        )
    except ValueError as exc:
        raise FormatError(1, str(exc)) from None


def _format_assertion(out: list[str], a: Assertion, indent: int) -> None:
    pad = " " * indent
    match a:
        case ClassIn(classes):
            out.append(pad + "class-in " + " ".join(str(c) for c in sorted(classes)))
        case ScoreLE(cls, bound):
            out.append(f"{pad}score-le {cls} {bound!r}")
        case ScoreGE(cls, bound):
            out.append(f"{pad}score-ge {cls} {bound!r}")
        case Dominates(a_cls, b_cls):
            out.append(f"{pad}dominates {a_cls} {b_cls}")
        case And(children):
            out.append(pad + "and")
            for child in children:
                _format_assertion(out, child, indent + 2)
        case Or(children):
            out.append(pad + "or")
            for child in children:
                _format_assertion(out, child, indent + 2)


def serialize_property(spec: PropertySpec) -> str:
    out = [f"{PROPERTY_MAGIC} {FORMAT_VERSION}",
           f"features {spec.n_features}",
           f"outputs {spec.n_outputs}",
           f"post {spec.post_interpretation.value}"]
    for i, iv in enumerate(spec.input_region.dims):
        if iv.lo == NEG_INF and iv.hi == POS_INF:
            continue
        out.append(f"bound {i} {_format_interval(iv)}")
    out.append("assert")
    _format_assertion(out, spec.assertion, 2)
    return "\n".join(out) + "\n"
