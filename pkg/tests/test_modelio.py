"""File formats and translation validation.

Round trips are checked bit-for-bit: a parsed-then-serialized file must
be byte-identical, and every injected post-conversion fault must show up
in the validation report.
"""
import math
import random
import struct

import pytest

from treecert.modelio import (
    ConvertedModel,
    CountLeaf,
    CountModel,
    CountSplit,
    Dataset,
    FormatError,
    NonInvertibleError,
    convert,
    diff_count_models,
    invert,
    leaf_normalize,
    parse_counts,
    parse_dataset,
    parse_model,
    parse_property,
    roundtrip_validate,
    serialize_counts,
    serialize_dataset,
    serialize_model,
    serialize_property,
)
from treecert.boxes import Box, Interval
from treecert.properties import And, ClassIn, Or, PropertySpec, ScoreGE
from treecert.trees import Ensemble, Internal, Leaf, PostProcess, Tree, classify

from helpers import hand_pair, random_ensemble

COUNTS_TEXT = """treecert-counts 1
post divisor
features 2
outputs 2
trees 2
tree
  split 0 0.5
    leaf 3 1
    leaf 0 7
tree
  split 1 -1.5
    leaf 2 2
    split 0 2.5
      leaf 1 0
      leaf 0 1
"""


def bits(x: float) -> bytes:
    return struct.pack("<d", x)


def replace_node(node, path, fn):
    """Rebuild a tree with ``fn`` applied to the node at L/R ``path``."""
    if not path:
        return fn(node)
    child = node.left if path[0] == "L" else node.right
    rebuilt = replace_node(child, path[1:], fn)
    if path[0] == "L":
        return type(node)(node.feature, node.threshold, rebuilt, node.right)
    return type(node)(node.feature, node.threshold, node.left, rebuilt)


def with_tree(ens: Ensemble, idx: int, root) -> Ensemble:
    trees = list(ens.trees)
    trees[idx] = Tree(root)
    return Ensemble(tuple(trees), ens.post_process, ens.n_features, ens.n_outputs)


class TestNativeModelRoundTrip:
    def test_hand_model(self):
        ens = hand_pair()
        assert parse_model(serialize_model(ens)) == ens

    def test_random_models_bit_exact(self):
        rng = random.Random(401)
        for _ in range(50):
            post = rng.choice(list(PostProcess))
            ens = random_ensemble(
                rng, n_trees=rng.randint(1, 4), n_features=3,
                n_outputs=rng.randint(1, 3), depth=4, post=post)
            back = parse_model(serialize_model(ens))
            assert back == ens

    def test_threshold_point_one_survives_bitwise(self):
        ens = Ensemble(
            (Tree(Internal(0, 0.1, Leaf((1.0,)), Leaf((0.0,)))),),
            PostProcess.IDENTITY, 1, 1)
        back = parse_model(serialize_model(ens))
        assert bits(back.trees[0].root.threshold) == bits(0.1)

    def test_serialize_is_canonical(self):
        text = serialize_model(hand_pair())
        assert serialize_model(parse_model(text)) == text


class TestNativeModelErrors:
    def good(self):
        return serialize_model(hand_pair())

    def test_unknown_version(self):
        text = self.good().replace("treecert-model 1", "treecert-model 9")
        with pytest.raises(FormatError, match="version"):
            parse_model(text)

    def test_wrong_magic(self):
        with pytest.raises(FormatError, match="line 1"):
            parse_model("something-else 1\n")

    def test_leaf_arity_error_names_tree_and_line(self):
        text = self.good().replace("leaf 0.0 1.0", "leaf 0.0 1.0 2.0", 1)
        with pytest.raises(FormatError, match=r"tree 0.*3 values.*expected 2"):
            parse_model(text)

    def test_feature_out_of_range(self):
        text = self.good().replace("split 0 0.0", "split 7 0.0")
        with pytest.raises(FormatError, match="feature 7 out of range"):
            parse_model(text)

    def test_missing_header(self):
        text = self.good().replace("outputs 2\n", "")
        with pytest.raises(FormatError, match="missing header keys"):
            parse_model(text)

    def test_duplicate_header(self):
        text = self.good().replace("post divisor", "post divisor\npost divisor")
        with pytest.raises(FormatError, match="duplicate"):
            parse_model(text)

    def test_trailing_content(self):
        with pytest.raises(FormatError, match="trailing"):
            parse_model(self.good() + "leaf 1.0 0.0\n")

    def test_truncated_tree(self):
        text = self.good().rsplit("\n", 3)[0] + "\n"
        with pytest.raises(FormatError, match="unexpected end of file"):
            parse_model(text)

    def test_non_finite_leaf(self):
        text = self.good().replace("leaf 1.0 0.0", "leaf inf 0.0", 1)
        with pytest.raises(FormatError, match="finite"):
            parse_model(text)

    def test_tab_rejected(self):
        with pytest.raises(FormatError, match="tab"):
            parse_model("treecert-model 1\n\tpost divisor\n")


class TestCountModel:
    def test_parse_serialize_identity(self):
        model = parse_counts(COUNTS_TEXT)
        assert serialize_counts(model) == COUNTS_TEXT

    def test_leaf_validation(self):
        with pytest.raises(ValueError, match="positive sum"):
            CountLeaf((0, 0))
        with pytest.raises(ValueError, match="outside"):
            CountLeaf((2**32, 1))
        with pytest.raises(ValueError):
            CountLeaf((-1, 2))

    def test_parse_rejects_negative_counts(self):
        text = COUNTS_TEXT.replace("leaf 3 1", "leaf -3 1")
        with pytest.raises(FormatError, match="at least 0"):
            parse_counts(text)

    def test_parse_rejects_float_counts(self):
        text = COUNTS_TEXT.replace("leaf 3 1", "leaf 3.0 1")
        with pytest.raises(FormatError, match="not an integer"):
            parse_counts(text)

    def test_count_arity_checked(self):
        text = COUNTS_TEXT.replace("leaf 3 1", "leaf 3 1 9", 1)
        with pytest.raises(FormatError, match="3 values"):
            parse_counts(text)


class TestLeafNormalize:
    def test_exact_quarters(self):
        assert leaf_normalize((3, 1)) == (0.75, 0.25)

    def test_single_winner(self):
        assert leaf_normalize((5, 0, 0)) == (1.0, 0.0, 0.0)

    def test_zero_sum_rejected(self):
        with pytest.raises(ValueError):
            leaf_normalize((0, 0))

    def test_sums_to_one_within_ulps(self):
        rng = random.Random(409)
        for _ in range(300):
            m = rng.randint(1, 5)
            counts = [rng.randint(0, 10**6) for _ in range(m)]
            if sum(counts) == 0:
                counts[0] = 1
            out = leaf_normalize(counts)
            assert all(0.0 <= v <= 1.0 for v in out)
            assert abs(sum(out) - 1.0) <= m * math.ulp(1.0)


class TestConvertInvert:
    def test_convert_normalizes_leaves(self):
        conv = convert(parse_counts(COUNTS_TEXT))
        first = conv.ensemble.trees[0].root
        assert first.left.value == (0.75, 0.25)
        assert first.right.value == (0.0, 1.0)

    def test_invert_restores_exactly(self):
        model = parse_counts(COUNTS_TEXT)
        assert invert(convert(model)) == model

    def test_bare_ensemble_is_refused(self):
        with pytest.raises(NonInvertibleError, match="provenance"):
            invert(hand_pair())

    def test_leaf_tampering_is_refused_with_location(self):
        conv = convert(parse_counts(COUNTS_TEXT))
        tampered_root = replace_node(
            conv.ensemble.trees[0].root, "L",
            lambda leaf: Leaf((0.75, 0.2500000001)))
        tampered = ConvertedModel(
            with_tree(conv.ensemble, 0, tampered_root), conv.leaf_counts)
        with pytest.raises(NonInvertibleError, match="tree 0"):
            invert(tampered)


class TestDiff:
    def test_identical_models_have_no_diff(self):
        model = parse_counts(COUNTS_TEXT)
        assert diff_count_models(model, model) == []

    def test_threshold_change_is_one_discrepancy(self):
        model = parse_counts(COUNTS_TEXT)
        changed = parse_counts(COUNTS_TEXT.replace("split 0 2.5", "split 0 2.75"))
        diffs = diff_count_models(model, changed)
        assert len(diffs) == 1
        d = diffs[0]
        assert d.tree_index == 1 and d.node_path == "R" and d.field == "threshold"
        assert d.left == 2.5 and d.right == 2.75

    def test_negative_zero_threshold_differs_from_zero(self):
        a = parse_counts(COUNTS_TEXT.replace("split 0 0.5", "split 0 0.0"))
        b = parse_counts(COUNTS_TEXT.replace("split 0 0.5", "split 0 -0.0"))
        diffs = diff_count_models(a, b)
        assert [d.field for d in diffs] == ["threshold"]

    def test_permuted_trees_flagged_at_tree_level(self):
        model = parse_counts(COUNTS_TEXT)
        permuted = CountModel(
            (model.roots[1], model.roots[0]),
            model.post_process, model.n_features, model.n_outputs)
        diffs = diff_count_models(model, permuted)
        trees_hit = {d.tree_index for d in diffs}
        assert trees_hit == {0, 1}
        roots_hit = {d.tree_index for d in diffs if d.node_path == ""}
        assert roots_hit == {0, 1}

    def test_header_mismatch(self):
        model = parse_counts(COUNTS_TEXT)
        other = CountModel(model.roots, PostProcess.SOFTMAX,
                           model.n_features, model.n_outputs)
        diffs = diff_count_models(model, other)
        assert diffs[0].tree_index == -1
        assert diffs[0].field == "post_process"


class TestRoundtripValidate:
    def test_clean_file(self):
        report = roundtrip_validate(COUNTS_TEXT, samples=200)
        assert report.ok
        assert report.bytes_identical is True
        assert report.semantic_checked == 200
        assert report.semantic_mismatches == 0
        assert report.discrepancies == ()

    def test_tampered_threshold_reports_exactly_one(self):
        model = parse_counts(COUNTS_TEXT)
        conv = convert(model)
        tampered_root = replace_node(
            conv.ensemble.trees[1].root, "R",
            lambda n: Internal(n.feature, 2.75, n.left, n.right))
        tampered = ConvertedModel(
            with_tree(conv.ensemble, 1, tampered_root), conv.leaf_counts)
        report = roundtrip_validate(model, converted=tampered, samples=50)
        assert not report.ok
        assert len(report.discrepancies) == 1
        d = report.discrepancies[0]
        assert (d.tree_index, d.node_path, d.field) == (1, "R", "threshold")

    def test_tampered_leaf_reported_via_provenance(self):
        model = parse_counts(COUNTS_TEXT)
        conv = convert(model)
        tampered_root = replace_node(
            conv.ensemble.trees[0].root, "L", lambda leaf: Leaf((0.5, 0.5)))
        tampered = ConvertedModel(
            with_tree(conv.ensemble, 0, tampered_root), conv.leaf_counts)
        report = roundtrip_validate(model, converted=tampered, samples=10)
        assert not report.ok
        assert report.discrepancies[0].field == "invertibility"


class TestDataset:
    def test_round_trip(self):
        ds = Dataset(2, ((1, (0.5, -1.25)), (3, (2.0, 0.1))))
        assert parse_dataset(serialize_dataset(ds)) == ds

    def test_label_must_be_positive(self):
        text = ("treecert-dataset 1\nfeatures 1\nsamples 1\ndata\n0 1.0\n")
        with pytest.raises(FormatError, match="label"):
            parse_dataset(text)

    def test_field_count_checked_with_line(self):
        text = ("treecert-dataset 1\nfeatures 2\nsamples 1\ndata\n1 1.0\n")
        with pytest.raises(FormatError, match="line 5"):
            parse_dataset(text)

    def test_nan_rejected(self):
        text = ("treecert-dataset 1\nfeatures 1\nsamples 1\ndata\n1 nan\n")
        with pytest.raises(FormatError, match="finite"):
            parse_dataset(text)


class TestPropertyFormat:
    def spec(self):
        return PropertySpec(
            2, 3,
            Box((Interval.open_closed(0.0, 2.0), Interval.unbounded())),
            Or((
                ClassIn(frozenset({1, 3})),
                And((ScoreGE(2, 0.25), ClassIn(frozenset({2})))),
            )),
        )

    def test_round_trip(self):
        spec = self.spec()
        assert parse_property(serialize_property(spec)) == spec

    def test_serialized_is_canonical(self):
        text = serialize_property(self.spec())
        assert serialize_property(parse_property(text)) == text

    def test_unbounded_dims_are_omitted(self):
        text = serialize_property(self.spec())
        assert "bound 0" in text and "bound 1" not in text

    def test_inclusive_infinity_rejected(self):
        text = ("treecert-property 1\nfeatures 1\noutputs 2\n"
                "bound 0 [-inf, 0.0]\nassert\n  class-in 1\n")
        with pytest.raises(FormatError, match="infinite endpoint"):
            parse_property(text)

    def test_out_of_range_class_fails_at_parse_time(self):
        text = ("treecert-property 1\nfeatures 1\noutputs 2\n"
                "assert\n  class-in 5\n")
        with pytest.raises(FormatError, match="class 5 outside"):
            parse_property(text)

    def test_empty_bound_rejected(self):
        text = ("treecert-property 1\nfeatures 1\noutputs 2\n"
                "bound 0 (2.0, 1.0)\nassert\n  class-in 1\n")
        with pytest.raises(FormatError, match="empty"):
            parse_property(text)

    def test_bound_dim_out_of_range(self):
        text = ("treecert-property 1\nfeatures 1\noutputs 2\n"
                "bound 3 (0.0, 1.0)\nassert\n  class-in 1\n")
        with pytest.raises(FormatError, match="dimension 3"):
            parse_property(text)

    def test_inconsistent_sibling_indent(self):
        text = ("treecert-property 1\nfeatures 1\noutputs 2\nassert\n"
                "  and\n    class-in 1\n     class-in 2\n")
        with pytest.raises(FormatError, match="indent"):
            parse_property(text)

    def test_composite_without_children(self):
        text = ("treecert-property 1\nfeatures 1\noutputs 2\n"
                "assert\n  and\n")
        with pytest.raises(FormatError, match="child"):
            parse_property(text)

    def test_explicit_interpretation_round_trips(self):
        spec = PropertySpec(
            1, 2, Box.unbounded(1), ClassIn(frozenset({1})),
            post_interpretation=None)
        text = serialize_property(spec)
        assert "post argmax" in text
        assert parse_property(text) == spec
