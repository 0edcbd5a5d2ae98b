"""Concrete semantics: routing, prediction, cell enumeration.

The cell enumeration is the load-bearing oracle for the whole test
suite (engine results are compared against it), so it is itself checked
against direct prediction at sampled points here.
"""
import math
import random

import pytest

from treecert.boxes import Box, Interval
from treecert.trees import (
    DEFAULT_CELL_CAP,
    Ensemble,
    Internal,
    Leaf,
    PostProcess,
    Tree,
    argmax_class,
    classify,
    ensemble_predict,
    enumerate_cells,
    leaf_regions,
    stable_softmax,
    tree_predict,
)

from helpers import hand_pair, random_box, random_ensemble, random_point_in


class TestValidation:
    def test_leaf_values_must_be_finite(self):
        with pytest.raises(ValueError):
            Leaf((float("inf"), 0.0))
        with pytest.raises(ValueError):
            Leaf((float("nan"),))

    def test_threshold_must_be_finite(self):
        with pytest.raises(ValueError):
            Internal(0, float("nan"), Leaf((0.0,)), Leaf((1.0,)))

    def test_ensemble_rejects_bad_arity(self):
        t = Tree(Leaf((1.0, 0.0, 0.0)))
        with pytest.raises(ValueError, match="tree 0"):
            Ensemble((t,), PostProcess.DIVISOR, 1, 2)

    def test_ensemble_rejects_feature_out_of_range(self):
        t = Tree(Internal(3, 0.5, Leaf((1.0,)), Leaf((0.0,))))
        with pytest.raises(ValueError, match="feature"):
            Ensemble((t,), PostProcess.IDENTITY, 2, 1)

    def test_ensemble_needs_trees(self):
        with pytest.raises(ValueError):
            Ensemble((), PostProcess.DIVISOR, 1, 1)


class TestRouting:
    def test_threshold_goes_left(self):
        tree = Tree(Internal(0, 1.0, Leaf((0.0,)), Leaf((1.0,))))
        assert tree_predict(tree, (1.0,)) == (0.0,)
        assert tree_predict(tree, (math.nextafter(1.0, 2.0),)) == (1.0,)

    def test_hand_predictions(self):
        ens = hand_pair()
        assert ensemble_predict(ens, (1.0,)) == (0.5, 0.5)
        assert ensemble_predict(ens, (-1.0,)) == (1.0, 0.0)
        assert ensemble_predict(ens, (3.0,)) == (0.0, 1.0)
        assert classify(ens, (1.0,)) == 1
        assert classify(ens, (3.0,)) == 2

    def test_wrong_input_length(self):
        ens = hand_pair()
        with pytest.raises(ValueError):
            ensemble_predict(ens, (1.0, 2.0))


class TestArgmax:
    def test_tie_goes_to_lowest_index(self):
        assert argmax_class((0.5, 0.5)) == 1
        assert argmax_class((0.1, 0.7, 0.7)) == 2

    def test_plain_max(self):
        assert argmax_class((0.0, 1.0)) == 2
        assert argmax_class((3.0,)) == 1


class TestSoftmax:
    def test_sums_to_one(self):
        v = stable_softmax((0.3, -1.2, 4.0))
        assert abs(sum(v) - 1.0) <= 3 * 2.3e-16

    def test_no_overflow_on_large_inputs(self):
        v = stable_softmax((1000.0, 0.0))
        assert math.isfinite(v[0]) and math.isfinite(v[1])
        assert v[0] > 0.999

    def test_shift_invariance_is_exact(self):
        base = (0.25, -0.75, 1.5)
        shifted = tuple(x + 10.0 for x in base)
        assert stable_softmax(base) == stable_softmax(shifted)

    def test_softmax_post_preserves_argmax(self):
        rng = random.Random(3)
        for _ in range(200):
            raw = Ensemble(
                random_ensemble(rng, n_trees=3, n_outputs=3).trees,
                PostProcess.IDENTITY,
                2,
                3,
            )
            soft = Ensemble(raw.trees, PostProcess.SOFTMAX, 2, 3)
            x = tuple(rng.uniform(-3, 3) for _ in range(2))
            assert classify(raw, x) == classify(soft, x)


class TestLeafRegions:
    def test_stump(self):
        tree = Tree(Internal(0, 0.0, Leaf((1.0, 0.0)), Leaf((0.0, 1.0))))
        regions = leaf_regions(tree, 1)
        assert regions == [
            (Box((Interval.open_closed(float("-inf"), 0.0),)), (1.0, 0.0)),
            (Box((Interval.open(0.0, float("inf")),)), (0.0, 1.0)),
        ]

    def test_partition_and_agreement_with_predict(self):
        rng = random.Random(17)
        for _ in range(50):
            ens = random_ensemble(rng, n_trees=1, n_features=2, depth=4)
            tree = ens.trees[0]
            regions = leaf_regions(tree, 2)
            for _ in range(20):
                x = tuple(rng.uniform(-4, 4) for _ in range(2))
                holders = [val for box, val in regions if box.contains(x)]
                assert len(holders) == 1
                assert holders[0] == tree_predict(tree, x)

    def test_region_count_equals_reachable_leaves(self):
        # A split nested under a contradictory ancestor is unreachable and
        # contributes no region.
        tree = Tree(
            Internal(
                0,
                0.0,
                Internal(0, 5.0, Leaf((1.0,)), Leaf((2.0,))),
                Leaf((3.0,)),
            )
        )
        regions = leaf_regions(tree, 1)
        assert [val for _, val in regions] == [(1.0,), (3.0,)]


class TestEnumerateCells:
    def test_hand_enumeration(self):
        ens = hand_pair()
        cells = list(enumerate_cells(ens))
        assert [out for _, out in cells] == [(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)]
        boxes = [box.dims[0] for box, _ in cells]
        assert boxes[0].hi == 0.0 and boxes[0].hi_inclusive
        assert boxes[1].lo == 0.0 and not boxes[1].lo_inclusive
        assert boxes[1].hi == 2.0 and boxes[1].hi_inclusive
        assert boxes[2].lo == 2.0 and not boxes[2].lo_inclusive

    def test_within_restricts(self):
        ens = hand_pair()
        within = Box((Interval.open(0.5, 1.5),))
        cells = list(enumerate_cells(ens, within=within))
        assert len(cells) == 1
        assert cells[0][1] == (0.5, 0.5)

    def test_cells_agree_with_predict(self):
        rng = random.Random(23)
        for _ in range(30):
            ens = random_ensemble(rng, n_trees=3, n_features=2, depth=3)
            for box, out in enumerate_cells(ens):
                x = box.inner_point()
                assert ensemble_predict(ens, x) == out

    def test_cells_partition_within(self):
        rng = random.Random(29)
        for _ in range(30):
            ens = random_ensemble(rng, n_trees=2, n_features=2, depth=3)
            within = random_box(rng, 2)
            cells = list(enumerate_cells(ens, within=within))
            for _ in range(20):
                x = random_point_in(rng, within)
                holders = [box for box, _ in cells if box.contains(x)]
                assert len(holders) == 1

    def test_cap_refused_upfront(self):
        rng = random.Random(31)
        ens = random_ensemble(rng, n_trees=8, n_features=2, depth=6)
        product = 1
        for t in ens.trees:
            product *= t.leaf_count
        if product > 64:
            with pytest.raises(ValueError, match="cell enumeration refused"):
                next(enumerate_cells(ens, cap=64))

    def test_default_cap(self):
        assert DEFAULT_CELL_CAP == 10**6


class TestTreeShape:
    def test_depth_and_leaf_count(self):
        leaf = Tree(Leaf((1.0,)))
        assert leaf.depth == 0 and leaf.leaf_count == 1
        stump = Tree(Internal(0, 0.0, Leaf((1.0,)), Leaf((2.0,))))
        assert stump.depth == 1 and stump.leaf_count == 2
