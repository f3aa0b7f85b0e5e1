import numpy as np
import pytest
from hypothesis import given, strategies as st

from stackfp import (
    AlignmentPair,
    Block,
    BoundaryBinding,
    Circuit,
    ConstraintSet,
    FloorplanState,
    GridDims,
    Net,
    Preplacement,
    TaskProfile,
    Terminal,
    default_order,
    occupancy_grid,
    shape_from_ar,
)
from stackfp.core import COMMON_RULES, RULE_OVERLAP

import oracles


def soft(bid, area, z=0, name=None, ar=(0.5, 2.0)):
    w, h = shape_from_ar(area, 1.0, *ar)
    return Block(bid, name or f"b{bid}", area, w, h, ar[0], ar[1], True, z)


def hard(bid, w, h, z=0, name=None):
    return Block(bid, name or f"b{bid}", w * h, w, h, 1.0, 1.0, False, z)


def circuit(blocks, terminals=(), nets=(), dims=(8, 8, 2), constraints=ConstraintSet(), util=1.0):
    return Circuit("test", GridDims(*dims), tuple(blocks), tuple(terminals),
                   tuple(nets), constraints, utilization=util)


class TestShapeFromAr:
    def test_square(self):
        assert shape_from_ar(16, 1.0, 0.5, 2.0) == (4, 4)

    def test_tall(self):
        assert shape_from_ar(8, 0.5, 0.5, 2.0) == (2, 4)

    def test_ratio_clipped_to_band(self):
        # requesting 3.0 against a band capped at 2.0 behaves like 2.0
        assert shape_from_ar(16, 3.0, 0.5, 2.0) == (6, 3)
        assert shape_from_ar(16, 3.0, 0.5, 2.0) == shape_from_ar(16, 2.0, 0.5, 2.0)

    def test_unit_area(self):
        assert shape_from_ar(1, 1.0, 0.5, 2.0) == (1, 1)

    def test_rejects_empty_area(self):
        with pytest.raises(ValueError):
            shape_from_ar(0, 1.0, 0.5, 2.0)

    @given(area=st.integers(1, 5000),
           ar=st.floats(0.05, 20.0),
           lo=st.floats(0.1, 1.0),
           span=st.floats(1.0, 10.0))
    def test_area_slack_below_one_row(self, area, ar, lo, span):
        w, h = shape_from_ar(area, ar, lo, lo * span)
        assert w >= 1 and h >= 1
        assert 0 <= w * h - area <= max(w, 1), (area, ar, w, h)

    @given(area=st.integers(1, 5000), ar=st.floats(0.05, 20.0))
    def test_deterministic(self, area, ar):
        assert shape_from_ar(area, ar, 0.5, 2.0) == shape_from_ar(area, ar, 0.5, 2.0)


class TestCircuitValidation:
    def test_block_ids_must_be_dense(self):
        with pytest.raises(ValueError, match="block ids"):
            circuit([hard(1, 2, 2)])

    def test_layer_out_of_range(self):
        with pytest.raises(ValueError, match="layer"):
            circuit([hard(0, 2, 2, z=5)])

    def test_utilization_budget(self):
        # 2 layers of 8x8 at 50% leave room for 64 cells
        with pytest.raises(ValueError, match="utilization"):
            circuit([hard(0, 8, 8), hard(1, 8, 8, z=1)], util=0.5)
        circuit([hard(0, 8, 8)], util=0.5)

    def test_net_member_bounds(self):
        with pytest.raises(ValueError, match="unknown block"):
            circuit([hard(0, 2, 2)], nets=[Net(blocks=(0, 3))])

    def test_net_duplicate_member(self):
        with pytest.raises(ValueError, match="twice"):
            Net(blocks=(0, 0))

    def test_alignment_pair_same_layer_rejected(self):
        cs = ConstraintSet(alignment_pairs=(AlignmentPair(0, 1, 4.0),))
        with pytest.raises(ValueError, match="one layer"):
            circuit([hard(0, 2, 2), hard(1, 2, 2)], constraints=cs)

    def test_group_spanning_layers_rejected(self):
        cs = ConstraintSet(groups=((0, 1),))
        with pytest.raises(ValueError, match="spans layers"):
            circuit([hard(0, 2, 2, z=0), hard(1, 2, 2, z=1)], constraints=cs)

    def test_preplacement_out_of_outline(self):
        cs = ConstraintSet(preplacements=(Preplacement(0, 7, 7, 0, 2, 2),))
        with pytest.raises(ValueError, match="outline"):
            circuit([hard(0, 2, 2)], constraints=cs)

    def test_preplacements_may_not_collide(self):
        cs = ConstraintSet(preplacements=(
            Preplacement(0, 0, 0, 0, 2, 2), Preplacement(1, 1, 1, 0, 2, 2)))
        with pytest.raises(ValueError, match="collide"):
            circuit([hard(0, 2, 2), hard(1, 2, 2)], constraints=cs)

    def test_binding_mode_checked(self):
        with pytest.raises(ValueError, match="mode"):
            BoundaryBinding(0, (0,), mode="SOME")


class TestTaskProfile:
    def test_structural_rules_always_enabled(self):
        for task in (1, 2, 3):
            profile = TaskProfile.for_task(task)
            assert COMMON_RULES <= profile.enabled_rules

    def test_common_rules_cannot_be_dropped(self):
        with pytest.raises(ValueError, match="structural"):
            TaskProfile(enabled_rules=frozenset({RULE_OVERLAP}))

    def test_task_presets_differ_on_optional_rules(self):
        t1 = TaskProfile.for_task(1).enabled_rules
        t2 = TaskProfile.for_task(2).enabled_rules
        t3 = TaskProfile.for_task(3).enabled_rules
        assert "boundary" in t1 and "grouping" not in t1
        assert "grouping" in t2 and "boundary" not in t2
        assert t3 == t1 | t2 | {"preplace"}

    def test_default_weights(self):
        p = TaskProfile.for_task(3)
        assert (p.w_alignment, p.w_overlap, p.w_hpwl, p.w_adjacency, p.w_distance) == \
            (0.5, 0.5, 1.0, 4.0, 4.0)
        assert p.terminal_mask_threshold == 0.0
        assert p.block_mask_threshold == 0.0
        assert p.alignment_mask_frac == 0.1


class TestOrderAndState:
    def test_default_order_area_desc_ties_by_id(self):
        c = circuit([hard(0, 2, 2), hard(1, 3, 3), hard(2, 2, 2)])
        assert default_order(c) == [1, 0, 2]

    def test_preplaced_blocks_lead_the_order(self):
        cs = ConstraintSet(preplacements=(Preplacement(2, 0, 0, 0, 2, 2),))
        c = circuit([hard(0, 2, 2), hard(1, 3, 3), hard(2, 2, 2)], constraints=cs)
        assert default_order(c) == [2, 1, 0]

    def test_order_must_be_permutation(self):
        c = circuit([hard(0, 2, 2), hard(1, 2, 2)])
        with pytest.raises(ValueError, match="permutation"):
            FloorplanState(c, order=[0, 0])

    def test_place_advances_nothing_but_flags(self):
        c = circuit([hard(0, 2, 2), hard(1, 2, 2)])
        s = FloorplanState(c)
        assert not s.done and s.current_block == 0
        s.place(0, 1, 1)
        assert s.placed[0] and s.rect(0) == (1, 1, 2, 2)
        with pytest.raises(ValueError, match="already placed"):
            s.place(0, 0, 0)

    def test_place_bounds_checked(self):
        c = circuit([hard(0, 3, 3)])
        s = FloorplanState(c)
        with pytest.raises(ValueError, match="outline"):
            s.place(0, 6, 6)
        s.place(0, 6, 6, validate=False)   # oracle paths may force-place
        assert s.rect(0) == (6, 6, 3, 3)

    def test_set_shape_soft_only_and_unplaced_only(self):
        c = circuit([soft(0, 16), hard(1, 2, 2)])
        s = FloorplanState(c)
        assert s.set_shape(0, 2.0) == (6, 3)
        with pytest.raises(ValueError, match="hard"):
            s.set_shape(1, 2.0)
        s.place(0, 0, 0)
        with pytest.raises(ValueError, match="placed"):
            s.set_shape(0, 1.0)

    def test_clone_is_independent(self):
        c = circuit([hard(0, 2, 2), hard(1, 2, 2)])
        s = FloorplanState(c)
        s.place(0, 0, 0)
        d = s.clone()
        d.place(1, 4, 4)
        assert not s.placed[1] and d.placed[1]

    def test_apply_preplacements_sets_cursor(self):
        cs = ConstraintSet(preplacements=(Preplacement(1, 4, 4, 0, 3, 3),))
        c = circuit([hard(0, 2, 2), hard(1, 3, 3)], constraints=cs)
        s = FloorplanState(c)
        s.apply_preplacements()
        assert s.order[0] == 1 and s.cursor == 1
        assert s.placed[1] and s.rect(1) == (4, 4, 3, 3)
        assert s.current_block == 0


class TestOccupancy:
    def test_popcount_matches_rasterizer(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            w_die, h_die = int(rng.integers(4, 10)), int(rng.integers(4, 10))
            blocks, rects = [], []
            for i in range(int(rng.integers(1, 4))):
                bw, bh = int(rng.integers(1, 4)), int(rng.integers(1, 4))
                blocks.append(hard(i, bw, bh))
            c = circuit(blocks, dims=(w_die, h_die, 1))
            s = FloorplanState(c)
            for b in blocks:
                bx = int(rng.integers(0, w_die - b.w + 1))
                by = int(rng.integers(0, h_die - b.h + 1))
                s.place(b.id, bx, by)
                rects.append((bx, by, b.w, b.h))
            grid = occupancy_grid(s)
            assert grid.shape == (1, w_die, h_die)
            expect = oracles.covered_cells(oracles.rasterize(rects, w_die, h_die))
            assert int(grid.sum()) == expect

    def test_layers_kept_apart(self):
        c = circuit([hard(0, 2, 2, z=0), hard(1, 2, 2, z=1)])
        s = FloorplanState(c)
        s.place(0, 0, 0)
        s.place(1, 0, 0)
        grid = occupancy_grid(s)
        assert grid[0].sum() == 4 and grid[1].sum() == 4
