import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polard.actions import (
    ActionSet,
    DimensionSpec,
    action_at,
    build_space,
    index_of,
    snap_to_grid,
)


class TestBuildSpace:
    def test_quarter_grid(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.25)])
        assert space.cardinality == 5
        np.testing.assert_allclose(space.dims[0].values(), [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_published_cardinality(self):
        # 11 x 7 x 5 x 5 grid used in the four-parameter characterization study
        dims = [
            DimensionSpec(0.0, 1.0, 0.1),
            DimensionSpec(0.0, 0.6, 0.1),
            DimensionSpec(0.0, 0.4, 0.1),
            DimensionSpec(0.0, 0.4, 0.1),
        ]
        space = build_space(dims)
        assert space.counts == (11, 7, 5, 5)
        assert space.cardinality == 1925

    def test_step_exceeding_range_gives_single_point(self):
        space = build_space([DimensionSpec(0.0, 1.0, 2.0)])
        assert space.cardinality == 1
        np.testing.assert_allclose(space.dims[0].values(), [0.0])

    def test_rejects_empty_dims(self):
        with pytest.raises(ValueError):
            build_space([])

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            DimensionSpec(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            DimensionSpec(0.0, 1.0, -0.5)

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            DimensionSpec(1.0, 0.0, 0.1)


class TestIndexing:
    def test_action_at_third_point(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.25)])
        assert action_at(space, 2).coords == (0.5,)

    def test_action_at_origin(self):
        space = build_space([DimensionSpec(0.0, 1.0, 1.0), DimensionSpec(0.0, 1.0, 1.0)])
        assert action_at(space, 0).coords == (0.0, 0.0)

    def test_action_at_mixed_radix(self):
        # 2 x 3 grid: index 5 = (row 1, col 2); last dimension fastest
        space = build_space([DimensionSpec(0.0, 1.0, 1.0), DimensionSpec(0.0, 2.0, 1.0)])
        assert space.counts == (2, 3)
        assert action_at(space, 5).coords == (1.0, 2.0)

    def test_out_of_range_index(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.25)])
        with pytest.raises(IndexError):
            action_at(space, 5)
        with pytest.raises(IndexError):
            action_at(space, -1)

    def test_roundtrip_3x3(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.5), DimensionSpec(0.0, 1.0, 0.5)])
        for i in range(space.cardinality):
            assert index_of(space, action_at(space, i).coords) == i

    def test_index_of_examples(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.25)])
        assert index_of(space, [0.5]) == 2
        with pytest.raises(ValueError):
            index_of(space, [0.3])


class TestSnap:
    def test_nearest(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.25)])
        assert snap_to_grid(space, [0.3]).coords == (0.25,)

    def test_tie_toward_smaller_index(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.25)])
        assert snap_to_grid(space, [0.375]).coords == (0.25,)

    def test_clamps_out_of_bounds(self):
        space = build_space([DimensionSpec(0.0, 1.0, 0.25)])
        assert snap_to_grid(space, [1.7]).coords == (1.0,)
        assert snap_to_grid(space, [-0.4]).coords == (0.0,)

    def test_snap_is_on_grid(self, rng):
        space = build_space([DimensionSpec(-1.0, 1.0, 0.2), DimensionSpec(0.0, 5.0, 0.7)])
        for _ in range(200):
            pt = rng.uniform([-2, -1], [2, 6])
            a = snap_to_grid(space, pt)
            assert index_of(space, a.coords) == a.index


@st.composite
def dimension_specs(draw):
    lower = draw(st.floats(-5, 5, allow_nan=False))
    step = draw(st.floats(0.05, 2.0, allow_nan=False))
    count = draw(st.integers(1, 7))
    return DimensionSpec(lower, lower + step * (count - 1), step)


@given(st.lists(dimension_specs(), min_size=1, max_size=3))
@settings(max_examples=60, deadline=None)
def test_bijection_and_cardinality(dims):
    space = build_space(dims)
    assert space.cardinality == int(np.prod([d.count for d in dims]))
    probe = list(range(space.cardinality)) if space.cardinality <= 60 else \
        np.linspace(0, space.cardinality - 1, 50, dtype=int).tolist()
    for i in probe:
        assert index_of(space, action_at(space, i).coords) == i


def test_action_set_canonical_form():
    s = ActionSet.of([5, 1, 3, 1, 5])
    assert s.indices == (1, 3, 5)
    assert s.union([0, 3]).indices == (0, 1, 3, 5)
    assert 3 in s and 2 not in s
