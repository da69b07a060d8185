import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from estentropy.quantization import Box, ceil_tol, grid_count, make_grid, quantize


def test_two_centers_on_symmetric_interval():
    g = make_grid(Box([-1.0], [1.0]), 0.5)
    assert g.centers_per_dim == (2,)
    np.testing.assert_allclose(g.centers().ravel(), [-0.5, 0.5])


def test_radius_at_least_half_width_gives_single_midpoint():
    g = make_grid(Box([2.0, -3.0], [4.0, 1.0]), 5.0)
    assert g.size == 1
    np.testing.assert_allclose(g.centers()[0], [3.0, -1.0])


def test_quarter_circle_box_with_matching_radius_has_one_center():
    g = make_grid(Box([0.0], [math.pi / 2]), math.pi / 4)
    assert g.centers_per_dim == (1,)


def test_point_on_center_maps_to_itself():
    g = make_grid(Box([-1.0, -1.0], [1.0, 1.0]), 0.25)
    for c in g.centers():
        q, _, inside = quantize(c, g)
        assert inside
        np.testing.assert_array_equal(q, c)


def test_tie_goes_to_lower_index():
    g = make_grid(Box([-1.0], [1.0]), 0.5)
    q, idx, _ = quantize([0.0], g)
    assert idx == (0,)
    assert q[0] == -0.5


def test_outside_point_clamps_and_is_flagged():
    g = make_grid(Box([0.0], [1.0]), 0.1)
    q, idx, inside = quantize([1.7], g)
    assert not inside
    assert idx == (g.centers_per_dim[0] - 1,)


def test_grid_count_examples():
    assert grid_count(2.0, 0.5, 3) == 8
    assert grid_count(0.5, 0.5, 4) == 1
    # an eps-ball of width 2 eps, counted with eps/dx per axis
    assert grid_count(2 * 0.1, 0.07, 3) == 8


def test_ceil_ignores_rounding_noise():
    assert ceil_tol(0.3 / 0.1) == 3.0
    assert ceil_tol(3.000001) == 4.0


boxes = st.lists(
    st.tuples(st.floats(-10, 10), st.floats(0, 5)), min_size=1, max_size=3
).map(lambda spans: Box([lo for lo, _ in spans], [lo + w for lo, w in spans]))


@settings(max_examples=60, deadline=None)
@given(box=boxes, delta=st.floats(0.05, 3.0), seed=st.integers(0, 2**31))
def test_every_point_in_box_is_within_delta_of_its_center(box, delta, seed):
    g = make_grid(box, delta)
    rng = np.random.default_rng(seed)
    centers = g.centers()
    for x in box.sample(rng, 20):
        q, idx, inside = quantize(x, g)
        assert inside
        assert np.max(np.abs(x - q)) <= delta * (1 + 1e-12)
        # brute-force nearest center agrees on distance
        best = np.min(np.max(np.abs(centers - x), axis=1))
        assert np.max(np.abs(x - q)) <= best + 1e-12


@settings(max_examples=40, deadline=None)
@given(box=boxes, delta=st.floats(0.05, 3.0))
def test_centers_are_counted_and_evenly_spaced(box, delta):
    g = make_grid(box, delta)
    centers = g.centers()
    assert len(centers) == g.size
    assert g.size == math.prod(max(1, int(ceil_tol(w / (2 * delta)))) for w in box.widths)
    for i in range(box.dim):
        axis = g.axis_centers(i)
        if axis.size > 1:
            np.testing.assert_allclose(np.diff(axis), g.spacing[i])
            assert g.spacing[i] <= 2 * delta * (1 + 1e-12)
    if len(centers) <= 200:
        for a, b in itertools.combinations(centers, 2):
            assert np.any(np.abs(a - b) >= g.spacing - 1e-9)


@pytest.mark.parametrize("width,delta", [(2.0, 0.5), (3.0, 0.25), (1.2, 0.1)])
def test_centers_are_two_delta_apart_when_width_is_a_multiple(width, delta):
    g = make_grid(Box([0.0], [width]), delta)
    assert np.min(np.diff(g.axis_centers(0))) >= 2 * delta - 1e-12


@settings(max_examples=40, deadline=None)
@given(box=boxes, delta=st.floats(0.05, 3.0))
def test_flat_index_round_trips(box, delta):
    g = make_grid(box, delta)
    for flat in range(min(g.size, 50)):
        assert g.flat_index(g.unflat_index(flat)) == flat
    with pytest.raises(IndexError):
        g.unflat_index(g.size)
