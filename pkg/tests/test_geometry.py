import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import disk
from pseudomask.errors import InvalidInputError
from pseudomask.geometry import (
    centroid,
    convex_hull,
    mask_hull,
    rasterize_polygon,
    scale_polygon,
    signed_area,
)

points = st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=12)


def halfplane_oracle(pts):
    """p is a hull vertex unless it lies in a closed triangle of three other points
    or on the segment between two of them."""
    uniq = sorted(set(pts))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def on_segment(p, a, b):
        return cross(a, b, p) == 0 and min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) \
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])

    def in_triangle(p, a, b, c):
        if cross(a, b, c) == 0:
            return False  # flat triangles are covered by the segment test
        d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
        return not ((d1 < 0 or d2 < 0 or d3 < 0) and (d1 > 0 or d2 > 0 or d3 > 0))

    verts = set()
    for p in uniq:
        others = [q for q in uniq if q != p]
        if any(on_segment(p, a, b) for a, b in itertools.combinations(others, 2)):
            continue
        if any(in_triangle(p, a, b, c) for a, b, c in itertools.combinations(others, 3)):
            continue
        verts.add(p)
    return verts


def pair_oracle(pts):
    """All-pairs half-plane test: (a, b) is a hull edge iff every point lies on the
    left of or on line ab, with points on the line confined to segment ab."""
    uniq = sorted(set(pts))
    if len(uniq) <= 2:
        return set(uniq)
    verts = set()
    for a, b in itertools.permutations(uniq, 2):
        ok = True
        for p in uniq:
            c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if c < 0:
                ok = False
                break
            if c == 0 and not (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
                               and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])):
                ok = False
                break
        if ok:
            verts.update((a, b))
    return verts


def as_set(hull):
    return {tuple(map(int, v)) for v in hull}


def test_square_cases():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    assert as_set(convex_hull(sq)) == set(sq)
    assert as_set(convex_hull(sq + [(0.5, 0.5)])) == set(sq)
    assert signed_area(convex_hull(sq)) == pytest.approx(1.0)


def test_degenerate_hulls():
    assert convex_hull([(2, 3)]).tolist() == [[2.0, 3.0]]
    assert convex_hull([(2, 3), (2, 3)]).tolist() == [[2.0, 3.0]]
    assert as_set(convex_hull([(0, 0), (1, 1), (2, 2), (3, 3)])) == {(0, 0), (3, 3)}
    with pytest.raises(InvalidInputError):
        convex_hull([])


def test_oracles_agree_with_each_other(rng):
    for _ in range(200):
        pts = [tuple(p) for p in rng.integers(-5, 6, size=(rng.integers(1, 13), 2)).tolist()]
        assert pair_oracle(pts) == halfplane_oracle(pts)


def test_hull_matches_oracle_on_random_sets(rng):
    for _ in range(1000):
        pts = [tuple(p) for p in rng.integers(-8, 9, size=(rng.integers(1, 13), 2)).tolist()]
        assert as_set(convex_hull(pts)) == pair_oracle(pts)


@given(points)
def test_hull_properties(pts):
    hull = convex_hull(pts)
    assert as_set(hull) == pair_oracle(pts)
    assert np.array_equal(convex_hull(hull), hull)
    n = len(hull)
    if n >= 3:
        assert signed_area(hull) > 0
        for i in range(n):
            a, b, c = hull[i], hull[(i + 1) % n], hull[(i + 2) % n]
            assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0
        for p in pts:
            for i in range(n):
                a, b = hull[i], hull[(i + 1) % n]
                assert (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-9


@given(points, st.floats(0, 1), st.floats(0, 1))
def test_hull_absorbs_convex_combinations(pts, s, u):
    arr = np.array(pts, float)
    a, b, c = arr[0], arr[len(arr) // 2], arr[-1]
    extra = (1 - s) * a + s * (u * b + (1 - u) * c)
    # exact binary fractions keep the comparison free of rounding noise
    extra = np.round(extra * 64) / 64
    if not np.allclose(extra, (1 - s) * a + s * (u * b + (1 - u) * c), atol=0):
        return
    assert np.array_equal(convex_hull(np.vstack([arr, extra])), convex_hull(arr))


def test_centroid_cases():
    assert centroid([(0, 0), (1, 0), (1, 1), (0, 1)]).tolist() == [0.5, 0.5]
    assert centroid([(4, 2)]).tolist() == [4.0, 2.0]
    assert np.allclose(centroid([(0, 0), (3, 0), (0, 3)]), [1, 1])


def test_scale_cases():
    tri = np.array([(0, 0), (2, 0), (0, 2)], float)
    assert np.array_equal(scale_polygon(tri, 1.0), tri)
    expected = [(-2 / 3, -2 / 3), (10 / 3, -2 / 3), (-2 / 3, 10 / 3)]
    assert np.allclose(scale_polygon(tri, 2.0), expected, atol=1e-12)
    sq = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], float)
    big = scale_polygon(sq, 1.5)
    assert np.allclose(big, [(-0.25, -0.25), (1.25, -0.25), (1.25, 1.25), (-0.25, 1.25)])
    with pytest.raises(InvalidInputError):
        scale_polygon(sq, 0)


@given(points, st.floats(0.2, 5.0))
def test_scale_round_trip(pts, f):
    hull = convex_hull(pts)
    back = scale_polygon(scale_polygon(hull, f), 1.0 / f)
    assert np.allclose(back, hull, atol=1e-9)


def test_rasterize_cases():
    full = rasterize_polygon([(-1, -1), (10, -1), (10, 10), (-1, 10)], 5, 5)
    assert full.all()
    assert not rasterize_polygon([(20, 20), (30, 20), (30, 30)], 5, 5).any()
    sq = rasterize_polygon([(1, 1), (3, 1), (3, 3), (1, 3)], 5, 5)
    expected = np.zeros((5, 5), bool)
    expected[1:4, 1:4] = True
    assert np.array_equal(sq, expected)


@given(points)
def test_rasterized_hull_covers_points(pts):
    arr = np.array(pts) + 6
    m = np.zeros((13, 13), bool)
    m[arr[:, 1], arr[:, 0]] = True
    covered = rasterize_polygon(convex_hull(arr), 13, 13)
    assert np.all(covered[m])
    hull = mask_hull(m)
    assert np.all(rasterize_polygon(hull, 13, 13)[m])


def test_mask_hull_of_disk_is_convex_superset():
    m = disk(31, 15, 15, 9)
    hull = mask_hull(m)
    assert signed_area(hull) > 0
    assert np.all(rasterize_polygon(hull, 31, 31)[m])
    assert mask_hull(np.zeros((4, 4), bool)) is None
