"""Convex hulls, centroid scaling and polygon rasterization.

Polygons are ``(n, 2)`` float arrays of ``(x, y)`` vertices in pixel
units. Hulls are returned with positive signed (shoelace) area.
"""

import numpy as np

from pseudomask.errors import InvalidInputError

EDGE_TOL = 1e-9


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Andrew's monotone chain.

    Returns the strictly convex hull vertices, counter-clockwise (positive
    shoelace area), starting at the lexicographically smallest point.
    A single distinct point yields one vertex, collinear input the two
    extreme points.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise InvalidInputError("convex hull of an empty point set")
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) <= 2:
        return np.array(uniq, dtype=np.float64)

    lower = []
    for p in uniq:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(uniq):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    # collinear input leaves just the two endpoints here
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def signed_area(poly):
    poly = np.asarray(poly, dtype=np.float64)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def centroid(poly):
    """Area centroid, or the vertex mean when the polygon has no area."""
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(poly) == 0:
        raise InvalidInputError("centroid of an empty polygon")
    area = signed_area(poly)
    if len(poly) < 3 or abs(area) < EDGE_TOL:
        return poly.mean(axis=0)
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return np.array([cx, cy])


def scale_polygon(poly, factor):
    """Scale vertices about the centroid; order is preserved."""
    if not factor > 0:
        raise InvalidInputError(f"scale factor must be positive, got {factor}")
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    c = centroid(poly)
    return c + factor * (poly - c)


def _on_segment(px, py, a, b):
    ax, ay = a
    bx, by = b
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    length = max(abs(bx - ax), abs(by - ay), 1.0)
    within = ((px >= min(ax, bx) - EDGE_TOL) & (px <= max(ax, bx) + EDGE_TOL)
              & (py >= min(ay, by) - EDGE_TOL) & (py <= max(ay, by) + EDGE_TOL))
    return (np.abs(cross) <= EDGE_TOL * length) & within


def points_in_polygon(poly, px, py):
    """Even-odd membership of points ``(px, py)``; points on an edge count as inside."""
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    n = len(poly)
    if n == 1:
        return (np.abs(px - poly[0, 0]) <= EDGE_TOL) & (np.abs(py - poly[0, 1]) <= EDGE_TOL)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        on_edge |= _on_segment(px, py, a, b)
        if n == 2 and i == 1:
            break
        # half-open rule on y avoids double counting at vertices
        crosses = (a[1] > py) != (b[1] > py)
        if np.any(crosses):
            with np.errstate(divide="ignore", invalid="ignore"):
                x_at = a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            inside ^= crosses & (px < x_at)
    if n == 2:
        return on_edge
    return inside | on_edge


def rasterize_polygon(poly, width, height):
    """Mask of pixels whose centers lie inside or on ``poly``.

    Vertices may fall outside the raster; out-of-range pixels are dropped.
    """
    if width < 1 or height < 1:
        raise InvalidInputError("raster dimensions must be positive")
    poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    out = np.zeros((height, width), dtype=bool)
    if len(poly) == 0:
        return out
    x0 = max(int(np.ceil(poly[:, 0].min() - EDGE_TOL)), 0)
    x1 = min(int(np.floor(poly[:, 0].max() + EDGE_TOL)), width - 1)
    y0 = max(int(np.ceil(poly[:, 1].min() - EDGE_TOL)), 0)
    y1 = min(int(np.floor(poly[:, 1].max() + EDGE_TOL)), height - 1)
    if x0 > x1 or y0 > y1:
        return out
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    out[y0:y1 + 1, x0:x1 + 1] = points_in_polygon(poly, xs, ys)
    return out


def mask_hull(mask):
    """Convex hull of a mask's foreground pixel centers, or ``None`` if blank.

    Only the leftmost and rightmost pixel of each row can be hull vertices.
    """
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    sub = mask[rows]
    left = sub.argmax(axis=1)
    right = sub.shape[1] - 1 - sub[:, ::-1].argmax(axis=1)
    pts = np.concatenate([np.stack([left, rows], 1), np.stack([right, rows], 1)])
    return convex_hull(pts)
