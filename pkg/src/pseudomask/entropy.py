"""Shannon entropy, local entropy filtering and exam-area cropping."""

import math

import numpy as np

from pseudomask import kernels
from pseudomask.errors import InvalidInputError
from pseudomask.geometry import signed_area
from pseudomask.imaging import Rect, as_image, as_mask, crop, histogram, normalize_histogram

MAX_BITS = 8.0
DEFAULT_RADIUS = 9
DEFAULT_THRESHOLD = 0.5
CONSTANT_WINDOW_EPS = 1e-9

# Moore neighbourhood, clockwise on screen (y grows downward), from west.
_DIRS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))


def shannon_entropy(p, base=2.0):
    """``-sum p log_b p`` over the non-zero entries of a probability vector."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise InvalidInputError("probabilities must be non-negative and sum to 1")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)) / math.log(base))


def global_entropy(img):
    """Entropy in bits of the image's intensity histogram."""
    return shannon_entropy(normalize_histogram(histogram(img)), base=2.0)


def local_entropy_filter(img, radius=DEFAULT_RADIUS):
    """Per-pixel entropy (bits) of the square window of side ``2*radius+1``.

    Windows are clipped at the border rather than padded.
    """
    img = as_image(img)
    if radius < 1:
        raise InvalidInputError(f"radius must be >= 1, got {radius}")
    em = kernels.local_entropy(img, int(radius))
    # fixed-point rounding leaves about 1e-12 on constant windows, while any
    # mixed window carries at least ~1e-4 bits
    em[np.abs(em) < CONSTANT_WINDOW_EPS] = 0.0
    return np.clip(em, 0.0, MAX_BITS)


def threshold_entropy(em, t=DEFAULT_THRESHOLD):
    """Foreground where entropy reaches ``t`` times the map maximum."""
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"threshold fraction must lie in [0, 1], got {t}")
    em = np.asarray(em, dtype=np.float64)
    peak = em.max()
    if peak <= 0:
        return np.zeros(em.shape, dtype=bool)
    return em >= t * peak


def trace_boundary(padded, sx, sy):
    """Moore-neighbour trace of the outer boundary starting at ``(sx, sy)``.

    ``padded`` carries a one-pixel background frame; ``(sx, sy)`` must be the
    first foreground pixel of its component in raster order. Returned
    coordinates are in the padded frame.
    """
    start = (sx, sy)
    back = 0  # west of a raster-first pixel is background
    contour = [start]
    cx, cy = start
    first_step = None
    while True:
        nxt = None
        for k in range(1, 9):
            d = (back + k) % 8
            nx, ny = cx + _DIRS[d][0], cy + _DIRS[d][1]
            if padded[ny, nx]:
                nxt = (nx, ny)
                # new backtrack: the neighbour examined just before, seen from nxt
                px, py = _DIRS[(d - 1) % 8]
                back = _DIRS.index((cx + px - nx, cy + py - ny))
                break
        if nxt is None:
            return contour  # isolated pixel
        if (cx, cy) == start:
            if first_step is None:
                first_step = nxt
            elif nxt == first_step:
                return contour[:-1]
        contour.append(nxt)
        cx, cy = nxt


def extract_contours(mask):
    """Outer boundary polygon of each 8-connected component.

    Components are visited in raster order of their first pixel; each polygon
    lists pixel-center ``(x, y)`` vertices in clockwise screen order.
    """
    mask = as_mask(mask)
    labels, areas = kernels.label(mask, 8)
    count = len(areas) - 1
    if count == 0:
        return []
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    firsts = dict(zip(ids.tolist(), first.tolist()))
    padded = np.pad(mask, 1)
    w = mask.shape[1]
    polys = []
    for k in range(1, count + 1):
        idx = firsts[k]
        sy, sx = divmod(idx, w)
        pts = trace_boundary(padded, sx + 1, sy + 1)
        polys.append(np.array(pts, dtype=np.float64) - 1.0)
    return polys


def contour_area(poly):
    return abs(signed_area(poly))


def polygon_rect(poly):
    x0, y0 = np.floor(poly.min(axis=0)).astype(int)
    x1, y1 = np.ceil(poly.max(axis=0)).astype(int)
    return Rect(int(x0), int(y0), int(x1 - x0 + 1), int(y1 - y0 + 1))


def crop_exam_area(img, radius=DEFAULT_RADIUS, t=DEFAULT_THRESHOLD):
    """Crop to the bounding rectangle of the largest-area entropy contour.

    Returns ``(cropped, rect)``; when no contour exists the image is returned
    whole with the full-extent rectangle.
    """
    img = as_image(img)
    contours = extract_contours(threshold_entropy(local_entropy_filter(img, radius), t))
    if not contours:
        rect = Rect.full(img)
        return img.copy(), rect
    best = max(range(len(contours)), key=lambda i: (contour_area(contours[i]), -i))
    rect = polygon_rect(contours[best])
    return crop(img, rect), rect
