"""Pure numpy/scipy fallback for the compiled pixel kernels.

Contracts match :mod:`pseudomask._ckernels` exactly, including the
fixed-point entropy accumulation, so both backends agree bit for bit.
"""

import numpy as np
from scipy import ndimage


def _window_bounds(size, radius):
    idx = np.arange(size)
    lo = np.maximum(idx - radius, 0)
    hi = np.minimum(idx + radius, size - 1)
    return lo, hi


def local_entropy(img, radius, clogc, log2n, inv_scale):
    h, w = img.shape
    ylo, yhi = _window_bounds(h, radius)
    xlo, xhi = _window_bounds(w, radius)
    n = (yhi - ylo + 1)[:, None] * (xhi - xlo + 1)[None, :]
    s = np.zeros((h, w), dtype=np.int64)
    for level in np.unique(img):
        ind = (img == level).astype(np.int64)
        # summed-area table with a zero row/column prepended
        sat = np.zeros((h + 1, w + 1), dtype=np.int64)
        sat[1:, 1:] = ind.cumsum(0).cumsum(1)
        counts = (sat[yhi + 1][:, xhi + 1] - sat[ylo][:, xhi + 1]
                  - sat[yhi + 1][:, xlo] + sat[ylo][:, xlo])
        s += clogc[counts]
    return log2n[n] - (s.astype(np.float64) * inv_scale) / n


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def label(mask, connectivity):
    labels, count = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    labels = labels.astype(np.int32)
    if count == 0:
        return labels, np.zeros(1, dtype=np.int64)
    # renumber by raster order of each component's first pixel
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    ids, first = ids[keep], first[keep]
    order = ids[np.argsort(first, kind="stable")]
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order] = np.arange(1, count + 1, dtype=np.int32)
    labels = remap[labels]
    areas = np.bincount(labels.ravel(), minlength=count + 1).astype(np.int64)
    areas[0] = 0
    return labels, areas


def fill_holes(mask):
    return ndimage.binary_fill_holes(mask.astype(bool), structure=_STRUCTURES[4])
