# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels.

Same contracts as :mod:`pseudomask._pykernels`; results are bit-identical.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, int32_t, uint8_t
from libc.string cimport memset

cnp.import_array()


def local_entropy(const uint8_t[:, ::1] img, Py_ssize_t radius,
                  const int64_t[::1] clogc, const double[::1] log2n,
                  double inv_scale):
    """Sliding-window entropy with an incrementally updated histogram.

    ``clogc[c]`` is ``c*log2(c)`` in fixed point so the running sum is exact.
    """
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t x, y, yy, y0, y1, xin, xout, n
    cdef int64_t hist[256]
    cdef int64_t s, c
    cdef uint8_t v
    out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] res = out

    for y in range(h):
        y0 = y - radius if y > radius else 0
        y1 = y + radius if y + radius < h else h - 1
        memset(hist, 0, sizeof(hist))
        s = 0
        for xin in range(0, radius + 1 if radius + 1 < w else w):
            for yy in range(y0, y1 + 1):
                v = img[yy, xin]
                c = hist[v]
                s += clogc[c + 1] - clogc[c]
                hist[v] = c + 1
        for x in range(w):
            n = (y1 - y0 + 1) * ((x + radius if x + radius < w else w - 1)
                                 - (x - radius if x > radius else 0) + 1)
            res[y, x] = log2n[n] - (<double>s * inv_scale) / n
            xin = x + radius + 1
            if xin < w:
                for yy in range(y0, y1 + 1):
                    v = img[yy, xin]
                    c = hist[v]
                    s += clogc[c + 1] - clogc[c]
                    hist[v] = c + 1
            xout = x - radius
            if xout >= 0:
                for yy in range(y0, y1 + 1):
                    v = img[yy, xout]
                    c = hist[v]
                    s += clogc[c - 1] - clogc[c]
                    hist[v] = c - 1
    return out


def label(const uint8_t[:, ::1] mask, int connectivity):
    """Breadth-first component labeling; ids follow raster order of first pixel."""
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef Py_ssize_t npix = h * w
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int32_t[:, ::1] labels = labels_arr
    queue_arr = np.empty(npix if npix > 0 else 1, dtype=np.intp)
    cdef Py_ssize_t[::1] queue = queue_arr
    cdef Py_ssize_t head, tail, p, px, py, qx, qy, k, x, y
    cdef int32_t current = 0
    cdef int ndir = 8 if connectivity == 8 else 4
    cdef int dx[8]
    cdef int dy[8]
    dx[:] = [1, -1, 0, 0, 1, 1, -1, -1]
    dy[:] = [0, 0, 1, -1, 1, -1, 1, -1]
    areas = [0]

    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0 or labels[y, x] != 0:
                continue
            current += 1
            labels[y, x] = current
            head = 0
            tail = 1
            queue[0] = y * w + x
            while head < tail:
                p = queue[head]
                head += 1
                py = p // w
                px = p - py * w
                for k in range(ndir):
                    qx = px + dx[k]
                    qy = py + dy[k]
                    if qx < 0 or qy < 0 or qx >= w or qy >= h:
                        continue
                    if mask[qy, qx] != 0 and labels[qy, qx] == 0:
                        labels[qy, qx] = current
                        queue[tail] = qy * w + qx
                        tail += 1
            areas.append(tail)
    return labels_arr, np.asarray(areas, dtype=np.int64)


def fill_holes(const uint8_t[:, ::1] mask):
    """Foreground plus every background pixel not 4-reachable from the border."""
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    seen_arr = np.zeros((h, w), dtype=np.uint8)
    cdef uint8_t[:, ::1] seen = seen_arr
    queue_arr = np.empty(h * w, dtype=np.intp)
    cdef Py_ssize_t[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0, p, px, py, qx, qy, k, x, y
    cdef int dx[4]
    cdef int dy[4]
    dx[:] = [1, -1, 0, 0]
    dy[:] = [0, 0, 1, -1]

    for y in range(h):
        for x in range(w):
            if (y == 0 or x == 0 or y == h - 1 or x == w - 1) and mask[y, x] == 0:
                seen[y, x] = 1
                queue[tail] = y * w + x
                tail += 1
    while head < tail:
        p = queue[head]
        head += 1
        py = p // w
        px = p - py * w
        for k in range(4):
            qx = px + dx[k]
            qy = py + dy[k]
            if qx < 0 or qy < 0 or qx >= w or qy >= h:
                continue
            if mask[qy, qx] == 0 and seen[qy, qx] == 0:
                seen[qy, qx] = 1
                queue[tail] = qy * w + qx
                tail += 1
    return seen_arr == 0
