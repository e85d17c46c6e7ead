"""Backend selection for the hot pixel kernels.

The compiled extension is used when importable; otherwise the numpy
fallback takes over. Set ``PSEUDOMASK_BACKEND=python`` to force the
fallback (benchmarks and parity tests do this per call instead).
"""

import math
import os
from functools import lru_cache

import numpy as np

from pseudomask import _pykernels

ENTROPY_SCALE_BITS = 32
_INV_SCALE = 2.0 ** -ENTROPY_SCALE_BITS

try:
    from pseudomask import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and os.environ.get("PSEUDOMASK_BACKEND", "").lower() != "python":
    _impl = _ckernels
    BACKEND = "cython"
else:
    _impl = _pykernels
    BACKEND = "python"

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def _pick(backend):
    if backend is None:
        return _impl
    try:
        return BACKENDS[backend]
    except KeyError:
        raise ValueError(f"backend {backend!r} unavailable; have {sorted(BACKENDS)}") from None


@lru_cache(maxsize=8)
def entropy_tables(max_count):
    """Fixed-point ``c*log2(c)`` table and float ``log2(n)`` table up to ``max_count``."""
    clogc = np.zeros(max_count + 2, dtype=np.int64)
    log2n = np.zeros(max_count + 2, dtype=np.float64)
    for c in range(2, max_count + 2):
        clogc[c] = round(c * math.log2(c) * 2.0 ** ENTROPY_SCALE_BITS)
    for c in range(1, max_count + 2):
        log2n[c] = math.log2(c)
    clogc.setflags(write=False)
    log2n.setflags(write=False)
    return clogc, log2n


def local_entropy(img, radius, backend=None):
    impl = _pick(backend)
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape
    side_h = min(2 * radius + 1, h)
    side_w = min(2 * radius + 1, w)
    clogc, log2n = entropy_tables(side_h * side_w)
    return impl.local_entropy(img, int(radius), clogc, log2n, _INV_SCALE)


def label(mask, connectivity=8, backend=None):
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    impl = _pick(backend)
    return impl.label(np.ascontiguousarray(mask, dtype=np.uint8), connectivity)


def fill_holes(mask, backend=None):
    impl = _pick(backend)
    return impl.fill_holes(np.ascontiguousarray(mask, dtype=np.uint8))
