"""Raster types and pixel-level operations.

Images are 2-D ``uint8`` arrays and masks are 2-D ``bool`` arrays, both
indexed ``[row, column]``. Coordinates elsewhere in the package use
``x`` for the column and ``y`` for the row, origin at the top-left.
"""

from dataclasses import dataclass

import numpy as np

from pseudomask import kernels
from pseudomask.errors import InvalidInputError

N_LEVELS = 256


def as_image(arr):
    """Validate and return ``arr`` as a 2-D ``uint8`` image."""
    arr = np.asarray(arr)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.integer) and (arr.min() < 0 or arr.max() > 255):
            raise InvalidInputError("image intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def as_mask(arr):
    """Validate and return ``arr`` as a 2-D boolean mask."""
    arr = np.asarray(arr)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def check_same_shape(a, b, what="mask"):
    if a.shape != b.shape:
        raise InvalidInputError(f"{what} shape {b.shape} does not match {a.shape}")


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise InvalidInputError(f"rect must have positive size, got {self.w}x{self.h}")

    @classmethod
    def full(cls, arr):
        return cls(0, 0, arr.shape[1], arr.shape[0])

    @property
    def x1(self):
        """Exclusive right edge."""
        return self.x + self.w

    @property
    def y1(self):
        """Exclusive bottom edge."""
        return self.y + self.h

    def inside(self, width, height):
        return self.x >= 0 and self.y >= 0 and self.x1 <= width and self.y1 <= height


@dataclass(frozen=True)
class ComponentLabeling:
    """Per-pixel component ids (0 = background) and per-id areas.

    ``areas[k]`` is the pixel count of component ``k``; ``areas[0]`` is 0.
    """

    labels: np.ndarray
    areas: np.ndarray
    connectivity: int

    @property
    def count(self):
        return len(self.areas) - 1


def histogram(img):
    """Counts per intensity level, length 256."""
    img = as_image(img)
    return np.bincount(img.ravel(), minlength=N_LEVELS).astype(np.int64)


def normalize_histogram(hist):
    hist = np.asarray(hist)
    total = hist.sum()
    if total <= 0:
        raise InvalidInputError("cannot normalize an empty histogram")
    return hist / total


def connected_components(mask, connectivity=8):
    mask = as_mask(mask)
    if connectivity not in (4, 8):
        raise InvalidInputError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, areas = kernels.label(mask, connectivity)
    return ComponentLabeling(labels, areas, connectivity)


def fill_holes(mask):
    """Set every background pixel that the border cannot reach (4-connected)."""
    return kernels.fill_holes(as_mask(mask))


def crop(arr, rect):
    """Sub-array covered by ``rect``; works for images and masks alike."""
    arr = np.asarray(arr)
    if not rect.inside(arr.shape[1], arr.shape[0]):
        raise InvalidInputError(f"{rect} lies outside a {arr.shape[1]}x{arr.shape[0]} raster")
    return arr[rect.y:rect.y1, rect.x:rect.x1].copy()


def bounding_rect(mask):
    """Tightest rectangle around the foreground, or ``None`` for a blank mask."""
    mask = as_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return Rect(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def area_fraction(mask):
    mask = as_mask(mask)
    return float(np.count_nonzero(mask)) / mask.size


def is_blank(mask):
    return not np.any(mask)
