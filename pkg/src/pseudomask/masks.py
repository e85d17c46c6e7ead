"""Pseudo-mask post-processing, blank-mask guard, confidence filtering and the
classification crop."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from pseudomask.entropy import contour_area, trace_boundary
from pseudomask.errors import InvalidInputError
from pseudomask.geometry import mask_hull, rasterize_polygon, scale_polygon
from pseudomask.imaging import (
    area_fraction,
    as_image,
    as_mask,
    bounding_rect,
    check_same_shape,
    connected_components,
    crop,
    fill_holes,
    is_blank,
)


@dataclass
class PostprocessConfig:
    enable_fill: bool = True
    enable_hull: bool = True
    hull_scale: float = 1.5
    enable_blank_guard: bool = True
    filter_min_area_fraction: float = 0.01
    filter_require_single_component: bool = False
    connectivity: int = 8
    # share of foreground the largest component needs to count as "one component"
    dominant_fraction: float = 0.95
    # optional shrinking of very large masks; None disables it
    shrink_above_fraction: float | None = None
    shrink_scale: float = 0.8

    def __post_init__(self):
        if not self.hull_scale > 0:
            raise InvalidInputError(f"hull_scale must be positive, got {self.hull_scale}")
        if not 0.0 <= self.filter_min_area_fraction <= 1.0:
            raise InvalidInputError("filter_min_area_fraction must lie in [0, 1]")
        if self.connectivity not in (4, 8):
            raise InvalidInputError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if not 0.0 < self.dominant_fraction <= 1.0:
            raise InvalidInputError("dominant_fraction must lie in (0, 1]")
        if not self.shrink_scale > 0:
            raise InvalidInputError("shrink_scale must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FilterDecision:
    accepted: bool
    reason: str

    def __bool__(self):
        return self.accepted


def _component_hulls(mask, connectivity):
    """Hull of each component whose traced outer contour encloses positive area."""
    cc = connected_components(mask, connectivity)
    hulls = []
    for k, sl in enumerate(ndimage.find_objects(cc.labels), start=1):
        if sl is None or cc.areas[k] < 3:
            continue  # fewer than three pixels cannot enclose area
        comp = cc.labels[sl] == k
        padded = np.pad(comp, 1)
        sy, sx = divmod(int(np.argmax(comp)), comp.shape[1])
        contour = trace_boundary(padded, sx + 1, sy + 1)
        if contour_area(np.asarray(contour, dtype=np.float64)) <= 0:
            continue
        hull = mask_hull(comp)
        hull[:, 0] += sl[1].start
        hull[:, 1] += sl[0].start
        hulls.append(hull)
    return hulls


def postprocess_mask(raw, cfg):
    """Hole fill, then OR in the scaled convex hull of every area-enclosing contour."""
    m = as_mask(raw)
    if cfg.enable_fill:
        m = fill_holes(m)
    if not cfg.enable_hull or is_blank(m):
        return m.copy()
    scale = cfg.hull_scale
    if cfg.shrink_above_fraction is not None and area_fraction(m) > cfg.shrink_above_fraction:
        scale = cfg.shrink_scale
    h, w = m.shape
    # enlarging hulls contain their component, so keep the mask; shrinking replaces it
    out = m.copy() if scale >= 1.0 else np.zeros_like(m)
    for hull in _component_hulls(m, cfg.connectivity):
        out |= rasterize_polygon(scale_polygon(hull, scale), w, h)
    return out


def update_pseudo_mask(previous, fresh, guard_enabled):
    """Keep ``previous`` when the guard is on and ``fresh`` came back blank."""
    fresh = as_mask(fresh)
    if previous is None:
        return fresh
    previous = as_mask(previous)
    check_same_shape(previous, fresh)
    if guard_enabled and is_blank(fresh) and not is_blank(previous):
        return previous
    return fresh


def filter_confident(mask, cfg, require_single_component=None):
    """Admission rule for the next training pool.

    ``require_single_component`` overrides the config flag (used by the
    alternating schedule).
    """
    mask = as_mask(mask)
    single = cfg.filter_require_single_component if require_single_component is None \
        else require_single_component
    frac = area_fraction(mask)
    if frac < cfg.filter_min_area_fraction:
        return FilterDecision(False, f"area fraction {frac:.4f} below {cfg.filter_min_area_fraction}")
    if single:
        cc = connected_components(mask, cfg.connectivity)
        total = int(cc.areas.sum())
        if total == 0:
            return FilterDecision(False, "no connected component")
        dominant = int(cc.areas.max()) / total
        if dominant < cfg.dominant_fraction:
            return FilterDecision(False, f"largest component holds {dominant:.3f} of foreground")
    return FilterDecision(True, "accepted")


def classification_crop_pair(img, mask):
    """Image and mask cropped to the mask's bounding rectangle (whole image if blank)."""
    img = as_image(img)
    mask = as_mask(mask)
    check_same_shape(img, mask)
    rect = bounding_rect(mask)
    if rect is None:
        return img.copy(), mask.copy()
    return crop(img, rect), crop(mask, rect)


def classification_crop(img, mask):
    return classification_crop_pair(img, mask)[0]
