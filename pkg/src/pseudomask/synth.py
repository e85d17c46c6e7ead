"""Synthetic ultrasound-like images with known lesion masks.

Each image has a black surround, a brighter speckled exam rectangle and one
darker elliptical lesion. Malignant lesions carry radial spikes; the target
domain adds a global intensity offset and, optionally, text-like clutter in
the surround. Every sample draws from its own seeded stream, and all random
quantities are drawn whatever the label, so ``malignant_irregularity = 0``
makes the two classes geometrically indistinguishable.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from pseudomask.dataset import write_labels, write_rects
from pseudomask.errors import InvalidInputError
from pseudomask.imaging import Rect
from pseudomask.pgm import save_image_pgm, save_mask_pgm

DOMAINS = ("source", "target")
BACKGROUND = 6
CLUTTER_LEVELS = (190, 225, 255)


@dataclass
class SynthConfig:
    count: int = 200
    image_size: int = 96
    lesion_radius_range: tuple = (6.0, 13.0)
    malignant_irregularity: float = 0.5
    intensity_shift: int = 0
    clutter: bool = False
    seed: int = 0
    malignant_fraction: float = 1.0 / 3.0
    noise_std: float = 14.0
    exam_margin_range: tuple = (6, 16)
    exam_intensity_range: tuple = (115.0, 145.0)
    lesion_intensity_range: tuple = (30.0, 75.0)
    spike_count_range: tuple = (5, 8)
    # width in px of the intensity ramp across the lesion margin; 0 gives hard edges
    edge_softness: float = 2.0

    def __post_init__(self):
        self.lesion_radius_range = tuple(self.lesion_radius_range)
        self.exam_margin_range = tuple(self.exam_margin_range)
        self.exam_intensity_range = tuple(self.exam_intensity_range)
        self.lesion_intensity_range = tuple(self.lesion_intensity_range)
        self.spike_count_range = tuple(self.spike_count_range)
        if self.count < 1:
            raise InvalidInputError("count must be >= 1")
        rmin, rmax = self.lesion_radius_range
        if not 0 < rmin <= rmax:
            raise InvalidInputError(f"bad lesion_radius_range {self.lesion_radius_range}")
        if self.edge_softness < 0:
            raise InvalidInputError("edge_softness must be >= 0")
        if self.malignant_irregularity < 0:
            raise InvalidInputError("malignant_irregularity must be >= 0")
        mmin, mmax = self.exam_margin_range
        if not 0 <= mmin <= mmax:
            raise InvalidInputError(f"bad exam_margin_range {self.exam_margin_range}")
        smallest_exam = self.image_size - 2 * mmax
        reach = rmax * (1.0 + self.malignant_irregularity)
        if 2 * reach + 4 > smallest_exam:
            raise InvalidInputError(
                f"lesions up to {reach:.1f} px in radius do not fit a {smallest_exam} px exam area")
        top = max(self.exam_intensity_range[1], self.lesion_intensity_range[1])
        if not -255 < self.intensity_shift < 255 or top + self.intensity_shift < 0:
            raise InvalidInputError(f"intensity_shift {self.intensity_shift} leaves no usable range")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SynthSample:
    id: str
    image: np.ndarray
    mask: np.ndarray
    label: str
    exam_rect: Rect
    meta: dict = field(default_factory=dict)


def _lesion_profile(shape, cx, cy, r, aspect, angle, spikes, phase, amp):
    """Signed margin distance in px (positive inside the lesion)."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    c, s = np.cos(angle), np.sin(angle)
    u = (dx * c + dy * s) / r
    v = (-dx * s + dy * c) / (r * aspect)
    rho = np.hypot(u, v)
    phi = np.arctan2(v, u)
    # narrow spikes: a high power of a raised cosine
    bump = (0.5 + 0.5 * np.cos(spikes * (phi - phase))) ** 6
    return (1.0 + amp * bump - rho) * r * aspect


def _draw_clutter(img, exam, rng_vals, gap=3):
    """Glyph-like bars in the surround, kept ``gap`` px clear of the exam area."""
    h, w = img.shape
    regions = [
        (0, exam.y - gap, 0, w),                 # top band
        (exam.y1 + gap, h, 0, w),                # bottom band
        (0, h, 0, exam.x - gap),                 # left band
        (0, h, exam.x1 + gap, w),                # right band
    ]
    k = 0
    for y0, y1, x0, x1 in regions:
        if y1 - y0 < 4 or x1 - x0 < 4:
            continue
        # a row of 2-3 px glyphs with 1-2 px spacing
        gy = y0 + (y1 - y0) // 2 - 1
        x = x0 + 1
        while x + 3 < x1:
            gw = 2 + int(rng_vals[k % len(rng_vals)] * 2)
            level = CLUTTER_LEVELS[int(rng_vals[(k + 1) % len(rng_vals)] * 3) % 3]
            img[gy:min(gy + 3, y1), x:min(x + gw, x1)] = level
            x += gw + 1 + int(rng_vals[(k + 2) % len(rng_vals)] * 2)
            k += 3


def render_sample(cfg, domain, index):
    """Render one sample; deterministic in ``(cfg.seed, domain, index)``."""
    if domain not in DOMAINS:
        raise InvalidInputError(f"domain must be source or target, got {domain!r}")
    rng = np.random.default_rng([cfg.seed, DOMAINS.index(domain), index])
    n = cfg.image_size
    malignant = rng.random() < cfg.malignant_fraction
    m0, m1 = cfg.exam_margin_range
    left, right, top, bottom = (int(v) for v in rng.integers(m0, m1 + 1, size=4))
    exam = Rect(left, top, n - left - right, n - top - bottom)
    exam_level = rng.uniform(*cfg.exam_intensity_range)
    lesion_level = rng.uniform(*cfg.lesion_intensity_range)
    r = rng.uniform(*cfg.lesion_radius_range)
    aspect = rng.uniform(0.65, 1.0)
    angle = rng.uniform(0.0, np.pi)
    spikes = int(rng.integers(cfg.spike_count_range[0], cfg.spike_count_range[1] + 1))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    reach = r * (1.0 + cfg.malignant_irregularity) + 2.0
    cx = rng.uniform(exam.x + reach, exam.x1 - 1 - reach)
    cy = rng.uniform(exam.y + reach, exam.y1 - 1 - reach)
    noise = rng.normal(0.0, cfg.noise_std, size=(n, n))
    clutter_vals = rng.random(64)

    amp = cfg.malignant_irregularity if malignant else 0.0
    depth = _lesion_profile((n, n), cx, cy, r, aspect, angle, spikes, phase, amp)
    exam_mask = np.zeros((n, n), dtype=bool)
    exam_mask[exam.y:exam.y1, exam.x:exam.x1] = True
    lesion = (depth >= 0) & exam_mask
    if cfg.edge_softness > 0:
        weight = 0.5 * (1.0 + np.tanh(depth / cfg.edge_softness))
    else:
        weight = lesion.astype(np.float64)

    img = np.full((n, n), float(BACKGROUND))
    tissue = exam_level + (lesion_level - exam_level) * weight + noise
    img[exam_mask] = tissue[exam_mask]
    if domain == "target":
        img += cfg.intensity_shift
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    if domain == "target" and cfg.clutter:
        _draw_clutter(img, exam, clutter_vals)
    return SynthSample(
        id=f"{domain}_{index:05d}",
        image=img,
        mask=lesion,
        label="malignant" if malignant else "benign",
        exam_rect=exam,
        meta={"radius": r, "lesion_level": lesion_level, "exam_level": exam_level},
    )


def generate_synthetic(cfg, domain):
    return [render_sample(cfg, domain, i) for i in range(cfg.count)]


def write_dataset(samples, root, domain):
    """Materialize samples; source masks go to ``masks/``, target masks to ``truth/``."""
    root = Path(root)
    mask_dir = root / ("masks" if domain == "source" else "truth")
    (root / "images").mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)
    for s in samples:
        save_image_pgm(s.image, root / "images" / f"{s.id}.pgm")
        save_mask_pgm(s.mask, mask_dir / f"{s.id}.pgm")
    write_labels({s.id: s.label for s in samples}, root / "labels.csv")
    write_rects({s.id: s.exam_rect for s in samples}, root / "exam_rects.csv")
    return root
