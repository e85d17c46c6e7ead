"""Linear-logistic reference segmenter and lesion classifier.

Both models minimize the mean cross-entropy by gradient descent. Training
runs on standardized features and folds the standardization back into the
returned weights, so stored weights always apply to raw feature vectors.
The last feature of every vector is a constant bias term.
"""

import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage
from scipy.special import expit
from skimage.filters import threshold_otsu

from pseudomask.entropy import extract_contours, local_entropy_filter
from pseudomask.errors import DegenerateDataError, InvalidInputError, ParseError
from pseudomask.geometry import mask_hull, rasterize_polygon
from pseudomask.imaging import (
    as_image,
    as_mask,
    bounding_rect,
    check_same_shape,
    connected_components,
    fill_holes,
)

PIXEL_FEATURES = ("intensity", "local_mean", "local_std", "local_entropy", "norm_x", "norm_y", "bias")
LESION_FEATURES = ("area_fraction", "mean_intensity", "std_intensity", "irregularity",
                   "solidity", "aspect_ratio", "bias")
DEFAULT_FEATURE_RADIUS = 3
PROB_EPS = 1e-7
MAX_STD = 127.5  # largest possible standard deviation of values in [0, 255]
DELINEATE_SIGMA = 0.7  # best shape-feature class separation on held-out synthetic seeds

MAGIC = b"STSG"
FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_pixels: int = 256
    steps_per_epoch: int = 50
    samples_per_image: int = 400
    early_stop_patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        # 0 epochs is allowed: a warm start then returns its init unchanged
        if self.epochs < 0:
            raise InvalidInputError("epochs must be non-negative")
        if self.batch_pixels < 2 or self.batch_pixels % 2:
            raise InvalidInputError("batch_pixels must be a positive even number")
        if self.steps_per_epoch < 1 or self.samples_per_image < 1 or self.early_stop_patience < 1:
            raise InvalidInputError("steps_per_epoch, samples_per_image and early_stop_patience must be >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass
class LinearModelParams:
    weights: np.ndarray
    trained_epochs: int = 0
    seed: int = 0
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if not np.all(np.isfinite(self.weights)):
            raise InvalidInputError("model weights must be finite")

    def to_bytes(self):
        n = len(self.weights)
        return struct.pack(f"<4sHH{n}dQI", MAGIC, FORMAT_VERSION, n, *self.weights.tolist(),
                           self.seed, self.trained_epochs)

    @classmethod
    def from_bytes(cls, data):
        if len(data) < 8 or data[:4] != MAGIC:
            raise ParseError("bad magic bytes in model file", field="magic")
        version, n = struct.unpack_from("<HH", data, 4)
        if version != FORMAT_VERSION:
            raise ParseError(f"unsupported model format version {version}", field="version")
        expected = 8 + 8 * n + 12
        if len(data) != expected:
            raise ParseError(f"model file is {len(data)} bytes, expected {expected}", field="length")
        weights = struct.unpack_from(f"<{n}d", data, 8)
        seed, epochs = struct.unpack_from("<QI", data, 8 + 8 * n)
        return cls(np.array(weights), trained_epochs=epochs, seed=seed)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# -- loss ---------------------------------------------------------------------

def cross_entropy_loss(predicted, target):
    """Mean categorical cross-entropy (natural log) over items.

    ``predicted`` holds per-item class probabilities, shape ``(N, Z)``; a 1-D
    array is read as the positive-class probability of a binary problem.
    ``target`` holds one-hot indicators of the same shape (or 0/1 labels).
    """
    p = np.asarray(predicted, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if p.shape != y.shape:
        raise InvalidInputError(f"predictions {p.shape} and targets {y.shape} differ in shape")
    if p.size == 0:
        raise InvalidInputError("cross-entropy of an empty batch")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    if p.ndim == 1:
        p = np.stack([1.0 - p, p], axis=1)
        y = np.stack([1.0 - y, y], axis=1)
    return float(-np.sum(y * np.log(p)) / p.shape[0])


def _residual(z, y):
    # sigma(z) - y written so that flipping labels and negating z negates it exactly
    return np.where(y > 0.5, -expit(-z), expit(z))


def logistic_loss_grad(w, X, y):
    """Cross-entropy of ``sigmoid(X @ w)`` against 0/1 ``y`` and its gradient in ``w``."""
    z = X @ w
    loss = cross_entropy_loss(expit(z), y)
    grad = X.T @ _residual(z, y) / len(y)
    return loss, grad


# -- standardization ----------------------------------------------------------

def _standardizer(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    const = sd <= 1e-12
    mu[const] = 0.0
    sd[const] = 1.0
    return mu, sd


def _to_standard(w, mu, sd):
    v = w * sd
    v[-1] = w[-1] + float(np.dot(w[:-1], mu[:-1]))
    return v


def _from_standard(v, mu, sd):
    w = v / sd
    w[-1] = v[-1] - float(np.dot(v[:-1] / sd[:-1], mu[:-1]))
    return w


# -- pixel features -------------------------------------------------------------

def _window_sums(values, radius):
    """Clipped-window sums of an integer array plus the per-pixel window size."""
    h, w = values.shape
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    sat[1:, 1:] = values.astype(np.int64).cumsum(0).cumsum(1)
    ys = np.arange(h)
    xs = np.arange(w)
    y0, y1 = np.maximum(ys - radius, 0), np.minimum(ys + radius, h - 1) + 1
    x0, x1 = np.maximum(xs - radius, 0), np.minimum(xs + radius, w - 1) + 1
    sums = sat[y1][:, x1] - sat[y0][:, x1] - sat[y1][:, x0] + sat[y0][:, x0]
    n = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums, n


def _norm_coord(idx, size):
    return idx / (size - 1) if size > 1 else np.zeros_like(idx, dtype=np.float64)


def pixel_feature_maps(img, em=None, radius=DEFAULT_FEATURE_RADIUS):
    """Feature vectors for every pixel, shape ``(H, W, 7)``."""
    img = as_image(img)
    if em is None:
        em = local_entropy_filter(img, radius)
    em = np.asarray(em, dtype=np.float64)
    check_same_shape(img, em, "entropy map")
    h, w = img.shape
    s1, n = _window_sums(img, radius)
    s2, _ = _window_sums(img.astype(np.int64) ** 2, radius)
    mean = s1 / n
    # exact integer numerator keeps the variance free of cancellation error
    var = (n * s2 - s1 * s1) / (n * n).astype(np.float64)
    feats = np.empty((h, w, len(PIXEL_FEATURES)))
    feats[..., 0] = img / 255.0
    feats[..., 1] = mean / 255.0
    feats[..., 2] = np.sqrt(np.maximum(var, 0.0)) / MAX_STD
    feats[..., 3] = em / 8.0
    feats[..., 4] = _norm_coord(np.arange(w), w)[None, :]
    feats[..., 5] = _norm_coord(np.arange(h), h)[:, None]
    feats[..., 6] = 1.0
    return feats


def pixel_features(img, em, x, y, radius=DEFAULT_FEATURE_RADIUS):
    """Feature vector of one pixel, computed directly from its clipped window."""
    img = as_image(img)
    em = np.asarray(em, dtype=np.float64)
    check_same_shape(img, em, "entropy map")
    h, w = img.shape
    if not (0 <= x < w and 0 <= y < h):
        raise InvalidInputError(f"pixel ({x}, {y}) outside a {w}x{h} image")
    win = img[max(y - radius, 0):y + radius + 1, max(x - radius, 0):x + radius + 1].astype(np.float64)
    return np.array([
        img[y, x] / 255.0,
        win.mean() / 255.0,
        win.std() / MAX_STD,
        em[y, x] / 8.0,
        x / (w - 1) if w > 1 else 0.0,
        y / (h - 1) if h > 1 else 0.0,
        1.0,
    ])


# -- segmenter ------------------------------------------------------------------

def _sample_pixels(pairs, cfg, rng):
    fg_rows, bg_rows = [], []
    k = cfg.samples_per_image
    for feats, mask in pairs:
        flat = feats.reshape(-1, feats.shape[-1])
        m = mask.ravel()
        for rows, idx in ((fg_rows, np.flatnonzero(m)), (bg_rows, np.flatnonzero(~m))):
            if idx.size > k:
                idx = np.sort(rng.choice(idx, size=k, replace=False))
            if idx.size:
                rows.append(flat[idx])
    if not fg_rows:
        raise DegenerateDataError("every training mask is blank")
    if not bg_rows:
        raise DegenerateDataError("every training mask is completely foreground")
    return np.concatenate(fg_rows), np.concatenate(bg_rows)


def _split_holdout(rows, rng, fraction=0.1):
    order = rng.permutation(len(rows))
    n_hold = int(round(fraction * len(rows)))
    if len(rows) - n_hold < 1:
        n_hold = 0
    return rows[order[n_hold:]], rows[order[:n_hold]]


def balanced_batches(fg, bg, cfg, rng):
    """Yield ``steps_per_epoch`` batches, each half foreground and half background.

    Each batch is ``(X, y)`` with foreground rows first.
    """
    half = cfg.batch_pixels // 2
    y = np.concatenate([np.ones(half), np.zeros(half)])
    for _ in range(cfg.steps_per_epoch):
        X = np.concatenate([fg[rng.integers(0, len(fg), half)], bg[rng.integers(0, len(bg), half)]])
        yield X, y


def _balanced_loss(v, fg, bg):
    lf = cross_entropy_loss(expit(fg @ v), np.ones(len(fg)))
    lb = cross_entropy_loss(expit(bg @ v), np.zeros(len(bg)))
    return 0.5 * (lf + lb)


def _check_init(init, n):
    if init is not None and len(init.weights) != n:
        raise InvalidInputError(f"init has {len(init.weights)} weights, expected {n}")


def train_segmenter_on_features(pairs, cfg, init=None):
    """Train on ``(feature_map, mask)`` pairs; see :func:`train_segmenter`."""
    if not pairs:
        raise InvalidInputError("segmenter training set is empty")
    n_feat = len(PIXEL_FEATURES)
    _check_init(init, n_feat)
    if init is not None and cfg.epochs == 0:
        return LinearModelParams(init.weights.copy(), init.trained_epochs, init.seed)
    rng = np.random.default_rng(cfg.seed)
    fg, bg = _sample_pixels(pairs, cfg, rng)
    fg, fg_hold = _split_holdout(fg, rng)
    bg, bg_hold = _split_holdout(bg, rng)
    mu, sd = _standardizer(np.concatenate([fg, bg]))
    fg, bg = (fg - mu) / sd, (bg - mu) / sd
    have_hold = len(fg_hold) > 0 and len(bg_hold) > 0
    if have_hold:
        fg_hold, bg_hold = (fg_hold - mu) / sd, (bg_hold - mu) / sd

    v = np.zeros(n_feat) if init is None else _to_standard(init.weights.copy(), mu, sd)
    best_v, best_loss, stale, ran = v.copy(), math.inf, 0, 0
    history = []
    for _ in range(cfg.epochs):
        for X, y in balanced_batches(fg, bg, cfg, rng):
            _, grad = logistic_loss_grad(v, X, y)
            v -= cfg.learning_rate * grad
        ran += 1
        loss = _balanced_loss(v, fg_hold, bg_hold) if have_hold else _balanced_loss(v, fg, bg)
        history.append(loss)
        if loss < best_loss - 1e-12:
            best_v, best_loss, stale = v.copy(), loss, 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    base = 0 if init is None else init.trained_epochs
    return LinearModelParams(_from_standard(best_v, mu, sd), base + ran, cfg.seed, history)


def train_segmenter(labeled, cfg, init=None, radius=DEFAULT_FEATURE_RADIUS):
    """Fit the pixel model on ``(image, mask)`` pairs.

    Mini-batch gradient descent over balanced foreground/background pixel
    samples; ``init`` warm-starts from earlier weights. Stops early when the
    loss on a held-out 10% of sampled pixels stalls for
    ``cfg.early_stop_patience`` epochs, keeping the best weights seen.
    """
    if not labeled:
        raise InvalidInputError("segmenter training set is empty")
    pairs = []
    for img, mask in labeled:
        img, mask = as_image(img), as_mask(mask)
        check_same_shape(img, mask)
        pairs.append((pixel_feature_maps(img, radius=radius), mask))
    return train_segmenter_on_features(pairs, cfg, init)


def predict_probability(params, feats):
    w = params.weights
    if len(w) != feats.shape[-1]:
        raise InvalidInputError(f"model has {len(w)} weights for {feats.shape[-1]} features")
    return expit(feats @ w)


def predict_mask(params, img, em=None, threshold=0.5, radius=DEFAULT_FEATURE_RADIUS):
    """``(mask, probability_map)``; a pixel is foreground when its probability >= threshold."""
    prob = predict_probability(params, pixel_feature_maps(img, em, radius))
    return prob >= threshold, prob


# -- lesion features and classifier ---------------------------------------------

_STEP_LEN = {(dx, dy): math.hypot(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)}


def contour_length(mask):
    """Summed closed-loop length of every 8-connected component's traced outer boundary."""
    total = 0.0
    for poly in extract_contours(mask):
        if len(poly) < 2:
            continue
        steps = np.diff(np.vstack([poly, poly[:1]]), axis=0).astype(int)
        total += sum(_STEP_LEN[(dx, dy)] for dx, dy in steps.tolist())
    return total


def lesion_features(crop_img, mask_in_crop):
    """Shape and intensity descriptors of the lesion inside a classification crop.

    A blank mask means the whole crop is the lesion.
    """
    crop_img = as_image(crop_img)
    mask = as_mask(mask_in_crop)
    check_same_shape(crop_img, mask)
    if not mask.any():
        mask = np.ones_like(mask)
    area = int(np.count_nonzero(mask))
    vals = crop_img[mask].astype(np.float64)
    perimeter = contour_length(mask)
    hull = mask_hull(mask)
    hull_area = int(np.count_nonzero(rasterize_polygon(hull, mask.shape[1], mask.shape[0])))
    rect = bounding_rect(mask)
    return np.array([
        area / mask.size,
        vals.mean() / 255.0,
        vals.std() / MAX_STD,
        perimeter ** 2 / (4.0 * math.pi * area),
        area / max(hull_area, area),
        max(rect.w, rect.h) / min(rect.w, rect.h),
        1.0,
    ])


def delineate_lesion(crop_img, sigma=DELINEATE_SIGMA):
    """Dark-region outline inside a crop: smooth, split at the Otsu level, keep the
    largest dark component with its holes filled. Flat crops give a blank mask."""
    crop_img = as_image(crop_img)
    smooth = np.rint(ndimage.gaussian_filter(crop_img.astype(np.float64), sigma)).astype(np.uint8)
    if smooth.min() == smooth.max():
        return np.zeros(crop_img.shape, dtype=bool)
    dark = smooth <= threshold_otsu(smooth)
    cc = connected_components(dark, connectivity=8)
    if cc.count == 0:
        return dark
    biggest = int(np.argmax(cc.areas[1:])) + 1
    return fill_holes(cc.labels == biggest)


def crop_features(crop_img):
    """Lesion features of a classification crop, outlined by :func:`delineate_lesion`."""
    return lesion_features(crop_img, delineate_lesion(crop_img))


def train_classifier(samples, cfg):
    """Full-batch gradient descent from zero weights on ``(features, label)`` pairs."""
    if not samples:
        raise InvalidInputError("classifier training set is empty")
    X = np.array([np.asarray(f, dtype=np.float64) for f, _ in samples])
    y = np.array([1.0 if lab else 0.0 for _, lab in samples])
    if y.min() == y.max():
        raise DegenerateDataError("classifier training needs both classes")
    mu, sd = _standardizer(X)
    Z = (X - mu) / sd
    v = np.zeros(X.shape[1])
    history = []
    for _ in range(cfg.epochs):
        loss, grad = logistic_loss_grad(v, Z, y)
        history.append(loss)
        v -= cfg.learning_rate * grad
    return LinearModelParams(_from_standard(v, mu, sd), cfg.epochs, cfg.seed, history)


def predict_class(params, fv):
    """Malignancy score in [0, 1]; malignant when the score is >= 0.5."""
    fv = np.asarray(fv, dtype=np.float64)
    if fv.shape[-1] != len(params.weights):
        raise InvalidInputError(f"model has {len(params.weights)} weights for {fv.shape[-1]} features")
    return expit(fv @ params.weights)
