"""Teacher-student self-training loop for pseudo-mask generation.

A teacher segmenter trained on the source domain predicts masks for the
target domain. The masks are post-processed, used to crop images for a
downstream benign/malignant classifier, and the confident ones join the
source pairs to fine-tune a student, which then becomes the next teacher.
Validation classification performance drives termination; the artifacts of
the best iteration are returned.
"""

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from pseudomask.errors import InvalidInputError, InvariantViolation
from pseudomask.imaging import check_same_shape, is_blank
from pseudomask.masks import (
    PostprocessConfig,
    classification_crop,
    filter_confident,
    postprocess_mask,
    update_pseudo_mask,
)
from pseudomask.metrics import iou, summarize
from pseudomask.models import (
    DEFAULT_FEATURE_RADIUS,
    TrainConfig,
    crop_features,
    pixel_feature_maps,
    predict_class,
    predict_probability,
    train_classifier,
    train_segmenter_on_features,
)

log = logging.getLogger(__name__)

VARIANTS = {
    "vanilla": dict(enable_fill=False, enable_hull=False, enable_blank_guard=False, use_area=False),
    "big": dict(enable_fill=False, enable_hull=False, enable_blank_guard=False),
    "big_convex": dict(enable_fill=False, enable_hull=True, enable_blank_guard=False),
    "big_convex_fill": dict(enable_fill=True, enable_hull=True, enable_blank_guard=False),
    "big_convex_fill_noblank": dict(enable_fill=True, enable_hull=True, enable_blank_guard=True),
    "alternating": dict(enable_fill=True, enable_hull=True, enable_blank_guard=True),
}
METRICS = ("precision", "accuracy", "auc")
REPORT_COLUMNS = (
    "iteration", "accuracy", "precision", "recall", "auc", "empty_pseudo_mask_count",
    "accepted_for_training", "masks_preserved_by_guard", "mean_iou_vs_reference",
    "wall_time_seconds",
)


@dataclass
class Sample:
    id: str
    image: np.ndarray
    reference_mask: np.ndarray | None = None
    class_label: str | None = None
    pseudo_mask: np.ndarray | None = None
    origin: str = "target"

    @property
    def malignant(self):
        return self.class_label == "malignant"


# Enlarging hulls is meant for undersized masks. Without a cap, full-size masks
# grow 2.25x per round and the student drifts into the surrounding tissue.
LOOP_SHRINK = {"shrink_above_fraction": 0.03, "shrink_scale": 0.9}


@dataclass
class TerminationConfig:
    patience: int = 2
    min_delta: float = 0.005
    metric: str = "precision"

    def __post_init__(self):
        if self.patience < 1:
            raise InvalidInputError("termination patience must be >= 1")
        if self.metric not in METRICS:
            raise InvalidInputError(f"termination metric must be one of {METRICS}")


def _default_classifier_cfg():
    return TrainConfig(learning_rate=0.5, epochs=300)


@dataclass
class SelfTrainConfig:
    max_iterations: int = 6
    postprocess: PostprocessConfig = field(default_factory=lambda: PostprocessConfig(**LOOP_SHRINK))
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune_epochs: int = 10
    classifier: TrainConfig = field(default_factory=_default_classifier_cfg)
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    variant: str | None = "big_convex_fill_noblank"
    seed: int = 0
    test_fraction: float = 0.10
    validation_fraction: float = 0.15
    feature_radius: int = DEFAULT_FEATURE_RADIUS
    mask_threshold: float = 0.5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if self.variant is not None and self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if self.test_fraction < 0 or self.validation_fraction < 0 \
                or self.test_fraction + self.validation_fraction >= 1:
            raise InvalidInputError("test and validation fractions must be >= 0 and sum to < 1")

    def resolved_postprocess(self):
        """Post-processing config with the variant's toggles applied."""
        if self.variant is None:
            return self.postprocess
        toggles = dict(VARIANTS[self.variant])
        use_area = toggles.pop("use_area", True)
        pp = replace(self.postprocess, filter_require_single_component=False, **toggles)
        if not use_area:
            pp = replace(pp, filter_min_area_fraction=0.0)
        return pp

    def require_single_component(self, iteration):
        """Filtering rule used after ``iteration`` (alternating: connected on even iterations)."""
        if self.variant == "alternating":
            return iteration % 2 == 0
        return self.resolved_postprocess().filter_require_single_component

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        sub = {
            "postprocess": PostprocessConfig,
            "train": TrainConfig,
            "classifier": TrainConfig,
            "termination": TerminationConfig,
        }
        for key, typ in sub.items():
            if key in d and isinstance(d[key], dict):
                d[key] = typ(**d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class IterationReport:
    iteration: int
    accuracy: float
    precision: float
    recall: float
    auc: float
    empty_pseudo_mask_count: int
    accepted_for_training: int
    masks_preserved_by_guard: int
    mean_iou_vs_reference: float | None
    wall_time_seconds: float
    degenerate: list = field(default_factory=list)

    def metric(self, name):
        return getattr(self, name)


@dataclass
class SelfTrainResult:
    segmenter: object
    classifier: object
    pseudo_masks: dict
    reports: list
    best_iteration: int
    split: dict
    iteration_masks: list
    iteration_segmenters: list
    iteration_classifiers: list
    stopped_early: bool = False


# -- splitting -------------------------------------------------------------------

def _largest_remainder(total, weights):
    raw = np.asarray(weights, dtype=np.float64) / sum(weights) * total
    base = np.floor(raw).astype(int)
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:total - base.sum()]] += 1
    return base


def split_target(samples, test_fraction=0.10, validation_fraction=0.15, seed=0):
    """Stratified ``(train, validation, test)`` partition, deterministic in ``seed``."""
    if test_fraction < 0 or validation_fraction < 0 or test_fraction + validation_fraction >= 1:
        raise InvalidInputError("test and validation fractions must be >= 0 and sum to < 1")
    by_class = {}
    for s in sorted(samples, key=lambda s: s.id):
        if s.class_label is None:
            raise InvalidInputError(f"target sample {s.id} has no class label")
        by_class.setdefault(s.class_label, []).append(s)
    if len(by_class) < 2:
        raise InvalidInputError("target set needs both classes to stratify")
    n = len(samples)
    classes = sorted(by_class)
    sizes = [len(by_class[c]) for c in classes]
    n_test = int(round(test_fraction * n))
    n_val = int(round(validation_fraction * n))
    test_q = _largest_remainder(n_test, sizes)
    val_q = _largest_remainder(n_val, sizes)
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for c, size, nt, nv in zip(classes, sizes, test_q, val_q):
        members = by_class[c]
        order = rng.permutation(size)
        picked = [members[i] for i in order]
        test += picked[:nt]
        val += picked[nt:nt + nv]
        train += picked[nt + nv:]
    for name, part in (("train", train), ("validation", val), ("test", test)):
        if (test_fraction > 0 or name != "test") and (validation_fraction > 0 or name != "validation"):
            if len({s.class_label for s in part}) < 2:
                raise InvalidInputError(f"too few samples to stratify: {name} split lacks a class")
    key = lambda s: s.id  # noqa: E731
    return sorted(train, key=key), sorted(val, key=key), sorted(test, key=key)


# -- helpers ---------------------------------------------------------------------

def _validate_inputs(source, target):
    if not source:
        raise InvalidInputError("source set is empty")
    if not target:
        raise InvalidInputError("target set is empty")
    for s in source:
        if s.reference_mask is None:
            raise InvalidInputError(f"source sample {s.id} has no reference mask")
        check_same_shape(s.image, s.reference_mask)
    for s in target:
        if s.class_label is None:
            raise InvalidInputError(f"target sample {s.id} has no class label")


def _classification_features(samples, masks):
    return np.array([crop_features(classification_crop(s.image, masks[s.id])) for s in samples])


def predict_postprocessed(segmenter, feats, pp, threshold):
    raw = predict_probability(segmenter, feats) >= threshold
    return postprocess_mask(raw, pp)


def run_self_training(source, target, cfg, truth=None, progress=None):
    """Run the loop; ``truth`` optionally maps target ids to hidden masks for IoU diagnostics.

    Test-partition samples are only split off here, never read.
    """
    _validate_inputs(source, target)
    pp = cfg.resolved_postprocess()
    train, val, test = split_target(target, cfg.test_fraction, cfg.validation_fraction, cfg.seed)
    active = train + val
    radius = cfg.feature_radius

    feats = {s.id: pixel_feature_maps(s.image, radius=radius) for s in source}
    feats.update({s.id: pixel_feature_maps(s.image, radius=radius) for s in active})
    source_pairs = [(feats[s.id], s.reference_mask) for s in source]
    source_before = [s.reference_mask.copy() for s in source]

    teacher_cfg = replace(cfg.train, seed=cfg.seed)
    teacher = train_segmenter_on_features(source_pairs, teacher_cfg)

    y_train = np.array([s.malignant for s in train])
    y_val = np.array([s.malignant for s in val])
    masks = {s.id: None for s in active}
    reports, it_masks, it_segs, it_clfs = [], [], [], []
    best_metric, stale, stopped_early = None, 0, False
    metric_name = cfg.termination.metric

    for t in range(1, cfg.max_iterations + 1):
        t0 = time.perf_counter()
        preserved = 0
        for s in active:
            fresh = predict_postprocessed(teacher, feats[s.id], pp, cfg.mask_threshold)
            updated = update_pseudo_mask(masks[s.id], fresh, pp.enable_blank_guard)
            if updated is not fresh:
                preserved += 1
            masks[s.id] = updated
        empty = sum(is_blank(masks[s.id]) for s in active)

        clf = train_classifier(list(zip(_classification_features(train, masks), y_train)),
                               replace(cfg.classifier, seed=cfg.seed))
        val_scores = predict_class(clf, _classification_features(val, masks))
        summary = summarize(val_scores >= 0.5, y_val, val_scores)
        degenerate = [k for k in ("accuracy", "precision", "recall", "auc") if summary[k].degenerate]

        mean_iou = None
        if truth:
            scored = [iou(masks[s.id], truth[s.id]).value for s in active if s.id in truth]
            mean_iou = float(np.mean(scored)) if scored else None

        stop = t == cfg.max_iterations
        if t >= 2:
            value = summary[metric_name].value
            if best_metric is None or value > best_metric + cfg.termination.min_delta:
                best_metric, stale = value, 0
            else:
                stale += 1
                if stale >= cfg.termination.patience and not stop:
                    stop, stopped_early = True, True

        accepted = []
        if not stop:
            single = cfg.require_single_component(t)
            accepted = [s for s in train if filter_confident(masks[s.id], pp, single)]

        report = IterationReport(
            iteration=t,
            accuracy=summary["accuracy"].value,
            precision=summary["precision"].value,
            recall=summary["recall"].value,
            auc=summary["auc"].value,
            empty_pseudo_mask_count=int(empty),
            accepted_for_training=len(accepted),
            masks_preserved_by_guard=preserved,
            mean_iou_vs_reference=mean_iou,
            wall_time_seconds=0.0,
            degenerate=degenerate,
        )
        it_masks.append({k: v.copy() for k, v in masks.items()})
        it_segs.append(teacher)
        it_clfs.append(clf)

        if not stop:
            pool = source_pairs + [(feats[s.id], masks[s.id]) for s in accepted]
            student_cfg = replace(cfg.train, epochs=cfg.finetune_epochs, seed=cfg.seed + t)
            teacher = train_segmenter_on_features(pool, student_cfg, init=teacher)
        report.wall_time_seconds = time.perf_counter() - t0
        reports.append(report)
        log.info("iteration %d: precision=%.4f empty=%d accepted=%d", t, report.precision,
                 report.empty_pseudo_mask_count, report.accepted_for_training)
        if progress is not None:
            progress(report)
        if stop:
            break

    if pp.enable_blank_guard:
        counts = [r.empty_pseudo_mask_count for r in reports]
        if any(b > a for a, b in zip(counts, counts[1:])):
            raise InvariantViolation(f"empty pseudo-mask count increased under the guard: {counts}")
    if any(not np.array_equal(a, s.reference_mask) for a, s in zip(source_before, source)):
        raise InvariantViolation("a source reference mask was modified")

    best = select_best_iteration(reports, metric_name)
    split = {"train": [s.id for s in train], "validation": [s.id for s in val],
             "test": [s.id for s in test]}
    return SelfTrainResult(
        segmenter=it_segs[best - 1],
        classifier=it_clfs[best - 1],
        pseudo_masks=it_masks[best - 1],
        reports=reports,
        best_iteration=best,
        split=split,
        iteration_masks=it_masks,
        iteration_segmenters=it_segs,
        iteration_classifiers=it_clfs,
        stopped_early=stopped_early,
    )


def select_best_iteration(reports, metric="precision"):
    """Iteration with the highest validation metric, earliest on ties.

    Iteration 1 only competes when it is the sole iteration, since its
    classification is exempt from the stopping decision.
    """
    candidates = [r for r in reports if r.iteration >= 2] or reports
    best = max(candidates, key=lambda r: (r.metric(metric), -r.iteration))
    return best.iteration


@dataclass
class HoldoutReport:
    counts: object
    accuracy: float
    precision: float
    recall: float
    auc: float
    n_samples: int
    degenerate: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["counts"] = asdict(self.counts)
        return d


def evaluate_holdout(segmenter, classifier, test, cfg, validation_ids=()):
    """Single pass of mask prediction, cropping and classification on the test split."""
    if not test:
        raise InvalidInputError("test partition is empty")
    warnings = []
    overlap = sorted({s.id for s in test} & set(validation_ids))
    if overlap:
        warnings.append(f"test partition overlaps validation ({len(overlap)} ids, e.g. {overlap[0]})")
    pp = cfg.resolved_postprocess()
    masks = {}
    for s in test:
        feats = pixel_feature_maps(s.image, radius=cfg.feature_radius)
        masks[s.id] = predict_postprocessed(segmenter, feats, pp, cfg.mask_threshold)
    y = np.array([s.malignant for s in test])
    scores = predict_class(classifier, _classification_features(test, masks))
    summary = summarize(scores >= 0.5, y, scores)
    degenerate = [k for k in ("accuracy", "precision", "recall", "auc") if summary[k].degenerate]
    return HoldoutReport(
        counts=summary["counts"],
        accuracy=summary["accuracy"].value,
        precision=summary["precision"].value,
        recall=summary["recall"].value,
        auc=summary["auc"].value,
        n_samples=len(test),
        degenerate=degenerate,
        warnings=warnings,
    )


# -- serialization ---------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def reports_to_csv(reports, record_wall_time=False):
    """Fixed-column CSV; wall time is blank unless requested so reruns stay byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        row = asdict(r)
        if not record_wall_time:
            row["wall_time_seconds"] = None
        w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def reports_from_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        def num(key, cast=float):
            return cast(row[key]) if row[key] != "" else None
        out.append(IterationReport(
            iteration=num("iteration", int),
            accuracy=num("accuracy"),
            precision=num("precision"),
            recall=num("recall"),
            auc=num("auc"),
            empty_pseudo_mask_count=num("empty_pseudo_mask_count", int),
            accepted_for_training=num("accepted_for_training", int),
            masks_preserved_by_guard=num("masks_preserved_by_guard", int),
            mean_iou_vs_reference=num("mean_iou_vs_reference"),
            wall_time_seconds=num("wall_time_seconds") or 0.0,
        ))
    return out
