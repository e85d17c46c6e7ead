"""Iterative teacher-student pseudo-mask generation for unannotated lesion images."""

from pseudomask.entropy import crop_exam_area, global_entropy, local_entropy_filter, shannon_entropy
from pseudomask.errors import (
    DegenerateDataError,
    InvalidInputError,
    InvariantViolation,
    ParseError,
    PseudomaskError,
)
from pseudomask.geometry import convex_hull, rasterize_polygon, scale_polygon
from pseudomask.kernels import BACKEND
from pseudomask.masks import PostprocessConfig, classification_crop, filter_confident, postprocess_mask
from pseudomask.models import LinearModelParams, TrainConfig, predict_mask, train_segmenter
from pseudomask.selftrain import (
    SelfTrainConfig,
    TerminationConfig,
    evaluate_holdout,
    run_self_training,
)
from pseudomask.synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DegenerateDataError",
    "InvalidInputError",
    "InvariantViolation",
    "LinearModelParams",
    "ParseError",
    "PostprocessConfig",
    "PseudomaskError",
    "SelfTrainConfig",
    "SynthConfig",
    "TerminationConfig",
    "TrainConfig",
    "classification_crop",
    "convex_hull",
    "crop_exam_area",
    "evaluate_holdout",
    "filter_confident",
    "generate_synthetic",
    "global_entropy",
    "local_entropy_filter",
    "postprocess_mask",
    "predict_mask",
    "rasterize_polygon",
    "run_self_training",
    "scale_polygon",
    "shannon_entropy",
    "train_segmenter",
]
