"""In-memory synthetic experiment fixtures (source + shifted target, exam-cropped)."""

from dataclasses import replace

from pseudomask.entropy import crop_exam_area
from pseudomask.imaging import crop
from pseudomask.selftrain import Sample
from pseudomask.synth import SynthConfig, generate_synthetic

# 96 px synthetic frames need a smaller window than full-size scans
SYNTH_CROP_RADIUS = 4
SYNTH_CROP_THRESHOLD = 0.5


def cropped_samples(synth, domain, radius=SYNTH_CROP_RADIUS, t=SYNTH_CROP_THRESHOLD):
    """Exam-cropped :class:`Sample` list and hidden truth masks cropped alike."""
    samples, truth = [], {}
    for s in generate_synthetic(synth, domain):
        img, rect = crop_exam_area(s.image, radius, t)
        mask = crop(s.mask, rect)
        if domain == "source":
            samples.append(Sample(s.id, img, reference_mask=mask, class_label=s.label, origin="source"))
        else:
            samples.append(Sample(s.id, img, class_label=s.label, origin="target"))
            truth[s.id] = mask
    return samples, truth


def shifted_experiment(seed=42, target_count=200, source_count=100, intensity_shift=40,
                       clutter=True, **synth_overrides):
    """Source set, target set and target truth for one domain-shift experiment."""
    base = SynthConfig(count=source_count, seed=seed, **synth_overrides)
    source, _ = cropped_samples(base, "source")
    target_cfg = replace(base, count=target_count, intensity_shift=intensity_shift, clutter=clutter)
    target, truth = cropped_samples(target_cfg, "target")
    return source, target, truth
