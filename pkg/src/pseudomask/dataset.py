"""On-disk dataset layout.

A dataset root holds::

    images/<id>.pgm      every sample
    masks/<id>.pgm       reference masks (required for kind "source")
    labels.csv           header ``id,label``, label benign|malignant
                         (required for kind "target")
    truth/<id>.pgm       hidden ground truth, diagnostics only
    exam_rects.csv       generator's true exam rectangles (synthetic data)
    crop_rects.csv       rectangles applied by ``preprocess``
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

from pseudomask.errors import InvalidInputError
from pseudomask.imaging import Rect
from pseudomask.pgm import load_image_pgm, load_mask_pgm

LABELS = ("benign", "malignant")
KINDS = ("source", "target")


@dataclass
class ManifestEntry:
    id: str
    image_path: Path
    mask_path: Path | None = None
    label: str | None = None
    truth_path: Path | None = None


@dataclass
class DatasetManifest:
    root: Path
    kind: str
    entries: list = field(default_factory=list)

    def validate(self):
        """Raise ``InvalidInputError`` naming the first inconsistent entry."""
        if self.kind not in KINDS:
            raise InvalidInputError(f"dataset kind must be source or target, got {self.kind!r}")
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise InvalidInputError(f"duplicate sample id {e.id!r}")
            seen.add(e.id)
            if not e.image_path.is_file():
                raise InvalidInputError(f"sample {e.id}: missing image {e.image_path}")
            if self.kind == "source":
                if e.mask_path is None or not e.mask_path.is_file():
                    raise InvalidInputError(f"sample {e.id}: source entry has no mask")
            else:
                if e.label is None:
                    raise InvalidInputError(f"sample {e.id}: target entry has no label")
            if e.label is not None and e.label not in LABELS:
                raise InvalidInputError(f"sample {e.id}: unknown label {e.label!r}")
        return self


def read_labels(path):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise InvalidInputError(f"{path}: expected header 'id,label'")
        return {row["id"]: row["label"].strip() for row in reader}


def write_labels(labels, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"])
        for sid in sorted(labels):
            w.writerow([sid, labels[sid]])


def read_rects(path):
    with open(path, newline="") as fh:
        return {r["id"]: Rect(int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"]))
                for r in csv.DictReader(fh)}


def write_rects(rects, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "w", "h"])
        for sid in sorted(rects):
            r = rects[sid]
            w.writerow([sid, r.x, r.y, r.w, r.h])


def scan_dataset(root, kind):
    """Build and validate the manifest for ``root``."""
    root = Path(root)
    img_dir = root / "images"
    if not img_dir.is_dir():
        raise InvalidInputError(f"{root}: no images/ directory")
    labels_path = root / "labels.csv"
    labels = read_labels(labels_path) if labels_path.is_file() else {}
    entries = []
    for p in sorted(img_dir.glob("*.pgm")):
        sid = p.stem
        mask = root / "masks" / f"{sid}.pgm"
        truth = root / "truth" / f"{sid}.pgm"
        entries.append(ManifestEntry(
            id=sid,
            image_path=p,
            mask_path=mask if mask.is_file() else None,
            label=labels.get(sid),
            truth_path=truth if truth.is_file() else None,
        ))
    if not entries:
        raise InvalidInputError(f"{root}: images/ holds no .pgm files")
    return DatasetManifest(root, kind, entries).validate()


def load_samples(manifest, with_truth=False):
    """Read a manifest into :class:`~pseudomask.selftrain.Sample` objects.

    Returns ``(samples, truth)`` where ``truth`` maps ids to hidden masks when
    requested and available.
    """
    from pseudomask.selftrain import Sample

    samples, truth = [], {}
    for e in manifest.entries:
        img = load_image_pgm(e.image_path)
        ref = load_mask_pgm(e.mask_path) if manifest.kind == "source" else None
        if ref is not None and ref.shape != img.shape:
            raise InvalidInputError(f"sample {e.id}: mask shape {ref.shape} != image shape {img.shape}")
        samples.append(Sample(id=e.id, image=img, reference_mask=ref, class_label=e.label,
                              origin=manifest.kind))
        if with_truth and e.truth_path is not None:
            truth[e.id] = load_mask_pgm(e.truth_path)
    return samples, truth
