"""Command-line surface: preprocess, synth, selftrain, evaluate, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation. Failures also print one JSON object on stderr.
"""

import argparse
import csv
import hashlib
import json
import logging
import shutil
import sys
from pathlib import Path

from pseudomask.dataset import load_samples, scan_dataset, write_rects
from pseudomask.entropy import DEFAULT_RADIUS, DEFAULT_THRESHOLD, crop_exam_area
from pseudomask.errors import InvalidInputError, InvariantViolation, ParseError, PseudomaskError
from pseudomask.imaging import crop
from pseudomask.models import LinearModelParams
from pseudomask.pgm import load_image_pgm, load_mask_pgm, save_image_pgm, save_mask_pgm
from pseudomask.selftrain import (
    SelfTrainConfig,
    evaluate_holdout,
    reports_from_csv,
    reports_to_csv,
    run_self_training,
)
from pseudomask.synth import DOMAINS, SynthConfig, generate_synthetic, write_dataset

log = logging.getLogger("pseudomask")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_json(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: expected a JSON object")
    return data


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- preprocess ------------------------------------------------------------------

def cmd_preprocess(args):
    src, dst = Path(args.inp), Path(args.out)
    images = sorted((src / "images").glob("*.pgm"))
    if not images:
        raise InvalidInputError(f"{src}: images/ holds no .pgm files")
    rects = {}
    for sub in ("images", "masks", "truth"):
        if (src / sub).is_dir():
            (dst / sub).mkdir(parents=True, exist_ok=True)
    for p in images:
        img, rect = crop_exam_area(load_image_pgm(p), args.radius, args.threshold)
        rects[p.stem] = rect
        save_image_pgm(img, dst / "images" / p.name)
        for sub in ("masks", "truth"):
            mp = src / sub / p.name
            if mp.is_file():
                save_mask_pgm(crop(load_mask_pgm(mp), rect), dst / sub / p.name)
    if (src / "labels.csv").is_file():
        shutil.copyfile(src / "labels.csv", dst / "labels.csv")
    write_rects(rects, dst / "crop_rects.csv")
    log.info("cropped %d images into %s", len(images), dst)
    return EXIT_OK


# -- synth -----------------------------------------------------------------------

def cmd_synth(args):
    cfg = SynthConfig.from_dict(_read_json(args.config)) if args.config else SynthConfig()
    out = Path(args.out)
    domains = DOMAINS if args.domain == "both" else (args.domain,)
    for domain in domains:
        write_dataset(generate_synthetic(cfg, domain), out / domain, domain)
    _write_json(cfg.to_dict(), out / "synth_config.json")
    log.info("wrote %d samples per domain to %s", cfg.count, out)
    return EXIT_OK


# -- selftrain -------------------------------------------------------------------

def _load_run_config(path):
    if path is None:
        return SelfTrainConfig()
    try:
        return SelfTrainConfig.from_dict(_read_json(path))
    except TypeError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def cmd_selftrain(args):
    cfg = _load_run_config(args.config)
    source, _ = load_samples(scan_dataset(args.source, "source"))
    target, truth = load_samples(scan_dataset(args.target, "target"), with_truth=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    result = run_self_training(source, target, cfg, truth=truth or None)

    files = []
    for t, masks in enumerate(result.iteration_masks, start=1):
        d = out / "masks" / f"iter_{t:02d}"
        d.mkdir(parents=True, exist_ok=True)
        for sid in sorted(masks):
            save_mask_pgm(masks[sid], d / f"{sid}.pgm")
            files.append(d / f"{sid}.pgm")
    models = out / "models"
    models.mkdir(exist_ok=True)
    for t, (seg, clf) in enumerate(zip(result.iteration_segmenters, result.iteration_classifiers), start=1):
        seg.save(models / f"segmenter_iter_{t:02d}.bin")
        clf.save(models / f"classifier_iter_{t:02d}.bin")
        files += [models / f"segmenter_iter_{t:02d}.bin", models / f"classifier_iter_{t:02d}.bin"]
    best = out / "best"
    best.mkdir(exist_ok=True)
    result.segmenter.save(best / "segmenter.bin")
    result.classifier.save(best / "classifier.bin")
    files += [best / "segmenter.bin", best / "classifier.bin"]

    (out / "reports.csv").write_text(reports_to_csv(result.reports))
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "wall_time_seconds"])
        for r in result.reports:
            w.writerow([r.iteration, f"{r.wall_time_seconds:.3f}"])
    _write_json(cfg.to_dict(), out / "config.json")
    _write_json(result.split, out / "split.json")
    files += [out / "reports.csv", out / "config.json", out / "split.json"]

    manifest = {
        "source": str(Path(args.source).resolve()),
        "target": str(Path(args.target).resolve()),
        "best_iteration": result.best_iteration,
        "iterations": len(result.reports),
        "stopped_early": result.stopped_early,
        "degenerate": {str(r.iteration): r.degenerate for r in result.reports if r.degenerate},
        "checksums": {str(p.relative_to(out)): _sha256(p) for p in files},
    }
    _write_json(manifest, out / "manifest.json")
    best_report = result.reports[result.best_iteration - 1]
    print(json.dumps({"best_iteration": result.best_iteration, "precision": best_report.precision,
                      "iterations": len(result.reports)}, sort_keys=True))
    return EXIT_OK


# -- evaluate --------------------------------------------------------------------

def _open_run(run):
    run = Path(run)
    if not (run / "manifest.json").is_file():
        raise InvalidInputError(f"{run}: not a selftrain run directory (no manifest.json)")
    return run, _read_json(run / "manifest.json")


def cmd_evaluate(args):
    run, manifest = _open_run(args.run)
    cfg = SelfTrainConfig.from_dict(_read_json(run / "config.json"))
    split = _read_json(run / "split.json")
    target, _ = load_samples(scan_dataset(manifest["target"], "target"))
    by_id = {s.id: s for s in target}
    missing = [sid for sid in split["test"] if sid not in by_id]
    if missing:
        raise InvalidInputError(f"test sample {missing[0]} is missing from {manifest['target']}")
    test = [by_id[sid] for sid in split["test"]]
    seg = LinearModelParams.load(run / "best" / "segmenter.bin")
    clf = LinearModelParams.load(run / "best" / "classifier.bin")
    report = evaluate_holdout(seg, clf, test, cfg, validation_ids=split["validation"])
    for w in report.warnings:
        log.warning(w)
    _write_json(report.to_dict(), run / "holdout.json")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


# -- report ----------------------------------------------------------------------

def cmd_report(args):
    run, _ = _open_run(args.run)
    reports = reports_from_csv((run / "reports.csv").read_text())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "accuracy", "precision", "recall", "auc"])
        for r in reports:
            w.writerow([r.iteration] + [f"{v:.6f}" for v in (r.accuracy, r.precision, r.recall, r.auc)])
    empty_path = out.with_name(f"{out.stem}_empty_masks.csv")
    with open(empty_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "empty_pseudo_mask_count"])
        for r in reports:
            w.writerow([r.iteration, r.empty_pseudo_mask_count])
    log.info("wrote %s and %s", out, empty_path)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def build_parser():
    p = _Parser(prog="pseudomask", description="Pseudo-mask self-training for unannotated lesion images.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("preprocess", help="crop every image to its exam area")
    q.add_argument("--in", dest="inp", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--radius", type=int, default=DEFAULT_RADIUS)
    q.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    q.set_defaults(func=cmd_preprocess)

    q = sub.add_parser("synth", help="write a synthetic source/target pair")
    q.add_argument("--config")
    q.add_argument("--out", required=True)
    q.add_argument("--domain", choices=("both",) + DOMAINS, default="both")
    q.set_defaults(func=cmd_synth)

    q = sub.add_parser("selftrain", help="run the teacher-student loop")
    q.add_argument("--source", required=True)
    q.add_argument("--target", required=True)
    q.add_argument("--config")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_selftrain)

    q = sub.add_parser("evaluate", help="score the best model on the test split")
    q.add_argument("--run", required=True)
    q.set_defaults(func=cmd_evaluate)

    q = sub.add_parser("report", help="precision curve and empty-mask counts as CSV")
    q.add_argument("--run", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_report)
    return p


def _fail(code, kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, "exit_code": code, **extra}, sort_keys=True),
          file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        return _fail(EXIT_INVARIANT, "invariant", str(exc))
    except ParseError as exc:
        return _fail(EXIT_DATA, "parse", str(exc), field=exc.field)
    except (PseudomaskError, ValueError, KeyError, OSError) as exc:
        return _fail(EXIT_DATA, "data", str(exc))


if __name__ == "__main__":
    sys.exit(main())
