"""Sequence evaluation and CSV output.

Predictions are PFM files named ``{frame:06d}.pfm``, one per frame of the
manifest that carries ground truth. Every CSV written here starts with a
``#schema=v1`` comment line followed by a header row.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataio.formats import read_pfm
from .metrics import frame_metrics

SCHEMA_LINE = "#schema=v1"
METRIC_KEYS = ("n", "epe", "d1", "d3", "d5", "bad1", "bad3", "bad5")
SUBSETS = ("all", "nonocc", "occ")


class EvaluationError(ValueError):
    """Predictions and ground truth do not line up."""


def prediction_name(index: int) -> str:
    return f"{index:06d}.pfm"


@dataclass
class MetricsReport:
    """Per-frame metric rows plus a pooled aggregate per pixel subset.

    ``rows`` hold ``frame``, ``subset`` and the metric keys. The aggregate
    pools every evaluated pixel of the sequence, so its EPE is the
    pixel-weighted mean of the per-frame values.
    """

    rows: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    bad_mode: str = "mean"

    @property
    def epe(self) -> float:
        return self.aggregate["all"]["epe"]

    @property
    def d1(self) -> float:
        return self.aggregate["all"]["d1"]

    @property
    def n(self) -> int:
        return self.aggregate["all"]["n"]

    def metric(self, key: str, subset: str = "all"):
        return self.aggregate[subset][key]

    def frame_rows(self, subset: str = "all") -> list:
        return [r for r in self.rows if r["subset"] == subset]

    def frame_epe(self, subset: str = "all") -> np.ndarray:
        return np.array([r["epe"] for r in self.frame_rows(subset)])


def _subset_masks(gt, occluded, split: bool) -> dict:
    valid = np.isfinite(gt) & (gt > 0)
    masks = {"all": valid}
    if split and occluded is not None:
        masks["nonocc"] = valid & ~occluded
        masks["occ"] = valid & occluded
    return masks


def evaluate_frames(predictions, manifest, split_occlusion: bool = False,
                    bad_mode: str = "mean") -> MetricsReport:
    """Score in-memory predictions against the manifest's ground truth.

    ``predictions`` maps frame index to an image-resolution disparity array
    (a list is taken as frames ``0..n-1``). Frames without ground truth are
    skipped; a GT frame without a prediction is an error.
    """
    if not isinstance(predictions, dict):
        predictions = dict(enumerate(predictions))
    gt_frames = [i for i, fr in enumerate(manifest.frames) if fr.gt is not None]
    missing = [i for i in gt_frames if i not in predictions]
    if missing:
        raise EvaluationError(f"no prediction for frames {missing}")

    report = MetricsReport(bad_mode=bad_mode)
    pooled = {}
    for i in gt_frames:
        gt = np.asarray(manifest.gt(i), dtype=np.float64)
        pred = np.asarray(getattr(predictions[i], "values", predictions[i]), dtype=np.float64)
        if pred.shape != gt.shape:
            raise EvaluationError(f"frame {i}: prediction is {pred.shape}, ground truth {gt.shape}")
        err = np.abs(pred - gt)
        for subset, mask in _subset_masks(gt, manifest.occluded(i), split_occlusion).items():
            if not mask.any():
                continue
            row = {"frame": i, "subset": subset}
            row.update(frame_metrics(pred, gt, mask, bad_mode))
            report.rows.append(row)
            pooled.setdefault(subset, []).append(err[mask])
    if not pooled:
        raise EvaluationError("manifest has no ground-truth frames")
    for subset, parts in pooled.items():
        errs = np.concatenate(parts)
        report.aggregate[subset] = frame_metrics(errs, np.zeros_like(errs), None, bad_mode)
    return report


def load_predictions(pred_dir, manifest) -> dict:
    """Read ``{i:06d}.pfm`` for every GT frame; mismatched sets raise ``EvaluationError``."""
    pred_dir = Path(pred_dir)
    if not pred_dir.is_dir():
        raise FileNotFoundError(f"prediction directory {pred_dir} does not exist")
    gt_frames = {i for i, fr in enumerate(manifest.frames) if fr.gt is not None}
    found = {}
    for path in sorted(pred_dir.glob("*.pfm")):
        if path.stem.isdigit() and len(path.stem) == 6:
            found[int(path.stem)] = path
    missing = sorted(gt_frames - found.keys())
    extra = sorted(found.keys() - set(range(len(manifest))))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing predictions for frames {missing}")
        if extra:
            parts.append(f"predictions for frames not in the manifest {extra}")
        raise EvaluationError(
            f"{len(found)} predictions for {len(gt_frames)} ground-truth frames: " + "; ".join(parts)
        )
    return {i: read_pfm(found[i]) for i in sorted(gt_frames)}


def eval_sequence(pred_dir, manifest, split_occlusion: bool = False, bad_mode: str = "mean") -> MetricsReport:
    return evaluate_frames(load_predictions(pred_dir, manifest), manifest, split_occlusion, bad_mode)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return "nan"
        return f"{float(value):.6f}"
    return str(value)


def write_csv(path, columns, rows, comments=()) -> Path:
    """``#schema=v1``, optional ``#`` comment lines, header, then one line per row dict."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(SCHEMA_LINE + "\n")
        for c in comments:
            f.write(f"# {c}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    return path


def read_csv(path) -> list:
    """Rows of a CSV written by :func:`write_csv`, as string dicts."""
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_report(path, report: MetricsReport) -> Path:
    cols = ["frame", "subset", *METRIC_KEYS]
    rows = list(report.rows)
    for subset, agg in report.aggregate.items():
        rows.append({"frame": "all", "subset": subset, **agg})
    note = f"bad_p = {'mean error over the worst p% of pixels' if report.bad_mode == 'mean' else 'error at the upper p-th percentile'}"
    return write_csv(path, cols, rows, comments=[note])
