"""Precision-recall analysis and modality-importance summaries."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateModelError, OutputError, ShapeError, ValidationError
from .geo import GroundTruth
from .matching import ModalityWeights

DEFAULT_THRESHOLDS = np.linspace(0.0, 1.0, 201)
CURVE_HEADER = ["threshold", "precision", "recall", "tp", "fp", "fn"]


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class PrCurve:
    points: tuple[PrPoint, ...]
    auc: float
    label: str = "curve"

    @property
    def precision(self) -> np.ndarray:
        return np.array([p.precision for p in self.points])

    @property
    def recall(self) -> np.ndarray:
        return np.array([p.recall for p in self.points])


def _gt_matrix(gt) -> np.ndarray:
    return np.asarray(gt.same_place if isinstance(gt, GroundTruth) else gt, dtype=bool)


def pr_curve(
    scores: np.ndarray,
    gt: GroundTruth | np.ndarray,
    thresholds: Sequence[float] | None = None,
    label: str = "curve",
) -> PrCurve:
    """Sweep thresholds over all pairs; a pair is predicted positive when ``score >= t``.

    Precision with no predicted positives is taken as 1. The area is the
    trapezoid rule over (recall, precision) walked from the highest threshold
    down, starting from recall 0 at the first point's precision.
    """
    scores = np.asarray(scores, dtype=float)
    truth = _gt_matrix(gt)
    if scores.shape != truth.shape:
        raise ShapeError(f"scores {scores.shape} and ground truth {truth.shape} differ in shape")
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, dtype=float)
    if thresholds.ndim != 1 or thresholds.size == 0:
        raise ValidationError("need at least one threshold")
    if np.any(np.diff(thresholds) < 0):
        raise ValidationError("thresholds must be sorted ascending")
    n_pos = int(truth.sum())
    if n_pos == 0:
        raise ValidationError("ground truth has no positive pairs")

    s = scores.ravel()
    t = truth.ravel()
    pos_scores = np.sort(s[t])
    neg_scores = np.sort(s[~t])
    # count of scores >= threshold
    tp = pos_scores.size - np.searchsorted(pos_scores, thresholds, side="left")
    fp = neg_scores.size - np.searchsorted(neg_scores, thresholds, side="left")
    points = []
    for thr, a, b in zip(thresholds, tp, fp):
        a, b = int(a), int(b)
        precision = a / (a + b) if a + b else 1.0
        points.append(PrPoint(float(thr), precision, a / n_pos, a, b, n_pos - a))
    return PrCurve(tuple(points), _auc(points), label)


def _auc(points: Sequence[PrPoint]) -> float:
    walk = sorted(points, key=lambda p: -p.threshold)
    recall = [0.0] + [p.recall for p in walk]
    precision = [walk[0].precision] + [p.precision for p in walk]
    area = 0.0
    for i in range(1, len(recall)):
        area += (recall[i] - recall[i - 1]) * (precision[i] + precision[i - 1]) / 2.0
    return area


def top1_recall(scores: np.ndarray, gt: GroundTruth | np.ndarray) -> float:
    """Fraction of queries with any true match whose best-scored template is one.

    Ties go to the lower template index.
    """
    scores = np.asarray(scores, dtype=float)
    truth = _gt_matrix(gt)
    if scores.shape != truth.shape:
        raise ShapeError("scores and ground truth differ in shape")
    has_match = truth.any(axis=1)
    if not has_match.any():
        raise ValidationError("no query has a true match")
    best = np.argmax(scores, axis=1)
    hits = truth[np.arange(len(best)), best]
    return float(hits[has_match].mean())


@dataclass(frozen=True)
class ModalityShare:
    name: str
    percent: float


def modality_label(sensor_index: int, sensor_name: str, feature_name: str) -> str:
    """``HOG`` for the first (intensity) sensor, ``HOG-D`` for disparity."""
    label = feature_name.upper()
    if sensor_index > 0:
        label += "-" + sensor_name[:1].upper()
    return label


def modality_report(weights: ModalityWeights) -> list[ModalityShare]:
    """Each block's ``wbar_q * wtilde_qk`` as a percentage of their sum."""
    z = weights.normalizer
    if not z > 0:
        raise DegenerateModelError("modality weights sum to zero")
    out = []
    for (q, _, sensor, feat, _), c in zip(weights.layout.iter_blocks(), weights.combined):
        out.append(ModalityShare(modality_label(q, sensor.name, feat.name), 100.0 * float(c) / z))
    return out


def sensor_shares(weights: ModalityWeights) -> dict[str, float]:
    """Fraction of the total sensor-level weight ``sum_q wbar_q`` per sensor."""
    total = float(weights.sensor_w.sum())
    if not total > 0:
        raise DegenerateModelError("sensor weights sum to zero")
    return {s.name: float(w) / total for s, w in zip(weights.layout.sensors, weights.sensor_w)}


# --------------------------------------------------------------------------
# output files


def write_curve_csv(path, curve: PrCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for p in curve.points:
            writer.writerow([repr(p.threshold), repr(p.precision), repr(p.recall), p.tp, p.fp, p.fn])


def read_curve_csv(path, label: str = "curve") -> PrCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != CURVE_HEADER:
            raise ValidationError(f"{path}: unexpected curve header")
        points = [PrPoint(float(r[0]), float(r[1]), float(r[2]), int(r[3]), int(r[4]), int(r[5]))
                  for r in reader if r]
    return PrCurve(tuple(points), _auc(points), label)


def write_report_csv(path, report: Sequence[ModalityShare]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["modality", "percent"])
        for share in report:
            writer.writerow([share.name, repr(share.percent)])


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in label)


def emit_plots(curves: Sequence[PrCurve], report: Sequence[ModalityShare] | None, out_dir) -> list[Path]:
    """Write one CSV and one SVG per curve, plus the modality report.

    With two or more curves an overlay figure ``pr_curves.svg`` is added. CSV
    output is byte-identical for identical inputs; SVGs are written with a
    fixed hash salt and no date metadata.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    written: list[Path] = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        with matplotlib.rc_context({"svg.hashsalt": "omniplace", "svg.fonttype": "none"}):
            for curve in curves:
                stem = out_dir / f"pr_{_safe(curve.label)}"
                write_curve_csv(stem.with_suffix(".csv"), curve)
                fig, ax = plt.subplots(figsize=(4.5, 4))
                ax.plot(curve.recall, curve.precision, marker=".", label=f"{curve.label} (AUC {curve.auc:.3f})")
                ax.set_xlabel("Recall")
                ax.set_ylabel("Precision")
                ax.set_xlim(0, 1)
                ax.set_ylim(0, 1.02)
                ax.legend(loc="lower left")
                fig.savefig(stem.with_suffix(".svg"), metadata={"Date": None})
                plt.close(fig)
                written += [stem.with_suffix(".csv"), stem.with_suffix(".svg")]
            if len(curves) > 1:
                fig, ax = plt.subplots(figsize=(4.5, 4))
                for curve in curves:
                    ax.plot(curve.recall, curve.precision, label=f"{curve.label} (AUC {curve.auc:.3f})")
                ax.set_xlabel("Recall")
                ax.set_ylabel("Precision")
                ax.set_xlim(0, 1)
                ax.set_ylim(0, 1.02)
                ax.legend(loc="lower left")
                path = out_dir / "pr_curves.svg"
                fig.savefig(path, metadata={"Date": None})
                plt.close(fig)
                written.append(path)
            if report:
                csv_path = out_dir / "modality_report.csv"
                write_report_csv(csv_path, report)
                fig, ax = plt.subplots(figsize=(5, 3.5))
                ax.bar([r.name for r in report], [r.percent for r in report])
                ax.set_ylabel("Importance (%)")
                ax.tick_params(axis="x", rotation=45)
                fig.tight_layout()
                svg_path = out_dir / "modality_report.svg"
                fig.savefig(svg_path, metadata={"Date": None})
                plt.close(fig)
                written += [csv_path, svg_path]
    except OSError as exc:
        raise OutputError(f"cannot write plots under {out_dir}: {exc}") from exc
    return written
