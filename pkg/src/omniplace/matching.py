"""Weighted multimodal similarity between query and template images.

The learned weight matrix is reduced to one scalar per feature block
(``||W^q_k||_F``) and one per sensor (``||W^q||_F``). A pair of images is scored
by

    s = (1 / Z) * sum_q sum_k  wbar_q * wtilde_qk * s_qk,
    s_qk = exp(-||x_q - x_t|| / sqrt(d_qk)),

with ``Z = sum_q sum_k wbar_q * wtilde_qk`` so that identical images score
exactly 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateModelError, ShapeError, ValidationError
from .geo import GroundTruth
from .model import FeatureMatrix, ModalityLayout, WeightMatrix, group_norms


@dataclass(frozen=True)
class ModalityWeights:
    layout: ModalityLayout
    feature_w: np.ndarray
    sensor_w: np.ndarray

    def __post_init__(self):
        fw = np.array(self.feature_w, dtype=float)
        sw = np.array(self.sensor_w, dtype=float)
        if fw.shape != (self.layout.n_feature_blocks,) or sw.shape != (self.layout.n_sensors,):
            raise ShapeError("modality weights do not match the layout")
        if np.any(fw < 0) or np.any(sw < 0):
            raise ValidationError("modality weights must be non-negative")
        for name, arr in (("feature_w", fw), ("sensor_w", sw)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def combined(self) -> np.ndarray:
        """``wbar_q * wtilde_qk`` for every feature block, in layout order."""
        return self.sensor_w[self.layout.sensor_of_block()] * self.feature_w

    @property
    def normalizer(self) -> float:
        z = 0.0
        for c in self.combined:
            z += float(c)
        return z

    @classmethod
    def equal(cls, layout: ModalityLayout) -> "ModalityWeights":
        """Every block weighted the same: plain concatenation baseline."""
        return cls(layout, np.ones(layout.n_feature_blocks), np.ones(layout.n_sensors))


def extract_weights(W: WeightMatrix) -> ModalityWeights:
    """Block Frobenius norms of a solved weight matrix."""
    fw = group_norms(W.values, W.layout.feature_slices())
    sw = group_norms(W.values, W.layout.sensor_slices())
    weights = ModalityWeights(W.layout, fw, sw)
    if not weights.normalizer > 0:
        raise DegenerateModelError("weight matrix is zero; no modality carries weight")
    return weights


def pairwise_similarity(query_block: np.ndarray, template_block: np.ndarray) -> float:
    """``exp(-||x_q - x_t|| / sqrt(d))`` for one descriptor block."""
    q = np.asarray(query_block, dtype=float).ravel()
    t = np.asarray(template_block, dtype=float).ravel()
    if q.shape != t.shape or q.size == 0:
        raise ShapeError("blocks must be non-empty and of equal length")
    return float(np.exp(-np.sqrt(np.sum((q - t) ** 2)) / np.sqrt(q.size)))


def score_matrix(
    queries: np.ndarray, templates: np.ndarray, layout: ModalityLayout, weights: ModalityWeights
) -> np.ndarray:
    """Scores of every query column against every template column."""
    if weights.layout != layout:
        raise ShapeError("weights were learned for a different layout")
    if queries.shape[0] != layout.total_dim or templates.shape[0] != layout.total_dim:
        raise ShapeError("feature columns do not match the layout")
    z = weights.normalizer
    if not z > 0:
        raise DegenerateModelError("modality weights sum to zero")
    acc = np.zeros((queries.shape[1], templates.shape[1]))
    for c, rows in zip(weights.combined, layout.feature_slices()):
        if c == 0:
            continue
        d = rows.stop - rows.start
        dist = cdist(queries[rows].T, templates[rows].T)
        acc += c * np.exp(-dist / np.sqrt(d))
    return np.clip(acc / z, 0.0, 1.0)


def score(query: np.ndarray, template: np.ndarray, weights: ModalityWeights) -> float:
    """Score of a single pair of feature columns."""
    q = np.asarray(query, dtype=float).reshape(-1, 1)
    t = np.asarray(template, dtype=float).reshape(-1, 1)
    if q.shape != t.shape:
        raise ShapeError("query and template columns differ in length")
    return float(score_matrix(q, t, weights.layout, weights)[0, 0])


@dataclass(frozen=True)
class MatchReport:
    query_ids: tuple[str, ...]
    template_ids: tuple[str, ...]
    scores: np.ndarray
    baseline_scores: np.ndarray
    threshold: float
    ground_truth: GroundTruth | None = None

    @property
    def decisions(self) -> np.ndarray:
        return self.scores >= self.threshold

    @property
    def order(self) -> np.ndarray:
        """Template indices per query, best first; ties go to the lower index."""
        return np.argsort(-self.scores, axis=1, kind="stable")

    def ranked(self, query: int) -> list[tuple[str, float]]:
        return [(self.template_ids[j], float(self.scores[query, j])) for j in self.order[query]]


def match(
    queries: FeatureMatrix,
    templates: FeatureMatrix,
    weights: ModalityWeights,
    threshold: float,
    ground_truth: GroundTruth | None = None,
) -> MatchReport:
    """Score all query/template pairs with learned and with equal weights."""
    if templates.n_images == 0:
        raise ValidationError("template set is empty")
    if queries.layout != templates.layout:
        raise ShapeError("query and template layouts differ")
    if ground_truth is not None and ground_truth.same_place.shape != (
        queries.n_images, templates.n_images
    ):
        raise ShapeError("ground truth shape does not match queries x templates")
    layout = queries.layout
    scores = score_matrix(queries.values, templates.values, layout, weights)
    baseline = score_matrix(queries.values, templates.values, layout, ModalityWeights.equal(layout))
    return MatchReport(
        queries.image_ids, templates.image_ids, scores, baseline, float(threshold), ground_truth
    )


def write_score_csv(path, query_ids, template_ids, scores: np.ndarray) -> None:
    """Score matrix with query ids as row labels and template ids as columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["query_id", *template_ids])
        for qid, row in zip(query_ids, scores):
            writer.writerow([qid, *(repr(float(v)) for v in row)])


def read_score_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "query_id":
            raise ValidationError(f"{path}: first column header must be 'query_id'")
        qids, rows = [], []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields")
            qids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: unparsable score") from None
    return qids, header[1:], np.array(rows, dtype=float).reshape(len(qids), len(header) - 1)
