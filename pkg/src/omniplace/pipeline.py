"""End-to-end training and matching on ingested runs."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import PipelineConfig
from .dataset import DatasetManifest, FrameRange, IngestedRun, ingest_run
from .errors import ModelFileError, OutputError, ShapeError, ValidationError
from .evaluation import (
    ModalityShare,
    PrCurve,
    emit_plots,
    modality_report,
    pr_curve,
    top1_recall,
)
from .features import ExternalFeatures, extract_all
from .geo import GroundTruth, build_ground_truth
from .matching import MatchReport, extract_weights, match, read_score_csv, write_score_csv
from .model import FeatureMatrix, ScenarioLabels
from .modelfile import ModelFile
from .solver import solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSelection:
    """One run of a manifest, optionally restricted to a frame range."""

    manifest: DatasetManifest
    run: str
    frames: FrameRange | None = None

    def ingest(self, cfg: PipelineConfig) -> IngestedRun:
        d = cfg.descriptor
        return ingest_run(self.manifest, self.run, self.frames, d.target_w, d.target_h)


def _features(runs: Sequence[IngestedRun], cfg, external, normalizer=None, workers=1):
    pairs = [p for r in runs for p in r.pairs]
    return extract_all(pairs, cfg.descriptor, external, normalizer, workers)


def scenario_labels(runs: Sequence[IngestedRun]) -> ScenarioLabels:
    """One column per distinct scenario, in order of first appearance."""
    names: list[str] = []
    assignments = []
    for r in runs:
        if r.run.scenario not in names:
            names.append(r.run.scenario)
        assignments += [names.index(r.run.scenario)] * len(r.pairs)
    if len(names) < 2:
        raise ValidationError(
            f"training needs at least two scenarios, got {names}"
        )
    return ScenarioLabels.from_assignments(assignments, names)


def train(
    selections: Sequence[RunSelection],
    cfg: PipelineConfig = PipelineConfig(),
    external: Sequence[ExternalFeatures] = (),
    workers: int = 1,
) -> ModelFile:
    """Ingest, describe, standardize and solve; returns the model to persist."""
    if not selections:
        raise ValidationError("no training runs given")
    runs = [s.ingest(cfg) for s in selections]
    B = scenario_labels(runs)
    A, normalizer = _features(runs, cfg, external, None, workers)
    result = solve(A, B, cfg.hyper, cfg.solver)
    if not result.converged:
        log.warning("solver stopped after %d iterations without converging", result.iterations)
    return ModelFile(
        cfg,
        B.scenario_names,
        normalizer,
        result.W,
        result.iterations,
        result.converged,
        tuple(float(v) for v in result.objective_trace),
    )


@dataclass(frozen=True)
class MatchOutcome:
    report: MatchReport
    weighted: PrCurve
    baseline: PrCurve
    modality: tuple[ModalityShare, ...]
    top1_weighted: float
    top1_baseline: float


def evaluate(report: MatchReport, modality: Sequence[ModalityShare]) -> MatchOutcome:
    if report.ground_truth is None:
        raise ValidationError("evaluation needs ground truth")
    gt = report.ground_truth
    return MatchOutcome(
        report,
        pr_curve(report.scores, gt, label="weighted"),
        pr_curve(report.baseline_scores, gt, label="baseline"),
        tuple(modality),
        top1_recall(report.scores, gt),
        top1_recall(report.baseline_scores, gt),
    )


def _check_model_layout(model: ModelFile, features: FeatureMatrix) -> None:
    if features.layout != model.layout:
        raise ModelFileError(
            "model layout does not match the extracted features; "
            "was the model trained with a different descriptor config?"
        )


def describe_with_model(
    model: ModelFile, selection: RunSelection, external=(), workers: int = 1
) -> tuple[IngestedRun, FeatureMatrix]:
    run = selection.ingest(model.config)
    try:
        X, _ = _features([run], model.config, external, model.normalizer, workers)
    except ShapeError as exc:
        raise ModelFileError(f"model normalization does not fit the data: {exc}") from None
    _check_model_layout(model, X)
    return run, X


def match_runs(
    model: ModelFile,
    templates: RunSelection,
    queries: RunSelection,
    threshold: float | None = None,
    radius_m: float | None = None,
    external=(),
    workers: int = 1,
) -> MatchOutcome:
    """Score queries against templates with learned and equal weights, then evaluate."""
    cfg = model.config
    threshold = cfg.threshold if threshold is None else threshold
    radius_m = cfg.radius_m if radius_m is None else radius_m
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError("threshold must lie in [0, 1]")
    trun, T = describe_with_model(model, templates, external, workers)
    qrun, Q = describe_with_model(model, queries, external, workers)
    gt = build_ground_truth(qrun.times, trun.times, qrun.track, trun.track, radius_m)
    weights = extract_weights(model.weights)
    report = match(Q, T, weights, threshold, gt)
    return evaluate(report, modality_report(weights))


def model_modality_report(model: ModelFile) -> list[ModalityShare]:
    return modality_report(extract_weights(model.weights))


# --------------------------------------------------------------------------
# persisted results

SCORES = "scores.csv"
BASELINE = "baseline_scores.csv"
DISTANCES = "distances_m.csv"
DECISIONS = "decisions.csv"
SUMMARY = "summary.txt"
CONFIG = "config.txt"


def write_outcome(outcome: MatchOutcome, out_dir, cfg: PipelineConfig) -> list[Path]:
    """Scores, distances, decisions, curves, plots, summary and config under ``out_dir``."""
    out = Path(out_dir)
    r = outcome.report
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_score_csv(out / SCORES, r.query_ids, r.template_ids, r.scores)
        write_score_csv(out / BASELINE, r.query_ids, r.template_ids, r.baseline_scores)
        write_score_csv(out / DISTANCES, r.query_ids, r.template_ids, r.ground_truth.distances_m)
        write_score_csv(out / DECISIONS, r.query_ids, r.template_ids, r.decisions.astype(float))
        (out / CONFIG).write_text(cfg.to_text(), encoding="utf-8")
        (out / SUMMARY).write_text(summary_text(outcome, r.ground_truth.radius_m), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write results to {out}: {exc}") from exc
    written = [out / n for n in (SCORES, BASELINE, DISTANCES, DECISIONS, CONFIG, SUMMARY)]
    written += emit_plots([outcome.weighted, outcome.baseline], outcome.modality or None, out)
    return written


def summary_text(outcome: MatchOutcome, radius_m: float) -> str:
    r = outcome.report
    lines = [
        f"queries {len(r.query_ids)}",
        f"templates {len(r.template_ids)}",
        f"radius_m {radius_m!r}",
        f"threshold {r.threshold!r}",
        f"auc_weighted {outcome.weighted.auc!r}",
        f"auc_baseline {outcome.baseline.auc!r}",
        f"top1_weighted {outcome.top1_weighted!r}",
        f"top1_baseline {outcome.top1_baseline!r}",
        f"accepted_pairs {int(r.decisions.sum())}",
    ]
    return "\n".join(lines) + "\n"


def load_outcome(result_dir, radius_m: float, threshold: float) -> MatchOutcome:
    """Rebuild an evaluation from files written by :func:`write_outcome`."""
    d = Path(result_dir)
    try:
        qids, tids, scores = read_score_csv(d / SCORES)
        qb, tb, baseline = read_score_csv(d / BASELINE)
        qd, td, dist = read_score_csv(d / DISTANCES)
    except OSError as exc:
        raise OutputError(f"cannot read results in {d}: {exc}") from exc
    if not (qids == qb == qd and tids == tb == td):
        raise ValidationError(f"result files in {d} disagree on query/template ids")
    gt = GroundTruth(dist < radius_m, radius_m, dist)
    report = MatchReport(tuple(qids), tuple(tids), scores, baseline, float(threshold), gt)
    return evaluate(report, ())

