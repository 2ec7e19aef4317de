"""Command-line interface.

Exit codes: 0 success, 2 validation, 3 ingestion, 4 solver, 5 input/output,
6 model file.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import modelfile
from .config import PipelineConfig, load_config
from .dataset import FrameRange, ingest_run, load_manifest
from .errors import (
    DegenerateModelError,
    IngestionError,
    ModelFileError,
    OmniplaceError,
    OutputError,
    SolverError,
    ValidationError,
)
from .evaluation import emit_plots
from .features import read_external
from .pipeline import (
    RunSelection,
    load_outcome,
    match_runs,
    model_modality_report,
    summary_text,
    train,
    write_outcome,
)
from .synth import DEFAULT_SCENARIOS, NOISE_PROFILES, synth

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INGESTION = 3
EXIT_SOLVER = 4
EXIT_IO = 5
EXIT_MODEL = 6

log = logging.getLogger("omniplace")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ModelFileError):
        return EXIT_MODEL
    if isinstance(exc, (SolverError, DegenerateModelError)):
        return EXIT_SOLVER
    if isinstance(exc, IngestionError):
        return EXIT_INGESTION
    if isinstance(exc, (OutputError, OSError)):
        return EXIT_IO
    return EXIT_VALIDATION


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--out", type=Path, help="output file or directory")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--lambda1", type=float, help="feature-level group penalty")
    p.add_argument("--lambda2", type=float, help="sensor-level group penalty")
    p.add_argument("--radius-m", type=float, help="ground-truth match radius in metres")
    p.add_argument("--frames", type=FrameRange.parse, help="frame range a..b (0-based, inclusive)")
    p.add_argument("--threshold", type=float, help="score threshold for accepting a match")
    p.add_argument("--workers", type=int, default=1, help="feature extraction threads")
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    for flag, key in (("lambda1", "lambda1"), ("lambda2", "lambda2"), ("radius_m", "radius_m"),
                      ("threshold", "threshold"), ("seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    return cfg.with_overrides(overrides)


def _selection(manifest, spec: str, default_frames):
    """``RUN`` or ``RUN:a..b``."""
    name, sep, frames = spec.partition(":")
    return RunSelection(manifest, name, FrameRange.parse(frames) if sep else default_frames)


def _externals(paths):
    return [read_external(p) for p in paths or ()]


def _require_out(args) -> Path:
    if args.out is None:
        raise ValidationError(f"{args.command} needs --out")
    return args.out


def cmd_synth(args) -> int:
    out = _require_out(args)
    scenarios = tuple(s for s in args.scenarios.split(",") if s)
    manifest = synth(out, seed=args.seed or 0, n_places=args.n_places, scenarios=scenarios,
                     noise_profile=args.noise_profile, direction_flip=args.direction_flip,
                     height=args.height, width=args.width)
    print(f"wrote {len(manifest.runs)} runs to {out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = _config(args)
    names = args.run or [r.name for r in manifest.runs]
    for name in names:
        run = manifest.run(name)
        if args.check:
            ing = ingest_run(manifest, name, args.frames, cfg.descriptor.target_w, cfg.descriptor.target_h)
            print(f"{name}: {len(ing.pairs)} frame pairs, {ing.dropped} dropped outside GPS span")
        else:
            print(f"{name}: {run.route} {run.scenario} {run.direction}")
    return EXIT_OK


def cmd_train(args) -> int:
    out = _require_out(args)
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    specs = args.run or [r.name for r in manifest.runs]
    selections = [_selection(manifest, s, args.frames) for s in specs]
    model = train(selections, cfg, _externals(args.external), args.workers)
    modelfile.save(out, model)
    state = "converged" if model.converged else "not converged"
    print(f"trained on {len(model.scenario_names)} scenarios ({state}, {model.iterations} iterations)")
    for k, v in enumerate(model.objective_trace):
        log.info("iteration %d objective %r", k, v)
    return EXIT_OK


def cmd_match(args) -> int:
    out = _require_out(args)
    model = modelfile.load(args.model)
    manifest = load_manifest(args.manifest)
    qmanifest = load_manifest(args.query_manifest) if args.query_manifest else manifest
    templates = _selection(manifest, args.templates, args.template_frames)
    queries = _selection(qmanifest, args.queries, args.frames)
    outcome = match_runs(model, templates, queries, args.threshold, args.radius_m,
                         _externals(args.external), args.workers)
    write_outcome(outcome, out, model.config)
    sys.stdout.write(summary_text(outcome, outcome.report.ground_truth.radius_m))
    return EXIT_OK


def cmd_eval(args) -> int:
    out = _require_out(args)
    cfg = _config(args)
    outcome = load_outcome(args.results, cfg.radius_m, cfg.threshold)
    emit_plots([outcome.weighted, outcome.baseline], None, out)
    sys.stdout.write(summary_text(outcome, cfg.radius_m))
    return EXIT_OK


def cmd_report(args) -> int:
    model = modelfile.load(args.model)
    report = model_modality_report(model)
    for share in report:
        print(f"{share.name:8s} {share.percent:8.3f}%")
    if args.out is not None:
        emit_plots([], report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omniplace", description="Multimodal place recognition.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _shared(p)
    p.add_argument("--n-places", type=int, default=20)
    p.add_argument("--scenarios", default=",".join(DEFAULT_SCENARIOS),
                   help="comma-separated <season>_<time_of_day> names")
    p.add_argument("--noise-profile", choices=NOISE_PROFILES, default=NOISE_PROFILES[0])
    p.add_argument("--direction-flip", action="store_true", help="also emit backward runs")
    p.add_argument("--height", type=int, default=240, help="generated frame height")
    p.add_argument("--width", type=int, default=1504, help="generated frame width")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate and summarize a dataset")
    _shared(p)
    p.add_argument("manifest", type=Path)
    p.add_argument("--check", action="store_true", help="decode, pair and geo-check every frame")
    p.add_argument("--run", action="append", help="run name (repeatable; default all)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="learn modality weights and save a model file")
    _shared(p)
    p.add_argument("manifest", type=Path)
    p.add_argument("--run", action="append", help="RUN or RUN:a..b (repeatable; default all runs)")
    p.add_argument("--external", action="append", type=Path, help="external feature file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("match", help="score queries against templates and evaluate")
    _shared(p)
    p.add_argument("manifest", type=Path, help="manifest holding the template run")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--templates", required=True, help="template RUN or RUN:a..b")
    p.add_argument("--queries", required=True, help="query RUN or RUN:a..b")
    p.add_argument("--query-manifest", type=Path, help="manifest holding the query run")
    p.add_argument("--template-frames", type=FrameRange.parse, help="template frame range a..b")
    p.add_argument("--external", action="append", type=Path, help="external feature file")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="recompute PR curves from saved match results")
    _shared(p)
    p.add_argument("results", type=Path, help="directory written by match")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="print modality importance of a model")
    _shared(p)
    p.add_argument("--model", type=Path, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OmniplaceError, OSError) as exc:
        print(f"omniplace {args.command}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
