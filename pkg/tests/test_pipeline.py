import numpy as np
import pytest

from omniplace import modelfile
from omniplace.config import PipelineConfig
from omniplace.dataset import FrameRange
from omniplace.errors import ModelFileError, ValidationError
from omniplace.features import DescriptorConfig
from omniplace.pipeline import RunSelection, load_outcome, match_runs, train, write_outcome
from omniplace.synth import synth

SMALL = PipelineConfig(descriptor=DescriptorConfig(target_w=128, target_h=32))


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    return synth(tmp_path_factory.mktemp("p"), seed=4, n_places=8, height=64, width=256)


@pytest.fixture(scope="module")
def model(data):
    tr = FrameRange(0, 3)
    return train([RunSelection(data, r.name, tr) for r in data.runs], SMALL)


def test_training_records_defaults_and_converges(model):
    assert model.converged
    assert model.scenario_names == ("summer_morning", "summer_evening", "fall_evening")
    assert model.weights.values.shape == (model.layout.total_dim, 3)
    trace = np.array(model.objective_trace)
    assert trace.size == model.iterations + 1 and np.all(np.diff(trace) <= 1e-12 * trace[:-1])
    text = modelfile.dumps(model)
    assert "lambda1 = 0.1\n" in text and "lambda2 = 0.01\n" in text


def test_single_scenario_is_rejected(data):
    with pytest.raises(ValidationError):
        train([RunSelection(data, data.runs[0].name, FrameRange(0, 3))], SMALL)


def test_self_match_is_perfect(data, model):
    sel = RunSelection(data, data.runs[1].name, FrameRange(4, 7))
    outcome = match_runs(model, sel, sel)
    assert np.all(np.diag(outcome.report.scores) == 1.0)
    assert outcome.top1_weighted == 1.0
    below_one = [p for p in outcome.weighted.points if p.threshold < 1.0]
    assert below_one[-1].precision == 1.0 and below_one[-1].recall == 1.0
    assert outcome.report.ground_truth.radius_m == 50.0


def test_saved_model_scores_bit_identically(data, model, tmp_path):
    path = tmp_path / "m.txt"
    modelfile.save(path, model)
    loaded = modelfile.load(path)
    t = RunSelection(data, data.runs[0].name, FrameRange(4, 7))
    q = RunSelection(data, data.runs[2].name, FrameRange(4, 7))
    a = match_runs(model, t, q)
    b = match_runs(loaded, t, q)
    np.testing.assert_array_equal(a.report.scores, b.report.scores)
    np.testing.assert_array_equal(a.report.baseline_scores, b.report.baseline_scores)


def test_results_round_trip_through_files(data, model, tmp_path):
    t = RunSelection(data, data.runs[0].name, FrameRange(4, 7))
    q = RunSelection(data, data.runs[2].name, FrameRange(4, 7))
    outcome = match_runs(model, t, q, threshold=0.3)
    first = write_outcome(outcome, tmp_path / "r1", model.config)
    write_outcome(match_runs(model, t, q, threshold=0.3), tmp_path / "r2", model.config)
    for p in first:
        assert p.read_bytes() == (tmp_path / "r2" / p.name).read_bytes(), p.name
    back = load_outcome(tmp_path / "r1", 50.0, 0.3)
    np.testing.assert_array_equal(back.report.scores, outcome.report.scores)
    assert back.weighted == outcome.weighted


def test_layout_mismatch_is_a_model_error(data, model):
    other = PipelineConfig(descriptor=DescriptorConfig(target_w=96, target_h=32))
    from dataclasses import replace

    wrong = replace(model, config=other)
    sel = RunSelection(data, data.runs[0].name, FrameRange(4, 5))
    with pytest.raises(ModelFileError):
        match_runs(wrong, sel, sel)
