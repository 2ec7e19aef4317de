import numpy as np
import pytest

from omniplace.errors import ShapeError, ValidationError
from omniplace.evaluation import (
    DEFAULT_THRESHOLDS,
    emit_plots,
    modality_label,
    modality_report,
    pr_curve,
    read_curve_csv,
    sensor_shares,
    top1_recall,
    write_curve_csv,
)
from omniplace.matching import ModalityWeights
from omniplace.model import ModalityLayout

from conftest import two_by_two


def brute_force_counts(scores, truth, threshold):
    tp = fp = fn = 0
    for i in range(scores.shape[0]):
        for j in range(scores.shape[1]):
            predicted = scores[i, j] >= threshold
            if predicted and truth[i, j]:
                tp += 1
            elif predicted:
                fp += 1
            elif truth[i, j]:
                fn += 1
    return tp, fp, fn


def random_case(rng):
    q, t = rng.integers(1, 11, 2)
    scores = rng.uniform(size=(q, t))
    if rng.random() < 0.5:
        scores = np.round(scores * 8) / 8  # plenty of ties and exact threshold hits
    truth = rng.random((q, t)) < rng.uniform(0.1, 0.6)
    truth.flat[rng.integers(truth.size)] = True
    return scores, truth


def test_counts_match_exhaustive_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(100):
        scores, truth = random_case(rng)
        curve = pr_curve(scores, truth)
        for p in curve.points:
            assert (p.tp, p.fp, p.fn) == brute_force_counts(scores, truth, p.threshold)
            assert p.precision == (p.tp / (p.tp + p.fp) if p.tp + p.fp else 1.0)
            assert p.recall == p.tp / truth.sum()


def test_perfect_scores():
    truth = np.eye(4, dtype=bool)
    curve = pr_curve(truth.astype(float), truth, thresholds=[0.5])
    assert (curve.points[0].precision, curve.points[0].recall) == (1.0, 1.0)
    assert pr_curve(truth.astype(float), truth).auc == pytest.approx(1.0)


def test_constant_scores_give_base_rate():
    truth = np.zeros((4, 5), dtype=bool)
    truth[:, 0] = True
    curve = pr_curve(np.full((4, 5), 0.3), truth)
    below = [p for p in curve.points if p.threshold <= 0.3]
    assert all(p.recall == 1.0 and p.precision == pytest.approx(0.2) for p in below)
    assert len({(p.recall, p.precision) for p in below}) == 1


def test_auc_trapezoid_by_hand():
    truth = np.array([[True, False, True, False]])
    scores = np.array([[0.9, 0.8, 0.4, 0.1]])
    curve = pr_curve(scores, truth, thresholds=[0.0, 0.5, 0.85, 1.0])
    # walk from t=1: (r=0,p=1) (0.5,1) (0.5,0.5) (1,0.5)
    assert [(p.recall, p.precision) for p in curve.points] == [(1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)]
    assert curve.auc == pytest.approx(0.5 * 1.0 + 0.5 * 0.5)


def test_pr_validation():
    with pytest.raises(ValidationError):
        pr_curve(np.zeros((2, 2)), np.zeros((2, 2), dtype=bool))
    with pytest.raises(ShapeError):
        pr_curve(np.zeros((2, 2)), np.eye(3, dtype=bool))
    with pytest.raises(ValidationError):
        pr_curve(np.zeros((2, 2)), np.eye(2, dtype=bool), thresholds=[0.5, 0.1])
    assert DEFAULT_THRESHOLDS.size == 201


def test_top1_recall_ties_and_empty_rows():
    scores = np.array([[0.5, 0.5], [0.1, 0.9], [0.3, 0.2]])
    truth = np.array([[True, False], [True, False], [False, False]])
    assert top1_recall(scores, truth) == 0.5


def test_modality_report_shares():
    layout = two_by_two()
    equal = ModalityWeights(layout, [1.0, 1.0, 0.0, 0.0], [1.0, 0.0])
    assert [s.percent for s in modality_report(equal)] == [50.0, 50.0, 0.0, 0.0]
    rng = np.random.default_rng(1)
    w = ModalityWeights(layout, rng.uniform(size=4), rng.uniform(size=2))
    assert sum(s.percent for s in modality_report(w)) == pytest.approx(100.0, abs=1e-6)
    shares = sensor_shares(w)
    assert sum(shares.values()) == pytest.approx(1.0)


def test_modality_labels():
    assert modality_label(0, "intensity", "hog") == "HOG"
    assert modality_label(1, "disparity", "hog") == "HOG-D"
    layout = ModalityLayout.from_spec([("intensity", [("gist", 1)]), ("disparity", [("lbp", 1)])])
    names = [s.name for s in modality_report(ModalityWeights(layout, [1.0, 1.0], [1.0, 1.0]))]
    assert names == ["GIST", "LBP-D"]


def test_curve_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    curve = pr_curve(*random_case(rng))
    write_curve_csv(tmp_path / "c.csv", curve)
    back = read_curve_csv(tmp_path / "c.csv", curve.label)
    assert back == curve


def test_emit_plots_files_and_determinism(tmp_path):
    rng = np.random.default_rng(3)
    curve = pr_curve(*random_case(rng), label="weighted")
    layout = two_by_two()
    report = modality_report(ModalityWeights(layout, [1.0, 2.0, 3.0, 4.0], [1.0, 1.0]))

    one = emit_plots([curve], None, tmp_path / "one")
    assert sorted(p.name for p in one) == ["pr_weighted.csv", "pr_weighted.svg"]
    assert emit_plots([], None, tmp_path / "none") == []

    other = pr_curve(*random_case(rng), label="baseline")
    a = emit_plots([curve, other], report, tmp_path / "a")
    b = emit_plots([curve, other], report, tmp_path / "b")
    assert sorted(p.name for p in a) == sorted(p.name for p in b)
    assert {p.name for p in a} >= {"pr_curves.svg", "modality_report.csv", "modality_report.svg"}
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes(), pa.name
