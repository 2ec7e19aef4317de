import pytest

from omniplace import cli, modelfile


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.cfg"
    cfg.write_text("descriptor.target_w = 128\ndescriptor.target_h = 32\n")
    assert cli.main(["synth", "--out", str(root / "data"), "--seed", "9", "--n-places", "6",
                     "--scenarios", "summer_morning,fall_evening", "--height", "64", "--width", "256"]) == 0
    return root, cfg


def test_full_command_sequence(workspace, capsys):
    root, cfg = workspace
    data = str(root / "data")
    assert cli.main(["ingest", data, "--check", "--config", str(cfg)]) == 0
    assert "6 frame pairs" in capsys.readouterr().out
    model = root / "model.txt"
    assert cli.main(["train", data, "--config", str(cfg), "--frames", "0..3", "--out", str(model),
                     "--lambda1", "0.2"]) == 0
    assert modelfile.load(model).config.hyper.lambda1 == 0.2
    res = root / "res"
    assert cli.main(["match", data, "--model", str(model), "--templates", "loop_summer_morning_forward:4..5",
                     "--queries", "loop_fall_evening_forward", "--frames", "4..5", "--out", str(res)]) == 0
    out = capsys.readouterr().out
    assert "auc_weighted" in out and (res / "pr_weighted.csv").exists()
    assert cli.main(["eval", str(res), "--radius-m", "300", "--out", str(root / "ev")]) == 0
    assert "radius_m 300.0" in capsys.readouterr().out
    assert cli.main(["report", "--model", str(model), "--out", str(root / "rep")]) == 0
    assert "HOG" in capsys.readouterr().out
    assert (root / "rep" / "modality_report.csv").exists()


def test_exit_codes(workspace, tmp_path, capsys):
    root, cfg = workspace
    data = str(root / "data")
    assert cli.main(["train", data, "--config", str(cfg), "--run", "loop_fall_evening_forward",
                     "--out", str(tmp_path / "m")]) == cli.EXIT_VALIDATION
    assert cli.main(["ingest", str(tmp_path / "nowhere"), "--check"]) == cli.EXIT_INGESTION
    assert cli.main(["report", "--model", str(tmp_path / "none.txt")]) == cli.EXIT_MODEL
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("lambda1 = banana\n")
    assert cli.main(["train", data, "--config", str(bad_cfg), "--out", str(tmp_path / "m")]) == cli.EXIT_VALIDATION
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["train", data, "--config", str(cfg), "--frames", "0..1",
                     "--out", str(blocker / "model.txt")]) == cli.EXIT_IO
    # the default target resolution cannot be reached from 64x256 synthetic frames
    assert cli.main(["ingest", data, "--check"]) == cli.EXIT_INGESTION
    assert cli.main(["train", data, "--config", str(cfg), "--frames", "0..3", "--out", str(tmp_path / "z"),
                     "--lambda1", "0", "--lambda2", "0"]) == cli.EXIT_SOLVER
    capsys.readouterr()


def test_argparse_errors_exit_with_validation_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train"])
    assert exc.value.code == cli.EXIT_VALIDATION
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "x", "--frames", "9..1"])
    assert exc.value.code == cli.EXIT_VALIDATION
