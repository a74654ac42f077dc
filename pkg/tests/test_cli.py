"""End-to-end command behavior on tiny problems."""

import csv
import json
import os

import numpy as np
import pytest

from stci.cli import main
from stci.effects import REPORT_KEYS
from stci.stcinet import VARIANTS


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "config.json"
    path.write_text(json.dumps({
        "grid": {"n_rows": 16, "n_cols": 16, "n_steps": 40},
        "intervention": {"row_bounds": [5, 9], "col_bounds": [5, 9]},
    }))
    return str(path)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, tiny_config):
    """One generated dataset and one 1-epoch checkpoint shared per module."""
    root = tmp_path_factory.mktemp("ws")
    data = str(root / "dataset")
    ckpt = str(root / "checkpoint")
    assert main(["generate", "--config", tiny_config, "--seed", "5", "--out", data]) == 0
    assert main([
        "train", "--config", tiny_config, "--data", data, "--out", ckpt,
        "--epochs", "1", "--batch-size", "16", "--seed", "2",
    ]) == 0
    return {"root": root, "config": tiny_config, "data": data, "ckpt": ckpt}


def dir_bytes(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_generate_is_reproducible(tmp_path, tiny_config):
    a = str(tmp_path / "a")
    b = str(tmp_path / "b")
    assert main(["generate", "--config", tiny_config, "--seed", "7", "--out", a]) == 0
    assert main(["generate", "--config", tiny_config, "--seed", "7", "--out", b]) == 0
    assert dir_bytes(a) == dir_bytes(b)


def test_generate_prints_oracle(capsys, tmp_path, tiny_config):
    out = str(tmp_path / "ds")
    assert main(["generate", "--config", tiny_config, "--out", out]) == 0
    text = capsys.readouterr().out
    assert "oracle DATE" in text
    assert "oracle IATE" in text
    assert "oracle LATE" in text
    late_line = [l for l in text.splitlines() if "oracle LATE" in l][0]
    assert float(late_line.split()[-1]) != 0.0


def test_generate_no_interference_records_zero_beta2(tmp_path, tiny_config):
    out = str(tmp_path / "ds")
    assert main([
        "generate", "--config", tiny_config, "--no-interference", "--out", out,
    ]) == 0
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert manifest["interference"] is False
    assert manifest["params"]["beta2"] == 0.0


def test_flag_overrides_config(tmp_path, tiny_config):
    out = str(tmp_path / "ds")
    assert main([
        "generate", "--config", tiny_config, "--steps", "20", "--out", out,
    ]) == 0
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert manifest["grid"]["T"] == 20


def test_train_writes_checkpoint_and_log(workspace):
    ckpt = workspace["ckpt"]
    assert os.path.isfile(os.path.join(ckpt, "model.json"))
    assert os.path.isfile(os.path.join(ckpt, "training_log.json"))
    log = json.loads(open(os.path.join(ckpt, "training_log.json")).read())
    assert len(log) == 1
    assert set(log[0]) == {"epoch", "lr", "loss"}


def test_train_rerun_same_seed_identical_log(tmp_path, workspace):
    other = str(tmp_path / "ckpt2")
    assert main([
        "train", "--config", workspace["config"], "--data", workspace["data"],
        "--out", other, "--epochs", "1", "--batch-size", "16", "--seed", "2",
    ]) == 0
    a = open(os.path.join(workspace["ckpt"], "training_log.json")).read()
    b = open(os.path.join(other, "training_log.json")).read()
    assert a == b


def test_variant_flag_is_case_insensitive(tmp_path, workspace):
    out = str(tmp_path / "na_ckpt")
    assert main([
        "train", "--data", workspace["data"], "--out", out,
        "--variant", "NA", "--epochs", "1", "--batch-size", "16",
    ]) == 0
    manifest = json.loads(open(os.path.join(out, "model.json")).read())
    assert manifest["config"]["variant"] == "na"


def test_evaluate_writes_report_and_figures(tmp_path, workspace):
    out = str(tmp_path / "ev")
    assert main([
        "evaluate", "--data", workspace["data"], "--model", workspace["ckpt"],
        "--out", out,
    ]) == 0
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert tuple(report) == REPORT_KEYS
    assert all(np.isfinite(v) for v in report.values())
    for name in ("effect_heatmaps.png", "effect_curves.png",
                 "tau_true.f32", "tau_pred.f32", "arrays.json"):
        assert os.path.isfile(os.path.join(out, name)), name


def test_report_rerenders_saved_outputs(tmp_path, workspace, capsys):
    out = str(tmp_path / "ev")
    assert main([
        "evaluate", "--data", workspace["data"], "--model", workspace["ckpt"],
        "--out", out,
    ]) == 0
    for name in ("effect_heatmaps.png", "effect_curves.png"):
        os.remove(os.path.join(out, name))
    capsys.readouterr()
    assert main(["report", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "late_pehe" in text
    for name in ("effect_heatmaps.png", "effect_curves.png"):
        assert os.path.isfile(os.path.join(out, name)), name


def test_ablate_emits_five_row_table(tmp_path, workspace):
    out = str(tmp_path / "abl")
    assert main([
        "ablate", "--data", workspace["data"], "--out", out,
        "--epochs", "1", "--batch-size", "16", "--seed", "2",
    ]) == 0
    with open(os.path.join(out, "ablation.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    assert header == ["variant", "parameters",
                      "date_pehe", "iate_pehe", "late_pehe", "rmse", "status"]
    assert [row[0] for row in body] == list(VARIANTS)
    assert all(row[-1] == "ok" for row in body)
    counts = {row[0]: int(row[1]) for row in body}
    assert counts["dagger"] < counts["full"]
    for row in body:
        for cell in row[2:6]:
            assert np.isfinite(float(cell))
    for variant in VARIANTS:
        assert os.path.isfile(os.path.join(out, variant, "report.json"))
        assert os.path.isfile(os.path.join(out, variant, "model.json"))


def test_ablate_parallel_matches_contract(tmp_path, workspace):
    out = str(tmp_path / "ablp")
    assert main([
        "ablate", "--data", workspace["data"], "--out", out,
        "--epochs", "1", "--batch-size", "16", "--seed", "2", "--parallel", "2",
    ]) == 0
    with open(os.path.join(out, "ablation.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 6
    assert all(row[-1] == "ok" for row in rows[1:])


def test_report_on_ablation_table(tmp_path, workspace, capsys):
    out = str(tmp_path / "abl")
    assert main([
        "ablate", "--data", workspace["data"], "--out", out,
        "--epochs", "1", "--batch-size", "16",
    ]) == 0
    capsys.readouterr()
    assert main(["report", "--out", out]) == 0
    text = capsys.readouterr().out
    for variant in VARIANTS:
        assert variant in text


def test_exit_code_validation_error(tmp_path, workspace):
    assert main([
        "train", "--data", workspace["data"], "--out", str(tmp_path / "x"),
        "--lambda1", "1.5", "--epochs", "1",
    ]) == 2
    assert main([
        "generate", "--region", "9:5,0:4", "--out", str(tmp_path / "y"),
    ]) == 2


def test_exit_code_io_error(tmp_path, workspace):
    assert main([
        "evaluate", "--data", str(tmp_path / "missing"),
        "--model", workspace["ckpt"], "--out", str(tmp_path / "ev"),
    ]) == 4
    assert main(["report", "--out", str(tmp_path / "empty")]) == 4


def test_exit_code_divergence(tmp_path, tiny_config):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({
        "grid": {"n_rows": 16, "n_cols": 16, "n_steps": 40},
        "intervention": {"row_bounds": [5, 9], "col_bounds": [5, 9]},
        "params": {"alpha": 1.0e6, "gamma": 1.0e6},
    }))
    assert main([
        "generate", "--config", str(config), "--out", str(tmp_path / "ds"),
    ]) == 3


def test_unknown_flag_is_an_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--bogus-flag", "1"])
    assert exc.value.code == 2


def test_help_documents_all_subcommands(capsys):
    for command in ("generate", "train", "evaluate", "ablate", "report"):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        assert "--config" in capsys.readouterr().out


def test_unknown_config_block_is_an_error(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text('{"training": {"epochs": 2}}')
    out = str(tmp_path / "ds")
    code = main(["generate", "--config", str(config), "--steps", "12", "--out", out])
    assert code == 2
    assert "training" in capsys.readouterr().err


def test_empty_config_runs_defaults(tmp_path):
    config = tmp_path / "empty.json"
    config.write_text("{}")
    out = str(tmp_path / "ds")
    assert main([
        "generate", "--config", str(config), "--steps", "12", "--out", out,
    ]) == 0
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert manifest["grid"]["N"] == 32
    assert manifest["intervention"]["update_factor"] == 0.6
