import json
from pathlib import Path

import numpy as np
import pytest

from framewatch.cli import main
from framewatch.data_io import FRAME_SIDE, encode_pgm, load_scenario

SMALL_SYNTH = {
    "seed": 7,
    "n_train": 12,
    "n_val": 6,
    "n_test_normal": 6,
    "n_per_anomaly": {"dim_light": 3, "blob": 3, "sensor_noise": 3},
}

SMALL_RUN = {
    "seed": 7,
    "autoencoder": {"epochs": 4, "batch_size": 8, "latent_dim": 16},
    "flow": {"epochs": 6, "batch_size": 8, "num_layers": 4, "hidden": 16},
}


def _tree_bytes(root: Path):
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Generated scenario + trained checkpoint shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    synth_cfg = root / "synth.json"
    synth_cfg.write_text(json.dumps(SMALL_SYNTH))
    run_cfg = root / "run.json"
    run_cfg.write_text(json.dumps(SMALL_RUN))
    scen = root / "scen"
    out = root / "out"
    assert main(["gen-synth", "--config", str(synth_cfg), "--out", str(scen)]) == 0
    assert main(["train", "--config", str(run_cfg), "--scenario", str(scen),
                 "--out", str(out)]) == 0
    return root


def test_gen_synth_output_loads(workspace):
    ds = load_scenario(workspace / "scen")
    assert len(ds.train) == 12 and len(ds.val) == 6 and len(ds.test) == 15


def test_gen_synth_rerun_identical(workspace, tmp_path):
    again = tmp_path / "scen2"
    assert main(["gen-synth", "--config", str(workspace / "synth.json"),
                 "--out", str(again)]) == 0
    assert _tree_bytes(again) == _tree_bytes(workspace / "scen")


def test_gen_synth_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  broken")
    assert main(["gen-synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line" in capsys.readouterr().err


def test_gen_synth_unknown_key(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n_trian": 5}')
    assert main(["gen-synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_train_writes_checkpoint_and_report(workspace):
    out = workspace / "out"
    assert (out / "checkpoint.json").is_file()
    report = json.loads((out / "train_report.json").read_text())
    assert report["autoencoder"]["epochs_run"] == 4
    assert report["flow"]["epochs_run"] == 6


def test_train_rejects_anomalous_train_file(workspace, tmp_path):
    import shutil
    poisoned = tmp_path / "poisoned"
    shutil.copytree(workspace / "scen", poisoned)
    labels = (poisoned / "labels.csv").read_text()
    labels += "train_00000.pgm,anomalous,tape,semantic,yes,yes,\n"
    (poisoned / "labels.csv").write_text(labels)
    assert main(["train", "--config", str(workspace / "run.json"),
                 "--scenario", str(poisoned),
                 "--out", str(tmp_path / "out")]) == 4


def test_eval_writes_report_and_scores(workspace, tmp_path):
    out = tmp_path / "eval"
    assert main(["eval", "--config", str(workspace / "run.json"),
                 "--checkpoint", str(workspace / "out" / "checkpoint.json"),
                 "--scenario", str(workspace / "scen"),
                 "--out", str(out)]) == 0
    report = json.loads((out / "eval_report.json").read_text())
    assert set(report["per_type_auc"]) == {"dim_light", "blob", "sensor_noise"}
    rows = (out / "scores.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 15  # header + test split size


def test_eval_corrupted_checkpoint(workspace, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["eval", "--checkpoint", str(bad),
                 "--scenario", str(workspace / "scen"),
                 "--out", str(tmp_path / "o")]) == 5


def test_eval_missing_scenario(workspace, tmp_path):
    assert main(["eval", "--checkpoint", str(workspace / "out" / "checkpoint.json"),
                 "--scenario", str(tmp_path / "missing"),
                 "--out", str(tmp_path / "o")]) == 3


def test_simulate_normal_stream_no_trigger(workspace, tmp_path, capsys):
    from framewatch.synth import SynthSpec, generate_stream
    stream = tmp_path / "stream"
    generate_stream(SynthSpec(**SMALL_SYNTH), stream, n_normal=40)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(workspace / "run.json"),
                 "--checkpoint", str(workspace / "out" / "checkpoint.json"),
                 "--scenario", str(stream), "--out", str(out)]) == 0
    assert "no trigger" in capsys.readouterr().out
    log = (out / "monitor_log.csv").read_text().strip().split("\n")
    assert len(log) == 41


def test_simulate_anomalous_stream_triggers(workspace, tmp_path, capsys):
    from framewatch.synth import SynthSpec, generate_stream
    stream = tmp_path / "stream"
    generate_stream(SynthSpec(**SMALL_SYNTH), stream, n_normal=30,
                    anomaly_kind="dim_light", n_anomalous=40)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(workspace / "run.json"),
                 "--checkpoint", str(workspace / "out" / "checkpoint.json"),
                 "--scenario", str(stream), "--out", str(out)]) == 0
    assert "trigger at frame" in capsys.readouterr().out


def test_simulate_unreadable_frame_fails_safe(workspace, tmp_path, capsys):
    stream = tmp_path / "stream"
    stream.mkdir()
    (stream / "frame_000000.pgm").write_bytes(
        encode_pgm(np.full((FRAME_SIDE, FRAME_SIDE), 0.5)))
    (stream / "frame_000001.pgm").write_bytes(b"P5 garbage")
    out = tmp_path / "sim"
    assert main(["simulate", "--checkpoint",
                 str(workspace / "out" / "checkpoint.json"),
                 "--scenario", str(stream), "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    assert "trigger at frame 1" in captured.out


def test_simulate_missing_frames_dir(workspace, tmp_path):
    assert main(["simulate", "--checkpoint",
                 str(workspace / "out" / "checkpoint.json"),
                 "--scenario", str(tmp_path / "missing"),
                 "--out", str(tmp_path / "o")]) == 3


def test_print_config_defaults(capsys):
    assert main(["print-config"]) == 0
    config = json.loads(capsys.readouterr().out)
    assert config["seed"] == 7
    assert config["autoencoder"]["epochs"] == 50
    assert config["eval_quantile"] == 0.99


def test_print_config_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "cfg.json"
    bad.write_text('{"sede": 1}')
    assert main(["print-config", "--config", str(bad)]) == 2


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"seed": 3}')
    assert main(["print-config", "--config", str(cfg), "--seed", "11"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 11


def test_train_determinism_byte_identical(workspace, tmp_path):
    out2 = tmp_path / "out2"
    assert main(["train", "--config", str(workspace / "run.json"),
                 "--scenario", str(workspace / "scen"),
                 "--out", str(out2)]) == 0
    a = (workspace / "out" / "checkpoint.json").read_bytes()
    b = (out2 / "checkpoint.json").read_bytes()
    assert a == b
