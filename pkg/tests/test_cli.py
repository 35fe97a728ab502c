import json

import pytest

from cospike import load_dataset
from cospike.cli import main

FAST = ["--frame-length", "32", "--units", "2", "--frames-per-unit", "2",
        "--measurements", "8", "--trials", "1", "--training-count", "12",
        "--classify-m", "8", "--num-features", "4", "--kmeans-restarts", "2",
        "--max-iter", "500"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSynth:
    def test_writes_csv(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        code, out, _ = run(["synth", str(path), *FAST], capsys)
        assert code == 0
        assert "wrote 4 frames" in out
        assert len(load_dataset(path)) == 4

    def test_binary_format(self, tmp_path, capsys):
        path = tmp_path / "d.bin"
        code, _, _ = run(["synth", str(path), "--format", "raw-binary",
                          *FAST], capsys)
        assert code == 0
        assert load_dataset(path, fmt="raw-binary").frame_length == 32


class TestExitCodes:
    def test_unknown_command_is_config_error(self, capsys):
        assert run(["frobnicate"], capsys)[0] == 1

    def test_bad_flag_value(self, capsys):
        code, _, err = run(["train", "--trials", "soon"], capsys)
        assert code == 1
        assert "config error" in err

    def test_missing_config_file(self, capsys):
        code, _, err = run(["train", "--config", "/nope/missing.cfg"], capsys)
        assert code == 1

    def test_missing_dataset_is_runtime_error(self, tmp_path, capsys):
        code, _, err = run(["sweep", *FAST, "--dataset-path",
                            str(tmp_path / "absent.csv")], capsys)
        assert code == 2


class TestConfigPlumbing:
    def test_config_file_plus_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "frame_length = 32\nunits = 2\nframes_per_unit = 2\n"
            "measurements = 8\ntrials = 1\ntraining_count = 12\n"
            "max_iter = 500\nmethods = al1\n"
            f"output_dir = {tmp_path / 'out'}\n")
        code, out, _ = run(["sweep", "--config", str(cfg),
                            "--trials", "2"], capsys)
        assert code == 0
        manifest = json.loads((tmp_path / "out" / "sweep_manifest.json")
                              .read_text())
        assert manifest["config"]["trials"] == "2"

    def test_train_reports_model(self, tmp_path, capsys):
        code, out, _ = run(["train", *FAST,
                            "--output-dir", str(tmp_path)], capsys)
        assert code == 0
        assert "variance model" in out
        assert (tmp_path / "variance_model.txt").exists()


class TestPipelines:
    def test_sweep_prints_stats(self, tmp_path, capsys):
        code, out, _ = run(["sweep", *FAST,
                            "--output-dir", str(tmp_path)], capsys)
        assert code == 0
        assert "mean PRD" in out and "walm" in out

    def test_classify_prints_accuracy(self, tmp_path, capsys):
        code, out, _ = run(["classify", *FAST, "--methods", "al1",
                            "--output-dir", str(tmp_path)], capsys)
        assert code == 0
        assert "original" in out and "accuracy" in out

    def test_co_sparsity_outputs(self, tmp_path, capsys):
        code, out, _ = run(["co-sparsity", *FAST,
                            "--output-dir", str(tmp_path)], capsys)
        assert code == 0
        assert (tmp_path / "co_sparsity_curve.csv").exists()


class TestConvertCheck:
    @pytest.fixture()
    def dataset_path(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        assert run(["synth", str(path), *FAST], capsys)[0] == 0
        return path

    def test_reports_summary(self, dataset_path, capsys):
        code, out, _ = run(["convert-check", str(dataset_path),
                            "--n", "32", "--labels", "2"], capsys)
        assert code == 0
        assert "4 frames" in out and "label histogram" in out

    def test_mismatch_exits_two(self, dataset_path, capsys):
        code, _, err = run(["convert-check", str(dataset_path),
                            "--n", "128"], capsys)
        assert code == 2
        assert "mismatch" in err

    def test_label_mismatch(self, dataset_path, capsys):
        code, _, err = run(["convert-check", str(dataset_path),
                            "--labels", "5"], capsys)
        assert code == 2
