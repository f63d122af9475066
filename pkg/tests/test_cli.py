import json
import os

import numpy as np
import pytest

from tert.cli import main
from tert.evalm import METRIC_HEADER
from tert.models.checkpoint import save_checkpoint
from tert.models.teacher import TeacherBundle


@pytest.fixture(scope="module")
def teacher_ckpt(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "teacher.tckp"
    save_checkpoint(TeacherBundle(seed=0).checkpoint(), path)
    return path


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        code, cap = run_cli(capsys, "frobnicate")
        assert code == 2

    def test_missing_required_flag_names_it(self, capsys, tmp_path):
        code, cap = run_cli(capsys, "eval", "--out", str(tmp_path / "m.csv"))
        assert code == 2
        assert "--ckpt" in cap.err

    def test_no_subcommand_is_usage_error(self, capsys):
        code, _ = run_cli(capsys, )
        assert code == 2

    def test_missing_checkpoint_is_runtime_error(self, capsys, tmp_path):
        code, cap = run_cli(capsys, "eval", "--ckpt", str(tmp_path / "nope.tckp"),
                            "--out", str(tmp_path / "m.csv"))
        assert code == 1
        assert "error" in cap.err

    def test_bad_config_file_is_usage_error(self, capsys, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"not_a_key": 1}))
        code, cap = run_cli(capsys, "export-terrain", "--config", str(cfg),
                            "--terrain", "smooth-slope",
                            "--out", str(tmp_path / "t.csv"))
        assert code == 2
        assert "config error" in cap.err


class TestEvalCommand:
    def test_metric_csv_and_manifest(self, capsys, teacher_ckpt, tmp_path):
        out = tmp_path / "metrics.csv"
        code, _ = run_cli(capsys, "eval", "--ckpt", str(teacher_ckpt),
                          "--terrain", "stairs-down", "--episodes", "2",
                          "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == ",".join(METRIC_HEADER)
        assert len(lines) == 1 + 5  # header + one row per difficulty level
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "eval"
        assert str(teacher_ckpt) in manifest["inputs"]
        assert str(out) in manifest["outputs"]
        assert len(manifest["outputs"][str(out)]) == 64

    def test_deterministic_env_var(self, capsys, teacher_ckpt, tmp_path):
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name / "metrics.csv"
            os.environ["TERT_DETERMINISTIC"] = "1"
            try:
                code, _ = run_cli(capsys, "eval", "--ckpt", str(teacher_ckpt),
                                  "--terrain", "smooth-slope", "--episodes", "2",
                                  "--seed", "7", "--out", str(out))
            finally:
                del os.environ["TERT_DETERMINISTIC"]
            assert code == 0
            outputs.append(out.read_text())
        assert outputs[0] == outputs[1]


class TestExportTerrain:
    def test_writes_heightfield_csv(self, capsys, tmp_path):
        out = tmp_path / "terrain.csv"
        code, _ = run_cli(capsys, "export-terrain", "--terrain", "stairs-up",
                          "--difficulty", "0.8", "--terrain-seed", "3",
                          "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "x,height"
        data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        assert data.shape[0] > 100
        assert np.all(np.diff(data[:, 0]) > 0)  # x strictly increasing

    def test_same_seed_same_csv(self, capsys, tmp_path):
        texts = []
        for name in ("1", "2"):
            out = tmp_path / name / "terrain.csv"
            code, _ = run_cli(capsys, "export-terrain", "--terrain", "discrete-obstacles",
                              "--terrain-seed", "11", "--out", str(out))
            assert code == 0
            texts.append(out.read_text())
        assert texts[0] == texts[1]


@pytest.fixture(scope="module")
def student_ckpt(tmp_path_factory):
    from tert.distill import new_student, transformer_checkpoint
    from tert.models.transformer import TransformerSpec

    spec = TransformerSpec(num_layers=2, embed_dim=32, num_heads=2,
                           context_length=8, dropout_rate=0.0)
    path = tmp_path_factory.mktemp("student") / "student.tckp"
    save_checkpoint(transformer_checkpoint(new_student(spec, 0), "transformer",
                                           {"variant": "tert"}), path)
    return path


class TestAttnHiddenCommands:
    def test_attn_dump(self, capsys, student_ckpt, tmp_path):
        out = tmp_path / "attn.csv"
        code, _ = run_cli(capsys, "attn", "--ckpt", str(student_ckpt),
                          "--steps", "12", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 12
        row = [float(v) for v in lines[1].split(",")]
        assert len(row) == 8  # context length
        assert sum(row) == pytest.approx(1.0, abs=1e-4)

    def test_attn_rejects_teacher_ckpt(self, capsys, teacher_ckpt, tmp_path):
        code, cap = run_cli(capsys, "attn", "--ckpt", str(teacher_ckpt),
                            "--out", str(tmp_path / "attn.csv"))
        assert code == 2
        assert "transformer" in cap.err

    def test_hidden_dump(self, capsys, student_ckpt, tmp_path):
        out = tmp_path / "hidden.csv"
        code, _ = run_cli(capsys, "hidden", "--ckpt", str(student_ckpt),
                          "--steps", "3", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].split(",")[0] == "terrain"
        assert len(lines) == 1 + 3 * 5  # steps x terrain kinds
        assert len(lines[1].split(",")) == 1 + 32  # label + embed_dim
