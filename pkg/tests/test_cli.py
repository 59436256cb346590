"""CLI behavior: exit codes, report formats, determinism, golden values."""

from pathlib import Path

import numpy as np

from spdalign.cli import main
from spdalign.io import write_feature_container
from spdalign.scatter import FeatureBlock

REPO_ROOT = Path(__file__).resolve().parent.parent
MICRO_CASES = REPO_ROOT / "data" / "micro_cases.txt"

FAST_CONFIG = """
class_count = 4
input_dim = 6
source_per_class = 8
target_train_per_class = 3
target_test_per_class = 6
steps = 30
learning_rate = 0.2
feature_dim = 8
seed = 3
"""


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGradcheckCommand:
    def test_pass_on_defaults_small(self, capsys):
        code, out, _ = run_cli(capsys, "gradcheck", "--trials", "3", "--seed", "1")
        assert code == 0
        assert "gradcheck: PASS" in out
        for component in ("distance/", "scatter/", "projected/", "mean-align", "objective/"):
            assert component in out

    def test_deterministic_report(self, capsys):
        code_a, out_a, _ = run_cli(capsys, "gradcheck", "--trials", "2", "--seed", "9",
                                   "--kind", "jbld")
        code_b, out_b, _ = run_cli(capsys, "gradcheck", "--trials", "2", "--seed", "9",
                                   "--kind", "jbld")
        assert (code_a, out_a) == (code_b, out_b)

    def test_corrupted_gradient_fails_naming_component(self, capsys):
        code, out, _ = run_cli(
            capsys, "gradcheck", "--trials", "2", "--seed", "1",
            "--kind", "jbld", "--corrupt", "scatter/jbld",
        )
        assert code == 2
        assert "gradcheck: FAIL (scatter/jbld)" in out

    def test_bad_kind_is_validation_error(self, capsys):
        code, _, err = run_cli(capsys, "gradcheck", "--kind", "euclid")
        assert code == 1
        assert "euclid" in err


class TestInvarianceCommand:
    def test_pass(self, capsys):
        code, out, _ = run_cli(capsys, "invariance", "--trials", "10",
                               "--triples", "50", "--seed", "2")
        assert code == 0
        assert "invariance: PASS" in out


class TestBenchCommand:
    def test_degenerate_dimension_ratio_near_one(self, capsys):
        # d == n + nstar: both paths do the same-size work, ratio is O(1)
        code, out, _ = run_cli(capsys, "bench", "--d", "12", "--n", "8",
                               "--nstar", "4", "--reps", "5", "--kind", "jbld")
        assert code == 0
        ratio = float([l for l in out.splitlines() if l.startswith("speedup")][0].split()[1].rstrip("x"))
        assert 0.01 < ratio < 100.0

    def test_projected_faster_at_moderate_scale(self, capsys):
        code, out, _ = run_cli(capsys, "bench", "--d", "512", "--n", "12",
                               "--nstar", "4", "--reps", "3", "--kind", "jbld")
        assert code == 0
        ratio = float([l for l in out.splitlines() if l.startswith("speedup")][0].split()[1].rstrip("x"))
        assert ratio > 1.0

    def test_reps_validation(self, capsys):
        code, _, err = run_cli(capsys, "bench", "--reps", "2", "--d", "8",
                               "--n", "2", "--nstar", "2")
        assert code == 1
        assert "reps" in err

    def test_rep_count_does_not_change_ordering(self, capsys):
        def speedup(reps):
            _, out, _ = run_cli(capsys, "bench", "--d", "256", "--n", "10",
                                "--nstar", "4", "--reps", str(reps), "--kind", "jbld")
            return float([l for l in out.splitlines() if l.startswith("speedup")][0]
                         .split()[1].rstrip("x"))

        assert speedup(3) > 1.0
        assert speedup(10) > 1.0


class TestTrainCommand:
    def test_artifacts_and_determinism(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text(FAST_CONFIG)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        code_a, _, _ = run_cli(capsys, "train", "--config", str(config), "--out", str(out_a))
        code_b, _, _ = run_cli(capsys, "train", "--config", str(config), "--out", str(out_b))
        assert code_a == 0 and code_b == 0
        for name in ("model.bin", "loss_history.csv", "eval_report.csv"):
            assert (out_a / name).is_file()
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        header = (out_a / "loss_history.csv").read_text().splitlines()[0]
        assert header == "step,loss_total,loss_ce_s,loss_ce_t,loss_prox,loss_scatter,loss_mean"
        rows = (out_a / "loss_history.csv").read_text().splitlines()
        assert len(rows) == 1 + 30

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("sigma1 = -2\n")
        code, _, err = run_cli(capsys, "train", "--config", str(config), "--out", str(tmp_path / "o"))
        assert code == 1
        assert "sigma1" in err

    def test_eval_command_roundtrip(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text(FAST_CONFIG)
        out = tmp_path / "run"
        assert run_cli(capsys, "train", "--config", str(config), "--out", str(out))[0] == 0

        rng = np.random.default_rng(0)
        block = FeatureBlock(rng.normal(size=(6, 12)), rng.integers(0, 4, size=12))
        features = tmp_path / "test.bin"
        write_feature_container(features, block, class_count=4)
        code, text, _ = run_cli(capsys, "eval", str(out / "model.bin"), str(features))
        assert code == 0
        lines = text.splitlines()
        assert lines[0] == "scope,top1,count"
        assert lines[1].startswith("overall,")

    def test_eval_class_count_mismatch(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text(FAST_CONFIG)
        out = tmp_path / "run"
        run_cli(capsys, "train", "--config", str(config), "--out", str(out))
        rng = np.random.default_rng(0)
        block = FeatureBlock(rng.normal(size=(6, 4)), np.zeros(4, dtype=int))
        features = tmp_path / "test.bin"
        write_feature_container(features, block, class_count=9)
        code, _, err = run_cli(capsys, "eval", str(out / "model.bin"), str(features))
        assert code == 1
        assert "classes" in err


MICRO_METRICS_EXPECTED = """\
measure,k,n,value
top_k,1,,0.333333
top_k,2,,0.666667
top_k,3,,1.000000
top_k_n,1,1,0.333333
top_k_n,1,2,0.333333
top_k_n,1,3,0.666667
top_k_n,2,1,0.666667
top_k_n,2,2,0.666667
top_k_n,2,3,1.000000
top_k_n,3,1,1.000000
top_k_n,3,2,1.000000
top_k_n,3,3,1.000000
avg_top_kk,,,0.666667
"""

MICRO_BREAKDOWN_EXPECTED = """\
factor,count,top_1,avg_top_kk
all,3,0.333333,0.666667
blr,2,0.500000,0.833333
ocl,1,0.000000,0.666667
blr+ocl,1,0.000000,0.666667
"""


class TestMetricsCommand:
    def test_micro_file_golden_grid(self, capsys):
        # grid hand-computed from the three shipped cases
        code, out, _ = run_cli(capsys, "metrics", str(MICRO_CASES), "--kmax", "3")
        assert code == 0
        assert out == MICRO_METRICS_EXPECTED

    def test_micro_file_breakdown(self, capsys):
        code, out, _ = run_cli(capsys, "metrics", str(MICRO_CASES), "--kmax", "3",
                               "--breakdown")
        assert code == 0
        assert out == MICRO_METRICS_EXPECTED + MICRO_BREAKDOWN_EXPECTED

    def test_all_perfect_grid(self, tmp_path, capsys):
        path = tmp_path / "cases.txt"
        path.write_text("".join(
            f"pred:{i},{i+50},{i+60}|truth:{i}\n" for i in range(6)
        ))
        code, out, _ = run_cli(capsys, "metrics", str(path), "--kmax", "3")
        assert code == 0
        for line in out.splitlines()[1:]:
            assert line.endswith("1.000000")

    def test_untagged_breakdown_single_all_row(self, tmp_path, capsys):
        path = tmp_path / "cases.txt"
        path.write_text("pred:1,2,3|truth:1\n")
        code, out, _ = run_cli(capsys, "metrics", str(path), "--kmax", "3", "--breakdown")
        assert code == 0
        breakdown_lines = out.split("factor,count,top_1,avg_top_kk\n")[1].strip().splitlines()
        assert len(breakdown_lines) == 1
        assert breakdown_lines[0].startswith("all,1,")

    def test_malformed_line_reports_number(self, tmp_path, capsys):
        path = tmp_path / "cases.txt"
        path.write_text("pred:1,2|truth:1\npred:oops|truth:1\n")
        code, _, err = run_cli(capsys, "metrics", str(path))
        assert code == 1
        assert "line 2" in err

    def test_kmax_exceeding_predictions(self, tmp_path, capsys):
        path = tmp_path / "cases.txt"
        path.write_text("pred:1,2|truth:1\n")
        code, _, err = run_cli(capsys, "metrics", str(path), "--kmax", "5")
        assert code == 1

    def test_output_directory_mode(self, tmp_path, capsys):
        out_dir = tmp_path / "tables"
        code, _, _ = run_cli(capsys, "metrics", str(MICRO_CASES), "--kmax", "3",
                             "--breakdown", "--out", str(out_dir))
        assert code == 0
        assert (out_dir / "metrics.csv").read_text() == MICRO_METRICS_EXPECTED
        assert (out_dir / "breakdown.csv").read_text() == MICRO_BREAKDOWN_EXPECTED


class TestUsageErrors:
    def test_unknown_command(self, capsys):
        code, _, err = run_cli(capsys, "frobnicate")
        assert code == 1

    def test_missing_required_flag(self, capsys):
        code, _, _ = run_cli(capsys, "train", "--out", "/tmp/x")
        assert code == 1
