"""End-to-end tests of the command-line interface and its exit codes."""

import json
import math

import pytest

from privtest.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDivergenceCommand:
    def test_kl_inline_bernoulli(self, capsys):
        code, out, _ = run(capsys, "divergence", "--kl", "bern:0.5", "bern:0.25")
        assert code == 0
        value = float(out.split("kl:")[1].strip())
        assert value == pytest.approx(0.1438410362, abs=1e-9)

    def test_chernoff_identical_pmfs(self, capsys):
        code, out, _ = run(capsys, "divergence", "--chernoff", "bern:0.4", "bern:0.4")
        assert code == 0
        assert float(out.split("chernoff:")[1].split("(")[0]) == 0.0

    def test_composite_prints_value_and_maximizer(self, capsys):
        code, out, _ = run(capsys, "divergence", "--t", "bern:0.8", "bern:0.1", "bern:0.25")
        assert code == 0
        assert "composite:" in out and "mu*" in out and "nu*" in out

    def test_pmf_files(self, capsys, tmp_path):
        p = tmp_path / "p.json"
        q = tmp_path / "q.json"
        p.write_text("[0.5, 0.5]")
        q.write_text(json.dumps({"labels": [0, 1], "probs": [0.25, 0.75]}))
        code, out, _ = run(capsys, "divergence", "--kl", str(p), str(q))
        assert code == 0
        assert float(out.split("kl:")[1].strip()) == pytest.approx(0.1438410362, abs=1e-9)

    def test_malformed_pmf_exits_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "divergence", "--kl", str(bad), "bern:0.5")
        assert code == 2
        assert "error" in err

    def test_support_violation_exits_3(self, capsys):
        code, _, err = run(capsys, "divergence", "--kl", "bern:0.5", "bern:1.0")
        assert code == 3


class TestExponentCommand:
    def test_demo_identity_utility(self, capsys):
        code, out, _ = run(capsys, "exponent", "--target", "utility")
        assert code == 0
        value = float(out.splitlines()[0].split(":")[1])
        assert value == pytest.approx(0.1809401482504862, abs=1e-9)

    def test_cross_check_agrees(self, capsys):
        code, out, _ = run(capsys, "exponent", "--target", "privacy", "--cross-check")
        assert code == 0
        assert "sanov form" in out and "cross-check delta" in out

    def test_coarse_grid_cross_check_exits_4(self, capsys):
        # a 6-point sanov grid misses the optimum by far more than 2e-3
        code, _, err = run(
            capsys, "exponent", "--target", "utility", "--cross-check",
            "--grid-step", "0.2",
        )
        assert code == 4
        assert "disagree" in err

    def test_corrupted_model_exits_2(self, capsys, tmp_path):
        doc = {
            "x_alphabet": [0, 1],
            "z_alphabet": [0, 1],
            "prior": [0.5, 0.25, 0.25, 0.25],
            "cond": [[0.1, 0.9], [0.25, 0.75], [0.8, 0.2], [0.9, 0.1]],
            "noise": [0.2, 0.8],
        }
        bad = tmp_path / "model.json"
        bad.write_text(json.dumps(doc))
        code, _, err = run(capsys, "exponent", "--model", str(bad))
        assert code == 2


class TestExactErrorCommand:
    def test_single_slot_hand_value(self, capsys):
        code, out, _ = run(
            capsys, "exact-error", "--target", "utility", "--n", "1",
            "--method", "enumerate",
        )
        assert code == 0
        alpha = float(out.splitlines()[0].split(":")[1])
        assert alpha == pytest.approx(0.1625, abs=1e-14)
        assert "[PASS]" in out

    def test_methods_agree(self, capsys):
        _, out_a, _ = run(
            capsys, "exact-error", "--target", "privacy", "--n", "4",
            "--method", "enumerate",
        )
        _, out_b, _ = run(
            capsys, "exact-error", "--target", "privacy", "--n", "4",
            "--method", "types",
        )
        alpha_a = float(out_a.splitlines()[0].split(":")[1])
        alpha_b = float(out_b.splitlines()[0].split(":")[1])
        assert alpha_a == pytest.approx(alpha_b, abs=1e-12)

    def test_size_cap_exits_5(self, capsys):
        code, _, err = run(
            capsys, "exact-error", "--target", "utility", "--n", "64",
            "--method", "enumerate",
        )
        assert code == 5


class TestTradeoffCommand:
    ARGS = (
        "tradeoff", "--lambda-grid", "0:0.08:0.04", "--grid-points", "21",
        "--seed", "7",
    )

    def test_csv_svg_and_manifest(self, capsys, tmp_path):
        csv_path = tmp_path / "curve.csv"
        svg_path = tmp_path / "curve.svg"
        code, out, _ = run(
            capsys, *self.ARGS, "--out-csv", str(csv_path), "--out-svg", str(svg_path)
        )
        assert code == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "lambda,s,k,privacy_rate,utility_rate,feasible,kernel_params"
        assert len(lines) == 1 + 3 * 2  # 3 lambdas x 2 s values
        manifest = json.loads((tmp_path / "curve.csv.manifest.json").read_text())
        assert manifest["command"] == "tradeoff"
        assert manifest["parameters"]["seed"] == 7
        assert str(csv_path) in manifest["outputs"]
        assert str(svg_path) in manifest["outputs"]
        svg = svg_path.read_text()
        assert svg.startswith("<svg") and "polyline" in svg

    def test_rerun_is_byte_identical(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        sa = tmp_path / "a.svg"
        sb = tmp_path / "b.svg"
        run(capsys, *self.ARGS, "--out-csv", str(a), "--out-svg", str(sa))
        run(capsys, *self.ARGS, "--out-csv", str(b), "--out-svg", str(sb))
        assert a.read_bytes() == b.read_bytes()
        assert sa.read_bytes() == sb.read_bytes()

    def test_unwritable_output_exits_6(self, capsys):
        code, _, err = run(
            capsys, *self.ARGS, "--out-csv", "/nonexistent-dir/curve.csv"
        )
        assert code == 6

    def test_comma_lambda_grid(self, capsys, tmp_path):
        csv_path = tmp_path / "c.csv"
        code, _, _ = run(
            capsys, "tradeoff", "--lambda-grid", "0.0,0.1", "--s", "1",
            "--grid-points", "11", "--out-csv", str(csv_path),
        )
        assert code == 0
        assert len(csv_path.read_text().splitlines()) == 3


class TestVerifyCommand:
    def test_selected_suite_deterministic(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "identity", "--trials", "30", "--seed", "7")
        assert code == 0
        code2, out2, _ = run(capsys, "verify", "--suite", "identity", "--trials", "30", "--seed", "7")
        assert out == out2
        assert "[PASS] composite-identity" in out

    def test_tensorize_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "tensorize")
        assert code == 0
        assert "[PASS]" in out
