"""Acceptance criteria, one test per criterion.

Each test enforces its stated tolerance and runtime budget and prints a
single pass line (visible with ``pytest -s`` or in captured output).  Run
the whole gate with::

    pytest tests/test_acceptance.py -v
"""

import math
import time

import pytest

from privtest import (
    GuaranteeConfig,
    SearchConfig,
    blockwise_extend,
    demo_model,
    guarantee_check,
    induced_output_laws,
    monotonicity_check,
    privacy_objective,
    tradeoff_sweep,
    validate_policy,
)
from privtest.cli import main as cli_main
from privtest.verify import (
    suite_convergence,
    suite_exponent_consistency,
    suite_composite_identity,
    suite_primal_dual,
    suite_exponent_bound,
)

SEED = 0


def report(number: int, result_line: str, elapsed: float, budget: float):
    print(f"criterion {number}: {result_line}  [{elapsed:.1f}s / {budget:.0f}s budget]")
    assert elapsed < budget, f"criterion {number} exceeded its runtime budget"


def test_criterion_1_composite_identity():
    t0 = time.time()
    result = suite_composite_identity(seed=SEED, trials=200, tolerance=1e-6)
    elapsed = time.time() - t0
    report(1, result.line(), elapsed, budget=10.0)
    assert result.passed, result.line()


def test_criterion_2_primal_dual_agreement():
    t0 = time.time()
    result = suite_primal_dual(seed=SEED, trials=50, grid_step=1e-3, tolerance=1e-3)
    elapsed = time.time() - t0
    report(2, result.line(), elapsed, budget=30.0)
    assert result.passed, result.line()


def test_criterion_3_three_way_exponents():
    t0 = time.time()
    result = suite_exponent_consistency(seed=SEED, trials=20, grid_step=1e-3, tolerance=2e-3)
    elapsed = time.time() - t0
    report(3, result.line(), elapsed, budget=60.0)
    assert result.passed, result.line()


def test_criterion_4_exponent_convergence():
    t0 = time.time()
    result = suite_convergence(horizons=(100, 200, 400, 800), final_tolerance=0.02)
    elapsed = time.time() - t0
    report(4, result.line(), elapsed, budget=20.0)
    assert result.passed, result.line()


def test_criterion_5_lower_bound_sweep():
    t0 = time.time()
    result = suite_exponent_bound(
        seed=SEED, trials=50, enum_horizons=tuple(range(1, 11)), type_horizons=(100, 400)
    )
    elapsed = time.time() - t0
    report(5, result.line(), elapsed, budget=60.0)
    assert result.passed, result.line()


def test_criterion_6_tradeoff_curve_reproduction():
    t0 = time.time()
    model = demo_model()
    lambdas = [round(0.01 * i, 10) for i in range(17)]
    points = tradeoff_sweep(
        model,
        lambdas,
        [1.0, 2.0],
        GuaranteeConfig(lam=0.0, include_correction=False),
        SearchConfig(grid_points_per_parameter=101, seed=SEED),
    )
    elapsed = time.time() - t0

    # (a) every point feasible
    assert all(p.feasible for p in points)
    s1 = [p.privacy_rate for p in points if p.s == 1.0]
    s2 = [p.privacy_rate for p in points if p.s == 2.0]
    assert len(s1) == len(s2) == len(lambdas)
    # (b) monotone nondecreasing within solver tolerance
    assert all(b >= a - 1e-4 for a, b in zip(s1, s1[1:]))
    assert all(b >= a - 1e-4 for a, b in zip(s2, s2[1:]))
    # (c) larger supply slack never hurts privacy (1e-9 float slack)
    assert all(b <= a + 1e-9 for a, b in zip(s1, s2))
    # (d) no convexity assertion: the curve need not be convex or concave
    report(
        6,
        f"[PASS] tradeoff-curve: {len(points)} points feasible, monotone, "
        f"s2<=s1 (max privacy {max(s1):.6f})",
        elapsed,
        budget=120.0,
    )


def test_criterion_7_blocklength_monotonicity():
    t0 = time.time()
    model = demo_model()
    cfg = GuaranteeConfig(lam=0.1, k=1, s=1.0, include_correction=False)
    rep = monotonicity_check(model, cfg, l=2, search=SearchConfig(seed=SEED), slack=1e-3)
    assert rep.holds, (rep.point_k.privacy_rate, rep.point_n.privacy_rate)

    # the extension of the k=1 optimum must be feasible at n=2 with the
    # identical rate, independently re-verified
    extended = blockwise_extend(rep.point_k.kernel, 2)
    assert validate_policy(extended).ok
    laws = induced_output_laws(model, extended)
    cfg_n = GuaranteeConfig(lam=0.1, k=2, s=1.0, include_correction=False)
    assert guarantee_check(laws, cfg_n, model.prior).passed
    assert privacy_objective(laws) == pytest.approx(rep.point_k.privacy_rate, abs=1e-9)
    elapsed = time.time() - t0
    report(
        7,
        f"[PASS] monotonicity: opt_k={rep.point_k.privacy_rate:.6f} >= "
        f"opt_n={rep.point_n.privacy_rate:.6f} - 1e-3; extension feasible",
        elapsed,
        budget=120.0,
    )


def test_criterion_8_deterministic_csv(tmp_path, capsys):
    t0 = time.time()
    args = [
        "tradeoff", "--lambda-grid", "0:0.16:0.04", "--s", "1,2",
        "--grid-points", "21", "--seed", "123",
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli_main(args + ["--out-csv", str(a)]) == 0
    assert cli_main(args + ["--out-csv", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    elapsed = time.time() - t0
    report(8, "[PASS] determinism: identical seeds give byte-identical CSV",
           elapsed, budget=120.0)
