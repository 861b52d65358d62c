"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines; tolerances and runtime budgets are asserted, not just reported.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from ctrec import (
    OCT_KINDS,
    HeuristicConfig,
    SingularCovariance,
    bottom_up,
    build_cross_sectional,
    build_cross_temporal,
    build_temporal,
    coherence_report,
    commutation_matrix,
    cross_sectional_cov,
    cross_temporal_cov,
    generate_coherent,
    iterative,
    ka_two_step,
    naive_base_forecasts,
    project,
    project_structural,
    reconcile_cross_temporal,
    temporal_cov,
)
from ctrec.cli import main as cli_main
from ctrec.covariance import CS_KINDS, T_KINDS
from ctrec.crosstemporal import numerical_rank
from ctrec.evaluation import ErrorCube, avg_rel_index, relative_index
from tests.conftest import random_residuals, random_structure
from tests.test_crosstemporal import COMMUTATION_6, TOY_STRUCT_SUMMING, toy_kernels
from tests.test_reconcile import kkt_oracle, random_spd_w
from tests.test_temporal import MONTHLY_K1, QUARTERLY_K1

TOY_SPEC = "m = 4\n[matrix]\n,W,Z\nX,1,1\n"


def _report(num, desc):
    print(f"ACCEPTANCE {num:02d} PASS: {desc}")


def toy_structure():
    return build_cross_temporal(
        build_cross_sectional([[1, 1]], ["X", "W", "Z"]), build_temporal(4), 1
    )


def test_criterion_01_toy_golden_structure():
    start = time.perf_counter()
    xts = toy_structure()
    redundant, full_rank = toy_kernels()
    np.testing.assert_array_equal(xts.struct_summing.toarray(), TOY_STRUCT_SUMMING)
    assert xts.struct_summing.shape == (21, 8)
    np.testing.assert_array_equal(xts.struct_agg.toarray(), TOY_STRUCT_SUMMING[:13])
    assert xts.struct_agg.shape == (13, 8)
    np.testing.assert_array_equal(xts.kernel_redundant.toarray(), redundant)
    assert xts.kernel_redundant.shape == (16, 21)
    np.testing.assert_array_equal(xts.kernel.toarray(), full_rank)
    assert xts.kernel.shape == (13, 21)
    assert numerical_rank(xts.kernel) == 13
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _report(1, f"toy structural/kernel matrices exact, rank 13 ({elapsed:.3f}s)")


def test_criterion_02_temporal_golden_matrices():
    np.testing.assert_array_equal(build_temporal(4).agg_matrix, QUARTERLY_K1)
    np.testing.assert_array_equal(build_temporal(12).agg_matrix, MONTHLY_K1)
    _report(2, "aggregation matrices for m=4 and m=12 match entry for entry")


def test_criterion_03_commutation_golden():
    np.testing.assert_array_equal(commutation_matrix(3, 2).toarray(), COMMUTATION_6)
    X = np.array([[11.0, 12.0, 13.0], [21.0, 22.0, 23.0]])
    vec_X = X.ravel(order="F")
    vec_Xt = X.T.ravel(order="F")
    np.testing.assert_array_equal(COMMUTATION_6.T @ vec_X, vec_Xt)
    np.testing.assert_array_equal(COMMUTATION_6 @ vec_Xt, vec_X)
    _report(3, "6x6 commutation matrix reproduced and maps vec(X) to vec(X')")


def _bu_values(Y, xts):
    hf = Y[xts.cs.n_a :, xts.ts.level_slice(1, xts.h)]
    return bottom_up(hf, xts).values


def test_criterion_04_coherence_guarantee_all_methods():
    start = time.perf_counter()
    rng = np.random.default_rng(20240815)
    iter_cfg = HeuristicConfig(
        temporal_kind="t-wlsv",
        cross_sectional_kind="cs-shr",
        tolerance=1e-8,
        max_iterations=200,
    )
    checked = 0
    for _ in range(200):
        xts = random_structure(rng, n_max=10, m_choices=(2, 4, 12), h_choices=(1, 2))
        res = random_residuals(rng, xts)
        Y = rng.normal(loc=10.0, scale=5.0, size=(xts.n, xts.width))
        tol = 1e-7 * (1.0 + float(np.max(np.abs(Y))))
        outputs = {"bu": _bu_values(Y, xts)}
        for kind in OCT_KINDS:
            outputs[kind] = reconcile_cross_temporal(
                Y, xts, kind, res
            ).tableau.values
        for order in ("tcs", "cst"):
            cfg = HeuristicConfig(order=order)
            outputs[f"ka-{order}"] = ka_two_step(Y, xts, cfg, res).tableau.values
        outputs["iterative"] = iterative(Y, xts, iter_cfg, res)[0].tableau.values
        for name, vals in outputs.items():
            max_cs = float(np.max(np.abs(xts.cs.kernel @ vals)))
            max_te = float(np.max(np.abs(xts.temporal_kernel @ vals.T)))
            assert max_cs <= tol, f"{name}: cross-sectional violation {max_cs}"
            assert max_te <= tol, f"{name}: temporal violation {max_te}"
            checked += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report(4, f"{checked} reconciled tableaux coherent at 1e-7 ({elapsed:.1f}s)")


def test_criterion_05_oracle_equivalence():
    rng = np.random.default_rng(5)
    done = 0
    while done < 50:
        xts = random_structure(rng, n_max=5, m_choices=(2, 4), h_choices=(1, 2))
        if xts.size > 40:
            continue
        y = rng.normal(loc=3.0, size=xts.size)
        W = random_spd_w(rng, xts.size)
        expected = kkt_oracle(y, W.dense(), xts.kernel.toarray())
        denom = max(1.0, float(np.max(np.abs(expected))))
        got = project(y, W, xts.kernel).y_tilde
        assert np.max(np.abs(got - expected)) / denom <= 1e-9
        via_struct = project_structural(
            y, W, xts.struct_perm @ xts.struct_summing
        ).y_tilde
        assert np.max(np.abs(via_struct - got)) / denom <= 1e-8
        done += 1
    _report(5, "50 instances match the dense KKT oracle and the structural form")


def test_criterion_06_idempotence():
    rng = np.random.default_rng(6)
    for _ in range(10):
        xts = random_structure(rng, n_max=6, m_choices=(2, 4), h_choices=(1, 2))
        res = random_residuals(rng, xts)
        Y = rng.normal(loc=10.0, size=(xts.n, xts.width))
        for kind in ("oct-ols", "oct-wlsv", "oct-shr"):
            once = reconcile_cross_temporal(Y, xts, kind, res).tableau
            twice = reconcile_cross_temporal(once, xts, kind, res).tableau
            scale = max(1.0, float(np.max(np.abs(once.values))))
            assert np.max(np.abs(twice.values - once.values)) <= 1e-10 * scale
    _report(6, "re-reconciling reconciled output moves it by <= 1e-10 relative")


def test_criterion_07_bottom_up_two_forms():
    rng = np.random.default_rng(7)
    for i in range(50):
        xts = random_structure(rng, n_max=6, m_choices=(2, 4, 12), h_choices=(1, 2))
        B = rng.normal(loc=5.0, size=(xts.cs.n_b, xts.h * xts.ts.m))
        product_form = bottom_up(B, xts).vec_by_variable
        structural_form = xts.struct_perm @ (xts.struct_summing @ B.ravel())
        assert np.max(np.abs(product_form - structural_form)) <= 1e-10
    _report(7, "matrix-product and structural bottom-up agree on 50 instances")


def test_criterion_08_iterative_convergence_on_synthetic():
    xts = toy_structure()
    cs, ts = xts.cs, xts.ts
    actuals, _ = generate_coherent(cs, ts, 21, seed=88)
    Y_hat, res = naive_base_forecasts(actuals, cs, ts, origin=20, h=1)
    cfg = HeuristicConfig(
        temporal_kind="t-wlsv",
        cross_sectional_kind="cs-shr",
        tolerance=1e-6,
        max_iterations=50,
    )
    result, trace = iterative(Y_hat, xts, cfg, res)
    assert len(trace) <= 50
    stopped_on = [d_te for _, d_te in trace]
    for a, b in zip(stopped_on[2:], stopped_on[3:]):
        assert b <= a, "stopped-on discrepancy rose after iteration 3"
    scale = 1.0 + float(np.max(np.abs(Y_hat)))
    d_cs, d_te = coherence_report(result.tableau, xts)
    assert d_cs < cfg.tolerance * scale and d_te < cfg.tolerance * scale
    _report(8, f"iterative converged in {len(trace)} iterations, both raw "
               f"discrepancies below the scaled tolerance")


def test_criterion_09_order_sensitivity():
    rng = np.random.default_rng(9)
    xts = toy_structure()
    res = random_residuals(rng, xts)
    Y = rng.normal(loc=10.0, scale=4.0, size=(3, 7))
    a = ka_two_step(Y, xts, HeuristicConfig(order="tcs"), res)
    b = ka_two_step(Y, xts, HeuristicConfig(order="cst"), res)
    rel = np.linalg.norm(a.y_tilde - b.y_tilde) / np.linalg.norm(a.y_tilde)
    assert rel > 1e-6
    for out in (a, b):
        d_cs, d_te = coherence_report(out.tableau, xts)
        scale = 1.0 + float(np.max(np.abs(out.tableau.values)))
        assert d_cs <= 1e-8 * scale and d_te <= 1e-8 * scale
    _report(9, f"temporal-first and cross-sectional-first differ "
               f"(relative L2 {rel:.2e}), both coherent")


def test_criterion_10_evaluation_identities():
    rng = np.random.default_rng(10)
    factors = (2, 1)
    be = {2: rng.normal(size=(3, 6, 1)) + 2, 1: rng.normal(size=(3, 6, 2)) + 2}
    ce = {2: rng.normal(size=(3, 6, 1)) + 2, 1: rng.normal(size=(3, 6, 2)) + 2}

    def cube_of(base, cand):
        return ErrorCube(
            procedures=("base", "cand"),
            series_labels=("T", "B1", "B2"),
            n_a=1,
            factors=factors,
            horizons={2: 1, 1: 2},
            errors={"base": base, "cand": cand},
        )

    cube = cube_of(be, ce)
    assert avg_rel_index(cube, "mse", "base") == 1.0
    assert avg_rel_index(cube, "mae", "base", series="bts") == 1.0

    grand = avg_rel_index(cube, "mse", "cand")
    parts, counts = [], []
    for k in factors:
        parts.append(avg_rel_index(cube, "mse", "cand", levels=[k]))
        counts.append(3 * cube.horizons[k])
    recombined = math.exp(
        sum(c * math.log(p) for p, c in zip(parts, counts)) / sum(counts)
    )
    assert abs(grand - recombined) <= 1e-12

    c = 1024.0  # power of two: scaling is exact in floating point
    scaled = cube_of(
        {k: v * c for k, v in be.items()}, {k: v * c for k, v in ce.items()}
    )
    for measure in ("mse", "mae", "rmse"):
        for i in range(3):
            for k in factors:
                assert relative_index(scaled, measure, i, "cand", k, 1) == \
                    relative_index(cube, measure, i, "cand", k, 1)
        assert avg_rel_index(scaled, measure, "cand") == \
            avg_rel_index(cube, measure, "cand")
    _report(10, "benchmark unity, partition identity at 1e-12, exact scale "
                "invariance")


def test_criterion_11_covariance_contracts():
    xts = toy_structure()
    cs, ts = xts.cs, xts.ts
    actuals, _ = generate_coherent(cs, ts, 34, seed=11)
    _, rich = naive_base_forecasts(actuals, cs, ts, origin=33, h=1)
    assert rich.n_cycles > xts.n * ts.cycle_len
    for kind in CS_KINDS:
        model = cross_sectional_cov(kind, cs, rich.level_matrix(1))
        model.require_spd()
        np.testing.assert_allclose(model.dense(), model.dense().T, atol=1e-12)
        if model.lam is not None:
            assert 0.0 <= model.lam <= 1.0
    for kind in T_KINDS:
        model = temporal_cov(kind, ts, rich.series_block(0))
        model.require_spd()
        np.testing.assert_allclose(model.dense(), model.dense().T, atol=1e-12)
    for kind in OCT_KINDS:
        model = cross_temporal_cov(kind, xts, rich)
        model.require_spd()
        np.testing.assert_allclose(model.dense(), model.dense().T, atol=1e-12)
        if model.lam is not None:
            assert 0.0 <= model.lam <= 1.0

    _, scarce = naive_base_forecasts(actuals, cs, ts, origin=4, h=1)
    assert scarce.n_cycles == 3
    expectations = [
        (lambda: cross_sectional_cov("cs-sam", cs, scarce.level_matrix(4)), "N > n"),
        (lambda: temporal_cov("t-sam", ts, scarce.series_block(0)), "N > k*+m"),
        (lambda: temporal_cov("t-acov", ts, scarce.series_block(0)), "N > m"),
        (lambda: cross_temporal_cov("oct-sam", xts, scarce), "N > n(k*+m)"),
        (lambda: cross_temporal_cov("oct-bdsam", xts, scarce), "N > n"),
        (lambda: cross_temporal_cov("oct-acov", xts, scarce), "N > m"),
    ]
    for build, condition in expectations:
        with pytest.raises(SingularCovariance) as err:
            build()
        assert condition in str(err.value)
    _report(11, "all estimators SPD or raising the named sample-size condition; "
                "shrinkage intensities inside [0, 1]")


def test_criterion_12_cli_end_to_end(tmp_path):
    start = time.perf_counter()
    toy = tmp_path / "toy.txt"
    toy.write_text(TOY_SPEC)
    out = tmp_path / "demo"
    runner = CliRunner()
    r = runner.invoke(
        cli_main,
        ["synth", "--hierarchy", str(toy), "--cycles", "20", "--origins", "91",
         "--seed", "12", "--out", str(out)],
    )
    assert r.exit_code == 0, r.output
    r = runner.invoke(
        cli_main,
        ["reconcile", "--method", "oct-wlsv", "--in", str(out / "runs" / "base"),
         "--residuals", str(out / "residuals"), "--hierarchy", str(toy),
         "--out", str(out / "runs" / "oct-wlsv")],
    )
    assert r.exit_code == 0, r.output
    r = runner.invoke(
        cli_main,
        ["evaluate", "--actuals", str(out / "actuals.csv"),
         "--runs", str(out / "runs"), "--hierarchy", str(toy),
         "--measure", "mse", "--benchmark", "base",
         "--out", str(out / "table.csv")],
    )
    assert r.exit_code == 0, r.output
    lines = Path(out / "table.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:2] == ["group", "procedure"]
    assert "k1_h1" in header and "k1_all" in header and header[-1] == "all"
    assert len(lines) >= 1 + 2  # at least base and oct-wlsv rows
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(12, f"synth -> reconcile -> evaluate over 91 origins in "
                f"{elapsed:.1f}s with a per-level/horizon table")
