import numpy as np
import pytest
from click.testing import CliRunner

from ctrec import build_cross_sectional, build_temporal, generate_coherent
from ctrec.cli import main
from ctrec.io import (
    FormatError,
    read_config,
    read_hierarchy,
    read_residuals,
    read_values,
    write_hierarchy,
    write_residuals,
    write_values,
)
from ctrec.synthgen import naive_base_forecasts

TOY_SPEC = """m = 4
[matrix]
,W,Z
X,1,1
"""

EDGE_SPEC = """m = 4
[edges]
node,parent,weight
W,X,1
Z,X,1
"""


@pytest.fixture
def toy_file(tmp_path):
    p = tmp_path / "toy.txt"
    p.write_text(TOY_SPEC)
    return p


def test_hierarchy_matrix_and_edges_agree(tmp_path, toy_file):
    cs1, ts1 = read_hierarchy(toy_file)
    edge = tmp_path / "edges.txt"
    edge.write_text(EDGE_SPEC)
    cs2, ts2 = read_hierarchy(edge)
    assert cs1.labels == cs2.labels == ("X", "W", "Z")
    np.testing.assert_array_equal(cs1.agg_matrix, cs2.agg_matrix)
    assert ts1.m == ts2.m == 4


def test_hierarchy_round_trip(tmp_path):
    cs = build_cross_sectional(
        [[1, 1, 1], [1, 1, 0]], ["T", "A", "x", "y", "z"]
    )
    ts = build_temporal(12, factors=[12, 3, 1])
    path = tmp_path / "h.txt"
    write_hierarchy(path, cs, ts)
    cs2, ts2 = read_hierarchy(path)
    assert cs2.labels == cs.labels
    np.testing.assert_array_equal(cs2.agg_matrix, cs.agg_matrix)
    assert ts2.factors == ts.factors
    write_hierarchy(tmp_path / "h2.txt", cs2, ts2)
    assert (tmp_path / "h.txt").read_text() == (tmp_path / "h2.txt").read_text()


def test_nested_edge_list(tmp_path):
    spec = """m = 2
[edges]
node,parent,weight
A,TOT,1
B,TOT,1
AA,A,1
AB,A,1
BA,B,1
BB,B,1
"""
    p = tmp_path / "nested.txt"
    p.write_text(spec)
    cs, ts = read_hierarchy(p)
    assert cs.labels == ("TOT", "A", "B", "AA", "AB", "BA", "BB")
    np.testing.assert_array_equal(
        cs.agg_matrix,
        [[1, 1, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1]],
    )


def test_values_round_trip_bit_identical(tmp_path, toy_file):
    cs, ts = read_hierarchy(toy_file)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(3, 14)) * np.pi
    path = tmp_path / "v.csv"
    write_values(path, vals, cs, ts)
    back, cycles = read_values(path, cs, ts)
    assert cycles == 2
    np.testing.assert_array_equal(back, vals)
    write_values(tmp_path / "v2.csv", back, cs, ts)
    assert path.read_text() == (tmp_path / "v2.csv").read_text()


def test_values_missing_key_named(tmp_path, toy_file):
    cs, ts = read_hierarchy(toy_file)
    path = tmp_path / "v.csv"
    write_values(path, np.ones((3, 7)), cs, ts)
    lines = path.read_text().splitlines()
    del lines[5]  # drop one data row
    (tmp_path / "broken.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="missing key"):
        read_values(tmp_path / "broken.csv", cs, ts)


def test_values_duplicate_key(tmp_path, toy_file):
    cs, ts = read_hierarchy(toy_file)
    path = tmp_path / "v.csv"
    write_values(path, np.ones((3, 7)), cs, ts)
    lines = path.read_text().splitlines()
    lines.append(lines[1])
    (tmp_path / "dup.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="duplicate"):
        read_values(tmp_path / "dup.csv", cs, ts)


def test_residuals_round_trip(tmp_path, toy_file):
    cs, ts = read_hierarchy(toy_file)
    actuals, _ = generate_coherent(cs, ts, 10, seed=3)
    _, resid = naive_base_forecasts(actuals, cs, ts, origin=8)
    path = tmp_path / "r.csv"
    write_residuals(path, resid, cs)
    back = read_residuals(path, cs, ts)
    np.testing.assert_array_equal(back.values, resid.values)


def test_read_config(tmp_path):
    p = tmp_path / "cfg.txt"
    p.write_text("# comment\nmethod = oct-wlsv\nmax-iter = 7\n")
    cfg = read_config(p)
    assert cfg == {"method": "oct-wlsv", "max_iter": "7"}


# ---------------------------------------------------------------------------
# CLI


def test_cli_info(toy_file):
    runner = CliRunner()
    result = runner.invoke(main, ["info", str(toy_file)])
    assert result.exit_code == 0
    assert "H': 13 × 21" in result.output
    assert "k*=3" in result.output


def _write_forecasts(tmp_path, toy_file, seed=1):
    cs, ts = read_hierarchy(toy_file)
    actuals, _ = generate_coherent(cs, ts, 12, seed=seed)
    Y_hat, resid = naive_base_forecasts(actuals, cs, ts, origin=10)
    write_values(tmp_path / "fc.csv", Y_hat, cs, ts)
    write_residuals(tmp_path / "res.csv", resid, cs)
    return cs, ts


def test_cli_reconcile_all_method_families(tmp_path, toy_file):
    cs, ts = _write_forecasts(tmp_path, toy_file)
    runner = CliRunner()
    for method in ("bu", "cs-ols", "t-struc", "oct-wlsv"):
        out = tmp_path / f"out-{method}.csv"
        args = [
            "reconcile", "--method", method,
            "--in", str(tmp_path / "fc.csv"),
            "--residuals", str(tmp_path / "res.csv"),
            "--hierarchy", str(toy_file),
            "--out", str(out),
        ]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert "d_cs" in result.output
    vals, cycles = read_values(tmp_path / "out-oct-wlsv.csv", cs, ts)
    assert cycles == 1 and vals.shape == (3, 7)


def test_cli_reconcile_two_cycle_horizon(tmp_path, toy_file):
    cs, ts = read_hierarchy(toy_file)
    actuals, _ = generate_coherent(cs, ts, 12, seed=4)
    Y_hat, resid = naive_base_forecasts(actuals, cs, ts, origin=10, h=2)
    write_values(tmp_path / "fc2.csv", Y_hat, cs, ts)
    write_residuals(tmp_path / "res2.csv", resid, cs)
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["reconcile", "--method", "oct-bdshr", "--in", str(tmp_path / "fc2.csv"),
         "--residuals", str(tmp_path / "res2.csv"),
         "--hierarchy", str(toy_file), "--out", str(tmp_path / "o2.csv")],
    )
    assert result.exit_code == 0, result.output
    vals, cycles = read_values(tmp_path / "o2.csv", cs, ts)
    assert cycles == 2 and vals.shape == (3, 14)


def test_cli_reconcile_exit_codes(tmp_path, toy_file):
    runner = CliRunner()
    cs, ts = _write_forecasts(tmp_path, toy_file)
    # 2: malformed input file
    bad = tmp_path / "bad.csv"
    bad.write_text("series,level_k\nX,4\n")
    result = runner.invoke(
        main,
        ["reconcile", "--method", "bu", "--in", str(bad),
         "--hierarchy", str(toy_file), "--out", str(tmp_path / "o.csv")],
    )
    assert result.exit_code == 2
    # 2: unknown method
    result = runner.invoke(
        main,
        ["reconcile", "--method", "tcs-magic", "--in", str(tmp_path / "fc.csv"),
         "--hierarchy", str(toy_file), "--out", str(tmp_path / "o.csv")],
    )
    assert result.exit_code == 2
    # 3: sample covariance without enough residual columns
    small = tmp_path / "small.csv"
    import csv

    with open(small, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "level_k", "index_within_level", "origin_column", "value"])
        for label_i, label in enumerate(cs.labels):
            for k in ts.factors:
                for l in range(1, ts.M_k[k] + 1):
                    for tau in (1, 2):
                        w.writerow([label, k, l, tau, 0.5 * label_i + l + tau])
    result = runner.invoke(
        main,
        ["reconcile", "--method", "oct-sam", "--in", str(tmp_path / "fc.csv"),
         "--residuals", str(small), "--hierarchy", str(toy_file),
         "--out", str(tmp_path / "o.csv")],
    )
    assert result.exit_code == 3
    assert "N > n(k*+m)" in result.output


def test_cli_heuristic_and_nonconvergence(tmp_path, toy_file):
    _write_forecasts(tmp_path, toy_file)
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["heuristic", "--temporal", "t-wlsv", "--cross-sectional", "cs-shr",
         "--iterative", "--delta", "1e-6",
         "--in", str(tmp_path / "fc.csv"), "--residuals", str(tmp_path / "res.csv"),
         "--hierarchy", str(toy_file), "--out", str(tmp_path / "heur.csv")],
    )
    assert result.exit_code == 0, result.output
    assert "iteration trace" in result.output
    with runner.isolated_filesystem():
        result = runner.invoke(
            main,
            ["heuristic", "--iterative", "--delta", "1e-300", "--max-iter", "1",
             "--in", str(tmp_path / "fc.csv"),
             "--residuals", str(tmp_path / "res.csv"),
             "--hierarchy", str(toy_file), "--out", "never.csv"],
        )
        assert result.exit_code == 4
        assert "trace" in result.output


def test_cli_config_file(tmp_path, toy_file):
    _write_forecasts(tmp_path, toy_file)
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("method = bu\n")
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["reconcile", "--method", "bu", "--in", str(tmp_path / "fc.csv"),
         "--hierarchy", str(toy_file), "--out", str(tmp_path / "o.csv"),
         "--config", str(cfg)],
    )
    assert result.exit_code == 0, result.output


def test_cli_synth_reconcile_evaluate_pipeline(tmp_path, toy_file):
    runner = CliRunner()
    out = tmp_path / "demo"
    result = runner.invoke(
        main,
        ["synth", "--hierarchy", str(toy_file), "--cycles", "10",
         "--origins", "5", "--seed", "2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert (out / "actuals.csv").exists()
    assert len(list((out / "runs" / "base").glob("*.csv"))) == 5

    result = runner.invoke(
        main,
        ["reconcile", "--method", "bu", "--in", str(out / "runs" / "base"),
         "--residuals", str(out / "residuals"), "--hierarchy", str(toy_file),
         "--out", str(out / "runs" / "bu")],
    )
    assert result.exit_code == 0, result.output
    assert len(list((out / "runs" / "bu").glob("*.csv"))) == 5

    result = runner.invoke(
        main,
        ["evaluate", "--actuals", str(out / "actuals.csv"),
         "--runs", str(out / "runs"), "--hierarchy", str(toy_file),
         "--measure", "mse", "--benchmark", "base", "--jobs", "2",
         "--out", str(out / "table.csv")],
    )
    assert result.exit_code == 0, result.output
    assert "percentage improvement" in result.output
    header = (out / "table.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["group", "procedure"]
    assert header[-1] == "all"
    assert "k1_h1" in header and "k4_all" in header
