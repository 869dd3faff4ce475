import json
import math

import numpy as np
import pytest

from edgirls import cli
from edgirls.basis import num_pairs
from edgirls.experiments import (CellResult, ExperimentGrid, bench, cells_to_csv,
                                 phase_transition, rip_bound, rip_default_m, rip_probe,
                                 run_instance, summarize)
from edgirls.dataio import InstanceSpec
from edgirls.geometry import procrustes_distance, read_points_csv
from edgirls.rng import derive_seed


def test_rho_range_parsing():
    assert cli._rho_range("1:2:0.5") == [1.0, 1.5, 2.0]
    assert cli._rho_range("3,1.5") == [1.5, 3.0]
    assert cli._rho_range("1.0:4.0:0.5")[-1] == 4.0


def test_derive_seed():
    assert derive_seed(1, 2.5, "x") == derive_seed(1, 2.5, "x")
    assert derive_seed(1, "x") != derive_seed(1, "y")
    assert 0 <= derive_seed(-3) < 2**63


def test_grid_validation():
    with pytest.raises(ValueError):
        ExperimentGrid(ranks=[2], rhos=[3.0, 1.0])
    with pytest.raises(ValueError):
        ExperimentGrid(ranks=[2], rhos=[1.0], instances=0)
    with pytest.raises(ValueError):
        CellResult(2, 1.0, 1.5, 0.0, 0.0, 0.0, 1.0)


def test_summarize_quantiles():
    rows = [{"tag": (2, 1.0, i), "relative_error": e, "success": e < 1e-3, "wall_ms": 10.0 * i}
            for i, e in enumerate([1e-9, 1e-1, 1e-8, 1.0])]
    (cell,) = summarize(rows)
    assert cell.success_prob == 0.5
    assert cell.q25_err <= cell.median_err <= cell.q75_err
    text = cells_to_csv([cell], timing=False)
    assert text.splitlines()[0] == "rank,rho,success_prob,median_err,q25_err,q75_err"


@pytest.fixture(scope="module")
def tiny_grid():
    return ExperimentGrid(ranks=[2], rhos=[0.5, 4.0], instances=2,
                          spec=InstanceSpec(n=30, r=2), max_outer=60)


def test_tiny_grid_deterministic(tiny_grid):
    cells_a, rows_a = phase_transition(tiny_grid)
    cells_b, rows_b = phase_transition(tiny_grid)
    assert cells_to_csv(cells_a, timing=False) == cells_to_csv(cells_b, timing=False)
    assert [c.rho for c in cells_a] == [0.5, 4.0]
    assert cells_a[0].success_prob == 0.0 and cells_a[1].success_prob == 1.0


def test_grid_cell_reproduces_single_run(tiny_grid):
    job = tiny_grid.jobs()[-1]
    row = run_instance(job)
    _, rows = phase_transition(tiny_grid)
    assert rows[-1]["relative_error"] == row["relative_error"]


def test_bench_smoke():
    (row,) = bench([40], rho=4.0, r=2)
    assert row["n"] == 40 and row["relative_error"] < 1e-8 and row["wall_minutes"] > 0


def test_rip_full_sampling_is_exact():
    n = 12
    out = rip_probe(n, 2, num_pairs(n), trials=2, with_replacement=False, iters=50)
    assert out["norm_PTQPT_minus_PT"] <= 1e-10
    assert out["qomega_norm"] == pytest.approx(1.0, abs=1e-8)


def test_rip_deviation_shrinks_with_m():
    small = rip_probe(20, 2, 400, trials=2, iters=100)["norm_PTQPT_minus_PT"]
    large = rip_probe(20, 2, 6400, trials=2, iters=100)["norm_PTQPT_minus_PT"]
    assert large < 0.5 * small


def test_qomega_norm_bound():
    n = 60
    m = num_pairs(n) // 2
    out = rip_probe(n, 2, m, trials=1, with_replacement=False, iters=100)
    assert out["qomega_norm"] <= rip_bound(n, m)
    assert rip_default_m(60, 2) == math.ceil(16 * 60 * math.log(60))


# --------------------------------------------------------------------------
# command line


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_cli_pipeline(tmp_path):
    pts, smp, out = tmp_path / "p.csv", tmp_path / "s.csv", tmp_path / "run"
    assert run("gen", "--n", 40, "--r", 2, "--out", pts) == 0
    assert run("sample", "--points", pts, "--rho", 4, "--out", smp) == 0
    assert run("solve", "--samples", smp, "--r", 2, "--truth", pts, "--out", out) == 0
    summary = json.loads((tmp_path / "run.json").read_text())
    assert summary["success"] and summary["relative_error"] < 1e-8
    P = read_points_csv((tmp_path / "run.points.csv").read_text())
    assert procrustes_distance(P, read_points_csv(pts.read_text())) < 1e-8
    assert (tmp_path / "run.trace.csv").read_text().startswith("k,eps,")


def test_cli_gen_deterministic(capsys):
    run("gen", "--n", 5, "--r", 2, "--seed", 3)
    a = capsys.readouterr().out
    run("gen", "--n", 5, "--r", 2, "--seed", 3)
    assert capsys.readouterr().out == a and a.startswith("x1,x2\n")


def test_cli_exit_codes(tmp_path, capsys):
    assert run("solve", "--samples", tmp_path / "missing.csv") == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("garbage\n")
    assert run("solve", "--samples", bad) == 1
    pts, smp = tmp_path / "p.csv", tmp_path / "s.csv"
    run("gen", "--n", 30, "--r", 2, "--out", pts)
    run("sample", "--points", pts, "--rho", 0.5, "--out", smp)
    assert run("solve", "--samples", smp, "--max-outer", 3, "--out", tmp_path / "x") == 2


def test_cli_trace_and_phase_transition(tmp_path):
    tr = tmp_path / "t.csv"
    assert run("trace", "--n", 30, "--r", 2, "--rho", 4, "--out", tr) == 0
    rows = tr.read_text().splitlines()
    assert rows[0].split(",")[5] == "procrustes_err" and len(rows) > 2
    pt = tmp_path / "pt.json"
    assert run("phase-transition", "--n", 20, "--rank-list", "2", "--rho-range", "4",
               "--instances", 1, "--max-outer", 40, "--format", "json", "--out", pt) == 0
    data = json.loads(pt.read_text())
    assert data["cells"][0]["success_prob"] == 1.0


def test_cli_rip_probe_and_bench(tmp_path):
    out = tmp_path / "rip.json"
    assert run("rip-probe", "--n", 10, "--r", 2, "--m", 45, "--trials", 1, "--out", out) == 0
    assert "norm_PTQPT_minus_PT" in json.loads(out.read_text())
    b = tmp_path / "b.csv"
    assert run("bench", "--sizes", 30, "--r", 2, "--rho", 4, "--out", b) == 0
    assert b.read_text().splitlines()[0] == "n,relative_error,wall_minutes,iterations"
