from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from conftest import load_fixture
from spherevg import cli, quartic
from spherevg.dynamics import PhysicalParams


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def json_rows(text):
    return [json.loads(line) for line in text.splitlines() if line]


WORKED_R2 = f"{3 * math.cos(math.pi / 3)!r},{3 * math.sin(math.pi / 3)!r},0"


def test_eval_worked_example(capsys):
    code, out, _ = run(capsys, "eval", "--r1", "2,0,0", "--r2", WORKED_R2)
    assert code == 0
    (row,) = csv_rows(out)
    assert float(row["alpha"]) == pytest.approx(-0.0653, abs=5e-5)
    assert float(row["L"]) == pytest.approx(3.4271, abs=5e-5)
    assert row["path_class"] == "DirectAndReflected"
    assert row["D_sign"] == "-1"
    assert tuple(row) == cli.EVAL_COLUMNS


def test_csv_and_json_carry_identical_values(capsys):
    _, out_csv, _ = run(capsys, "eval", "--r1", "2,0,0", "--r2", WORKED_R2)
    _, out_json, _ = run(capsys, "eval", "--r1", "2,0,0", "--r2", WORKED_R2, "--format", "json")
    (c,) = csv_rows(out_csv)
    (j,) = json_rows(out_json)
    assert list(c) == list(j)
    for key, value in j.items():
        if isinstance(value, float):
            assert float(c[key]) == value
        else:
            assert c[key] == str(value)


def test_json_round_trips_exactly(unit_params):
    rec = cli.point_record(1.0, (2, 0, 0), (1.5, 2.598, 0.1), unit_params)
    buf = io.StringIO()
    cli.RecordWriter(buf, "json", cli.GRID_COLUMNS).write(rec)
    back = json.loads(buf.getvalue())
    for key in cli.GRID_COLUMNS:
        assert back[key] == rec[key]


def test_eval_antipodal_exits_2(capsys):
    code, out, _ = run(capsys, "eval", "--r1", "2,0,0", "--r2", "-2,0,0", "--format", "json")
    assert code == 2
    (row,) = json_rows(out)
    assert row["error"] == "ShadowedInput"
    assert row["path_class"] == "ShadowedDirect"


def test_eval_inside_sphere_exits_2(capsys):
    code, out, _ = run(capsys, "eval", "--r1", "0.5,0,0", "--r2", "2,0,0")
    assert code == 2
    assert csv_rows(out)[0]["error"] == "EndpointInsideSphere"


@pytest.mark.parametrize("argv", [
    ["eval", "--r1", "1,2", "--r2", "2,0,0"],
    ["eval", "--r1", "a,b,c", "--r2", "2,0,0"],
    ["eval", "--r1", "2,0,0"],
    ["eval", "--r1", "2,0,0", "--r2", "0,3,0", "--mass", "-1"],
    ["eval", "--r1", "2,0,0", "--r2", "0,3,0", "--a", "0"],
    ["grid", "--r1", "2,0,0", "--plane", "normal=0,0"],
    ["grid", "--r1", "2,0,0", "--plane", "normal=0,0,0"],
    ["grid", "--r1", "2,0,0", "--plane", "bogus"],
    ["grid", "--r1", "2,0,0", "--range", "3,1"],
    ["grid", "--r1", "2,0,0", "--res", "1"],
    ["series-study", "--u-values", "x"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_1(capsys, argv):
    assert cli.main(argv) == 1


def test_help_exits_0(capsys):
    assert cli.main(["--help"]) == 0


def test_eval_verify_columns(capsys):
    code, out, _ = run(capsys, "eval", "--r1", "2,0,0", "--r2", WORKED_R2, "--verify")
    (row,) = csv_rows(out)
    assert code == 0
    assert float(row["alpha_discrepancy"]) < 1e-12


def test_out_file(tmp_path, capsys):
    target = tmp_path / "rec.csv"
    code, out, _ = run(capsys, "eval", "--r1", "2,0,0", "--r2", "0,3,0", "--out", str(target))
    assert code == 0 and out == ""
    assert csv_rows(target.read_text())[0]["path_class"] == "DirectAndReflected"


def test_grid_header_is_fixed(capsys):
    code, out, _ = run(capsys, "grid", "--r1", "2,0,0", "--res", "3")
    assert code == 0
    assert out.splitlines()[0] + "\n" == load_fixture("grid_header.csv")


def test_grid_rows_are_row_major(capsys):
    _, out, _ = run(capsys, "grid", "--r1", "2,0,0", "--res", "4", "--range", "-3,3")
    rows = csv_rows(out)
    assert len(rows) == 16
    origin, e1, e2 = cli.parse_plane("normal=0,0,1")
    ticks = np.linspace(-3, 3, 4)
    for k, row in enumerate(rows):
        node = ticks[k % 4] * e1 + ticks[k // 4] * e2
        np.testing.assert_array_equal([float(row[c]) for c in ("x2", "y2", "z2")], node)


def test_grid_flags_rather_than_skips(capsys):
    _, out, _ = run(capsys, "grid", "--r1", "2,0,0", "--res", "9", "--range", "-3,3")
    rows = csv_rows(out)
    classes = {r["path_class"] for r in rows}
    assert len(rows) == 81
    assert {"InsideSphere", "ShadowedDirect", "DirectAndReflected"} <= classes
    for r in rows:
        if r["path_class"] in ("InsideSphere", "ShadowedDirect"):
            assert r["total_re"] == "" and r["alpha"] == ""


def test_grid_node_at_r1_has_free_phase(capsys):
    _, out, _ = run(capsys, "grid", "--r1", "0,2,0", "--res", "5", "--range", "-2,2",
                    "--plane", "normal=0,0,1")
    hits = [r for r in csv_rows(out)
            if (float(r["x2"]), float(r["y2"]), float(r["z2"])) == (0.0, 2.0, 0.0)]
    assert len(hits) == 1
    phase = math.atan2(float(hits[0]["free_im"]), float(hits[0]["free_re"]))
    assert phase == pytest.approx(-0.75 * math.pi, abs=1e-15)


def test_grid_serial_and_parallel_identical(capsys, monkeypatch):
    argv = ["grid", "--r1", "2,0.5,0", "--res", "15", "--plane", "normal=1,1,1,origin=0,0,0.5"]
    monkeypatch.setenv("SPHEREVG_THREADS", "1")
    _, serial, _ = run(capsys, *argv)
    monkeypatch.setenv("SPHEREVG_THREADS", "3")
    _, parallel, _ = run(capsys, *argv)
    assert serial == parallel


def test_bad_thread_setting(capsys, monkeypatch):
    monkeypatch.setenv("SPHEREVG_THREADS", "many")
    assert cli.main(["grid", "--r1", "2,0,0", "--res", "2"]) == 1


def test_full_grid_residuals_and_continuity():
    origin, e1, e2 = cli.parse_plane("normal=0,0,1")
    res = 101
    recs = cli.grid_records(1.0, np.array([2.0, 0.0, 0.0]),
                            cli.grid_nodes(origin, e1, e2, -5.0, 5.0, res), PhysicalParams())
    assert len(recs) == res * res
    lit = [r for r in recs if r["res_eq6"] is not None]
    assert len(lit) > res * res // 2
    assert max(r["res_eq6"] for r in lit) <= 1e-12

    mod = np.full(res * res, np.nan)
    for k, r in enumerate(recs):
        if r["refl_re"] is not None:
            mod[k] = math.hypot(r["refl_re"], r["refl_im"])
    mod = mod.reshape(res, res)
    worst = 0.0
    for line in list(mod) + list(mod.T):
        for i in range(1, res - 2):
            w = line[i - 1:i + 3]
            if np.isnan(w).any():
                continue
            local = max(abs(w[1] - w[0]), abs(w[3] - w[2]))
            worst = max(worst, abs(w[2] - w[1]) / local)
    assert worst <= 10.0


def test_parse_plane_basis():
    origin, e1, e2 = cli.parse_plane("normal=1,2,2,origin=0,0,1")
    n = np.array([1, 2, 2]) / 3
    np.testing.assert_array_equal(origin, [0, 0, 1])
    assert abs(e1 @ n) < 1e-15 and abs(e2 @ n) < 1e-15 and abs(e1 @ e2) < 1e-15
    assert np.linalg.norm(e1) == pytest.approx(1.0) and np.linalg.norm(e2) == pytest.approx(1.0)


def test_negative_vectors_are_values():
    assert cli._join_values(["eval", "--r2", "-2,0,0"]) == ["eval", "--r2=-2,0,0"]


def test_series_study_command(capsys):
    code, out, _ = run(capsys, "series-study", "--format", "json")
    rows = json_rows(out)
    assert code == 0
    assert {r["u"] for r in rows} == {0.1, 0.3, 0.5, 0.7, 0.9}
    for u in (0.1, 0.3, 0.5, 0.7, 0.9):
        block = [r for r in rows if r["u"] == u]
        assert block[0]["fitted_slope"] >= 4.8
        errs = [r["abs_error"] for r in sorted(block, key=lambda r: r["v"])]
        assert errs == sorted(errs)


def test_series_error_grows_with_u():
    rows = cli.series_study(points=3)
    first = {r["u"]: r["abs_error"] for r in rows if r["v"] == min(
        q["v"] for q in rows if q["u"] == r["u"])}
    us = sorted(first)
    # same relative v = s (1 - u); error still rises towards u = 1
    assert all(first[b] > first[a] for a, b in zip(us, us[1:]))


def test_selfcheck_passes(capsys):
    code, out, err = run(capsys, "selfcheck", "--scenes", "60", "--hessian-scenes", "4")
    assert code == 0
    assert "PASS" in err
    rows = csv_rows(out)
    assert {r["check"] for r in rows} == set(cli.SELFCHECK_TOLERANCES)
    assert all(r["passed"] == "True" for r in rows)


def test_selfcheck_is_deterministic():
    a = cli.selfcheck(30, seed=5, n_hessian=2, n_quartic=100)
    b = cli.selfcheck(30, seed=5, n_hessian=2, n_quartic=100)
    assert a == b


def test_selfcheck_catches_corrupted_solver(capsys, monkeypatch):
    honest = quartic.solve_quartic

    def corrupted(coeffs):
        res = honest(coeffs)
        bent = tuple(z * (1 + 1e-6) for z in res.roots)
        real = tuple(x * (1 + 1e-6) for x in res.real_roots)
        return quartic.QuarticRoots(bent, real, res.residuals, res.degree)

    monkeypatch.setattr(quartic, "solve_quartic", corrupted)
    code, out, err = run(capsys, "selfcheck", "--scenes", "20", "--hessian-scenes", "0")
    assert code == 3
    assert "FAIL" in err
