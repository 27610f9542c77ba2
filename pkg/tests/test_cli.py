import os

import numpy as np
import pytest

from rte2d import build_structured_unit_square, save_mesh
from rte2d.cli import main, read_table_csv
from rte2d.analysis import convergence_study, make_case


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def no_crlf(path):
    with open(path, "rb") as fh:
        return b"\r" not in fh.read()


def test_quad_check_isotropic(tmp_path, capsys):
    assert run(tmp_path, "quad-check", "--n-dirs", "16") == 0
    out = capsys.readouterr().out
    assert "phase=hg" in out and "n_dirs=16" in out
    path = tmp_path / "quad_check.csv"
    assert no_crlf(path)
    header, line = path.read_text().splitlines()
    assert header == "phase,eta,n_dirs,weight_sum,m,max_row_dev"
    vals = line.split(",")
    assert vals[0] == "hg"
    assert float(vals[3]) == pytest.approx(2.0 * np.pi, rel=1e-15)
    assert abs(float(vals[4]) - 1.0) <= 1e-14
    assert float(vals[5]) <= 1e-14


def test_quad_check_linear_phase(tmp_path):
    assert run(tmp_path, "quad-check", "--phase", "linear", "--n-dirs", "12") == 0
    line = (tmp_path / "quad_check.csv").read_text().splitlines()[1]
    assert line.startswith("linear,")


def test_convergence_csv_round_trip(tmp_path):
    code = run(
        tmp_path, "convergence", "--case", "1",
        "--levels", "2", "--n0", "4", "--n-dirs", "8",
    )
    assert code == 0
    header, rows = read_table_csv(tmp_path / "table.csv")
    assert header == ("level", "h", "n_elems", "n_dirs", "e1", "e2", "e3", "e4", "eh", "iters")
    assert no_crlf(tmp_path / "table.csv")

    table = convergence_study(make_case(1), 2, n0=4, n_dirs=8)
    assert len(rows) == 2
    for row, ref in zip(rows, table.rows):
        level, h, n_elems, n_dirs, e1, e2, e3, e4, eh, iters = row
        assert level == ref.level
        assert n_elems == ref.n_elems
        assert n_dirs == 8
        assert iters == ref.iterations
        # repr round-trips bit for bit
        assert h == ref.h and e1 == ref.e1 and e2 == ref.e2
        assert e3 == ref.e3 and e4 == ref.e4 and eh == ref.eh

    rates = (tmp_path / "rates.csv").read_text().splitlines()
    assert rates[0] == "from_level,to_level,e1,e2,e3,e4,eh"
    assert len(rates) == 2
    assert rates[1].startswith("0,1,")


def test_compare_outputs(tmp_path):
    code = run(
        tmp_path, "compare", "--case", "1",
        "--levels", "2", "--n0", "4", "--n-dirs", "8",
    )
    assert code == 0
    for name in (
        "table_dodsd.csv", "rates_dodsd.csv",
        "table_dodg.csv", "rates_dodg.csv", "delta_effect.csv",
    ):
        assert (tmp_path / name).exists()
    lines = (tmp_path / "delta_effect.csv").read_text().splitlines()
    assert lines[0] == "level,h,eh_dodsd,eh_dodg,ratio"
    assert len(lines) == 3
    for line in lines[1:]:
        _, _, a, b, r = line.split(",")
        assert float(r) == pytest.approx(float(a) / float(b), rel=1e-15)
    _, sd = read_table_csv(tmp_path / "table_dodsd.csv")
    _, dg = read_table_csv(tmp_path / "table_dodg.csv")
    assert [r[1] for r in sd] == [r[1] for r in dg]  # identical meshes


def test_solve_field_and_schedule_dump(tmp_path, capsys):
    code = run(
        tmp_path, "solve", "--case", "1",
        "--n0", "3", "--n-dirs", "4", "--dump-schedule", "0",
    )
    assert code == 0
    assert "solved case 1" in capsys.readouterr().out

    lines = (tmp_path / "field.csv").read_text().splitlines()
    assert lines[0] == "l,K,centroid_x,centroid_y,u_mean"
    nt = 2 * 3 * 3
    assert len(lines) == 1 + 4 * nt
    first = lines[1].split(",")
    assert (int(first[0]), int(first[1])) == (0, 0)
    mesh = build_structured_unit_square(3)
    cx = mesh.vertices[mesh.triangles[0]].mean(axis=0)
    assert float(first[2]) == pytest.approx(cx[0])
    assert float(first[3]) == pytest.approx(cx[1])
    assert np.isfinite(float(first[4]))

    layers = [
        [int(tok) for tok in line.split()]
        for line in (tmp_path / "schedule.txt").read_text().splitlines()
    ]
    flat = sorted(k for layer in layers for k in layer)
    assert flat == list(range(nt))


def test_solve_with_mesh_file_and_level(tmp_path):
    mesh_file = tmp_path / "base.mesh"
    save_mesh(build_structured_unit_square(2), mesh_file)
    code = run(
        tmp_path, "solve", "--case", "1", "--mesh", str(mesh_file),
        "--n-dirs", "4", "--level", "1",
    )
    assert code == 0
    lines = (tmp_path / "field.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 * (8 * 4)  # one refinement quadruples 8 elements


def test_exit_code_nonconvergence(tmp_path, capsys):
    code = run(
        tmp_path, "solve", "--case", "1",
        "--n0", "2", "--n-dirs", "4", "--max-iter", "1",
    )
    assert code == 3
    assert "error[nonconvergence]" in capsys.readouterr().err


def test_exit_code_bad_dump_index(tmp_path, capsys):
    code = run(
        tmp_path, "solve", "--case", "1",
        "--n0", "2", "--n-dirs", "4", "--dump-schedule", "99",
    )
    assert code == 2
    assert "error[config]" in capsys.readouterr().err


def test_config_file_flags_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# experiment defaults\n"
        "n0 = 4\n"
        "levels = 2\n"
        "n-dirs = 16\n"
        "\n"
        "max-iter = 500\n"
    )
    out = tmp_path / "out"
    code = main([
        "convergence", "--case", "1", "--config", str(cfg),
        "--n-dirs", "8", "--out", str(out),
    ])
    assert code == 0
    _, rows = read_table_csv(out / "table.csv")
    assert len(rows) == 2  # levels from the file
    assert rows[0][2] == 2 * 4 * 4  # n0 from the file
    assert rows[0][3] == 8  # the explicit flag wins


def test_config_file_bad_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n0 = 4\nwibble = 3\n")
    code = main([
        "convergence", "--case", "1", "--config", str(cfg), "--out", str(tmp_path),
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "error[config]" in err
    assert "wibble" in err


def test_config_file_bad_value(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n0 = lots\n")
    code = main([
        "convergence", "--case", "1", "--config", str(cfg), "--out", str(tmp_path),
    ])
    assert code == 2
