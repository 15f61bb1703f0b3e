import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cavity_eig.cli import ConfigError, load_config, main, parse_config
from cavity_eig.gmsh import write_gmsh
from cavity_eig.mesh import generate_box_mesh

IDENTITY = "[[[1, 0], [0, 0], [0, 0]], [[0, 0], [1, 0], [0, 0]], [[0, 0], [0, 0], [1, 0]]]"


def write_job(tmp_path, geometry='kind = "box"\ndims = [1.0, 1.0, 1.0]\nlevel = 2',
              solver='formulation = "e"\nshift = [19.0, 0.0]\nnev = 4', extra=""):
    text = f"""
[geometry]
{geometry}

[[media]]
eps_r = {IDENTITY}
mu_r = {IDENTITY}

[solver]
{solver}

[output]
dir = "out"
{extra}
"""
    path = tmp_path / "job.toml"
    path.write_text(text)
    return str(path)


def test_mesh_command(tmp_path, capsys):
    job = write_job(tmp_path, extra="mesh_dump = true")
    assert main(["mesh", "--config", job]) == 0
    out = capsys.readouterr().out
    assert "Euler characteristic 1" in out
    assert json.loads((tmp_path / "out" / "mesh.json").read_text())["stats"]["tets"] == 48


def test_solve_and_export(tmp_path, capsys):
    job = write_job(tmp_path, extra="matrices = true")
    assert main(["solve", "--config", job]) == 0
    out = tmp_path / "out"
    res = json.loads((out / "results.json").read_text())
    assert res["header"]["formulation"] == "e"
    assert len(res["modes"]) == 4
    assert all(m["kind"] == "physical" for m in res["modes"])
    assert (out / "results.npz").exists()
    assert sorted(os.listdir(out / "matrices")) == ["A.mtx", "B.mtx", "C.mtx", "D.mtx"]
    assert main(["export-vtk", "--config", job]) == 0
    assert "POINT_DATA" in (out / "modes.vtk").read_text()


def test_overrides(tmp_path):
    job = write_job(tmp_path)
    other = tmp_path / "elsewhere"
    assert main(["solve", "--config", job, "--formulation", "h", "--nev", "2",
                 "--shift", "30,0", "--output", str(other)]) == 0
    res = json.loads((other / "results.json").read_text())
    assert res["header"]["formulation"] == "h"
    assert res["header"]["shift"] == [30.0, 0.0]
    assert len(res["modes"]) == 2


def test_bad_shift_override(tmp_path):
    assert main(["solve", "--config", write_job(tmp_path), "--shift", "abc"]) == 2


def test_missing_config(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.toml")]) == 2
    assert "no such config file" in capsys.readouterr().err


def test_invalid_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[geometry\n")
    assert main(["mesh", "--config", str(p)]) == 2


def test_missing_mesh_file(tmp_path):
    job = write_job(tmp_path, geometry='file = "missing.msh"')
    assert main(["mesh", "--config", job]) == 2


def test_gmsh_geometry(tmp_path, capsys):
    (tmp_path / "c.msh").write_text(write_gmsh(generate_box_mesh(1, 1, 1, 2, 2, 2)))
    job = write_job(tmp_path, geometry='file = "c.msh"')
    assert main(["mesh", "--config", job]) == 0
    assert "tets 48" in capsys.readouterr().out


def test_singular_shift_exit(tmp_path):
    # single cell: one interior edge with an exactly known eigenvalue
    job = write_job(tmp_path, geometry='kind = "box"\ndims = [1.0, 1.0, 1.0]\nlevel = 1',
                    solver='formulation = "e"\nshift = [1.0, 0.0]\nnev = 1')
    cfg = load_config(job)
    from cavity_eig.analysis import solve
    lam = solve(cfg.build_mesh(), cfg.media_for(None), "e", cfg.solver).modes[0].lam
    assert main(["solve", "--config", job, "--shift", f"{lam.real!r},0"]) == 3


def test_non_convergence_exit(tmp_path):
    job = write_job(tmp_path, geometry='kind = "box"\ndims = [1.0, 1.0, 1.0]\nlevel = 3',
                    solver='shift = [19.0, 0.0]\nnev = 8\nncv = 10\nmax_restarts = 0')
    assert main(["solve", "--config", job]) == 3


def test_dummy_threshold_violation_exit(tmp_path):
    job = write_job(tmp_path, extra="", solver='formulation = "h"\nshift = [19.0, 0.0]\nnev = 2')
    with open(job, "a") as fh:
        fh.write("\n[thresholds]\ndummy = 0.0\n")
    assert main(["solve", "--config", job]) == 4


def test_audit_exit_codes(tmp_path, capsys):
    job = write_job(tmp_path, solver='shift = [1.0, 0.0]\nnev = 20')
    assert main(["audit", "--config", job]) == 0
    assert "audit passed" in capsys.readouterr().out
    with open(job, "a") as fh:
        fh.write("\n[thresholds]\ndc = inf\n")
    assert main(["audit", "--config", job]) == 4


def test_sweep(tmp_path):
    job = write_job(tmp_path, solver='shift = [19.0, 0.0]\nnev = 8')
    with open(job, "a") as fh:
        fh.write("\n[sweep]\nmesh_sizes = [2, 3, 4]\nreference = [19.739208802178716, 0]\n"
                 "target = [19.739208802178716, 0]\ncluster = 3\n")
    assert main(["sweep", "--config", job]) == 0
    d = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert len(d["rows"]) == 3 and d["order"] > 1


def test_sweep_single_size(tmp_path):
    job = write_job(tmp_path)
    with open(job, "a") as fh:
        fh.write("\n[sweep]\nmesh_sizes = [2]\n")
    assert main(["sweep", "--config", job]) == 2


def test_sweep_tracking_failure(tmp_path):
    job = write_job(tmp_path, solver='shift = [19.0, 0.0]\nnev = 2')
    with open(job, "a") as fh:
        # nothing physical near the target once every mode counts as dc
        fh.write("\n[thresholds]\ndc = inf\n\n[sweep]\nmesh_sizes = [2, 3]\n")
    assert main(["sweep", "--config", job]) == 5


def test_invalid_thread_env(tmp_path, monkeypatch):
    job = write_job(tmp_path)
    with open(job, "a") as fh:
        fh.write("\n[sweep]\nmesh_sizes = [2, 3]\n")
    monkeypatch.setenv("CAVITY_EIG_THREADS", "many")
    assert main(["sweep", "--config", job]) == 2


BASE = {
    "geometry": {"kind": "box", "dims": [1, 1, 1], "level": 2},
    "media": [{"eps_r": [[[1, 0], [0, 0], [0, 0]], [[0, 0], [1, 0], [0, 0]],
                         [[0, 0], [0, 0], [1, 0]]],
               "mu_r": [[[1, 0], [0, 0], [0, 0]], [[0, 0], [1, 0], [0, 0]],
                        [[0, 0], [0, 0], [1, 0]]]}],
}


def edited(path, value):
    d = json.loads(json.dumps(BASE))
    node = d
    for key in path[:-1]:
        node = node[key]
    if value is None:
        del node[path[-1]]
    else:
        node[path[-1]] = value
    return d


@pytest.mark.parametrize("path, value, message", [
    (("geometry", "kind"), "sphere", "geometry.kind"),
    (("geometry", "dims"), [1, 1], "geometry.dims"),
    (("geometry", "level"), None, "exactly one of 'level' or 'counts'"),
    (("media", 0, "mu_r"), None, "needs both"),
    (("media", 0, "eps_r"), [[[0, 0]] * 3] * 3, r"media\[0\]: near-singular"),
    (("media", 0, "eps_r", 1, 1), [1], r"media\[0\].eps_r\[1\]\[1\]"),
    (("solver",), {"shift": [0, 0]}, "solver.shift"),
    (("solver",), {"nev": 0}, "solver"),
    (("solver",), {"formulation": "x"}, "solver.formulation"),
    (("extra",), {}, "unknown section"),
])
def test_config_errors(path, value, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(edited(path, value))


def test_torus_dims_order():
    d = edited(("geometry",), {"kind": "torus", "dims": [0.4, 0.8], "level": 2})
    with pytest.raises(ConfigError, match="rho1 > rho2"):
        parse_config(d)


def test_region_media():
    d = edited(("media",), [dict(BASE["media"][0], region=1), dict(BASE["media"][0], region=2)])
    job = parse_config(d)
    assert set(job.media) == {1, 2}
    assert np.allclose(job.media[1].eps_r, np.eye(3))


def test_console_script(tmp_path):
    job = write_job(tmp_path)
    r = subprocess.run([sys.executable, "-c", "from cavity_eig.cli import run; run()",
                        "mesh", "--config", job], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "vertices" in r.stdout
