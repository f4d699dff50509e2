import numpy as np
import pytest

from chemoplast.constitutive import von_mises
from chemoplast.coupling import RunReport, Snapshot
from chemoplast.output import write_compare_csv, write_report_csv, write_vtk
from conftest import unit_square_mesh


def parse_vtk(path):
    lines = path.read_text().splitlines()
    out = {}
    i = 0
    while i < len(lines):
        tok = lines[i].split()
        if tok and tok[0] == "SCALARS":
            n = out["ncells"] if out.get("section") == "cell" else out["npoints"]
            out[tok[1]] = np.array([float(v) for v in lines[i + 2:i + 2 + n]])
            i += 2 + n
            continue
        if tok and tok[0] == "POINTS":
            out["npoints"] = int(tok[1])
        elif tok and tok[0] == "CELLS":
            out["ncells"] = int(tok[1])
            out["cells"] = [list(map(int, ln.split())) for ln in lines[i + 1:i + 1 + int(tok[1])]]
        elif tok and tok[0] == "CELL_TYPES":
            out["types"] = set(lines[i + 1:i + 1 + int(tok[1])])
        elif tok and tok[0] == "CELL_DATA":
            out["section"] = "cell"
        elif tok and tok[0] == "POINT_DATA":
            out["section"] = "point"
        i += 1
    return lines, out


def test_vtk_layout_and_values(tmp_path):
    mesh = unit_square_mesh(2)
    m = mesh.n_elements
    sigma = 123.456e6
    stress = np.zeros((m, 4))
    stress[:, 0] = sigma
    kappa = np.zeros(m)
    kappa[::2] = 1e-3
    snap = Snapshot(3, 0.5, np.ones((mesh.n_nodes, 2)), np.linspace(0, 1, mesh.n_nodes), stress,
                    kappa)
    lines, vtk = parse_vtk(write_vtk(mesh, snap, tmp_path / "f.vtk"))
    assert lines[0] == "# vtk DataFile Version 3.0" and "UNSTRUCTURED_GRID" in lines[3]
    assert vtk["npoints"] == mesh.n_nodes and vtk["ncells"] == m
    assert vtk["types"] == {"5"} and all(c[0] == 3 for c in vtk["cells"])
    assert "VECTORS displacement double" in lines
    np.testing.assert_allclose(vtk["concentration"], snap.concentration)
    assert vtk["von_mises"] == pytest.approx(np.full(m, sigma), rel=1e-15)
    np.testing.assert_array_equal(vtk["yielded"], (kappa > 0).astype(float))
    np.testing.assert_array_equal(vtk["kappa"], kappa)


def test_uniaxial_von_mises_equals_the_stress():
    for s in (1.0, 243e6, -7.5e7):
        assert float(von_mises(np.array([s, 0.0, 0.0, 0.0]))) == pytest.approx(abs(s), rel=2e-16)


def test_empty_report_and_compare(tmp_path):
    p = write_report_csv(RunReport(), tmp_path / "r.csv")
    assert p.read_text().strip().split(",")[0] == "step"
    c = write_compare_csv({"a": RunReport()}, tmp_path / "c.csv")
    assert c.read_text().strip().startswith("step,time_s,load_scale,newton_iters_a")
