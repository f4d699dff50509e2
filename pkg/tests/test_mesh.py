import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemoplast.mesh import (
    Mesh,
    MeshError,
    MeshParseError,
    NodalField,
    generate_plate_with_hole,
    load_mesh,
    parse_mesh,
    plate_probe_path,
    sample_along_path,
    write_mesh,
)
from conftest import unit_square_mesh

SQUARE = """# unit square, two triangles
nodes 4
0 0
1 0
1 1
0 1
elements 2
0 1 2
0 2 3
edges 4
0 1 bottom
1 2 right
2 3 top
3 0 left
"""


def plate_area(L=0.36, H=0.2, r=0.05):
    return L * H - math.pi * r * r


# ---------------------------------------------------------------- parsing

def test_parse_square():
    m = parse_mesh(SQUARE)
    assert m.n_nodes == 4 and m.n_elements == 2
    assert m.areas().sum() == pytest.approx(1.0)
    assert sorted(set(m.edge_tags)) == ["bottom", "left", "right", "top"]
    np.testing.assert_array_equal(m.node_set("right"), [1, 2])


def test_clockwise_elements_are_reoriented():
    m = parse_mesh(SQUARE.replace("0 1 2\n", "0 2 1\n"))
    assert np.all(m.areas() > 0)


@pytest.mark.parametrize("text, line", [
    (SQUARE.replace("1 0\n", "1 zero\n", 1), 4),
    (SQUARE.replace("0 2 3\n", "0 2\n"), 9),
    (SQUARE.replace("elements 2", "elements two"), 7),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(MeshParseError) as info:
        parse_mesh(text, "sq.mesh")
    assert info.value.line == line
    assert f"sq.mesh:{line}" in str(info.value)


def test_out_of_range_index_is_reported():
    with pytest.raises(MeshError, match="out of range"):
        parse_mesh(SQUARE.replace("0 2 3\n", "0 2 7\n"))


def test_degenerate_element_is_rejected():
    with pytest.raises(MeshError, match="degenerate"):
        Mesh.from_arrays([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])


def test_open_boundary_is_rejected():
    with pytest.raises(MeshError):
        parse_mesh(SQUARE.replace("edges 4", "edges 3").replace("3 0 left\n", ""))


def test_tagging_an_interior_edge_is_rejected():
    with pytest.raises(MeshError, match="not an edge on the mesh boundary"):
        parse_mesh(SQUARE.replace("edges 4", "edges 5") + "0 2 diagonal\n")


def test_unknown_names_list_the_alternatives():
    m = parse_mesh(SQUARE)
    with pytest.raises(MeshError, match="available"):
        m.node_set("nope")
    with pytest.raises(MeshError, match="available"):
        m.edges_with_tag("nope")


def test_write_and_load_round_trip(tmp_path):
    m = generate_plate_with_hole(refinement=2)
    p = tmp_path / "plate.mesh"
    write_mesh(m, p)
    back = load_mesh(p)
    np.testing.assert_array_equal(back.nodes, m.nodes)
    np.testing.assert_array_equal(back.elements, m.elements)
    assert back.edge_tags == m.edge_tags
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "missing.mesh")


# ---------------------------------------------------------------- generation

@pytest.mark.parametrize("layout, k, tol", [("annulus", 2, 5e-3), ("annulus", 4, 1e-3),
                                            ("annulus", 6, 1e-3), ("delaunay", 4, 5e-3)])
def test_generated_area_approximates_the_plate(layout, k, tol):
    m = generate_plate_with_hole(refinement=k, layout=layout)
    assert np.all(m.areas() > 0)
    assert m.areas().sum() == pytest.approx(plate_area(), rel=tol)


@pytest.mark.parametrize("layout", ["annulus", "delaunay"])
def test_hole_nodes_lie_on_the_circle(layout):
    m = generate_plate_with_hole(refinement=3, layout=layout)
    p = m.nodes[m.node_set("hole")]
    assert np.abs(np.hypot(p[:, 0] - 0.18, p[:, 1] - 0.1) - 0.05).max() <= 1e-12 * 0.05


def test_benchmark_mesh_size_and_probes():
    m = generate_plate_with_hole()
    assert 2000 <= m.n_elements <= 5000
    np.testing.assert_allclose(m.nodes[m.node_set("point_A")[0]], [0.36, 0.1], atol=1e-15)
    np.testing.assert_allclose(m.nodes[m.node_set("point_B")[0]], [0.18, 0.15], atol=1e-15)
    np.testing.assert_allclose(m.nodes[m.node_set("corner_bl")[0]], [0.0, 0.0], atol=1e-15)
    c = m.nodes[m.node_set("path_C")]
    assert np.all(np.abs(c[:, 0] - 0.18) < 1e-12) and np.all(np.diff(c[:, 1]) > 0)
    outer = m.nodes[m.node_set("outer")]
    on_box = ((np.abs(outer[:, 0]) < 1e-12) | (np.abs(outer[:, 0] - 0.36) < 1e-12)
              | (np.abs(outer[:, 1]) < 1e-12) | (np.abs(outer[:, 1] - 0.2) < 1e-12))
    assert on_box.all()


def test_refinement_increases_resolution_monotonically():
    counts = [generate_plate_with_hole(refinement=k).n_elements for k in (1, 2, 3, 4)]
    assert counts == sorted(counts) and len(set(counts)) == 4


def test_delaunay_layout_is_seeded():
    a = generate_plate_with_hole(refinement=3, layout="delaunay", seed=1)
    b = generate_plate_with_hole(refinement=3, layout="delaunay", seed=1)
    np.testing.assert_array_equal(a.nodes, b.nodes)


@pytest.mark.parametrize("kw", [{"hole_radius": 0.2}, {"refinement": 0}, {"length": -1.0},
                                {"layout": "hex"}, {"layout": "delaunay", "jitter": 0.7}])
def test_invalid_generation_arguments(kw):
    with pytest.raises(MeshError):
        generate_plate_with_hole(**kw)


# ---------------------------------------------------------------- fields and sampling

def test_shape_gradients_reproduce_linear_fields():
    m = generate_plate_with_hole(refinement=2)
    u = 3.0 * m.nodes[:, 0] - 2.0 * m.nodes[:, 1] + 1.0
    grad = np.einsum("eia,ei->ea", m.shape_gradients(), u[m.elements])
    np.testing.assert_allclose(grad, np.broadcast_to([3.0, -2.0], grad.shape), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_sampling_is_exact_for_linear_fields(a, b, c):
    m = unit_square_mesh(3)
    f = NodalField(a * m.nodes[:, 0] + b * m.nodes[:, 1] + c)
    samples = sample_along_path(m, f, [[0.0, 0.1], [0.9, 1.0]], 13)
    for s in samples:
        x = s.arclength / math.sqrt(2.0)
        assert s.value == pytest.approx(a * x + b * (0.1 + x) + c, abs=1e-12)
    assert samples[-1].arclength == pytest.approx(0.9 * math.sqrt(2.0))


def test_sampling_vector_fields_and_errors():
    m = unit_square_mesh(2)
    f = NodalField(m.nodes.copy(), "vector2")
    s = sample_along_path(m, f, [[0.0, 0.0], [1.0, 0.5]], 3)
    np.testing.assert_allclose(s[1].value, [0.5, 0.25])
    with pytest.raises(MeshError, match="outside"):
        sample_along_path(m, NodalField(np.zeros(m.n_nodes)), [[0, 0], [2, 2]])
    with pytest.raises(MeshError):
        NodalField(np.zeros(3)).check(m)
    with pytest.raises(ValueError):
        sample_along_path(m, NodalField(np.zeros(m.n_nodes)), [[0, 0]])


def test_probe_path_runs_from_hole_top_to_top_edge():
    np.testing.assert_allclose(plate_probe_path(0.36, 0.2, 0.05), [[0.18, 0.15], [0.18, 0.2]])
