"""
Tests for grid geometry, node fields and discrete norms
"""

import numpy as np
import pytest

from umblt.models.mesh import (
    EdgeField,
    NodeClass,
    NodeField,
    build_grid,
    classify_node,
    discrete_norm,
    prolong_by_injection,
    restrict_fine_to_coarse,
)
from umblt.utils.errors import GridError


def test_build_grid_spacing():
    g = build_grid((-1, 1, -1, 1), 201, 201)
    assert g.dx == pytest.approx(0.01)
    assert g.dy == pytest.approx(0.01)
    assert g.n_nodes == 201 * 201


def test_smallest_grid_has_one_interior_node(unit_grid):
    assert unit_grid.dx == 0.5
    assert int(unit_grid.interior_mask().sum()) == 1


@pytest.mark.parametrize("nx, ny", [(2, 5), (5, 2)])
def test_grid_without_interior_rejected(nx, ny):
    with pytest.raises(GridError):
        build_grid((0, 1, 0, 1), nx, ny)


def test_degenerate_bounds_rejected():
    with pytest.raises(GridError):
        build_grid((1, 1, 0, 1), 5, 5)


def test_classify_node(unit_grid):
    assert classify_node(unit_grid, 1, 1) == NodeClass.CORNER
    assert classify_node(unit_grid, 1, 2) == NodeClass.BOUNDARY
    assert classify_node(unit_grid, 2, 2) == NodeClass.INTERIOR
    with pytest.raises(GridError):
        classify_node(unit_grid, 0, 2)


def test_node_classes_partition():
    g = build_grid((0, 1, 0, 2), 6, 4)
    classes = g.node_class_array().ravel()
    assert sum(c == NodeClass.CORNER for c in classes) == 4
    assert sum(c == NodeClass.INTERIOR for c in classes) == 4 * 2
    assert sum(c == NodeClass.BOUNDARY for c in classes) == 24 - 8 - 4


def test_index_is_bijective():
    g = build_grid((0, 1, 0, 1), 4, 7)
    seen = set()
    for i in range(1, g.nx + 1):
        for j in range(1, g.ny + 1):
            k = g.index(i, j)
            assert k == (i - 1) * g.ny + j
            assert g.inverse_index(k) == (i, j)
            seen.add(k)
    assert seen == set(range(1, g.n_nodes + 1))


def test_node_field_shape_and_finiteness(unit_grid):
    with pytest.raises(GridError):
        NodeField(unit_grid, np.zeros(8))
    with pytest.raises(GridError):
        NodeField(unit_grid, np.full(9, np.nan))
    f = NodeField(unit_grid, np.arange(9.0))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_edge_field_sizes():
    g = build_grid((0, 1, 0, 1), 4, 6)
    e = EdgeField.constant(g, 2.0)
    assert e.size == ((4 - 1) * 6, 4 * (6 - 1))


def test_restriction_is_injection():
    fine = build_grid((-1, 1, -1, 1), 401, 401)
    coarse = build_grid((-1, 1, -1, 1), 201, 201)
    f = NodeField.from_function(fine, lambda x, y: x + 10 * y)
    r = restrict_fine_to_coarse(f, coarse)
    X, Y = coarse.node_coordinates()
    np.testing.assert_allclose(r.as_array(), X + 10 * Y, atol=1e-12)


def test_restriction_preserves_constants():
    fine = build_grid((0, 1, 0, 1), 21, 21)
    coarse = build_grid((0, 1, 0, 1), 11, 11)
    r = restrict_fine_to_coarse(NodeField.constant(fine, 3.5), coarse)
    assert np.all(r.values == 3.5)


def test_restriction_rejects_non_nested():
    fine = build_grid((-1, 1, -1, 1), 401, 401)
    coarse = build_grid((-1, 1, -1, 1), 300, 300)
    with pytest.raises(GridError):
        restrict_fine_to_coarse(NodeField.constant(fine, 1.0), coarse)
    assert not coarse.is_nested_in(fine)


def test_restriction_left_inverse_of_prolongation(rng):
    coarse = build_grid((0, 1, 0, 1), 5, 5)
    fine = build_grid((0, 1, 0, 1), 17, 17)
    f = NodeField(coarse, rng.normal(size=coarse.n_nodes))
    back = restrict_fine_to_coarse(prolong_by_injection(f, fine), coarse)
    np.testing.assert_array_equal(back.values, f.values)


def test_norms_of_zero(unit_grid):
    zero = NodeField.constant(unit_grid, 0.0)
    for kind in ("L2", "H1", "Linf"):
        assert discrete_norm(zero, kind) == 0.0


def test_norms_of_one():
    # uniform weight dx*dy at each of N^2 nodes: 4 N^2 / (N - 1)^2
    g = build_grid((-1, 1, -1, 1), 201, 201)
    one = NodeField.constant(g, 1.0)
    assert discrete_norm(one, "L2") == pytest.approx(2.01, rel=1e-12)
    assert discrete_norm(one, "H1") == pytest.approx(2.01, rel=1e-12)
    assert discrete_norm(one, "Linf") == 1.0


def test_h1_of_linear_field(unit_grid):
    f = NodeField.from_function(unit_grid, lambda x, y: x + 0 * y)
    # L2^2 = 0.25 * 3 * (0 + 0.25 + 1); gradient part = 0.25 * 6 edges * 1^2
    assert discrete_norm(f, "L2") == pytest.approx(np.sqrt(0.9375))
    assert discrete_norm(f, "H1") == pytest.approx(np.sqrt(0.9375 + 1.5))


def test_norm_properties(rng):
    g = build_grid((0, 2, 0, 1), 11, 7)
    f = NodeField(g, rng.normal(size=g.n_nodes))
    assert discrete_norm(f, "L2") <= discrete_norm(f, "H1")
    for kind in ("L2", "H1", "Linf"):
        scaled = NodeField(g, -3.0 * f.values)
        assert discrete_norm(scaled, kind) == pytest.approx(3.0 * discrete_norm(f, kind))


def test_text_format_round_trip(tmp_path):
    g = build_grid((-1, 1, 0, 2), 4, 3)
    f = NodeField.from_function(g, lambda x, y: x * 10 + y)
    path = tmp_path / "field.txt"
    f.save_txt(path)

    lines = path.read_text().splitlines()
    assert lines[0].split()[:2] == ["4", "3"]
    assert len(lines) == 1 + g.ny
    # row j fixed, i varying
    first_row = [float(v) for v in lines[1].split()]
    np.testing.assert_allclose(first_row, g.x * 10 + g.y[0])

    back = NodeField.load_txt(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_refinement_factor():
    coarse = build_grid((-1, 1, -1, 1), 11, 11)
    assert coarse.refinement_factor(build_grid((-1, 1, -1, 1), 41, 41)) == 4
    assert coarse.refinement_factor(coarse) == 1
    with pytest.raises(GridError):
        coarse.refinement_factor(build_grid((0, 1, 0, 1), 21, 21))
    with pytest.raises(GridError):
        coarse.refinement_factor(build_grid((-1, 1, -1, 1), 41, 21))
