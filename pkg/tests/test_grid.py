import numpy as np
import pytest

from grid import (
    AdaptiveMesh,
    MeshError,
    PiecewiseBound,
    bound_combine,
    bound_ratio_removable,
    bounds_from_curvature,
    bounds_from_derivative,
    build_mesh,
    check_contains,
    spacing_ok,
)


@pytest.fixture
def mesh():
    return build_mesh(20.0, 0.1, 0.05)


def test_build_mesh_respects_spacing(mesh):
    assert mesh.nodes[0] == 0.0
    assert mesh.L == 20.0
    assert np.all(np.diff(mesh.nodes) > 0.0)
    assert np.all(spacing_ok(mesh.nodes, 0.1, 0.05))


def test_build_mesh_grows_geometrically():
    m = build_mesh(1e4, 0.05, 0.02)
    assert m.widths[0] == pytest.approx(0.05)
    assert m.widths[-2] > 10.0
    assert m.n < 2000


@pytest.mark.parametrize("args", [(10.0, 0.0, 0.1), (10.0, 0.1, 0.0), (10.0, 0.1, 1.0), (0.0, 0.1, 0.1)])
def test_build_mesh_rejects_bad_caps(args):
    with pytest.raises(MeshError):
        build_mesh(*args)


def test_mesh_invariants():
    with pytest.raises(MeshError):
        AdaptiveMesh(np.array([0.0, 1.0]), 1.0, 0.5)
    with pytest.raises(MeshError):
        AdaptiveMesh(np.array([0.1, 0.5, 1.0]), 1.0, 0.5)
    with pytest.raises(MeshError):
        AdaptiveMesh(np.array([0.0, 0.5, 0.5, 1.0]), 1.0, 0.5)
    with pytest.raises(MeshError):
        AdaptiveMesh(np.array([0.0, 0.5, 3.0]), 1.0, 0.5)


def test_locate_is_one_based():
    m = AdaptiveMesh(np.array([0.0, 1.0, 2.0, 4.0]), 2.0, 0.5)
    assert m.locate(0.0) == (1, 1.0)
    assert m.locate(1.5) == (2, 1.0)
    assert m.locate(3.0) == (3, 2.0)
    assert m.locate(100.0) == (3, 2.0)
    with pytest.raises(MeshError):
        m.locate(-1.0)


def test_refine_splits_every_interval(mesh):
    fine = mesh.refine(2)
    assert fine.n == 2 * mesh.n
    assert fine.L == mesh.L
    assert np.all(np.isin(mesh.nodes, fine.nodes))
    assert mesh.refine(1) is mesh
    with pytest.raises(MeshError):
        mesh.refine(0)


def test_extend_keeps_prefix(mesh):
    longer = mesh.extend(200.0)
    assert longer.L == 200.0
    np.testing.assert_array_equal(longer.nodes[:mesh.n + 1], mesh.nodes)
    assert mesh.extend(10.0) is mesh


def test_bounds_from_derivative_enclose_sine(mesh):
    b = bounds_from_derivative(mesh, np.sin(mesh.nodes), np.ones(mesh.n))
    assert check_contains(b, np.sin)


def test_bounds_from_curvature_enclose_cosine(mesh):
    b = bounds_from_curvature(mesh, np.cos(mesh.nodes), np.ones(mesh.n))
    assert check_contains(b, np.cos)


def test_bound_combine_add(mesh):
    s = bounds_from_derivative(mesh, np.sin(mesh.nodes), np.ones(mesh.n))
    c = bounds_from_derivative(mesh, np.cos(mesh.nodes), np.ones(mesh.n))
    total = bound_combine('add', s, c)
    assert check_contains(total, lambda x: np.sin(x) + np.cos(x))
    with pytest.raises(MeshError):
        bound_combine('pow', s, c)


def test_bound_compose_decreasing(mesh):
    b = PiecewiseBound.constant(mesh, 1.0, 2.0)
    out = bound_combine('compose', b, fn=lambda v: -v, increasing=False)
    assert np.all(out.low <= -2.0) and np.all(out.up >= -1.0)


def test_piecewise_bound_rejects_inverted(mesh):
    with pytest.raises(MeshError):
        PiecewiseBound(mesh, np.ones(mesh.n), np.zeros(mesh.n))
    with pytest.raises(MeshError):
        PiecewiseBound(mesh, np.zeros(3), np.ones(3))


def test_integral_bounds_of_constant(mesh):
    b = PiecewiseBound.constant(mesh, 2.0, 2.0)
    assert 40.0 in b.integral_bounds()


def test_bound_ratio_removable_encloses_sinc(mesh):
    f = bounds_from_derivative(mesh, np.sin(mesh.nodes), np.ones(mesh.n))
    fx = bounds_from_derivative(mesh, np.cos(mesh.nodes), np.ones(mesh.n))
    ratio = bound_ratio_removable(f, fx)
    assert check_contains(ratio, lambda x: np.sinc(x / np.pi))
    assert ratio.up[0] >= 1.0
    with pytest.raises(MeshError):
        bound_ratio_removable(f, fx, eps=0.01)
