import numpy as np
import pytest
from numpy.polynomial import Polynomial

from grid import build_mesh
from spline import QuinticSpline, SplineError, fit_function

L = 4.0


@pytest.fixture
def mesh():
    return build_mesh(L, 0.1, 0.05)


@pytest.fixture
def quintic():
    # satisfies f(0) = f''(0) = 0 and f(L) = f'(L) = f''(L) = 0
    x = Polynomial([0.0, 1.0])
    return x * Polynomial([L, -1.0]) ** 3 * Polynomial([L, 3.0])


def _interior_points(mesh, per_cell=7):
    t = np.linspace(0.05, 0.95, per_cell)
    return (mesh.left[:, None] + mesh.widths[:, None] * t[None, :]).ravel()


def test_quintic_with_boundary_data_is_reproduced(mesh, quintic):
    s = QuinticSpline.fit(mesh, quintic(mesh.nodes), quintic.deriv()(mesh.nodes))
    xs = _interior_points(mesh)
    scale = np.max(np.abs(quintic(xs)))
    for k in range(4):
        p = quintic.deriv(k) if k else quintic
        err = np.max(np.abs(s.eval(xs, k) - p(xs)))
        assert err <= 1e-9 * max(scale, np.max(np.abs(p(xs))))


def test_third_derivative_is_continuous(mesh):
    rng = np.random.default_rng(7)
    f = rng.normal(size=mesh.n + 1)
    d = rng.normal(size=mesh.n + 1)
    f[0] = f[-1] = d[-1] = 0.0
    s = QuinticSpline.fit(mesh, f, d)
    third = np.abs(s.endpoint_derivatives(3)[0]).max()
    assert np.max(np.abs(s.third_derivative_jumps())) <= 1e-8 * third
    left, right = s.endpoint_derivatives(2)
    np.testing.assert_allclose(left[1:], right[:-1], rtol=1e-12, atol=1e-9 * np.abs(left).max())


def test_curvature_vanishes_at_both_ends(mesh, quintic):
    s = QuinticSpline.fit(mesh, quintic(mesh.nodes), quintic.deriv()(mesh.nodes))
    assert s.curvatures[0] == 0.0
    assert s.curvatures[-1] == 0.0


def test_odd_extension_and_support(mesh):
    s = fit_function(mesh, lambda x: x * np.exp(-x), lambda x: (1.0 - x) * np.exp(-x))
    xs = np.array([0.3, 1.1, 2.7])
    np.testing.assert_allclose(s.eval(-xs), -s.eval(xs))
    np.testing.assert_allclose(s.eval(-xs, 1), s.eval(xs, 1))
    assert s.eval(L + 1.0) == 0.0
    assert s.eval(0.0) == 0.0


def test_derivative_order_out_of_range(mesh):
    s = QuinticSpline.zero(mesh)
    assert s.is_zero()
    with pytest.raises(SplineError):
        s.eval(1.0, 6)


def test_fit_rejects_nonzero_origin_value(mesh):
    f = np.zeros(mesh.n + 1)
    f[0] = 1.0
    with pytest.raises(SplineError):
        QuinticSpline.fit(mesh, f, np.zeros(mesh.n + 1))
    with pytest.raises(SplineError):
        QuinticSpline.fit(mesh, np.zeros(3), np.zeros(3))


def test_derivative_bounds_contain_spline(mesh, quintic):
    s = QuinticSpline.fit(mesh, quintic(mesh.nodes), quintic.deriv()(mesh.nodes))
    bounds = s.derivative_bounds()
    t = np.linspace(0.05, 0.95, 9)
    pts = mesh.left[:, None] + mesh.widths[:, None] * t[None, :]
    for k in range(6):
        vals = s.eval(pts, k)
        assert np.all(vals >= bounds[k].low[:, None])
        assert np.all(vals <= bounds[k].up[:, None])


def test_derivative_bounds_on_refined_mesh(mesh, quintic):
    s = QuinticSpline.fit(mesh, quintic(mesh.nodes), quintic.deriv()(mesh.nodes))
    fine = mesh.refine(3)
    bounds = s.derivative_bounds(fine)
    assert bounds[0].mesh is fine
    mids = 0.5 * (fine.left + fine.right)
    vals = s.eval(mids)
    assert np.all(vals >= bounds[0].low) and np.all(vals <= bounds[0].up)


def test_derivative_bounds_contain_node_values(mesh, quintic):
    s = QuinticSpline.fit(mesh, 1e3 * quintic(mesh.nodes), 1e3 * quintic.deriv()(mesh.nodes))
    bounds = s.derivative_bounds()
    for k in range(4):
        left = s.eval(mesh.left, k)
        right = s.eval(mesh.right, k)
        assert np.all(bounds[k].low <= np.minimum(left, right))
        assert np.all(bounds[k].up >= np.maximum(left, right))
        assert np.all(bounds[k].low < bounds[k].up)
