import math

import numpy as np
import pytest

from config import RunConfig
from energy import (
    EnergyError,
    StabilityParameters,
    WeightSet,
    cu_cap,
    cu_function,
    export_weights_csv,
    far_samples,
    inner_with_inverse_x,
    kc_constant,
    min_S3x,
    weighted_norm,
    weights_at,
)
from explicit_profile import ExplicitProfile
from grid import AdaptiveMesh, build_mesh
from integrals import l2_norm_bound
from interval import IntervalArray
from solver import SolutionState
from spline import QuinticSpline


@pytest.fixture
def bare_state():
    mesh = build_mesh(10.0, 0.25, 0.1)
    z = QuinticSpline.zero(mesh)
    return SolutionState(mesh, ExplicitProfile(), z, z, 3.0, -1.0)


def test_kc_constant():
    kc = kc_constant(StabilityParameters())
    assert kc.mid == pytest.approx((math.pi * 2.15 / 2.0) ** -0.5, rel=1e-12)
    assert kc.mid == pytest.approx(0.5442, abs=1e-4)


def test_damping_constants():
    sp, ws = StabilityParameters(), WeightSet()
    expected = 1.29 * 0.68 * 0.32 * 0.77 / math.sqrt(3.0)
    assert sp.D_u(ws).mid == pytest.approx(expected, rel=1e-12)
    assert sp.damped_remainder(ws).lo > 0.0
    assert sp.t62(ws).lo > 0.0


def test_parameters_from_config():
    config = RunConfig({'energy': {'weights': {'alpha1': 6.0}, 'parameters': {'lam1': 0.3}}})
    assert WeightSet.from_config(config).alpha1 == 6.0
    assert WeightSet.from_config(config).alpha2 == 3.3
    assert StabilityParameters.from_config(config).lam1 == 0.3
    assert StabilityParameters.from_config(None).lam1 == 0.32


def test_far_cutoff():
    ws = WeightSet()
    low = ws.chi(np.array([1.0, 1e8]))
    assert np.all(low.contains(0.0))
    assert np.all(low.mag < 1e-15)
    high = ws.chi(np.array([1e12]))
    assert high.mid[0] == pytest.approx(1.0, abs=1e-6)
    assert np.all(ws.chi_x(np.array([1e9, 1e10])).lo >= 0.0)


def test_weighted_norm_of_power():
    nodes = np.geomspace(1.0, 1e3, 4000)
    f = nodes ** -1.0
    weight = nodes ** -4.0
    # (f² x⁻⁴)_x = -6 x⁻⁷
    slope = 6.0 * nodes[:-1] ** -7.0
    norm = weighted_norm(nodes, f, weight, slope, decay=(1.0, 6.0))
    assert 1.0 / math.sqrt(5.0) in norm
    with pytest.raises(EnergyError):
        weighted_norm(nodes, f, weight, slope)


def test_weighted_norm_of_function_vanishing_at_last_node():
    nodes = np.linspace(0.0, 1.0, 11)
    f = nodes * (1.0 - nodes)
    # |(f²)_x| = |2 f f_x| <= 1/2
    norm = weighted_norm(nodes, f, np.ones(11), np.full(10, 0.5))
    assert math.sqrt(1.0 / 30.0) in norm


def test_weighted_norm_of_oscillation_vanishing_at_every_node():
    nodes = np.linspace(0.0, math.pi, 51)
    f = np.sin(50.0 * nodes)
    f[-1] = 0.0
    # |(sin² 50x)_x| = |50 sin 100x| <= 50
    norm = weighted_norm(nodes, f, np.ones(51), np.full(50, 50.0))
    assert math.sqrt(math.pi / 2.0) in norm
    assert 1.2533 in norm
    mesh = AdaptiveMesh(nodes, 0.1, 0.5)
    assert l2_norm_bound(mesh, f, np.full(50, 2500.0)) >= math.sqrt(math.pi / 2.0)


def test_inner_with_inverse_x():
    nodes = np.linspace(0.0, 40.0, 4001)
    f = nodes * np.exp(-nodes)
    # (f/x)_x = -e^{-x}
    slope = np.exp(-nodes[:-1])
    assert 1.0 in inner_with_inverse_x(nodes, f, slope, f_x0=1.0, decay=(1.0, 2.0))
    assert 1.0 in inner_with_inverse_x(nodes, f, slope, f_x0=1.0)


def test_far_samples():
    far = far_samples(1e4)
    assert far[0] == pytest.approx(1.5e4)
    assert far[-1] <= 1e14
    assert far_samples(1e15).size == 0


def test_cu_function_is_capped():
    ws, sp = WeightSet(), StabilityParameters()
    x = IntervalArray.from_values(np.geomspace(1e-2, 1e8, 50))
    vals = cu_function(ws, sp, x)
    assert np.all(vals.hi <= cu_cap(ws, sp).hi)
    assert np.all(vals.lo > 0.0)


def test_min_S3x_is_positive():
    assert min_S3x(WeightSet(), cells=400).lo > 0.0


def test_weights_without_velocity(bare_state, tmp_path):
    xs = np.array([0.5, 5.0, 50.0])
    wv = weights_at(bare_state, xs)
    assert np.all(wv.psi.lo > 0.0)
    assert np.all(wv.phi.lo > 0.0)
    assert np.all(wv.chi.mag < 1e-15)
    path = tmp_path / 'weights.csv'
    export_weights_csv(xs, wv, path)
    table = np.loadtxt(path, delimiter=',')
    assert table.shape == (3, 9)
    np.testing.assert_allclose(table[:, 0], xs)


def test_weights_need_positive_points(bare_state):
    with pytest.raises(EnergyError):
        weights_at(bare_state, np.array([0.0, 1.0]))
