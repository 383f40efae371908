import math

import numpy as np
import pytest
from scipy.integrate import quad

from config import RunConfig
from explicit_profile import ExplicitProfile
from grid import build_mesh
from hilbert import (
    Cu_closed_form,
    FaVelocity,
    HilbertError,
    HilbertParams,
    VelocityEval,
    far_moments,
    gauss_rule,
    hilbert_power_law,
    moment_Cu,
    power_core,
    power_head_velocity,
    velocity_Fa,
    velocity_closed_rational,
    velocity_spline,
    velocity_total,
)
from spline import QuinticSpline, fit_function

L = 6.0


@pytest.fixture(scope="module")
def bump():
    mesh = build_mesh(L, 0.2, 0.1)
    return fit_function(mesh, lambda x: x * np.exp(-x * x), lambda x: (1.0 - 2.0 * x * x) * np.exp(-x * x))


def _hilbert_reference(spline, x):
    # (1/π) PV ∫ ω(y)/(x - y) dy over the odd extension
    val, _ = quad(lambda y: spline.eval(y), -L, L, weight='cauchy', wvar=x, limit=400,
                  epsabs=1e-13, epsrel=1e-12)
    return -val / math.pi


def _velocity_reference(spline, x, k):
    if k == 0:
        # (1/π) ∫_0^L ω(y) log(|x - y|/(x + y)) dy
        val, _ = quad(lambda y: spline.eval(y) * math.log(abs(x - y) / (x + y)), 0.0, L, points=[x],
                      limit=400, epsabs=1e-13, epsrel=1e-12)
        return val / math.pi
    # ∂^k u = H(∂^{k-1} ω) over the odd extension
    val, _ = quad(lambda y: spline.eval(y, k - 1), -L, L, weight='cauchy', wvar=x, limit=400,
                  epsabs=1e-13, epsrel=1e-12)
    return -val / math.pi


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("x", [0.05, 0.37, 1.3, 2.9, 4.4])
def test_spline_velocity_derivatives_match_quadrature(bump, x, k):
    ev = velocity_spline(bump, x, k)
    ref = _velocity_reference(bump, x, k)
    assert abs(ev.value - ref) <= ev.budget + 1e-8


def test_gauss_rule_moment_defects():
    rule = gauss_rule(8)
    assert rule.nodes.size == 8
    assert np.all(rule.eps[:8] <= 5e-15)
    assert rule.c[0] == pytest.approx(2.0)
    assert rule.eps[8] > 1e-6


def test_params_from_config():
    params = HilbertParams.from_config(RunConfig({'hilbert': {'gauss_order': 10, 'unknown': 1}}))
    assert params.gauss_order == 10
    assert params.M1 == 1e5
    assert params.M2 == 4.0
    assert params.fa_method == 'split'
    params = HilbertParams.from_config(RunConfig({'hilbert': {'fa_method': 'hermite', 'M2': 8.0}}))
    assert (params.fa_method, params.M2) == ('hermite', 8.0)


def test_power_law_coefficient():
    assert hilbert_power_law(0.5) == pytest.approx(-1.0)
    assert hilbert_power_law(1.0 / 3.0) == pytest.approx(-math.sqrt(3.0))


def test_rational_closed_form():
    assert velocity_closed_rational(1.0, 1.0, 1.0, 1) == pytest.approx(-0.5)
    with pytest.raises(HilbertError):
        velocity_closed_rational(1.0, 1.0, 1.0, 4)


def test_velocity_eval_arithmetic():
    a = VelocityEval(1.0, 0.1, {'gauss': 2})
    b = VelocityEval(-0.5, 0.2, {'gauss': 1, 'near': 3})
    total = a + b
    assert total.value == 0.5
    assert total.budget >= 0.3
    assert total.trace == {'gauss': 3, 'near': 3}
    assert 0.5 in total.enclosure()
    scaled = a.scaled(-2.0)
    assert scaled.value == -2.0
    assert scaled.budget >= 0.2


@pytest.mark.parametrize("x", [0.37, 1.3, 2.9])
def test_spline_velocity_matches_quadrature(bump, x):
    ev = velocity_spline(bump, x, 1)
    ref = _hilbert_reference(bump, x)
    assert abs(ev.value - ref) <= ev.budget + 1e-8
    assert ev.trace


def test_spline_velocity_derivative_consistency(bump):
    h = 1e-4
    x = 1.1
    u_plus = velocity_spline(bump, x + h, 0).value
    u_minus = velocity_spline(bump, x - h, 0).value
    assert velocity_spline(bump, x, 1).value == pytest.approx((u_plus - u_minus) / (2 * h), abs=1e-6)


def test_spline_velocity_vanishes_at_origin(bump):
    assert abs(velocity_spline(bump, 0.0, 0).value) <= 1e-10


def test_zero_spline_has_zero_velocity(bump):
    ev = velocity_spline(QuinticSpline.zero(bump.mesh), 2.0, 1)
    assert ev.value == 0.0 and ev.budget == 0.0


def test_spline_velocity_rejects_bad_requests(bump):
    with pytest.raises(HilbertError):
        velocity_spline(bump, -1.0, 1)
    with pytest.raises(HilbertError):
        velocity_spline(bump, 1.0, 4)


def test_fa_velocity_rejects_negative_x():
    with pytest.raises(HilbertError):
        velocity_Fa(0.3, -1.0, 1)


@pytest.mark.slow
def test_fa_velocity_far_field_power_law():
    a = 1.0 / 3.0
    x = 1e6
    ev = velocity_Fa(a, x, 1)
    assert ev.trace == {'asymptotic': 1}
    assert ev.value == pytest.approx(hilbert_power_law(a) * x ** (-a), rel=1e-8)


def test_fa_velocity_rejects_unknown_method():
    with pytest.raises(HilbertError, match="fa_method"):
        FaVelocity(0.3, HilbertParams(fa_method='spline'))


def test_power_core_is_the_cot_power_law():
    a = 1.0 / 3.0
    x = np.array([4.0, 50.0])
    assert power_core(a, x, 1) == pytest.approx(-math.sqrt(3.0) * x ** (-a))
    assert power_core(a, x, 0) == pytest.approx(-math.sqrt(3.0) * 1.5 * x ** (1.0 - a))
    assert power_core(a, x, 2) == pytest.approx(-a * power_core(a, x, 1) / x)
    assert power_core(a, x, 3) == pytest.approx(-(a + 1.0) * power_core(a, x, 2) / x)


def _cut_power_reference(a, y0, x, k):
    if k == 0:
        kern = lambda y: math.log((x - y) / (x + y))
    else:
        c = (-1.0) ** (k - 1) * math.factorial(k - 1)
        kern = lambda y: c * ((x - y) ** -k - (x + y) ** -k)
    val, _ = quad(kern, 0.0, y0, weight='alg', wvar=(-a, 0.0), epsabs=1e-14, epsrel=1e-13)
    return val / math.pi


@pytest.mark.parametrize("a", [1.00043212 / 3, 0.6])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_cut_power_law_velocity_matches_quadrature(a, k):
    y0 = 0.98
    xs = np.array([4.0, 11.5, 300.0])
    val, bud = power_head_velocity(a, y0, xs, k)
    for x, v, b in zip(xs, val, bud):
        ref = _cut_power_reference(a, y0, x, k)
        assert abs(v - ref) <= b + 1e-12 * max(1.0, abs(ref))
    assert np.all(bud < 1e-14)
    with pytest.raises(HilbertError):
        power_head_velocity(a, y0, [3.0], k)


@pytest.mark.slow
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_fa_split_agrees_with_hermite_in_mid_field(k):
    a = 1.00043212 / 3
    split = FaVelocity(a, HilbertParams(fa_method='split'))
    hermite = FaVelocity(a, HilbertParams(fa_method='hermite'))
    xs = np.array([4.0, 5.0, 50.0, 1e3, 2e4])
    vs, bs = split.eval_many(xs, k)
    vh, bh = hermite.eval_many(xs, k)
    assert np.all(np.isfinite(bs))
    assert np.all(np.abs(vs - vh) <= bs + bh)
    assert split.eval(5.0, k).trace == {'split': 1}
    assert split.eval(2.0, k).trace == {'hermite': 1}
    assert hermite.eval(5.0, k).trace == {'hermite': 1}
    # leading power law dominates once x is well past the bulk
    lead = power_core(a, 2e4, k)
    assert vs[-1] == pytest.approx(float(lead), rel=1e-3)


@pytest.mark.parametrize("a", [1.0 / 3.0, 0.6])
def test_moment_cu_encloses_closed_form(a):
    cu = moment_Cu(a)
    assert Cu_closed_form(a) in cu
    assert cu.width < 1e-6
    with pytest.raises(HilbertError):
        moment_Cu(1.2)


def test_far_moments_of_gaussian_bump(bump):
    far = far_moments(bump)
    assert far.m1 == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-5)
    assert far.m3 == pytest.approx(3.0 / (4.0 * math.sqrt(math.pi)), rel=1e-5)
    assert far.m5 > 0.0
    x = 1000.0
    ref, _ = quad(lambda y: bump.eval(y) / (x - y), -L, L, epsabs=1e-16, epsrel=1e-12, limit=200)
    ev = far.up(x, 1)
    assert ev.trace == {'far': 1}
    assert abs(ev.value - ref / math.pi) <= ev.budget + 1e-14
    with pytest.raises(HilbertError):
        far.up(10.0, 1)


@pytest.mark.slow
def test_total_velocity_adds_the_parts(bump):
    profile = ExplicitProfile()
    zero = QuinticSpline.zero(bump.mesh)
    x = 2.0
    ev = velocity_total(profile, zero, x, 1)
    expected = (profile.b_w * velocity_Fa(profile.a_w, x, 1).value
                + velocity_closed_rational(profile.s_w, profile.r_w, x, 1))
    assert ev.value == pytest.approx(expected, rel=1e-12)
    assert velocity_total(profile, zero, -x, 1).value == pytest.approx(ev.value)
    assert velocity_total(profile, zero, -x, 0).value == pytest.approx(-velocity_total(profile, zero, x, 0).value)
