import math

import numpy as np
import pytest

from config import RunConfig
from explicit_profile import (
    ExplicitProfile,
    Fa_bounds,
    ProfileError,
    eval_Fa,
    eval_Fa_error,
    eval_Fa_series,
    eval_fa_remainder,
    eval_rational,
    make_explicit,
    rational_velocity,
)
from grid import build_mesh

A = 1.00043212 / 3


def _fa(x):
    return x ** 5 / (1.0 + x ** (5.0 + A))


def test_default_profile_couples_exponents():
    p = make_explicit()
    assert p.a_v == pytest.approx(2.0 * p.a_w)
    assert p.to_dict()['b_w'] == 1.37954


def test_make_explicit_reads_profile_section():
    p = make_explicit(RunConfig({'profile': {'b_w': 2.0, 'a_w': 0.25}}))
    assert p.b_w == 2.0
    assert p.a_v == 0.5


@pytest.mark.parametrize("kwargs", [{'a_w': 1.2, 'a_v': 2.4}, {'a_v': 0.5}, {'s_w': -1.0}, {'r_v': 0.0}])
def test_invalid_parameters_raise(kwargs):
    with pytest.raises(ProfileError):
        ExplicitProfile(**kwargs)


@pytest.mark.parametrize("x", [0.1, 0.9, 2.5, 40.0, 3e4])
def test_fa_matches_closed_form(x):
    assert eval_Fa(A, x) == pytest.approx(_fa(x), rel=1e-12)


def test_fa_is_odd_and_vanishes_at_origin():
    xs = np.array([0.4, 1.7, 12.0])
    np.testing.assert_allclose(eval_Fa(A, -xs), -eval_Fa(A, xs))
    assert eval_Fa(A, 0.0) == 0.0
    assert eval_Fa(A, 0.0, 5) == 120.0


def test_fa_derivative_matches_finite_difference():
    h = 1e-5
    for x in (0.7, 1.3, 6.0):
        fd = (_fa(x + h) - _fa(x - h)) / (2 * h)
        assert eval_Fa(A, x, 1) == pytest.approx(fd, rel=1e-6)


def test_fa_far_series_branch():
    x = 2e5
    assert eval_Fa(A, x) == pytest.approx(_fa(x), rel=1e-12)
    val, err = eval_Fa_series(A, 20.0)
    assert abs(val - _fa(20.0)) <= err + 1e-14
    with pytest.raises(ProfileError):
        eval_Fa_series(A, 5.0)


def test_fa_remainder_avoids_cancellation():
    val, err = eval_fa_remainder(A, [2.0, 20.0])
    assert val[0] == pytest.approx(_fa(2.0) - 2.0 ** -A, abs=1e-14)
    assert val[1] == pytest.approx(_fa(20.0) - 20.0 ** -A, rel=1e-7)
    assert val[1] < 0.0
    assert np.all(err < 1e-12)
    slope, _ = eval_fa_remainder(A, 20.0, 1)
    h = 1e-3
    fd = (_fa(20.0 + h) - (20.0 + h) ** -A - _fa(20.0 - h) + (20.0 - h) ** -A) / (2 * h)
    assert slope[0] == pytest.approx(fd, rel=1e-4)
    with pytest.raises(ProfileError):
        eval_fa_remainder(A, [0.0, 1.0])


def test_fa_error_bounds_node_data():
    err = eval_Fa_error(A, [0.0, 1.0, 2e5], 1)
    assert err[0] == 0.0
    assert np.all(err[1:] > 0.0)
    assert err[1] < 1e-11


def test_fa_order_limits():
    with pytest.raises(ProfileError):
        eval_Fa(A, 0.0, 11)
    with pytest.raises(ProfileError):
        eval_Fa(A, 1.0, 25)


def test_fa_bounds_contain_values():
    mesh = build_mesh(30.0, 0.1, 0.05)
    bounds = Fa_bounds(A, mesh, 4)
    t = np.linspace(0.05, 0.95, 7)
    pts = mesh.left[:, None] + mesh.widths[:, None] * t[None, :]
    for k in range(2):
        vals = eval_Fa(A, pts, k)
        assert np.all(vals >= bounds[k].low[:, None])
        assert np.all(vals <= bounds[k].up[:, None])
    with pytest.raises(ProfileError):
        Fa_bounds(A, mesh, 23)


def test_rational_values():
    s, r = 0.6734, 1.3468
    x = np.array([0.0, 0.5, 3.0])
    np.testing.assert_allclose(eval_rational(s, r, x), s * x / (1 + (r * x) ** 2))
    np.testing.assert_allclose(eval_rational(s, r, x, 1),
                               s * (1 - (r * x) ** 2) / (1 + (r * x) ** 2) ** 2, atol=1e-15)


def test_rational_velocity_closed_forms():
    s, r = 1.0101, 1.0101
    assert rational_velocity(s, r, 0.0) == 0.0
    assert rational_velocity(s, r, 1.0, 1) == pytest.approx(-(s / r) / (1 + r * r))
    assert rational_velocity(1.0, 1.0, 2.0, 0) == pytest.approx(-math.atan(2.0))
    h = 1e-6
    for k in range(3):
        fd = (rational_velocity(s, r, 0.8 + h, k) - rational_velocity(s, r, 0.8 - h, k)) / (2 * h)
        assert rational_velocity(s, r, 0.8, k + 1) == pytest.approx(fd, rel=1e-6)
    with pytest.raises(ProfileError):
        rational_velocity(s, r, 1.0, 4)
