import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import trapezoid

from grid import AdaptiveMesh
from interval import IntervalArray
from integrals import (
    TRULE1,
    TRULE2,
    IntegralError,
    hardy_constant,
    cell_integral,
    interp_pointwise_error,
    l2_interp_budget,
    l2_norm_bound,
    linear_l2_norm,
    node_integral,
    tail_budget,
    trapezoid_budget,
    trapezoid_sum,
)


@pytest.fixture
def unit_mesh():
    return AdaptiveMesh(np.linspace(0.0, 1.0, 11), 0.2, 0.5)


def test_tail_budget_value():
    b = tail_budget(1.0, 2.0, 10.0)
    assert b >= 0.1
    assert b == pytest.approx(0.1, rel=1e-12)
    assert tail_budget(-3.0, 3.0, 1.0) == pytest.approx(1.5, rel=1e-12)


@pytest.mark.parametrize("b, L_B", [(1.0, 10.0), (0.5, 10.0), (2.0, 0.0)])
def test_tail_budget_rejects_bad_arguments(b, L_B):
    with pytest.raises(IntegralError):
        tail_budget(1.0, b, L_B)


def test_trapezoid_sum_of_linear_is_exact():
    x = np.linspace(0.0, 2.0, 21)
    assert 2.0 in trapezoid_sum(x, x)
    with pytest.raises(IntegralError):
        trapezoid_sum(x, x[:-1])


def test_node_integral_encloses_square():
    x = np.linspace(0.0, 1.0, 101)
    iv = node_integral(x, x ** 2, slope=2.0 * x[1:])
    assert Fraction(iv.lo) <= Fraction(1, 3) <= Fraction(iv.hi)
    assert iv.width < 1e-2


def test_node_integral_with_tail():
    x = np.linspace(1.0, 50.0, 2000)
    iv = node_integral(x, x ** -2.0, slope=2.0 * x[:-1] ** -3.0, tail=tail_budget(1.0, 2.0, 50.0))
    assert 1.0 in iv
    with pytest.raises(IntegralError):
        node_integral(x, x ** -2.0, slope=np.ones(3))


def test_node_integral_encloses_peak_between_nodes():
    # the peak sits between nodes, so the trapezoid sum alone misses it
    x = np.linspace(0.0, 1.0, 11)
    f = np.exp(-((x - 0.55) / 0.02) ** 2)
    slope = np.full(10, 42.9)
    iv = node_integral(x, f, slope)
    exact = 0.02 * math.sqrt(math.pi)
    assert trapezoid_sum(x, f).hi < 0.01
    assert exact in iv
    assert 0.03545 in iv


def test_cell_integral():
    widths = np.array([0.5, 0.25, 0.25])
    values = IntervalArray(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 3.0]))
    iv = cell_integral(widths, values)
    assert iv.lo == pytest.approx(0.75) and iv.hi == pytest.approx(1.5)
    assert cell_integral(np.array([]), IntervalArray.from_values(np.array([]))).hi == 0.0
    with pytest.raises(IntegralError):
        cell_integral(widths, values[:2])


def test_trapezoid_budget_variants(unit_mesh):
    ones = np.ones(unit_mesh.n)
    assert trapezoid_budget(unit_mesh, ones, 2.0, TRULE1) == pytest.approx(0.01 / 3.0, rel=1e-12)
    assert trapezoid_budget(unit_mesh, ones, 0.0, TRULE2) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(IntegralError):
        trapezoid_budget(unit_mesh, ones, 1.0, TRULE1)
    with pytest.raises(IntegralError):
        trapezoid_budget(unit_mesh, ones, -0.5, TRULE2)
    with pytest.raises(IntegralError):
        trapezoid_budget(unit_mesh, ones, 2.0, 'simpson')
    with pytest.raises(IntegralError):
        trapezoid_budget(unit_mesh, np.ones(3), 2.0, TRULE1)


def test_linear_l2_norm_of_constant_and_ramp(unit_mesh):
    assert linear_l2_norm(unit_mesh, np.ones(unit_mesh.n + 1)) == pytest.approx(1.0, rel=1e-12)
    ramp = linear_l2_norm(unit_mesh, unit_mesh.nodes)
    assert ramp >= 1.0 / math.sqrt(3.0)
    assert ramp == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-12)
    with pytest.raises(IntegralError):
        linear_l2_norm(unit_mesh, np.ones(3))


def test_interpolation_budgets(unit_mesh):
    assert l2_interp_budget(unit_mesh, np.zeros(unit_mesh.n)) == 0.0
    err = interp_pointwise_error(0.0, 1.0, np.array([0.0, 0.5, 1.0]), 1.0)
    assert err[0] == 0.0 and err[2] == 0.0
    assert err[1] == pytest.approx(0.25 / math.sqrt(3.0))


@pytest.mark.parametrize("p, value", [(3.0, Fraction(4, 25)), (2.0, Fraction(4, 9)),
                                      (Fraction(5, 3), Fraction(36, 49))])
def test_hardy_constants(p, value):
    assert hardy_constant(float(p)) == pytest.approx(float(value), rel=1e-14)


def test_hardy_needs_p_above_half():
    with pytest.raises(IntegralError):
        hardy_constant(0.5)


def test_trule1_bounds_integral_of_square_over_x_squared(unit_mesh):
    # f = x², so f²/x² = x² and f_xx² = 4
    x = unit_mesh.nodes
    budget = trapezoid_budget(unit_mesh, np.full(unit_mesh.n, 4.0), 2.0, TRULE1)
    assert budget == pytest.approx(0.01 / 3.0 * 4.0, rel=1e-12)
    T = trapezoid_sum(x, x ** 2)
    assert Fraction(1, 3) <= Fraction(T.hi + budget)
    assert T.lo - budget <= 1.0 / 3.0


def test_l2_interp_budget_of_sine_against_dense_oracle():
    nodes = np.linspace(0.0, math.pi, 11)
    mesh = AdaptiveMesh(nodes, 0.5, 0.5)
    a, b = mesh.left, mesh.right
    peak = (a <= math.pi / 2.0) & (b >= math.pi / 2.0)
    fxx = np.where(peak, 1.0, np.maximum(np.sin(a), np.sin(b)))
    budget = l2_interp_budget(mesh, fxx)
    xs = np.linspace(0.0, math.pi, 200001)
    err = np.sin(xs) - np.interp(xs, nodes, np.sin(nodes))
    dense = math.sqrt(trapezoid(err * err, xs))
    assert dense <= budget <= 3.0 * dense
    assert l2_norm_bound(mesh, np.sin(nodes), fxx) >= math.sqrt(math.pi / 2.0)
