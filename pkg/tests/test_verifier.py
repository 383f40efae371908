import math

import numpy as np
import pytest
from numpy.polynomial.polynomial import polyval
from scipy.integrate import quad

from checks import default_checks
from config import RunConfig
from energy import sample_profile, sample_residuals
from explicit_profile import ExplicitProfile
from grid import build_mesh
from hilbert import Density, FieldVelocity, HilbertParams, gauss_rule
from integrals import hardy_constant
from interval import IntervalArray, IntervalMatrix
from solver import SolutionState
from spline import QuinticSpline, fit_function
from verifier import (
    HARDY_CONSTANTS,
    VerificationError,
    VerifyParams,
    copt_bound,
    far_error_decay,
    gq_budget,
    gram_table,
    index_sets_at,
    index_supersets,
    schatten_norm,
    trace_power_root,
    uxxx_bounds,
    uxxx_variation_bounds,
    verification_nodes,
    verify_state,
)


@pytest.fixture(scope="module")
def wide_mesh():
    return build_mesh(1e4, 0.5, 0.1)


def test_verify_params_from_config():
    params = VerifyParams.from_config(RunConfig({'verify': {'copt_p': 24.0, 'window': 30}}))
    assert params.copt_p == 24 and isinstance(params.copt_p, int)
    assert params.window == 30.0
    assert params.eps_bar_max == 1e-4
    assert VerifyParams.from_config(None).ratio_target == -0.333477


def test_hardy_table_matches_formula():
    for p, c in HARDY_CONSTANTS.items():
        assert c == pytest.approx(hardy_constant(p))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_index_supersets_bracket_pointwise_sets(wide_mesh, k):
    delta = 0.05
    for i in (0, 3, 40, wide_mesh.n // 2, wide_mesh.n - 1):
        sup = index_supersets(wide_mesh, i, k, delta=delta)
        a, b = wide_mesh.left[i], wide_mesh.right[i]
        for x in np.linspace(a, b, 6)[:-1]:
            sets = index_sets_at(wide_mesh, float(x), k, delta=delta)
            for name in ('J1', 'J3', 'TL'):
                assert set(sup[name + 'l']) <= set(sets[name]) <= set(sup[name + 'u'])
            assert set(sets['J2']) <= set(sup['J2u'])
            assert set(sets['J4']) <= set(sup['J4u'])


def test_index_sets_partition(wide_mesh):
    sets = index_sets_at(wide_mesh, 7.3, 1)
    every = set(range(wide_mesh.n))
    assert set(sets['J1']) | set(sets['TL']) | set(sets['J2']) == every
    assert not set(sets['J2']) & set(sets['J1'])
    with pytest.raises(VerificationError):
        index_supersets(wide_mesh, wide_mesh.n, 1)


def test_copt_bound_of_small_matrix():
    lo = np.array([[0.5, -1e-3], [-1e-3, 0.3]])
    hi = np.array([[0.5, 1e-3], [1e-3, 0.3]])
    result = copt_bound(IntervalMatrix(lo, hi), p=36)
    assert result.estimate == pytest.approx(0.25)
    assert result.bound.hi >= result.estimate
    assert result.bound.hi < 0.26
    assert result.to_dict()['p'] == 36
    with pytest.raises(VerificationError):
        copt_bound(IntervalMatrix(lo, hi), p=35)


def test_trace_root_and_schatten_norm():
    diag = IntervalMatrix(np.diag([0.5, 0.3]))
    root = trace_power_root(diag, 36)
    assert root.mid == pytest.approx((0.5 ** 36 + 0.3 ** 36) ** (1 / 36), rel=1e-12)
    rot = IntervalMatrix(np.array([[0.0, -0.2], [0.2, 0.0]]))
    assert 0.2 * 2 ** (1 / 4) == pytest.approx(schatten_norm(rot, 4).mid, rel=1e-12)
    with pytest.raises(VerificationError):
        schatten_norm(rot, 3)


def test_verification_nodes_extend_mesh():
    mesh = build_mesh(20.0, 0.25, 0.1)
    z = QuinticSpline.zero(mesh)
    state = SolutionState(mesh, ExplicitProfile(), z, z, 3.0, -1.0)
    nodes = verification_nodes(state, VerifyParams(refine=2, LB_factor=10.0))
    assert nodes[-1] == 200.0
    assert np.all(np.isin(mesh.nodes, nodes))


@pytest.mark.slow
def test_verify_state_reports_every_check():
    mesh = build_mesh(40.0, 0.25, 0.05)
    z = QuinticSpline.zero(mesh)
    state = SolutionState(mesh, ExplicitProfile(), z, z, 3.0, -1.0)
    report = verify_state(state, RunConfig({'verify': {'LB_factor': 10.0, 'far_max': 1e10}}))
    names = [r.name for r in report.results]
    assert len(names) == len(default_checks())
    assert len(set(names)) == len(names)
    assert report.get('scaling_ratio') is not None


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_gq_budget_is_finite_and_vanishes_for_zero_density(k):
    mesh = build_mesh(6.0, 0.2, 0.1)
    bump = fit_function(mesh, lambda x: x * np.exp(-x * x), lambda x: (1.0 - 2.0 * x * x) * np.exp(-x * x))
    budget = gq_budget(bump, 10, k)
    assert budget.errors.shape == (mesh.n,)
    assert np.all(budget.errors >= 0.0)
    assert np.isfinite(budget.total) and budget.total >= 0.0
    assert gq_budget(QuinticSpline.zero(mesh), 10, k).total == 0.0


def test_gq_budget_rejects_bad_order():
    mesh = build_mesh(6.0, 0.2, 0.1)
    with pytest.raises(VerificationError):
        gq_budget(QuinticSpline.zero(mesh), 3, 4)


def _odd_kernel(x, y):
    return 2.0 * y / ((x - y) * (x + y))


def test_gq_budget_bounds_gauss_error_of_rational_density():
    mesh = build_mesh(20.0, 0.5, 0.1)
    spline = fit_function(mesh, lambda x: x / (1.0 + x * x), lambda x: (1.0 - x * x) / (1.0 + x * x) ** 2)
    rule = gauss_rule(8)
    t = 0.5 * (1.0 + rule.nodes)
    w = 0.5 * rule.weights
    dens = Density.from_spline(spline)
    for i in (2, 12):
        budget = gq_budget(spline, i, 1)
        assert 'J5' in budget.sets
        a, b = float(mesh.left[i]), float(mesh.right[i])
        for x in np.linspace(a, b, 10):
            for j in budget.sets['J2u']:
                lo, h, c = dens.left[j], dens.h[j], dens.coeffs[j]
                gauss = float(np.sum(w * polyval(t, c) * _odd_kernel(x, lo + h * t))) * h
                exact, _ = quad(lambda s: polyval((s - lo) / h, c) * _odd_kernel(x, s), lo, lo + h,
                                epsabs=1e-15, epsrel=1e-13, limit=200)
                assert abs(gauss - exact) / math.pi <= budget.errors[j] + 1e-12


def test_gq_budget_difference_bound_only_tightens():
    mesh = build_mesh(20.0, 0.5, 0.1)
    spline = fit_function(mesh, lambda x: x / (1.0 + x * x), lambda x: (1.0 - x * x) / (1.0 + x * x) ** 2)
    i = mesh.n - 2
    for k in (1, 3):
        plain = gq_budget(spline, i, k, cancel=False)
        tight = gq_budget(spline, i, k)
        assert np.all(tight.errors <= plain.errors)
        assert tight.total <= plain.total
    # the even kernel has no difference form
    assert gq_budget(spline, i, 2).total == gq_budget(spline, i, 2, cancel=False).total


def test_index_supersets_on_random_points(wide_mesh):
    rng = np.random.default_rng(7)
    for _ in range(1000):
        i = int(rng.integers(wide_mesh.n))
        k = int(rng.integers(4))
        a, b = wide_mesh.left[i], wide_mesh.right[i]
        x = float(rng.uniform(a, b))
        if x >= b:
            continue
        sup = index_supersets(wide_mesh, i, k)
        sets = index_sets_at(wide_mesh, x, k)
        for name in ('J1', 'J3', 'TL'):
            assert set(sup[name + 'l']) <= set(sets[name]) <= set(sup[name + 'u'])
        assert set(sets['J2']) <= set(sup['J2u'])
        assert set(sets['J4']) <= set(sup['J4u'])
        if not sets['TL'].size:
            assert set(sup['J5']) <= set(sets['J2']) & set(sets['J4'])


def test_uxxx_variation_bounds_of_zero_velocity():
    mesh = build_mesh(50.0, 0.5, 0.1)
    zeros = [IntervalArray.from_values(np.zeros(mesh.n + 1)) for _ in range(4)]
    result = uxxx_variation_bounds(mesh, zeros, 0.0, 0.0)
    for bound in result.bounds:
        assert np.all(bound.low <= 0.0) and np.all(bound.up >= 0.0)
        assert bound.max_abs() < 1e-300


def test_uxxx_variation_bounds_pick_weighted_branch_far_out(wide_mesh):
    zeros = [IntervalArray.from_values(np.zeros(wide_mesh.n + 1)) for _ in range(4)]
    result = uxxx_variation_bounds(wide_mesh, zeros, 1.0, 1.0)
    assert result.branch[0] == 1
    assert result.branch[-1] == 2
    far = wide_mesh.left > 100.0
    assert np.all(result.branch[far] == 2)
    assert result.bounds[3].up[-1] < math.sqrt(wide_mesh.widths[-1])


def test_uxxx_variation_bounds_reject_inconsistent_nodes():
    mesh = build_mesh(5.0, 0.5, 0.1)
    nodes = [IntervalArray.from_values(np.zeros(mesh.n + 1)) for _ in range(3)]
    nodes.append(IntervalArray.from_values(np.arange(mesh.n + 1, dtype=float)))
    with pytest.raises(VerificationError):
        uxxx_variation_bounds(mesh, nodes, 1e-3, 1e-3)


@pytest.mark.slow
def test_uxxx_bounds_contain_interior_velocity():
    mesh = build_mesh(12.0, 0.5, 0.1)
    z = QuinticSpline.zero(mesh)
    state = SolutionState(mesh, ExplicitProfile(), z, z, 3.0, -1.0)
    result = uxxx_bounds(state)
    field = FieldVelocity.omega(state.profile, state.omega_p, HilbertParams())
    for i in (1, mesh.n // 2, mesh.n - 1):
        for x in (mesh.left[i] + 0.3 * mesh.widths[i], mesh.left[i] + 0.8 * mesh.widths[i]):
            for k in range(4):
                iv = field.eval(float(x), k).enclosure()
                assert iv.hi >= result.bounds[k].low[i]
                assert iv.lo <= result.bounds[k].up[i]


@pytest.mark.slow
def test_far_error_decay_bounds_residual_beyond_cutoff():
    mesh = build_mesh(40.0, 0.25, 0.05)
    z = QuinticSpline.zero(mesh)
    state = SolutionState(mesh, ExplicitProfile(), z, z, 3.0, -1.0)
    L_B = 400.0
    decay = far_error_decay(state, L_B)
    x = 2.0 * L_B
    res = sample_residuals(sample_profile(state, [x]))
    (c1, c2), _ = decay.C_omega
    assert res.F_omega[0].mag <= c1 * x ** -decay.a + c2 * x ** (-2.0 * decay.a)


def test_copt_bound_grows_under_widening():
    lo = np.array([[0.5, -1e-3], [-1e-3, 0.3]])
    hi = np.array([[0.5, 1e-3], [1e-3, 0.3]])
    narrow = copt_bound(IntervalMatrix(lo, hi), p=36)
    wide = copt_bound(IntervalMatrix(lo - 1e-3, hi + 1e-3), p=36)
    assert wide.fluctuation_part.hi >= narrow.fluctuation_part.hi
    assert wide.bound.hi >= narrow.bound.hi


def test_gram_table_needs_cells():
    with pytest.raises(VerificationError):
        gram_table(None, {i: None for i in range(1, 10)})
