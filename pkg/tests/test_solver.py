import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from config import RunConfig
from explicit_profile import ExplicitProfile
from grid import build_mesh
from solver import (
    FAMILIES,
    U_X0_TARGET,
    CheckpointError,
    DynamicRescalingSolver,
    SolutionState,
    SolverError,
    SolverParams,
    UniquenessResult,
    checkpoint_load,
    checkpoint_save,
    count_peaks,
    export_history_csv,
    make_mesh,
    normalize_values,
    refine_state,
    state_from_dict,
    state_to_dict,
)
from spline import fit_function


@pytest.fixture
def state():
    mesh = build_mesh(5.0, 0.25, 0.1)
    w = fit_function(mesh, lambda x: x * np.exp(-x * x), lambda x: (1 - 2 * x * x) * np.exp(-x * x))
    v = fit_function(mesh, lambda x: 0.1 * x * np.exp(-x), lambda x: 0.1 * (1 - x) * np.exp(-x))
    return SolutionState(mesh, ExplicitProfile(), w, v, 3.0, -1.0, t=0.5, steps=12)


@pytest.fixture
def small_config():
    return RunConfig({'mesh': {'L': 40.0, 'abs_cap': 0.25, 'rel_cap': 0.05}})


def test_normalize_values():
    c_l, c_w = normalize_values(2.0, 3.0, -1.0)
    assert c_l == 3.0
    assert c_w == 0.5


def test_degenerate_profile_cannot_be_normalized():
    with pytest.raises(SolverError):
        normalize_values(0.0, 1.0, 0.0)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_family_hilbert_at_zero(name):
    fam = FAMILIES[name]
    assert fam.fn(np.array([0.0]))[1][0] == pytest.approx(1.0)
    integral, _ = quad(lambda x: fam.fn(x)[0] / x, 0.0, np.inf, limit=200)
    assert fam.hilbert_at_zero == pytest.approx(-2.0 / math.pi * integral, rel=1e-7)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_family_scaling(name):
    fam = FAMILIES[name]
    a, b = fam.scaled(0.6734)
    assert a * b == pytest.approx(0.6734)
    assert a * fam.hilbert_at_zero == pytest.approx(U_X0_TARGET)
    w, w_x = fam.evaluate(np.array([0.0, 0.7]), 0.6734)
    assert w[0] == 0.0
    assert w_x[0] == pytest.approx(0.6734)
    h = 1e-6
    fd = (fam.evaluate(0.7 + h, 0.6734)[0] - fam.evaluate(0.7 - h, 0.6734)[0]) / (2 * h)
    assert w_x[1] == pytest.approx(fd, rel=1e-6)


def test_count_peaks():
    assert count_peaks(np.array([0.0, 1.0, 0.0, 2.0, 0.0])) == 2
    assert count_peaks(np.linspace(0.0, 1.0, 10)) == 0


def test_uniqueness_distances():
    x = np.linspace(0.0, 1.0, 5)
    result = UniquenessResult(x, {1e-4: {'f1': x, 'f2': x + 0.1, 'f3': x - 0.05}}, {}, {})
    d = result.distances(1e-4)
    assert d[('f1', 'f2')] == pytest.approx(0.1)
    assert result.max_distance(1e-4) == pytest.approx(0.15)


def test_make_mesh_applies_refinement():
    base = make_mesh(RunConfig({'mesh': {'L': 10.0, 'abs_cap': 0.5, 'rel_cap': 0.1}}))
    fine = make_mesh(RunConfig({'mesh': {'L': 10.0, 'abs_cap': 0.5, 'rel_cap': 0.1, 'refine': 2}}))
    assert fine.n == 2 * base.n
    assert fine.L == base.L == 10.0


def test_solver_params_from_config():
    params = SolverParams.from_config(RunConfig({'solver': {'cfl': 0.05}}))
    assert params.cfl == 0.05
    assert params.tol == 1e-6


def test_state_dict_round_trip(state):
    data = json.loads(json.dumps(state_to_dict(state, residual_value=1e-3)))
    assert data['residual'] == 1e-3
    back = state_from_dict(data)
    np.testing.assert_array_equal(back.mesh.nodes, state.mesh.nodes)
    np.testing.assert_array_equal(back.omega_p.values, state.omega_p.values)
    np.testing.assert_allclose(back.v_p.curvatures, state.v_p.curvatures)
    assert (back.c_l, back.c_w, back.t, back.steps) == (3.0, -1.0, 0.5, 12)
    assert back.profile == state.profile
    assert back.ratio == pytest.approx(-1.0 / 3.0)


def test_checkpoint_version_mismatch(state):
    data = state_to_dict(state)
    data['version'] = 99
    with pytest.raises(CheckpointError):
        state_from_dict(data)
    del data['version']
    with pytest.raises(CheckpointError):
        state_from_dict(data)


def test_malformed_checkpoint(state):
    data = state_to_dict(state)
    del data['omega_p']
    with pytest.raises(CheckpointError):
        state_from_dict(data)
    data = state_to_dict(state)
    data['profile']['a_w'] = 2.0
    with pytest.raises(CheckpointError):
        state_from_dict(data)


def test_checkpoint_files(state, tmp_path):
    path = tmp_path / 'run' / 'state.json'
    checkpoint_save(state, path)
    back = checkpoint_load(path)
    np.testing.assert_array_equal(back.v_p.slopes, state.v_p.slopes)
    (tmp_path / 'bad.json').write_text('{not json', encoding='utf-8')
    with pytest.raises(CheckpointError):
        checkpoint_load(tmp_path / 'bad.json')
    with pytest.raises(CheckpointError):
        checkpoint_load(tmp_path / 'missing.json')


def test_refine_state_keeps_perturbation(state):
    fine = refine_state(state, 2)
    assert fine.mesh.n == 2 * state.mesh.n
    xs = np.array([0.3, 1.2, 2.2])
    np.testing.assert_allclose(fine.omega_p.eval(xs), state.omega_p.eval(xs), atol=1e-6)


def test_history_csv(tmp_path):
    rows = [{'step': 0, 't': 0.0, 'Re': 1.0, 'c_l': 3.0, 'c_w': -1.0},
            {'step': 1, 't': 0.1, 'Re': 0.5, 'c_l': 3.0, 'c_w': -1.0}]
    path = tmp_path / 'history.csv'
    export_history_csv(rows, path)
    table = np.loadtxt(path, delimiter=',')
    assert table.shape == (2, 5)
    assert path.read_text(encoding='utf-8').startswith('# step,t,Re,c_l,c_w')


@pytest.mark.slow
def test_zero_state_normalization(small_config):
    solver = DynamicRescalingSolver.from_config(small_config)
    state = solver.zero_state()
    p = solver.profile
    assert state.c_l == pytest.approx(2.0 * p.s_v / p.s_w)
    assert state.omega_p.is_zero()
    report = solver.residual(state)
    assert math.isfinite(report.Re)


@pytest.mark.slow
def test_step_advances_time(small_config):
    solver = DynamicRescalingSolver.from_config(small_config)
    state = solver.init_state('zero')
    nxt = solver.step(state)
    assert nxt.t > 0.0
    assert nxt.steps == 1
    assert nxt.omega_p.values[0] == 0.0 and nxt.omega_p.values[-1] == 0.0


@pytest.mark.slow
def test_family_state_is_normalized(small_config):
    solver = DynamicRescalingSolver.from_config(small_config)
    state = solver.family_state('f1')
    fields = solver.state_fields(state)
    assert fields.w_x[0] == pytest.approx(solver.profile.s_w)
    with pytest.raises(SolverError):
        solver.family_state('f9')


@pytest.mark.slow
def test_step_budget_is_reported(small_config):
    solver = DynamicRescalingSolver.from_config(small_config)
    with pytest.raises(SolverError) as info:
        solver.run(solver.zero_state(), tol=1e-300, max_steps=2)
    assert info.value.state is None or info.value.state.steps <= 2
