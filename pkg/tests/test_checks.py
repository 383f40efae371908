from types import SimpleNamespace

import numpy as np
import pytest

from checks import (
    CheckContext,
    CheckRegistry,
    CheckResult,
    CoptCheck,
    DampedRemainderCheck,
    DampingSignCheck,
    H1ShearCheck,
    InequalityCheck,
    ResidualNormCheck,
    ScalingRatioCheck,
    SpeedCheck,
    TPositivityCheck,
    VerificationReport,
    build_registry,
    default_checks,
)
from config import RunConfig
from energy import StabilityParameters, WeightSet
from grid import AdaptiveMesh, PiecewiseBound
from interval import Interval, IntervalArray
from verifier import CoptResult, VerifyParams


class AlwaysFails(InequalityCheck):
    name = 'always_fails'
    target = 'never'

    def evaluate(self, context):
        raise ValueError("no data")


def _ctx(**entries):
    ctx = CheckContext(params=VerifyParams())
    for key, value in entries.items():
        setattr(ctx, key, value)
    return ctx


def test_default_checks_are_unique_and_ordered():
    registry = build_registry()
    names = registry.names()
    assert len(names) == len(default_checks()) == 27
    assert len(set(names)) == len(names)
    priorities = [c.priority for c in registry.checks]
    assert priorities == sorted(priorities)
    assert names[0] == 'damping_negative'
    assert names[-1] == 'scaling_ratio'


def test_duplicate_registration_is_rejected():
    registry = CheckRegistry()
    registry.register(SpeedCheck())
    with pytest.raises(ValueError):
        registry.register(SpeedCheck())
    registry.unregister(SpeedCheck)
    assert registry.names() == []


def test_configure_disables_and_reorders():
    config = RunConfig({'checks': {'copt_bound': {'enabled': False},
                                   'scaling_ratio': {'priority': 1}}})
    registry = build_registry(config)
    assert registry.get_check('copt_bound').enabled is False
    assert registry.names()[0] == 'scaling_ratio'
    report = registry.run(_ctx())
    assert report.get('copt_bound') is None
    assert len(report.results) == 26


def test_missing_inputs_become_failed_entries():
    ctx = _ctx()
    ctx.set_state('evaluation_error', 'weight undefined')
    report = build_registry().run(ctx)
    assert not report.passed
    assert report.n_passed == 0
    speed = report.get('speed_lower_bound')
    assert speed.detail.startswith('not evaluated: missing evaluation')
    assert 'weight undefined' in speed.detail
    assert report.get('copt_bound').detail == 'not evaluated: missing copt'


def test_evaluation_errors_are_recorded():
    registry = CheckRegistry()
    registry.register(AlwaysFails())
    report = registry.run(_ctx(evaluation=object()))
    result = report.get('always_fails')
    assert not result.passed
    assert result.detail == 'evaluation failed: no data'


def test_disabled_check_is_skipped():
    registry = CheckRegistry()
    registry.register(AlwaysFails(enabled=False))
    assert registry.run(_ctx()).results == []
    registry.enable_check('always_fails')
    assert len(registry.run(_ctx()).results) == 1
    registry.disable_check('always_fails')
    assert registry.run(_ctx()).results == []


def test_damped_remainder_check():
    ev = SimpleNamespace(params=StabilityParameters(), weights=WeightSet())
    result = DampedRemainderCheck().evaluate(_ctx(evaluation=ev))
    assert result.passed
    assert result.value.lo > 0.0


@pytest.mark.parametrize("c_w, passed", [(-1.0005, True), (-0.9, False)])
def test_scaling_ratio_check(c_w, passed):
    sample = SimpleNamespace(c_w=Interval.point(c_w), c_l=Interval.point(3.0))
    result = ScalingRatioCheck().evaluate(_ctx(evaluation=SimpleNamespace(sample=sample)))
    assert result.passed is passed
    assert result.threshold == -0.333477


def test_speed_check():
    x = np.array([0.5, 2.0, 10.0])
    sample = SimpleNamespace(x=IntervalArray.from_values(x), c_l=Interval.point(3.0),
                             u=[IntervalArray.from_values(-2.0 * x)], points=x)
    result = SpeedCheck().evaluate(_ctx(evaluation=SimpleNamespace(sample=sample)))
    assert result.passed
    assert 1.0 in result.value


def test_residual_and_copt_checks():
    ledger = SimpleNamespace(get=lambda name: Interval(0.0, 3.3e-5))
    assert ResidualNormCheck().evaluate(_ctx(ledger=ledger)).passed
    copt = CoptResult(Interval(0.98, 0.993), 0.95, Interval(0.9, 0.97), Interval(0.0, 0.02), 36)
    result = CoptCheck().evaluate(_ctx(copt=copt))
    assert result.passed
    assert 'p=36' in result.detail
    bad = CoptResult(Interval(0.99, 1.01), 0.95, Interval(0.9, 1.0), Interval(0.0, 0.02), 36)
    assert not CoptCheck().evaluate(_ctx(copt=bad)).passed


def _sample_report():
    report = VerificationReport()
    report.add(CheckResult('copt_bound', True, Interval(0.98, 0.99), 0.999, 'C_opt < 0.999', 'p=36'))
    report.add(CheckResult('speed_lower_bound', False, None, 0.4, '|c_l x + u| >= 0.4 x', 'missing'))
    return report


def test_report_round_trip(tmp_path):
    report = _sample_report()
    path = tmp_path / 'out' / 'report.json'
    report.save(path)
    back = VerificationReport.load(path)
    assert back.to_dict() == report.to_dict()
    assert back.passed is False
    assert [r.name for r in back.failed()] == ['speed_lower_bound']
    assert back.get('copt_bound').value == Interval(0.98, 0.99)


def test_report_rejects_duplicates_and_bad_files(tmp_path):
    report = _sample_report()
    with pytest.raises(ValueError):
        report.add(CheckResult('copt_bound', False))
    (tmp_path / 'bad.json').write_text('[', encoding='utf-8')
    with pytest.raises(RuntimeError):
        VerificationReport.load(tmp_path / 'bad.json')
    with pytest.raises(RuntimeError):
        VerificationReport.load(tmp_path / 'missing.json')


def test_format_table():
    lines = _sample_report().format_table().splitlines()
    assert lines[0].startswith('check')
    assert set(lines[1].replace(' ', '')) == {'-'}
    assert 'PASS' in lines[2] and '[0.98, 0.99]' in lines[2]
    assert 'FAIL' in lines[3]


def _pair(lo, hi):
    return IntervalArray(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))


def test_damping_sign_covers_cells():
    ev = SimpleNamespace(damp=SimpleNamespace(D_theta=_pair([-1.0, -1.0], [-1.0, -1.0]),
                                              D_omega=_pair([-2.0, -2.0], [-2.0, -2.0])),
                         sample=SimpleNamespace(points=np.array([1.0, 2.0])))
    assert DampingSignCheck().evaluate(_ctx(evaluation=ev)).passed
    # negative at both nodes, not certainly negative on a cell between them
    cells = SimpleNamespace(damp=SimpleNamespace(D_theta=_pair([-1.0, -1.0], [-0.5, 0.1]),
                                                 D_omega=_pair([-2.0, -2.0], [-2.0, -2.0])))
    result = DampingSignCheck().evaluate(_ctx(evaluation=ev, cells=cells))
    assert not result.passed
    assert result.value.hi >= 0.1


def test_t_positivity_covers_cells():
    ev = SimpleNamespace(sample=SimpleNamespace(points=np.array([1.0, 2.0])))
    ode = SimpleNamespace(T={1: _pair([1.0, 2.0], [1.5, 2.5])})
    assert TPositivityCheck(1).evaluate(_ctx(evaluation=ev, ode=ode)).passed
    cells = SimpleNamespace(T={1: _pair([-0.1, 1.0], [1.0, 2.0])})
    assert not TPositivityCheck(1).evaluate(_ctx(evaluation=ev, ode=ode, cells=cells)).passed


def _h1_context(low: float, up: float) -> CheckContext:
    coarse = AdaptiveMesh(np.array([0.0, 1.0, 2.0]), 1.0, 0.5)
    flat = [PiecewiseBound(coarse, np.zeros(2), np.zeros(2)) for _ in range(3)]
    uxxx = SimpleNamespace(bounds=flat + [PiecewiseBound(coarse, np.full(2, low), np.full(2, up))])
    zeros = IntervalArray.from_values(np.zeros(1))
    ev = SimpleNamespace(
        sample=SimpleNamespace(x=IntervalArray.from_values(np.array([1.0])), u=[zeros] * 4,
                               points=np.array([1.0])),
        wv=SimpleNamespace(psi=IntervalArray.from_values(np.ones(1)), psi_x=zeros))
    cells = SimpleNamespace(
        sample=SimpleNamespace(x=_pair([0.5, 1.0, 1.5], [1.0, 1.5, 2.0])),
        wv=SimpleNamespace(psi=IntervalArray.from_values(np.ones(3)),
                           psi_x=IntervalArray.from_values(np.zeros(3))),
        parent=np.array([0, 0, 1, 1]), inner=np.array([False, True, True, True]))
    return _ctx(evaluation=ev, uxxx=uxxx, cells=cells)


def test_h1_shear_uses_velocity_bounds_on_cells():
    assert H1ShearCheck().evaluate(_h1_context(-1e-3, 0.0)).passed
    # zero at the node; on the cells x² u_xxx reaches 4 through the ∂³u bounds
    result = H1ShearCheck().evaluate(_h1_context(0.0, 1.0))
    assert not result.passed
