"""
Checks that the damping survives the whole range of splitting parameters.

Each check bounds the cost functions G by their worst end of the
parameter ranges and compares against the damping with margin c:
- fast: G_1 (ω) and G_2 (θ), ranges of λ_1, t_2, t_22
- slow: G_3 (ω) and G_4 (θ), ranges of λ_1, t_1, t_12
- singular: G_5 (ω) and G_6 (θ), ranges of λ_1, t_4
"""

from typing import Dict, Tuple

from checks.base import CheckContext, CheckResult, InequalityCheck, sources, sup_over
from energy import Evaluation
from interval import Interval, IntervalArray, iv_from_real, power

PARAMETER_RANGES: Dict[str, Tuple[float, float]] = {
    'lam1': (0.31, 0.33),
    't2': (5.0, 5.8),
    't22': (13.0, 14.0),
    't1': (1.2, 1.4),
    't12': (0.55, 0.65),
    't4': (3.5, 4.0),
}


def _end(name: str, upper: bool) -> Interval:
    return iv_from_real(repr(PARAMETER_RANGES[name][1 if upper else 0]))


def _fast(ev: Evaluation) -> Tuple[IntervalArray, IntervalArray]:
    g, wv, ws = ev.sample, ev.wv, ev.weights
    x = g.x
    lam1, t2, t22 = _end('lam1', True), _end('t2', True), _end('t22', True)
    x4 = power(x, -4)
    G1 = t2 * x4 + t22 / 25.0 * x4 + t2 * (lam1 * ws.iv('alpha5')) ** 2 * power(x, -2)
    t2, t22 = _end('t2', False), _end('t22', False)
    G2 = ((ws.iv('alpha2') * power(x, -1) + ws.iv('alpha1') * power(x, -2)).square() / (4.0 * t2)
          + (power(x, 3) * g.v[1] * wv.psi_n).square() / (4.0 * t22))
    return G1 / wv.phi / _end('lam1', False), G2 / wv.psi


def _slow(ev: Evaluation) -> Tuple[IntervalArray, IntervalArray]:
    g, wv, ws = ev.sample, ev.wv, ev.weights
    x = g.x
    lam1, t1 = _end('lam1', True), _end('t1', True)
    a3, a6 = ws.iv('alpha3'), ws.iv('alpha6')
    sqrt3 = Interval.point(3.0) ** 0.5
    G3 = t1 * (a3 ** 2 * power(x, -2) + a3 * lam1 * a6 / sqrt3 * power(x, -4.0 / 3.0)
               + (lam1 * a6) ** 2 * power(x, -2.0 / 3.0))
    t1, t12 = _end('t1', False), _end('t12', False)
    G4 = (power(x, -2.0 / 3.0) / (4.0 * t1)
          + (wv.psi_f * g.v[1] * power(x, 5.0 / 3.0)).square() / (4.0 * t12))
    return G3 / wv.phi / _end('lam1', False), G4 / wv.psi


def _singular(ev: Evaluation) -> Tuple[IntervalArray, IntervalArray]:
    wv, ws = ev.wv, ev.weights
    x = ev.sample.x
    G5 = _end('t4', True) * power(x, -3) / wv.phi
    G6 = (_end('lam1', True) * ws.iv('alpha4')) ** 2 / (4.0 * _end('t4', False)) * power(x, -5) / wv.psi
    return G5 / _end('lam1', False), G6


_SPLITS = {'fast': _fast, 'slow': _slow, 'singular': _singular}


class ParameterRangeCheck(InequalityCheck):
    """G_ω φ-scaled + D_ω ≤ -c and G_θ ψ-scaled + D_θ ≤ -c over a parameter box."""

    requires = ('evaluation', 'cells')

    def __init__(self, split: str = 'fast', enabled: bool = True, priority: int = 40):
        super().__init__(enabled, priority)
        if split not in _SPLITS:
            raise ValueError(f"unknown parameter split {split!r}")
        self.split = split
        self.name = f'parameter_range_{split}'
        self.target = 'damping dominates the cost over the whole parameter box'

    def evaluate(self, context: CheckContext) -> CheckResult:
        omegas, thetas = [], []
        for source in sources(context):
            g_omega, g_theta = _SPLITS[self.split](source)
            omegas.append(g_omega + source.damp.D_omega)
            thetas.append(g_theta + source.damp.D_theta)
        omega, theta = sup_over(omegas), sup_over(thetas)
        value = omega if omega.hi >= theta.hi else theta
        threshold = -context.params.range_c
        detail = f"omega side <= {omega.hi:.4g}, theta side <= {theta.hi:.4g}"
        return self.result(value.hi <= threshold, value, threshold, detail)
