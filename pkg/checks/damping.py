"""
Checks on the damping coefficients of the weighted L² estimate.

Each pointwise check covers the node samples and, once built, the cell
enclosures of the refined verification mesh.

- DampingSignCheck: D_θ, D_ω ≤ -c < 0 at every sample and on every cell
- StabilityMarginCheck: -D_θ - A_θψ⁻¹ and -λ_1D_ω - A_ωφ⁻¹ bounded below on the plotting window
- SpeedCheck: |c̄_l x + ū| ≥ 0.4x
- DampedRemainderCheck: D_u - (9/49)t_12 - (72λ_1/49)·10⁻⁵ > 0
"""

from checks.base import (CheckContext, CheckResult, InequalityCheck, inf_over, sources, sup_over,
                         worst_point)
from energy import stability_margins


class DampingSignCheck(InequalityCheck):
    """Both damping coefficients are uniformly negative."""

    name = 'damping_negative'
    target = 'D_theta, D_omega <= -c < 0'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 10):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        found = sources(context)
        top_theta = sup_over([s.damp.D_theta for s in found])
        top_omega = sup_over([s.damp.D_omega for s in found])
        value = top_theta if top_theta.hi >= top_omega.hi else top_omega
        d = context.evaluation.damp
        x = context.evaluation.sample.points
        detail = (f"max D_theta <= {top_theta.hi:.4g} (nodes at x={worst_point(d.D_theta, x):.4g}), "
                  f"max D_omega <= {top_omega.hi:.4g} (nodes at x={worst_point(d.D_omega, x):.4g})")
        return self.result(value.hi < 0.0, value, 0.0, detail)


class StabilityMarginCheck(InequalityCheck):
    """Minimum of one stability margin on [0, window]."""

    target = ''
    requires = ('evaluation', 'cells')

    def __init__(self, field: str = 'omega', enabled: bool = True, priority: int = 12):
        super().__init__(enabled, priority)
        if field not in ('theta', 'omega'):
            raise ValueError(f"unknown margin {field!r}")
        self.field = field
        self.name = f'stability_margin_{field}'
        self.target = ('-D_theta - A_theta/psi >= 0.025' if field == 'theta'
                       else '-lambda1 D_omega - A_omega/phi >= 0.04 (reference 0.054)')

    def evaluate(self, context: CheckContext) -> CheckResult:
        margins, masks = [], []
        for source in sources(context):
            theta, omega = stability_margins(source)
            margins.append(theta if self.field == 'theta' else omega)
            # a cell counts once it reaches into the window
            masks.append(source.sample.x.lo <= context.params.window)
        threshold = (context.params.theta_margin_min if self.field == 'theta'
                     else context.params.omega_margin_min)
        low = inf_over(margins, masks)
        floor = inf_over(margins)
        detail = f"min over everything {floor.lo:.4g}"
        return self.result(low.lo >= threshold and floor.lo > 0.0, low, threshold, detail)


class SpeedCheck(InequalityCheck):
    """The transport speed grows at least linearly."""

    name = 'speed_lower_bound'
    target = '|c_l x + u| >= 0.4 x'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 14):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        ratios = []
        for source in sources(context):
            g = source.sample
            ratios.append(abs(g.x * g.c_l + g.u[0]) / g.x)
        low = inf_over(ratios)
        threshold = context.params.speed_min
        detail = f"nodes worst at x={worst_point(ratios[0], context.evaluation.sample.points, upper=False):.4g}"
        return self.result(low.lo >= threshold, low, threshold, detail)


class DampedRemainderCheck(InequalityCheck):
    """Positivity of the coefficient dropped from the coercivity estimate."""

    name = 'damped_remainder_positive'
    target = 'D_u - 9 t12/49 - 72 lambda1 1e-5/49 > 0'

    def __init__(self, enabled: bool = True, priority: int = 16):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        ev = context.evaluation
        value = ev.params.damped_remainder(ev.weights)
        return self.result(value.lo > 0.0, value, 0.0, f"t62 >= {ev.params.t62(ev.weights).lo:.4g}")
