"""
Checks behind the weighted H¹ estimate.

On the cells the velocity derivatives come from the verified ∂ᵏu bounds,
so the shear and stretching terms use ū_xxx as bounded over whole cells.

- H1ShearCheck: (x²ū_xxψ)_x ≤ 0.02ψ
- H1DampingCheck: the two H¹ damping inequalities with margin κ_2
- H1CostCheck: ‖A_ω2φ⁻¹‖_∞ ≤ a_H1
"""

from checks.base import (CheckContext, CheckResult, InequalityCheck, sources, sup_over,
                         worst_point)
from interval import IntervalArray


def velocity(context: CheckContext, source, k: int) -> IntervalArray:
    """∂ᵏū on the samples of `source`; on cells, from the ∂ᵏu bounds of the context."""
    if source is context.evaluation:
        return source.sample.u[k]
    cells = source
    return context.uxxx.bounds[k].as_intervals()[cells.parent][cells.inner]


class H1ShearCheck(InequalityCheck):
    name = 'h1_shear'
    target = '(x^2 u_xx psi)_x <= 0.02 psi'
    requires = ('evaluation', 'uxxx', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 30):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        shears = []
        for source in sources(context):
            x, wv = source.sample.x, source.wv
            u_xx, u_xxx = velocity(context, source, 2), velocity(context, source, 3)
            x2 = x.square()
            shears.append((2.0 * x * u_xx * wv.psi + x2 * u_xxx * wv.psi + x2 * u_xx * wv.psi_x) / wv.psi)
        top = sup_over(shears)
        threshold = context.params.h1_shear_max
        detail = (f"nodes worst at x={worst_point(shears[0], context.evaluation.sample.points):.4g}, "
                  f"sup|u_xxx| <= {context.uxxx.bounds[3].max_abs():.4g}")
        return self.result(top.hi <= threshold, top, threshold, detail)


class H1DampingCheck(InequalityCheck):
    """D + Aψ⁻¹ - (ū_x - ū/x) + Bψ⁻¹ ≤ -κ_2 and its λ_1-weighted ω analogue."""

    requires = ('evaluation', 'uxxx', 'cells')

    def __init__(self, field: str = 'theta', enabled: bool = True, priority: int = 32):
        super().__init__(enabled, priority)
        if field not in ('theta', 'omega'):
            raise ValueError(f"unknown field {field!r}")
        self.field = field
        self.name = f'h1_damping_{field}'
        self.target = ('D_theta + (A_theta + B_theta)/psi - (u_x - u/x) <= -kappa2' if field == 'theta'
                       else 'lambda1 (D_omega - (u_x - u/x)) + (A_omega + B_omega)/phi <= -kappa2 lambda1')

    def _lhs(self, context: CheckContext, source) -> IntervalArray:
        wv, c, sp = source.wv, source.costs, source.params
        stretch = velocity(context, source, 1) - velocity(context, source, 0) / source.sample.x
        if self.field == 'theta':
            return source.damp.D_theta + (c.A_theta + c.B_theta) / wv.psi - stretch
        lam1 = sp.iv('lam1')
        return lam1 * (source.damp.D_omega - stretch) + (c.A_omega + c.B_omega) / wv.phi

    def evaluate(self, context: CheckContext) -> CheckResult:
        sp = context.evaluation.params
        kappa2 = sp.iv('kappa2')
        bound = -kappa2 if self.field == 'theta' else -kappa2 * sp.iv('lam1')
        sides = [self._lhs(context, source) for source in sources(context)]
        top = sup_over(sides)
        return self.result(top.hi <= bound.lo, top, bound.lo,
                           f"nodes worst at x={worst_point(sides[0], context.evaluation.sample.points):.4g}")


class H1CostCheck(InequalityCheck):
    name = 'h1_cost'
    target = '||A_omega2 / phi||_inf <= a_H1'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 34):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        top = sup_over([abs(s.costs.A_omega2 / s.wv.phi) for s in sources(context)])
        threshold = context.evaluation.params.a_H1
        return self.result(top.hi <= threshold, top, threshold)
