"""Checks on the profile-dependent constants and the weight comparisons."""

from checks.base import CheckContext, CheckResult, InequalityCheck, inf_over, sources, sup_over, worst_point
from energy import cu_function, p1_constant
from interval import Interval, IntervalArray, power


def _nodes_worst(context: CheckContext, values: IntervalArray, upper: bool = True) -> str:
    return f"nodes worst at x={worst_point(values, context.evaluation.sample.points, upper):.4g}"


class QConstantCheck(InequalityCheck):
    name = 'q_constants'
    target = 'q_i < 36'
    requires = ('ledger',)

    def __init__(self, enabled: bool = True, priority: int = 50):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        qs = {f'q{i}': context.ledger.get(f'q{i}') for i in range(1, 7)}
        worst = max(qs, key=lambda k: qs[k].hi)
        threshold = context.params.q_max
        return self.result(qs[worst].hi < threshold, qs[worst], threshold, f"largest is {worst}")


class PSumCheck(InequalityCheck):
    name = 'p_sum'
    target = 'p5 + p6 + p7 + p8 < 300'
    requires = ('ledger',)

    def __init__(self, enabled: bool = True, priority: int = 51):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        total = Interval.point(0.0)
        for key in ('p5', 'p6', 'p7', 'p8'):
            total = total + context.ledger.get(key)
        threshold = context.params.p_sum_max
        return self.result(total.hi < threshold, total, threshold)


class CuCheck(InequalityCheck):
    name = 'cu_bound'
    target = 'C_u(x) < 20'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 52):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        top = sup_over([cu_function(s.weights, s.params, s.sample.x) for s in sources(context)])
        threshold = context.params.cu_max
        return self.result(top.hi < threshold, top, threshold)


class PhiUCheck(InequalityCheck):
    name = 'phi_u_below_phi'
    target = 'alpha4 x^-4 + p1 x^-2 <= phi'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 53):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        ratios = []
        for s in sources(context):
            x = s.sample.x
            phi_u = s.weights.iv('alpha4') * power(x, -4) + p1_constant(s.weights) * power(x, -2)
            ratios.append(phi_u / s.wv.phi)
        top = sup_over(ratios)
        return self.result(top.hi <= 1.0, top, 1.0, _nodes_worst(context, ratios[0]))


class P3Check(InequalityCheck):
    name = 'p3_inequality'
    target = 'x^-4/3 + (3/p2) x^-2/3 + p2 x^-2 <= p3 phi'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 54):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        sp = context.evaluation.params
        p2 = sp.iv('p2')
        ratios = []
        for s in sources(context):
            x = s.sample.x
            lhs = power(x, -4.0 / 3.0) + 3.0 / p2 * power(x, -2.0 / 3.0) + p2 * power(x, -2)
            ratios.append(lhs / s.wv.phi)
        top = sup_over(ratios)
        threshold = sp.p3
        return self.result(top.hi <= threshold, top, threshold, _nodes_worst(context, ratios[0]))


class PsiSlopeCheck(InequalityCheck):
    name = 'psi_slope'
    target = 'x psi_x < -psi/2'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 55):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        slopes = [s.sample.x * s.wv.psi_x / s.wv.psi for s in sources(context)]
        top = sup_over(slopes)
        return self.result(top.hi < -0.5, top, -0.5, _nodes_worst(context, slopes[0]))


class PsiLowerBoundCheck(InequalityCheck):
    name = 'psi_lower_bound'
    target = 'b3 x^-2/3 <= psi'
    requires = ('evaluation', 'cells')

    def __init__(self, enabled: bool = True, priority: int = 56):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        scaled = [s.wv.psi * power(s.sample.x, 2.0 / 3.0) for s in sources(context)]
        low = inf_over(scaled)
        threshold = context.evaluation.params.b3
        return self.result(low.lo >= threshold, low, threshold,
                           _nodes_worst(context, scaled[0], upper=False))
