"""Checks on the residual size, the C_opt bound and the scaling ratio."""

from checks.base import CheckContext, CheckResult, InequalityCheck


class ResidualNormCheck(InequalityCheck):
    name = 'residual_norm'
    target = 'eps_bar <= 1e-4 (reference 3.3e-5)'
    requires = ('ledger',)

    def __init__(self, enabled: bool = True, priority: int = 60):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        eps = context.ledger.get('eps_bar')
        threshold = context.params.eps_bar_max
        return self.result(eps.hi <= threshold, eps, threshold)


class CoptCheck(InequalityCheck):
    name = 'copt_bound'
    target = 'C_opt < 0.999 (reference 0.9930)'
    requires = ('copt',)

    def __init__(self, enabled: bool = True, priority: int = 62):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        c = context.copt
        threshold = context.params.copt_max
        detail = (f"estimate {c.estimate:.4f}, mean part <= {c.mean_part.hi:.4f}, "
                  f"fluctuation <= {c.fluctuation_part.hi:.3g}, p={c.p}")
        return self.result(c.bound.hi < threshold, c.bound, threshold, detail)


class ScalingRatioCheck(InequalityCheck):
    """c_ω/c_l of the converged profile against the reference ratio."""

    name = 'scaling_ratio'
    target = 'c_w/c_l = -0.333477 +- 3e-3'

    def __init__(self, enabled: bool = True, priority: int = 64):
        super().__init__(enabled, priority)

    def evaluate(self, context: CheckContext) -> CheckResult:
        g = context.evaluation.sample
        ratio = g.c_w / g.c_l
        p = context.params
        passed = ratio.lo >= p.ratio_target - p.ratio_tol and ratio.hi <= p.ratio_target + p.ratio_tol
        return self.result(passed, ratio, p.ratio_target, f"tolerance {p.ratio_tol:g}")
