"""Sign checks on the ODE estimates for c_ω and d_θ."""

from checks.base import CheckContext, CheckResult, InequalityCheck, inf_over, worst_point


class TPositivityCheck(InequalityCheck):
    """T_i(x) > 0 at every sample and on every cell."""

    requires = ('evaluation', 'ode', 'cells')

    def __init__(self, index: int = 1, enabled: bool = True, priority: int = 20):
        super().__init__(enabled, priority + index)
        if index not in (1, 2, 3):
            raise ValueError(f"no T_{index}")
        self.index = index
        self.name = f'T{index}_positive'
        self.target = f'T{index}(x) > 0'

    def evaluate(self, context: CheckContext) -> CheckResult:
        T = context.ode.T[self.index]
        found = [T]
        if getattr(context, 'cells', None) is not None:
            found.append(context.cells.T[self.index])
        low = inf_over(found)
        x = context.evaluation.sample.points
        return self.result(low.lo > 0.0, low, 0.0,
                           f"smallest lower end at nodes x={worst_point(T, x, upper=False):.4g}")


class SPositivityCheck(InequalityCheck):
    """s_1 > 0 and s_2 > 0."""

    requires = ('ode',)

    def __init__(self, index: int = 1, enabled: bool = True, priority: int = 25):
        super().__init__(enabled, priority + index)
        if index not in (1, 2):
            raise ValueError(f"no s_{index}")
        self.index = index
        self.name = f's{index}_positive'
        self.target = f's{index} > 0'

    def evaluate(self, context: CheckContext) -> CheckResult:
        value = context.ode.s1 if self.index == 1 else context.ode.s2
        return self.result(value.lo > 0.0, value, 0.0)
