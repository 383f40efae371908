"""
Inequality checks for verified blowup profiles.

Each check evaluates one inequality of the stability argument on the
evaluated profile and records its enclosure and verdict in a
VerificationReport.
"""

from checks.base import CheckContext, CheckResult, InequalityCheck, VerificationReport
from checks.constants import (CuCheck, P3Check, PhiUCheck, PsiLowerBoundCheck, PsiSlopeCheck,
                              PSumCheck, QConstantCheck)
from checks.damping import DampedRemainderCheck, DampingSignCheck, SpeedCheck, StabilityMarginCheck
from checks.h1 import H1CostCheck, H1DampingCheck, H1ShearCheck
from checks.ode import SPositivityCheck, TPositivityCheck
from checks.ranges import PARAMETER_RANGES, ParameterRangeCheck
from checks.registry import CheckRegistry
from checks.residual import CoptCheck, ResidualNormCheck, ScalingRatioCheck


def default_checks():
    """One instance of every check, in default priority order."""
    return [
        DampingSignCheck(),
        StabilityMarginCheck('theta'),
        StabilityMarginCheck('omega', priority=13),
        SpeedCheck(),
        DampedRemainderCheck(),
        TPositivityCheck(1), TPositivityCheck(2), TPositivityCheck(3),
        SPositivityCheck(1), SPositivityCheck(2),
        H1ShearCheck(),
        H1DampingCheck('theta'),
        H1DampingCheck('omega', priority=33),
        H1CostCheck(),
        ParameterRangeCheck('fast'),
        ParameterRangeCheck('slow', priority=41),
        ParameterRangeCheck('singular', priority=42),
        QConstantCheck(),
        PSumCheck(),
        CuCheck(),
        PhiUCheck(),
        P3Check(),
        PsiSlopeCheck(),
        PsiLowerBoundCheck(),
        ResidualNormCheck(),
        CoptCheck(),
        ScalingRatioCheck(),
    ]


def build_registry(config=None) -> CheckRegistry:
    """Registry with every default check, configured from `checks.<name>`."""
    registry = CheckRegistry()
    for check in default_checks():
        registry.register(check)
    registry.configure(config)
    return registry


__all__ = [
    'CheckContext',
    'CheckResult',
    'InequalityCheck',
    'VerificationReport',
    'CheckRegistry',
    'build_registry',
    'default_checks',
    'PARAMETER_RANGES',
    'DampingSignCheck',
    'StabilityMarginCheck',
    'SpeedCheck',
    'DampedRemainderCheck',
    'TPositivityCheck',
    'SPositivityCheck',
    'H1ShearCheck',
    'H1DampingCheck',
    'H1CostCheck',
    'ParameterRangeCheck',
    'QConstantCheck',
    'PSumCheck',
    'CuCheck',
    'PhiUCheck',
    'P3Check',
    'PsiSlopeCheck',
    'PsiLowerBoundCheck',
    'ResidualNormCheck',
    'CoptCheck',
    'ScalingRatioCheck',
]
