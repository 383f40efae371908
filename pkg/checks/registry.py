"""
Check registry for managing and executing checks.

The CheckRegistry maintains a collection of checks and provides
methods for registering, enabling/disabling, configuring and running them.
"""

import logging
from typing import List, Optional, Type, Union

from checks.base import CheckContext, CheckResult, InequalityCheck, VerificationReport

logger = logging.getLogger(__name__)


class CheckRegistry:
    """Registry for managing all checks.

    The registry maintains a list of checks sorted by priority and
    provides methods for:
    - Registering and unregistering checks
    - Enabling and disabling checks by name
    - Applying `checks.<name>` configuration
    - Running the checks into a VerificationReport
    """

    def __init__(self):
        """Initialize the check registry."""
        self.checks: List[InequalityCheck] = []

    def register(self, check: InequalityCheck):
        """Register a check.

        The check will be inserted in priority order (lower number = higher priority).

        Raises:
            ValueError: If a check with the same name is already registered.
        """
        if self.get_check(check.name) is not None:
            raise ValueError(f"check {check.name!r} is already registered")
        self.checks.append(check)
        self.checks.sort(key=lambda c: c.priority)

    def unregister(self, key: Union[str, Type[InequalityCheck]]):
        """Unregister checks by name or by class."""
        if isinstance(key, str):
            self.checks = [c for c in self.checks if c.name != key]
        else:
            self.checks = [c for c in self.checks if not isinstance(c, key)]

    def get_check(self, name: str) -> Optional[InequalityCheck]:
        for check in self.checks:
            if check.name == name:
                return check
        return None

    def names(self) -> List[str]:
        return [c.name for c in self.checks]

    def enable_check(self, name: str):
        check = self.get_check(name)
        if check:
            check.enabled = True

    def disable_check(self, name: str):
        check = self.get_check(name)
        if check:
            check.enabled = False

    def configure(self, config=None):
        """Apply `checks.<name>.enabled` and `checks.<name>.priority` from a config."""
        if config is None:
            return
        for check in self.checks:
            enabled = config.get(f'checks.{check.name}.enabled')
            if enabled is not None:
                check.enabled = bool(enabled)
            priority = config.get(f'checks.{check.name}.priority')
            if priority is not None:
                check.priority = int(priority)
        self.checks.sort(key=lambda c: c.priority)

    def run(self, context: CheckContext) -> VerificationReport:
        """Run every enabled check.

        A check whose inputs are missing, or whose evaluation raises, is
        recorded as failed with the reason in its detail.
        """
        report = VerificationReport()
        for check in self.checks:
            if not check.enabled:
                continue
            if not check.applies(context):
                missing = check.missing(context)
                detail = f"not evaluated: missing {', '.join(missing)}"
                errors = [context.get_state(f'{key}_error') for key in missing]
                errors = [e for e in errors if e]
                if errors:
                    detail += f" ({'; '.join(errors)})"
                result = check.result(False, detail=detail)
            else:
                try:
                    result = check.evaluate(context)
                except (ValueError, ArithmeticError) as e:
                    result = CheckResult(check.name, False, target=check.target,
                                         detail=f"evaluation failed: {e}")
            logger.info("check %-28s %s", check.name, 'pass' if result.passed else 'FAIL')
            report.add(result)
        return report
