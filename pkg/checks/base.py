"""
Base classes for the inequality checks.

This module defines the core abstractions of the verification checklist:
- CheckContext: Shared evaluated data for all checks
- CheckResult: Outcome of one check
- VerificationReport: Ordered collection of results with JSON and table output
- InequalityCheck: Abstract base class for all checks
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Tuple

import numpy as np

from interval import Interval, IntervalArray


class CheckContext:
    """Shared context for all checks.

    This context is passed to all checks and provides access to:
    - The solution being verified and the verification thresholds
    - The evaluated profile, weights, damping and costs
    - The same quantities enclosed on the cells of the refined verification mesh
    - The ODE ledger, constant ledger, Gram table, C_opt bound and ∂³u bounds
    - Shared state dictionary for notes between stages
    """

    def __init__(self, solution=None, params=None):
        self.solution = solution
        self.params = params
        self.evaluation = None
        self.cells = None
        self.ode = None
        self.decay = None
        self.ledger = None
        self.gram = None
        self.copt = None
        self.uxxx = None
        self.state: dict = {}

    def get_state(self, key: str, default=None):
        """Get a value from the shared state dictionary."""
        return self.state.get(key, default)

    def set_state(self, key: str, value: Any):
        """Set a value in the shared state dictionary."""
        self.state[key] = value


@dataclass
class CheckResult:
    """Outcome of one check: value enclosure, threshold and verdict."""

    name: str
    passed: bool
    value: Optional[Interval] = None
    threshold: Optional[float] = None
    target: str = ''
    detail: str = ''

    def to_dict(self) -> dict:
        value = None if self.value is None else [self.value.lo, self.value.hi]
        return {'check': self.name, 'value': value, 'threshold': self.threshold,
                'pass': bool(self.passed), 'target': self.target, 'detail': self.detail}

    @classmethod
    def from_dict(cls, data: dict) -> 'CheckResult':
        value = data.get('value')
        return cls(data['check'], bool(data['pass']),
                   None if value is None else Interval(value[0], value[1]),
                   data.get('threshold'), data.get('target', ''), data.get('detail', ''))


@dataclass
class VerificationReport:
    """Results in execution order; every check name appears at most once."""

    results: List[CheckResult] = field(default_factory=list)

    def add(self, result: CheckResult):
        if any(r.name == result.name for r in self.results):
            raise ValueError(f"duplicate check {result.name!r}")
        self.results.append(result)

    def get(self, name: str) -> Optional[CheckResult]:
        for result in self.results:
            if result.name == name:
                return result
        return None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def n_passed(self) -> int:
        return sum(1 for r in self.results if r.passed)

    def failed(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def to_dict(self) -> dict:
        return {'passed': self.passed, 'checks': [r.to_dict() for r in self.results]}

    @classmethod
    def from_dict(cls, data: dict) -> 'VerificationReport':
        report = cls()
        for item in data.get('checks', []):
            report.add(CheckResult.from_dict(item))
        return report

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def save(self, path):
        """Write the report as JSON.

        Raises:
            RuntimeError: If the file cannot be written.
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_json(), encoding='utf-8')
        except OSError as e:
            raise RuntimeError(f"Failed to write report to {path}: {e}") from e

    @classmethod
    def load(cls, path) -> 'VerificationReport':
        """Read a report written by save.

        Raises:
            RuntimeError: If the file cannot be read or parsed.
        """
        path = Path(path)
        try:
            return cls.from_dict(json.loads(path.read_text(encoding='utf-8')))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise RuntimeError(f"Failed to read report from {path}: {e}") from e

    def format_table(self) -> str:
        """Human-readable table, one line per check."""
        rows = [('check', 'status', 'value', 'threshold', 'target')]
        for r in self.results:
            value = '-' if r.value is None else f"[{r.value.lo:.6g}, {r.value.hi:.6g}]"
            threshold = '-' if r.threshold is None else f"{r.threshold:g}"
            rows.append((r.name, 'PASS' if r.passed else 'FAIL', value, threshold, r.target))
        widths = [max(len(row[i]) for row in rows) for i in range(5)]
        lines = ['  '.join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.insert(1, '  '.join('-' * w for w in widths))
        return '\n'.join(lines)


def sup_enclosure(arr: IntervalArray, mask=None) -> Interval:
    """Enclosure of max_i a_i."""
    lo, hi = (arr.lo, arr.hi) if mask is None else (arr.lo[mask], arr.hi[mask])
    return Interval(float(np.max(lo)), float(np.max(hi)))


def inf_enclosure(arr: IntervalArray, mask=None) -> Interval:
    """Enclosure of min_i a_i."""
    lo, hi = (arr.lo, arr.hi) if mask is None else (arr.lo[mask], arr.hi[mask])
    return Interval(float(np.min(lo)), float(np.min(hi)))


def sources(context: CheckContext) -> list:
    """What a pointwise check covers: the node evaluation and, when present, the cells."""
    found = [context.evaluation]
    if getattr(context, 'cells', None) is not None:
        found.append(context.cells)
    return found


def sup_over(arrays, masks=None) -> Interval:
    """Enclosure of the largest entry over several arrays."""
    parts = [sup_enclosure(a, m) for a, m in zip(arrays, masks or [None] * len(arrays))]
    return Interval(max(p.lo for p in parts), max(p.hi for p in parts))


def inf_over(arrays, masks=None) -> Interval:
    parts = [inf_enclosure(a, m) for a, m in zip(arrays, masks or [None] * len(arrays))]
    return Interval(min(p.lo for p in parts), min(p.hi for p in parts))


def worst_point(arr: IntervalArray, x: np.ndarray, upper: bool = True) -> float:
    """Sample point where the upper (or lower) end is extremal."""
    return float(x[int(np.argmax(arr.hi)) if upper else int(np.argmin(arr.lo))])


class InequalityCheck(ABC):
    """Abstract base class for all checks.

    Each check is responsible for:
    1. Declaring which context entries it needs (requires)
    2. Evaluating its inequality into a CheckResult (evaluate)

    Checks are executed in priority order (lower number = higher priority).
    """

    name: str = ''
    target: str = ''
    requires: Tuple[str, ...] = ('evaluation',)

    def __init__(self, enabled: bool = True, priority: int = 50):
        """Initialize the check.

        Args:
            enabled: Whether this check is enabled
            priority: Priority for check execution (lower = higher priority)
        """
        self.enabled = enabled
        self.priority = priority

    def missing(self, context: CheckContext) -> List[str]:
        return [key for key in self.requires if getattr(context, key, None) is None]

    def applies(self, context: CheckContext) -> bool:
        """Check if every input this check needs is available."""
        return not self.missing(context)

    @abstractmethod
    def evaluate(self, context: CheckContext) -> CheckResult:
        """Evaluate the inequality.

        Args:
            context: Shared check context

        Returns:
            The check result
        """
        pass

    def result(self, passed: bool, value: Optional[Interval] = None,
               threshold: Optional[float] = None, detail: str = '') -> CheckResult:
        return CheckResult(self.name, bool(passed), value, threshold, self.target, detail)
