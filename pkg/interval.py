"""
Outward-rounded interval arithmetic.

This module provides the enclosure types used by every rigorous bound in the
verification pipeline:
- Interval: a scalar enclosure [lo, hi]
- IntervalArray: a numpy-backed array of enclosures with broadcasting
- IntervalMatrix: a 2-D IntervalArray with matrix products and traces

Results are computed in round-to-nearest and then widened by one
representable value on each side (math.nextafter / numpy.nextafter), so the
exact real result of every operation is contained in the returned enclosure.
"""

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny

Real = Union[int, float, str, Fraction, Decimal]


class IntervalError(ValueError):
    """Raised for invalid enclosures or domain violations."""


class IntervalDivisionError(IntervalError, ZeroDivisionError):
    """Raised when dividing by an interval that contains zero."""


def _down(x: float) -> float:
    return math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    return math.nextafter(x, math.inf)


def _check_finite(lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise IntervalError(f"unbounded enclosure [{lo}, {hi}]")


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with finite endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        _check_finite(lo, hi)
        if lo > hi:
            raise IntervalError(f"lo > hi in [{lo}, {hi}]")
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)

    # -- constructors -----------------------------------------------------

    @classmethod
    def point(cls, x: float) -> 'Interval':
        return cls(x, x)

    # -- properties -------------------------------------------------------

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mag(self) -> float:
        """Largest absolute value in the interval."""
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        """Smallest absolute value in the interval."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def hull(self, other: 'Interval') -> 'Interval':
        other = as_interval(other)
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: 'Interval') -> 'Interval':
        """Common part of two enclosures of the same quantity; the hull if they miss each other."""
        other = as_interval(other)
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            return self.hull(other)
        return Interval(lo, hi)

    def widen(self, pad: float) -> 'Interval':
        """Widen both endpoints by a nonnegative absolute pad."""
        return Interval(_down(self.lo - pad), _up(self.hi + pad))

    def certainly_lt(self, other) -> bool:
        return self.hi < as_interval(other).lo

    def certainly_gt(self, other) -> bool:
        return self.lo > as_interval(other).hi

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, IntervalArray):
            return NotImplemented
        other = as_interval(other)
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        if isinstance(other, IntervalArray):
            return NotImplemented
        other = as_interval(other)
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __rsub__(self, other):
        return as_interval(other) - self

    def __mul__(self, other):
        if isinstance(other, IntervalArray):
            return NotImplemented
        other = as_interval(other)
        products = (self.lo * other.lo, self.lo * other.hi,
                    self.hi * other.lo, self.hi * other.hi)
        return Interval(_down(min(products)), _up(max(products)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, IntervalArray):
            return NotImplemented
        other = as_interval(other)
        if other.lo <= 0.0 <= other.hi:
            raise IntervalDivisionError(f"division by {other}")
        quotients = (self.lo / other.lo, self.lo / other.hi,
                     self.hi / other.lo, self.hi / other.hi)
        return Interval(_down(min(quotients)), _up(max(quotients)))

    def __rtruediv__(self, other):
        return as_interval(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)):
            return iv_elem('pow', self, float(n))
        n = int(n)
        if n < 0:
            return Interval(1.0, 1.0) / (self ** (-n))
        if n == 0:
            return Interval(1.0, 1.0)
        if n % 2 == 0:
            # even powers are nonnegative
            lo, hi = self.mig, self.mag
            low = max(_down(lo ** n), 0.0) if lo > 0 else 0.0
            return Interval(low, _up(hi ** n))
        result = self
        for _ in range(n - 1):
            result = result * self
        return result

    def __abs__(self):
        return Interval(self.mig, self.mag)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"


def as_interval(x) -> Interval:
    """Coerce a real or an Interval into an Interval."""
    if isinstance(x, Interval):
        return x
    if isinstance(x, (float, int, np.floating, np.integer)):
        return iv_from_real(x)
    if isinstance(x, (str, Fraction, Decimal)):
        return iv_from_real(x)
    raise IntervalError(f"cannot convert {type(x).__name__} to Interval")


def iv_from_real(x: Real) -> Interval:
    """Tightest enclosure of a real number by representable values.

    Exact decimal strings, Fractions and Decimals are compared exactly with
    their nearest float, so `iv_from_real('0.1')` has width one ulp while the
    float 0.1 (already a representable value) stays a point.

    Raises:
        IntervalError: For non-finite input.
    """
    if isinstance(x, (float, int, np.floating, np.integer)):
        f = float(x)
        if not math.isfinite(f):
            raise IntervalError(f"non-finite value {x!r}")
        if isinstance(x, (int, np.integer)) and Fraction(int(x)) != Fraction(f):
            return _enclose_exact(Fraction(int(x)), f)
        return Interval(f, f)
    if isinstance(x, str):
        try:
            exact = Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise IntervalError(f"not a finite real: {x!r}") from exc
    elif isinstance(x, Decimal):
        if not x.is_finite():
            raise IntervalError(f"non-finite value {x!r}")
        exact = Fraction(x)
    elif isinstance(x, Fraction):
        exact = x
    else:
        raise IntervalError(f"unsupported type {type(x).__name__}")
    f = float(exact)
    if not math.isfinite(f):
        raise IntervalError(f"value out of range: {x!r}")
    return _enclose_exact(exact, f)


def _enclose_exact(exact: Fraction, f: float) -> Interval:
    fx = Fraction(f)
    if fx == exact:
        return Interval(f, f)
    if fx < exact:
        return Interval(f, _up(f))
    return Interval(_down(f), f)


def iv_pi() -> Interval:
    """Enclosure of pi (math.pi is the float just below pi)."""
    return Interval(math.pi, _up(math.pi))


_ARITH: Dict[str, Callable[[Interval, Interval], Interval]] = {
    'add': lambda a, b: a + b,
    'sub': lambda a, b: a - b,
    'mul': lambda a, b: a * b,
    'div': lambda a, b: a / b,
}


def iv_arith(op: str, a, b) -> Interval:
    """Apply one of add/sub/mul/div to two enclosures.

    Raises:
        IntervalDivisionError: For 'div' when 0 is inside b.
        IntervalError: For an unknown op.
    """
    try:
        fn = _ARITH[op]
    except KeyError as exc:
        raise IntervalError(f"unknown arithmetic op {op!r}") from exc
    return fn(as_interval(a), as_interval(b))


def _guard(lo: float, hi: float, ulps: int = 2) -> Tuple[float, float]:
    for _ in range(ulps):
        lo, hi = _down(lo), _up(hi)
    return lo, hi


def _sin_enclosure(a: Interval) -> Interval:
    # a lies inside (0, pi): sin is positive, maximal at pi/2
    lo_val = min(math.sin(a.lo), math.sin(a.hi))
    half_pi = iv_pi() / 2.0
    hi_val = 1.0 if (a.lo <= half_pi.hi and a.hi >= half_pi.lo) else max(math.sin(a.lo), math.sin(a.hi))
    lo, hi = _guard(lo_val, hi_val)
    return Interval(max(lo, _TINY), min(hi, 1.0))


def iv_elem(fn: str, a, extra: Optional[float] = None) -> Interval:
    """Enclose an elementary function over an interval.

    Monotone functions are evaluated at the endpoints and widened by a
    2-ulp guard band. `cot` is only accepted on (0, pi), where it is
    decreasing; it is formed as an enclosure of cos divided by one of sin.

    Args:
        fn: One of 'log', 'arctan', 'pow', 'sqrt', 'exp', 'cot'.
        a: Argument enclosure.
        extra: Real exponent for 'pow'.

    Raises:
        IntervalError: On a domain violation or an unknown function.
    """
    a = as_interval(a)
    if fn == 'log':
        if a.lo <= 0.0:
            raise IntervalError(f"log needs a positive argument, got {a}")
        return Interval(*_guard(math.log(a.lo), math.log(a.hi)))
    if fn == 'sqrt':
        if a.lo < 0.0:
            raise IntervalError(f"sqrt needs a nonnegative argument, got {a}")
        lo, hi = _guard(math.sqrt(a.lo), math.sqrt(a.hi))
        return Interval(max(lo, 0.0), hi)
    if fn == 'exp':
        try:
            lo, hi = _guard(math.exp(a.lo), math.exp(a.hi))
        except OverflowError:
            raise IntervalError(f"exp overflows on {a!r}") from None
        return Interval(max(lo, 0.0), hi)
    if fn == 'arctan':
        return Interval(*_guard(math.atan(a.lo), math.atan(a.hi)))
    if fn == 'pow':
        if extra is None:
            raise IntervalError("pow needs an exponent")
        if a.lo <= 0.0:
            raise IntervalError(f"real powers need a positive base, got {a}")
        p = float(extra)
        v1, v2 = a.lo ** p, a.hi ** p
        lo, hi = _guard(min(v1, v2), max(v1, v2))
        return Interval(max(lo, 0.0), hi)
    if fn == 'cot':
        if not (a.lo > 0.0 and a.hi < math.pi):
            raise IntervalError(f"cot is restricted to (0, pi), got {a}")
        cos_enc = Interval(*_guard(math.cos(a.hi), math.cos(a.lo)))
        return cos_enc / _sin_enclosure(a)
    raise IntervalError(f"unknown elementary function {fn!r}")


# ---------------------------------------------------------------------------
# Array enclosures
# ---------------------------------------------------------------------------


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _ndown(x):
    return np.nextafter(x, -np.inf)


def _nup(x):
    return np.nextafter(x, np.inf)


class IntervalArray:
    """Array of interval enclosures stored as two float arrays.

    Arithmetic broadcasts like numpy. Plain floats, numpy arrays and
    Interval scalars are accepted as operands.
    """

    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, lo, hi=None, check: bool = True):
        lo = _arr(lo)
        hi = lo.copy() if hi is None else _arr(hi)
        lo, hi = np.broadcast_arrays(lo, hi)
        if check:
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise IntervalError("unbounded enclosure in IntervalArray")
            if np.any(lo > hi):
                raise IntervalError("lo > hi in IntervalArray")
        self.lo = np.array(lo, dtype=float)
        self.hi = np.array(hi, dtype=float)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_values(cls, values) -> 'IntervalArray':
        """Point enclosures of float values."""
        v = _arr(values)
        return cls(v, v)

    @classmethod
    def from_budget(cls, values, budget) -> 'IntervalArray':
        """Enclosures value ± budget, rounded outward."""
        v, b = np.broadcast_arrays(_arr(values), np.abs(_arr(budget)))
        return cls(_ndown(v - b), _nup(v + b))

    # -- container protocol -----------------------------------------------

    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, key):
        lo, hi = self.lo[key], self.hi[key]
        if np.ndim(lo) == 0:
            return Interval(float(lo), float(hi))
        return IntervalArray(lo, hi, check=False)

    def item(self, index=None) -> Interval:
        if index is None:
            return Interval(float(self.lo.reshape(-1)[0]), float(self.hi.reshape(-1)[0]))
        return Interval(float(self.lo[index]), float(self.hi[index]))

    def reshape(self, *shape) -> 'IntervalArray':
        return IntervalArray(self.lo.reshape(*shape), self.hi.reshape(*shape), check=False)

    @property
    def T(self) -> 'IntervalArray':
        return IntervalArray(self.lo.T, self.hi.T, check=False)

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    @property
    def mig(self) -> np.ndarray:
        straddle = (self.lo <= 0.0) & (self.hi >= 0.0)
        return np.where(straddle, 0.0, np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def contains(self, values) -> np.ndarray:
        v = _arr(values)
        return (self.lo <= v) & (v <= self.hi)

    def hull(self, other=None) -> 'IntervalArray':
        if other is None:
            return self
        other = _as_iv_array(other)
        return IntervalArray(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi), check=False)

    def intersect(self, other) -> 'IntervalArray':
        other = _as_iv_array(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        miss = lo > hi
        lo = np.where(miss, np.minimum(self.lo, other.lo), lo)
        hi = np.where(miss, np.maximum(self.hi, other.hi), hi)
        return IntervalArray(lo, hi, check=False)

    def certainly_lt(self, other) -> np.ndarray:
        other = _as_iv_array(other)
        return self.hi < other.lo

    def certainly_gt(self, other) -> np.ndarray:
        other = _as_iv_array(other)
        return self.lo > other.hi

    def copy(self) -> 'IntervalArray':
        return IntervalArray(self.lo.copy(), self.hi.copy(), check=False)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _as_iv_array(other)
        return IntervalArray(_ndown(self.lo + other.lo), _nup(self.hi + other.hi), check=False)

    __radd__ = __add__

    def __neg__(self):
        return IntervalArray(-self.hi, -self.lo, check=False)

    def __sub__(self, other):
        other = _as_iv_array(other)
        return IntervalArray(_ndown(self.lo - other.hi), _nup(self.hi - other.lo), check=False)

    def __rsub__(self, other):
        return _as_iv_array(other) - self

    def __mul__(self, other):
        other = _as_iv_array(other)
        p = np.stack(np.broadcast_arrays(self.lo * other.lo, self.lo * other.hi,
                                         self.hi * other.lo, self.hi * other.hi))
        # 0 * inf never occurs since endpoints are finite
        return IntervalArray(_ndown(p.min(axis=0)), _nup(p.max(axis=0)), check=False)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_iv_array(other)
        if np.any((other.lo <= 0.0) & (other.hi >= 0.0)):
            raise IntervalDivisionError("division by an enclosure containing 0")
        q = np.stack(np.broadcast_arrays(self.lo / other.lo, self.lo / other.hi,
                                         self.hi / other.lo, self.hi / other.hi))
        return IntervalArray(_ndown(q.min(axis=0)), _nup(q.max(axis=0)), check=False)

    def __rtruediv__(self, other):
        return _as_iv_array(other) / self

    def __pow__(self, n):
        return power(self, n)

    def __abs__(self):
        return IntervalArray(self.mig, self.mag, check=False)

    def square(self) -> 'IntervalArray':
        lo = self.mig ** 2
        hi = self.mag ** 2
        return IntervalArray(np.maximum(_ndown(lo), 0.0), _nup(hi), check=False)

    def sum(self, axis=None) -> Union['IntervalArray', Interval]:
        """Rigorous sum along an axis.

        The float sums are padded by 2(n+1)·u·Σ|x|, which dominates the
        accumulated rounding error of pairwise or sequential summation.
        """
        n = self.lo.size if axis is None else self.lo.shape[axis]
        pad_lo = 2.0 * (n + 1) * _EPS * np.sum(np.abs(self.lo), axis=axis)
        pad_hi = 2.0 * (n + 1) * _EPS * np.sum(np.abs(self.hi), axis=axis)
        lo = _ndown(np.sum(self.lo, axis=axis) - pad_lo)
        hi = _nup(np.sum(self.hi, axis=axis) + pad_hi)
        if np.ndim(lo) == 0:
            return Interval(float(lo), float(hi))
        return IntervalArray(lo, hi, check=False)

    def __repr__(self):
        return f"IntervalArray(lo={self.lo!r}, hi={self.hi!r})"


def _as_iv_array(x) -> IntervalArray:
    if isinstance(x, IntervalArray):
        return x
    if isinstance(x, Interval):
        return IntervalArray(np.asarray(x.lo), np.asarray(x.hi), check=False)
    if isinstance(x, (str, Fraction, Decimal)):
        return _as_iv_array(iv_from_real(x))
    v = _arr(x)
    return IntervalArray(v, v, check=False)


def iv_concat(parts, axis: int = 0) -> IntervalArray:
    parts = [_as_iv_array(p) for p in parts]
    return IntervalArray(np.concatenate([p.lo for p in parts], axis=axis),
                         np.concatenate([p.hi for p in parts], axis=axis), check=False)


def _elem_array(f_lo, f_hi, ulps: int = 2) -> IntervalArray:
    lo, hi = f_lo, f_hi
    for _ in range(ulps):
        lo, hi = _ndown(lo), _nup(hi)
    return IntervalArray(lo, hi, check=False)


# ---------------------------------------------------------------------------
# Generic functions: floats, numpy arrays, Interval and IntervalArray
# ---------------------------------------------------------------------------


def sqrt(x):
    if isinstance(x, Interval):
        return iv_elem('sqrt', x)
    if isinstance(x, IntervalArray):
        if np.any(x.lo < 0.0):
            raise IntervalError("sqrt of a possibly negative enclosure")
        out = _elem_array(np.sqrt(x.lo), np.sqrt(x.hi))
        return IntervalArray(np.maximum(out.lo, 0.0), out.hi, check=False)
    return np.sqrt(x)


def log(x):
    if isinstance(x, Interval):
        return iv_elem('log', x)
    if isinstance(x, IntervalArray):
        if np.any(x.lo <= 0.0):
            raise IntervalError("log of a possibly nonpositive enclosure")
        return _elem_array(np.log(x.lo), np.log(x.hi))
    return np.log(x)


def exp(x):
    if isinstance(x, Interval):
        return iv_elem('exp', x)
    if isinstance(x, IntervalArray):
        out = _elem_array(np.exp(x.lo), np.exp(x.hi))
        return IntervalArray(np.maximum(out.lo, 0.0), out.hi, check=False)
    return np.exp(x)


def arctan(x):
    if isinstance(x, Interval):
        return iv_elem('arctan', x)
    if isinstance(x, IntervalArray):
        return _elem_array(np.arctan(x.lo), np.arctan(x.hi))
    return np.arctan(x)


def square(x):
    if isinstance(x, IntervalArray):
        return x.square()
    if isinstance(x, Interval):
        return x ** 2
    return np.square(x)


def power(x, p):
    """x**p for integer p (any sign of x) or real p (positive x)."""
    if isinstance(x, Interval):
        return x ** p
    if isinstance(x, IntervalArray):
        if isinstance(p, (int, np.integer)):
            p = int(p)
            if p == 0:
                return _as_iv_array(np.ones(x.shape))
            if p < 0:
                return 1.0 / power(x, -p)
            if p % 2 == 0:
                lo, hi = x.mig ** p, x.mag ** p
                out = _elem_array(lo, hi, ulps=p)
                return IntervalArray(np.maximum(out.lo, 0.0), out.hi, check=False)
            # odd powers are increasing
            return _elem_array(x.lo ** p, x.hi ** p, ulps=p)
        if np.any(x.lo <= 0.0):
            raise IntervalError("real powers need a positive base")
        p = float(p)
        v1, v2 = x.lo ** p, x.hi ** p
        out = _elem_array(np.minimum(v1, v2), np.maximum(v1, v2))
        return IntervalArray(np.maximum(out.lo, 0.0), out.hi, check=False)
    return np.power(x, p)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


class IntervalMatrix(IntervalArray):
    """Rectangular matrix of enclosures."""

    def __init__(self, lo, hi=None, check: bool = True):
        super().__init__(lo, hi, check=check)
        if self.lo.ndim != 2:
            raise IntervalError("IntervalMatrix must be two-dimensional")

    @classmethod
    def from_array(cls, a: IntervalArray) -> 'IntervalMatrix':
        return cls(a.lo, a.hi, check=False)

    @property
    def rows(self) -> int:
        return self.lo.shape[0]

    @property
    def cols(self) -> int:
        return self.lo.shape[1]

    def matmul(self, other: 'IntervalMatrix') -> 'IntervalMatrix':
        if self.cols != other.rows:
            raise IntervalError(f"shape mismatch {self.shape} @ {other.shape}")
        left = IntervalArray(self.lo[:, :, None], self.hi[:, :, None], check=False)
        right = IntervalArray(other.lo[None, :, :], other.hi[None, :, :], check=False)
        return IntervalMatrix.from_array((left * right).sum(axis=1))

    def __matmul__(self, other):
        return self.matmul(other)

    def trace(self) -> Interval:
        if self.rows != self.cols:
            raise IntervalError("trace of a non-square matrix")
        d = np.arange(self.rows)
        return IntervalArray(self.lo[d, d], self.hi[d, d], check=False).sum()

    def power(self, p: int) -> 'IntervalMatrix':
        """M**p by repeated squaring, p ≥ 1."""
        if p < 1:
            raise IntervalError("matrix power needs p ≥ 1")
        result: Optional[IntervalMatrix] = None
        base = self
        while p:
            if p & 1:
                result = base if result is None else result.matmul(base)
            p >>= 1
            if p:
                base = base.matmul(base)
        return result

    def midpoint_split(self) -> Tuple['IntervalMatrix', 'IntervalMatrix']:
        """Split M into a point-valued mean M̄ and the fluctuation ΔM = M − M̄.

        M̄ is the rounded midpoint held as a point enclosure, so M ⊆ M̄ + ΔM.
        """
        mid = 0.5 * self.lo + 0.5 * self.hi
        mean = IntervalMatrix(mid, mid, check=False)
        delta = IntervalMatrix.from_array(IntervalArray(self.lo, self.hi, check=False) - mean)
        return mean, delta
