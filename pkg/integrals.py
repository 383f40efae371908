"""
Integral bounds on adaptive meshes.

This module provides:
- tail_budget: ∫_{L}^∞ a x^{-b} dx in closed form
- trapezoid_sum / node_integral: composite trapezoid enclosures with a
  first-order error term from a per-interval slope bound
- cell_integral: Σ h·g over cells from per-cell enclosures
- trapezoid_budget: the two singular-weight trapezoid bounds ('trule1' is
  one-sided, 'trule2' two-sided)
- l2_interp_budget / l2_norm_bound: L² norms through piecewise linear
  interpolation and the (h⁵/90)·max f_xx² remainder
- hardy_constant: 4/(2p-1)²
"""

import logging
import math
from typing import Optional, Union

import numpy as np

from grid import AdaptiveMesh, PiecewiseBound
from interval import Interval, IntervalArray

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

TRULE1 = 'trule1'
TRULE2 = 'trule2'


class IntegralError(ValueError):
    """Raised when an integral bound is applied outside its hypotheses."""


def _up(x: float) -> float:
    return math.nextafter(float(x), math.inf)


def _magnitudes(mesh: AdaptiveMesh, bound) -> np.ndarray:
    if isinstance(bound, PiecewiseBound):
        return bound.magnitude()
    m = np.abs(np.asarray(bound, dtype=float))
    if m.shape != (mesh.n,):
        raise IntegralError("per-interval maxima must have one entry per interval")
    return m


def tail_budget(a: float, b: float, L_B: float) -> float:
    """a/(b-1)·L_B^{1-b}, the integral of a x^{-b} over [L_B, ∞).

    Raises:
        IntegralError: If b ≤ 1 or L_B ≤ 0.
    """
    if not b > 1.0:
        raise IntegralError(f"tail exponent b={b} must exceed 1")
    if not L_B > 0.0:
        raise IntegralError("tail start must be positive")
    return _up(abs(a) / (b - 1.0) * L_B ** (1.0 - b) * (1 + 8 * _EPS))


def trapezoid_sum(x, values) -> Interval:
    """Enclosure of the composite trapezoid sum Σ h_i (f_{i-1} + f_i)/2."""
    x = np.asarray(x, dtype=float)
    f = values if isinstance(values, IntervalArray) else IntervalArray.from_values(values)
    if f.shape != x.shape:
        raise IntegralError("values and nodes differ in length")
    h = IntervalArray.from_values(np.diff(x))
    return (h * (f[:-1] + f[1:]) * 0.5).sum()


def node_integral(x, values, slope, tail: float = 0.0) -> Interval:
    """∫ f over [x_0, x_n] (plus a tail bound) from node values.

    Uses T_h(f) ± ¼ Σ (f_x)_i^max h_i², with `slope` the per-interval
    bound of |f_x|.

    Raises:
        IntegralError: If slope does not have one entry per interval.
    """
    x = np.asarray(x, dtype=float)
    h = np.diff(x)
    slope = slope.mag if isinstance(slope, IntervalArray) else np.abs(np.asarray(slope, dtype=float))
    if slope.shape != h.shape:
        raise IntegralError("slope bound must have one entry per interval")
    err = _up(0.25 * float(np.sum(slope * h * h)) * (1 + 4 * x.size * _EPS))
    total = trapezoid_sum(x, values).widen(err)
    if tail:
        total = total.widen(abs(tail))
    return total


def cell_integral(widths, values: IntervalArray) -> Interval:
    """Σ h_i·g_i, an enclosure of ∫ g when g_i encloses g on the i-th cell."""
    h = np.asarray(widths, dtype=float)
    if values.shape != h.shape:
        raise IntegralError("cell enclosures and widths differ in length")
    if not h.size:
        return Interval(0.0, 0.0)
    return (values * IntervalArray.from_values(h)).sum()


def trapezoid_budget(mesh: AdaptiveMesh, deriv_max: Union[PiecewiseBound, np.ndarray],
                     k: float, variant: str = TRULE1) -> float:
    """Error budget of T_h for ∫ f²/x^k (trule1) or ∫ f²/x^{k+1} (trule2) on the mesh.

    Args:
        mesh: Mesh 0 = x_0 < ... < x_n = M.
        deriv_max: Per-interval maxima of f_xx²/x^{k-2} (trule1) or
            f_x²/x^k (trule2).
        k: Weight exponent.
        variant: 'trule1' (k > 1, one-sided: ∫ ≤ T_h + budget) or
            'trule2' (k ≥ 0, two-sided).

    Raises:
        IntegralError: For an unknown variant or k outside its range.
    """
    h = float(np.max(mesh.widths))
    m = _magnitudes(mesh, deriv_max)
    s = float(np.sum(mesh.widths * m)) * (1 + 2 * mesh.n * _EPS)
    if variant == TRULE1:
        if not k > 1.0:
            raise IntegralError(f"trule1 needs k > 1, got {k}")
        return _up(h * h / (k * k - 1.0) * s)
    if variant == TRULE2:
        if not k >= 0.0:
            raise IntegralError(f"trule2 needs k ≥ 0, got {k}")
        return _up(h / (k + 1.0) * s)
    raise IntegralError(f"unknown trapezoid variant {variant!r}")


def l2_interp_budget(mesh: AdaptiveMesh, fxx_max: Union[PiecewiseBound, np.ndarray]) -> float:
    """(Σ h_i⁵/90 · (f_xx²)_i^max)^{1/2}, the L² distance to the linear interpolant."""
    m = _magnitudes(mesh, fxx_max)
    s = float(np.sum(mesh.widths ** 5 / 90.0 * m * m)) * (1 + 2 * mesh.n * _EPS)
    return _up(math.sqrt(s))


def interp_pointwise_error(a: float, b: float, x, fxx_l2: float):
    """|f - f̂|(x) ≤ (b-x)(x-a)/√(3(b-a)) · ‖f_xx‖_{L²(a,b)}."""
    x = np.asarray(x, dtype=float)
    return (b - x) * (x - a) / math.sqrt(3.0 * (b - a)) * fxx_l2


def linear_l2_norm(mesh: AdaptiveMesh, values) -> float:
    """Exact ‖f̂‖₂ of the piecewise linear interpolant of node values (rounded up)."""
    f = np.asarray(values, dtype=float)
    if f.shape != (mesh.n + 1,):
        raise IntegralError("node values must have n + 1 entries")
    a, b = f[:-1], f[1:]
    s = float(np.sum(mesh.widths * (a * a + a * b + b * b) / 3.0))
    return _up(math.sqrt(s * (1 + 4 * mesh.n * _EPS)))


def l2_norm_bound(mesh: AdaptiveMesh, values, fxx_max) -> float:
    """Upper bound ‖f‖₂ ≤ ‖f̂‖₂ + l2_interp_budget."""
    return _up(linear_l2_norm(mesh, values) + l2_interp_budget(mesh, fxx_max))


def hardy_constant(p: float) -> float:
    """Constant 4/(2p-1)² of ∫ f²/x^{2p} ≤ c ∫ f_x²/x^{2p-2}.

    Raises:
        IntegralError: If p ≤ 1/2.
    """
    if not p > 0.5:
        raise IntegralError("Hardy inequality needs p > 1/2")
    return 4.0 / (2.0 * p - 1.0) ** 2
