"""
Quintic spline representation of the compactly supported perturbations.

On each interval [x_{i-1}, x_i] of width h the spline is the degree-5
polynomial p_i(t) = sum_m c_m t^m in t = (x - x_{i-1})/h that interpolates
value, slope and curvature at both ends. Values and slopes are the unknowns
carried by the solver; curvatures come from the closed linear system

    (-3/h_L) f''_{i-1} + (9/h_L + 9/h_R) f''_i - (3/h_R) f''_{i+1} = R_R - R_L

for every interior node i, which states that the third derivative is
continuous there, together with f''_0 = 0 and f''_n = 0. Here

    R_R = [60(f_{i+1} - f_i) - 36 h_R f'_i - 24 h_R f'_{i+1}] / h_R^3
    R_L = [60(f_i - f_{i-1}) - 24 h_L f'_{i-1} - 36 h_L f'_i] / h_L^3

The matrix is strictly diagonally dominant, so the banded solve is stable.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from grid import AdaptiveMesh, PiecewiseBound, bounds_from_derivative

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
RESIDUAL_TOL = 1e-12
MAX_ORDER = 5

# rows c_0..c_5, columns (f0, d0, s0, f1, d1, s1) with d = h f', s = h^2 f''
HERMITE = np.array([
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.5, 0.0, 0.0, 0.0],
    [-10.0, -6.0, -1.5, 10.0, -4.0, 0.5],
    [15.0, 8.0, 1.5, -15.0, 7.0, -1.0],
    [-6.0, -3.0, -0.5, 6.0, -3.0, 0.5],
])

# FALLING[k, m] = m!/(m-k)! for m ≥ k
FALLING = np.array([[math.perm(m, k) if m >= k else 0 for m in range(6)]
                    for k in range(6)], dtype=float)


class SplineError(ValueError):
    """Raised for invalid spline data or a failed curvature solve."""


def _check_data(mesh: AdaptiveMesh, values, slopes) -> Tuple[np.ndarray, np.ndarray]:
    f = np.asarray(values, dtype=float)
    d = np.asarray(slopes, dtype=float)
    if f.shape != (mesh.n + 1,) or d.shape != (mesh.n + 1,):
        raise SplineError("values and slopes need one entry per node")
    return f, d


def _system(mesh: AdaptiveMesh):
    h = mesh.widths
    hl, hr = h[:-1], h[1:]
    diag = 9.0 / hl + 9.0 / hr
    off_l = -3.0 / hl
    off_r = -3.0 / hr
    m = diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = off_r[:-1]
    ab[1, :] = diag
    ab[2, :-1] = off_l[1:]
    return ab, hl, hr


def _rhs_operator(mesh: AdaptiveMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Dense maps from node values and slopes to the interior right-hand side."""
    n = mesh.n
    h = mesh.widths
    hl, hr = h[:-1], h[1:]
    rows = np.arange(n - 1)
    i = rows + 1
    Rf = np.zeros((n - 1, n + 1))
    Rd = np.zeros((n - 1, n + 1))
    Rf[rows, i + 1] = 60.0 / hr ** 3
    Rf[rows, i] = -60.0 / hr ** 3 - 60.0 / hl ** 3
    Rf[rows, i - 1] = 60.0 / hl ** 3
    Rd[rows, i + 1] = -24.0 / hr ** 2
    Rd[rows, i] = -36.0 / hr ** 2 + 36.0 / hl ** 2
    Rd[rows, i - 1] = 24.0 / hl ** 2
    return Rf, Rd


def _solve(mesh: AdaptiveMesh, rhs: np.ndarray) -> np.ndarray:
    ab, _, _ = _system(mesh)
    try:
        sol = solve_banded((1, 1), ab, rhs)
    except (LinAlgError, ValueError) as exc:
        raise SplineError(f"curvature system is singular: {exc}") from exc
    # residual of the banded system
    r = ab[1][:, None] * sol.reshape(sol.shape[0], -1) - rhs.reshape(rhs.shape[0], -1)
    s2 = sol.reshape(sol.shape[0], -1)
    r[:-1] += ab[0, 1:][:, None] * s2[1:]
    r[1:] += ab[2, :-1][:, None] * s2[:-1]
    scale = max(float(np.max(np.abs(rhs))) if rhs.size else 0.0,
                float(np.max(np.abs(ab[1][:, None] * s2))) if s2.size else 0.0,
                np.finfo(float).tiny)
    if not np.all(np.isfinite(sol)) or float(np.max(np.abs(r))) > RESIDUAL_TOL * scale:
        raise SplineError("curvature solve did not reach the residual tolerance")
    return sol


def fit_curvatures(mesh: AdaptiveMesh, values, slopes) -> np.ndarray:
    """Solve for node curvatures with third-derivative continuity.

    Raises:
        SplineError: On bad boundary data or a singular system.
    """
    f, d = _check_data(mesh, values, slopes)
    if f[0] != 0.0:
        raise SplineError("value at x = 0 must vanish (odd symmetry)")
    if f[-1] != 0.0 or d[-1] != 0.0:
        raise SplineError("value and slope at x = L must vanish (compact support)")
    Rf, Rd = _rhs_operator(mesh)
    rhs = Rf @ f + Rd @ d
    curv = np.zeros(mesh.n + 1)
    curv[1:-1] = _solve(mesh, rhs)
    return curv


def curvature_operator(mesh: AdaptiveMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Dense matrices (Cf, Cd) with curvatures = Cf @ values + Cd @ slopes."""
    Rf, Rd = _rhs_operator(mesh)
    sol = _solve(mesh, np.hstack([Rf, Rd]))
    n = mesh.n
    Cf = np.zeros((n + 1, n + 1))
    Cd = np.zeros((n + 1, n + 1))
    Cf[1:-1] = sol[:, :n + 1]
    Cd[1:-1] = sol[:, n + 1:]
    return Cf, Cd


def hermite_coefficients(h: np.ndarray, f0, d0, s0, f1, d1, s1) -> np.ndarray:
    """Local coefficients (n, 6) from end values, slopes and curvatures."""
    loc = np.stack([f0, h * d0, h * h * s0, f1, h * d1, h * h * s1], axis=1)
    return loc @ HERMITE.T


def poly_derivative(coeffs: np.ndarray, h: np.ndarray, t, k: int) -> np.ndarray:
    """k-th x-derivative of local polynomials at local coordinates t."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(np.broadcast(coeffs[..., 0], t).shape)
    for m in range(5, k - 1, -1):
        out = out * t + coeffs[..., m] * FALLING[k, m]
    return out / h ** k


def coefficient_error(coeffs: np.ndarray, h: np.ndarray, k: int) -> np.ndarray:
    """Rounding bound for Horner evaluation of the k-th derivative on [0, 1]."""
    mags = np.abs(coeffs) @ FALLING[k]
    return 16.0 * _EPS * mags / h ** k


@dataclass(frozen=True, eq=False)
class QuinticSpline:
    """C³ piecewise quintic with f(0) = f''(0) = 0 and support in [0, L]."""

    mesh: AdaptiveMesh
    values: np.ndarray
    slopes: np.ndarray
    curvatures: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def fit(cls, mesh: AdaptiveMesh, values, slopes) -> 'QuinticSpline':
        f, d = _check_data(mesh, values, slopes)
        curv = fit_curvatures(mesh, f, d)
        return cls.from_nodes(mesh, f, d, curv)

    @classmethod
    def from_nodes(cls, mesh: AdaptiveMesh, values, slopes, curvatures) -> 'QuinticSpline':
        f = np.asarray(values, dtype=float)
        d = np.asarray(slopes, dtype=float)
        s = np.asarray(curvatures, dtype=float)
        coeffs = hermite_coefficients(mesh.widths, f[:-1], d[:-1], s[:-1], f[1:], d[1:], s[1:])
        return cls(mesh, f, d, s, coeffs)

    @classmethod
    def zero(cls, mesh: AdaptiveMesh) -> 'QuinticSpline':
        z = np.zeros(mesh.n + 1)
        return cls.from_nodes(mesh, z, z, z)

    @property
    def L(self) -> float:
        return self.mesh.L

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def eval(self, x, k: int = 0):
        """k-th derivative at x (odd extension for x < 0, zero beyond L).

        Raises:
            SplineError: If k > 5.
        """
        if not 0 <= k <= MAX_ORDER:
            raise SplineError(f"derivative order {k} out of range 0..5")
        xa = np.asarray(x, dtype=float)
        ax = np.abs(xa)
        sign = np.where(xa < 0.0, (-1.0) ** (k + 1), 1.0)
        j = self.mesh.locate_many(np.minimum(ax, self.L)) - 1
        h = self.mesh.widths[j]
        t = (ax - self.mesh.nodes[j]) / h
        val = poly_derivative(self.coeffs[j], h, t, k)
        val = np.where(ax > self.L, 0.0, sign * val)
        if np.ndim(x) == 0:
            return float(val)
        return val

    def endpoint_derivatives(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """(left, right) limits of the k-th derivative on every interval."""
        h = self.mesh.widths
        return (poly_derivative(self.coeffs, h, 0.0, k),
                poly_derivative(self.coeffs, h, 1.0, k))

    def third_derivative_jumps(self) -> np.ndarray:
        left, right = self.endpoint_derivatives(3)
        return left[1:] - right[:-1]

    def derivative_bounds(self, target: Optional[AdaptiveMesh] = None) -> List[PiecewiseBound]:
        """PiecewiseBounds of ∂^k s for k = 0..5.

        ∂^5 is constant on each interval and ∂^4 linear, so both are exact up
        to rounding; lower orders follow from endpoint values and the next
        bound. `target` may be any mesh whose intervals each sit inside one
        interval of this spline's mesh or beyond L.
        """
        mesh = self.mesh if target is None else target
        mids = 0.5 * (mesh.left + mesh.right)
        inside = mids < self.L
        parent = np.where(inside, self.mesh.locate_many(np.minimum(mids, self.L)) - 1, 0)
        c = np.where(inside[:, None], self.coeffs[parent], 0.0)
        hp = self.mesh.widths[parent]
        x0 = self.mesh.nodes[parent]
        tl = (mesh.left - x0) / hp
        tr = (mesh.right - x0) / hp
        if target is not None:
            tl = np.where(inside, tl, 0.0)
            tr = np.where(inside, tr, 0.0)
        bounds: List[Optional[PiecewiseBound]] = [None] * (MAX_ORDER + 1)
        for k in range(MAX_ORDER, -1, -1):
            left = poly_derivative(c, hp, tl, k)
            right = poly_derivative(c, hp, tr, k)
            err = coefficient_error(c, hp, k)
            if k >= 4:
                lo = np.minimum(left, right) - err
                up = np.maximum(left, right) + err
                bounds[k] = PiecewiseBound(mesh, np.nextafter(lo, -np.inf), np.nextafter(up, np.inf))
            else:
                b = bounds_from_derivative(mesh, (left, right), bounds[k + 1])
                bounds[k] = PiecewiseBound(mesh, np.nextafter(b.low - err, -np.inf), np.nextafter(b.up + err, np.inf))
        return bounds

    def to_dict(self) -> dict:
        return {'values': self.values.tolist(), 'slopes': self.slopes.tolist()}


def fit_function(mesh: AdaptiveMesh, fn, dfn) -> QuinticSpline:
    """Fit a spline to a function with vanishing boundary data (test and setup helper)."""
    x = mesh.nodes
    f = np.asarray(fn(x), dtype=float)
    d = np.asarray(dfn(x), dtype=float)
    f[0] = 0.0
    f[-1] = 0.0
    d[-1] = 0.0
    return QuinticSpline.fit(mesh, f, d)
