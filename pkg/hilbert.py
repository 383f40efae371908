"""
Velocity from vorticity: u_x = Hω with u(0) = 0, for odd ω.

For x ≥ 0 and ω supported in [0, ∞),
    u      = (1/π) ∫ ω(y) (log|x-y| - log(x+y)) dy
    u_x    = (1/π) ∫ ω(y) (1/(x-y) - 1/(x+y)) dy
    u_xx   = (1/π) ∫ ω_y(y) (1/(x-y) + 1/(x+y)) dy
    u_xxx  = (1/π) ∫ ω_yy(y) (1/(x-y) - 1/(x+y)) dy
Densities are piecewise quintic. On each mesh interval the integral is
computed by one of four rules: closed-form moments when x is within m·h of
the interval, an 8-point Gauss-Legendre rule otherwise, a truncated Taylor
kernel when the interval is extremely close to or far from the origin
relative to x (log and even kernels only), and a symmetry shortcut at x = 0.
Every value carries a budget: Gauss error, Taylor remainder and rounding.

This module provides:
- GaussRule / gauss_rule: quadrature data with exact moment defects
- Density: a piecewise quintic density with derivative bounds
- VelocityEval: value, budget and regime trace
- VelocityOperator: dense node-data → node-velocity maps for the solver
- FaVelocity: velocity of F_a with far-field asymptotics and a power-law split
  in the mid field
- FieldVelocity: b·F_a + rational + spline, the full velocity of ω or v
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import roots_legendre
from tqdm import tqdm

from explicit_profile import (SERIES_MIN_X, ExplicitProfile, Fa_bounds, eval_Fa, eval_Fa_error,
                              eval_fa_remainder, rational_velocity, series_constant,
                              _monotone_fa, _series_coeffs)
from grid import AdaptiveMesh, build_mesh
from interval import Interval, iv_pi
from spline import FALLING, HERMITE, QuinticSpline, curvature_operator, hermite_coefficients

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_FACT = np.array([float(math.factorial(i)) for i in range(32)])

NEAR, GAUSS, TAYLOR_LEFT, TAYLOR_RIGHT, ORIGIN = 1, 2, 3, 4, 5
REGIME_NAMES = {NEAR: 'near', GAUSS: 'gauss', TAYLOR_LEFT: 'taylor',
                TAYLOR_RIGHT: 'taylor', ORIGIN: 'origin'}

# velocity derivative order -> (kernel, density derivative order)
KERNEL_FOR_ORDER = {0: ('log', 0), 1: ('odd', 0), 2: ('even', 1), 3: ('odd', 2)}

_TAYLOR_KERNEL = {('log', TAYLOR_LEFT): 'log_left', ('log', TAYLOR_RIGHT): 'log_right',
                  ('even', TAYLOR_LEFT): 'even_left', ('even', TAYLOR_RIGHT): 'even_right'}

# t-derivative of local coefficients: c' = DMAT @ c
DMAT = np.diag(np.arange(1.0, 6.0), k=1)

FAR_UP_CONST = (1.0 / 5.0, 1.0, 6.0, 42.0)

FA_SPLIT, FA_HERMITE = 'split', 'hermite'
FA_METHODS = (FA_SPLIT, FA_HERMITE)

# sup over [0, 1] of the j-th derivative of the quintic Hermite basis, j = 0..3
HERMITE_BASIS_MAX = (1.0, 2.0, 6.0, 60.0)

# odd powers summed in the series of y^{-a} cut to [0, y0]
HEAD_TERMS = 16


class HilbertError(ValueError):
    """Raised for invalid velocity requests."""


@dataclass(frozen=True)
class HilbertParams:
    """Regime thresholds and far-field settings."""

    m_near: float = 10.0
    delta: float = 1e-6
    beta_max: float = 4.0
    chunk: int = 64
    gauss_order: int = 8
    M1: float = 1e5
    M2: float = 4.0
    fa_method: str = FA_SPLIT
    far_factor: float = 100.0
    fa_L: float = 1e12
    fa_abs_cap: float = 0.01
    fa_rel_cap: float = 0.02
    cu_A: float = 0.1
    cu_B: float = 10.0
    cu_panels: int = 20000

    @classmethod
    def from_config(cls, config=None) -> 'HilbertParams':
        section = (config.get('hilbert', {}) if config is not None else {}) or {}
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        return cls(**known)


DEFAULT_PARAMS = HilbertParams()


# ---------------------------------------------------------------------------
# Gauss rule
# ---------------------------------------------------------------------------


def _round_up(q: Fraction) -> float:
    f = float(q)
    if Fraction(f) < q:
        f = math.nextafter(f, math.inf)
    return f


@dataclass(frozen=True, eq=False)
class GaussRule:
    """Legendre nodes/weights on (-1, 1) with even-moment data for k = 0..order.

    eps[k] = |Σ A_j z_j^{2k} - 2/(2k+1)| and c[k] = Σ A_j z_j^{2k}, both
    computed exactly from the floating-point nodes and rounded up.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    eps: np.ndarray
    c: np.ndarray


@lru_cache(maxsize=4)
def gauss_rule(order: int = 8) -> GaussRule:
    z, w = roots_legendre(order)
    zf = [Fraction(float(v)) for v in z]
    wf = [Fraction(float(v)) for v in w]
    eps, c = [], []
    for k in range(order + 1):
        s = sum(wi * zi ** (2 * k) for wi, zi in zip(wf, zf))
        eps.append(_round_up(abs(s - Fraction(2, 2 * k + 1))))
        c.append(_round_up(s))
    return GaussRule(order, np.asarray(z, dtype=float), np.asarray(w, dtype=float),
                     np.array(eps), np.array(c))


def gq_error(P: np.ndarray, h: np.ndarray, S: np.ndarray, rule: GaussRule,
             return_order: bool = False):
    """Gauss error bound on intervals of width h, minimized over K1 ≤ order.

    Args:
        P: (Q, 6) bounds of |∂_t^j density| on [0, 1].
        h: (Q,) interval widths.
        S: (Q, 2·order + 1) bounds of |∂_t^l kernel| = h^l |∂_y^l kernel|.
        rule: The Gauss rule.
        return_order: Also return the minimizing K1 per interval.

    Returns:
        (Q,) error bounds for ∫ density·kernel dy, and the (Q,) orders K1
        when return_order is set.
    """
    K = rule.order
    Q = P.shape[0]
    M = np.zeros((Q, 2 * K + 1))
    for n in range(2 * K + 1):
        for j in range(0, min(n, 5) + 1):
            M[:, n] += math.comb(n, j) * P[:, j] * S[:, n - j]
    best = np.full(Q, np.inf)
    order = np.ones(Q, dtype=int)
    acc = np.zeros(Q)
    for K1 in range(1, K + 1):
        k = K1 - 1
        acc = acc + M[:, 2 * k] * rule.eps[k] / (_FACT[2 * k] * 2.0 ** (2 * k + 1))
        tail = M[:, 2 * K1] / _FACT[2 * K1] * (1.0 / ((2 * K1 + 1) * 2.0 ** (2 * K1))
                                               + rule.c[K1] / 2.0 ** (2 * K1 + 1))
        total = acc + tail
        better = total < best
        order[better] = K1
        best = np.where(better, total, best)
    best = h * best * (1.0 + 1e-12)
    if return_order:
        return best, order
    return best


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Density:
    """Piecewise polynomial Σ_m c_m t^m, t = (y - left)/h, supported on [left_0, right_n]."""

    left: np.ndarray
    h: np.ndarray
    coeffs: np.ndarray

    @property
    def right(self) -> np.ndarray:
        return self.left + self.h

    @classmethod
    def from_spline(cls, spline: QuinticSpline) -> 'Density':
        return cls(spline.mesh.left, spline.mesh.widths, spline.coeffs)

    def derivative(self, d: int) -> 'Density':
        c = self.coeffs
        for _ in range(d):
            c = (c @ DMAT.T) / self.h[:, None]
        return Density(self.left, self.h, c)

    def magnitudes(self) -> np.ndarray:
        """(n, 6) bounds of |∂_t^j p| on [0, 1]."""
        return np.abs(self.coeffs) @ FALLING.T

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


# ---------------------------------------------------------------------------
# Kernels, moments and bounds
# ---------------------------------------------------------------------------


def _safe_log(v):
    v = np.asarray(v, dtype=float)
    return np.log(np.where(v > 0.0, v, 1.0))


def _kernel_values(name: str, x, y):
    if name == 'log':
        return np.log1p(-2.0 * np.minimum(x, y) / (x + y))
    if name == 'odd':
        return 2.0 * y / ((x - y) * (x + y))
    if name == 'even':
        return 2.0 * x / ((x - y) * (x + y))
    if name == 'plus_inv':
        return 1.0 / (x + y)
    if name == 'plus_log':
        return np.log(x + y)
    if name in ('log_left', 'log_right'):
        r = y / x if name == 'log_left' else x / y
        return -2.0 * r - (2.0 / 3.0) * r ** 3
    if name == 'even_left':
        r2 = (y / x) ** 2
        return (2.0 / x) * (1.0 + r2 + r2 * r2)
    if name == 'even_right':
        r2 = (x / y) ** 2
        return -(2.0 * x / (y * y)) * (1.0 + r2 + r2 * r2)
    raise HilbertError(f"unknown kernel {name!r}")


def _gauss_moments(x, lo, h, name: str, rule: GaussRule) -> Tuple[np.ndarray, np.ndarray]:
    """∫ t^m K(x, y) dy over each interval by Gauss, with magnitude sums."""
    t = 0.5 * (1.0 + rule.nodes)
    w = 0.5 * rule.weights
    y = lo[:, None] + h[:, None] * t[None, :]
    K = _kernel_values(name, x[:, None], y)
    tp = t[None, :] ** np.arange(6)[:, None]
    base = h[:, None] * w[None, :] * K
    return base @ tp.T, np.abs(base) @ tp.T


def _minus_inv_moments(x, lo, hi, h):
    """∫ t^m/(x - y) dy (principal value) in the shifted variable τ = (x - lo)/h."""
    tau = (x - lo) / h
    lg = _safe_log(np.abs(x - lo)) - _safe_log(np.abs(x - hi))
    lg_abs = np.abs(_safe_log(np.abs(x - lo))) + np.abs(_safe_log(np.abs(x - hi)))
    one, mt = 1.0 - tau, -tau
    out = np.zeros((tau.size, 6))
    mag = np.zeros((tau.size, 6))
    for m in range(6):
        val = tau ** m * lg
        mg = np.abs(tau) ** m * lg_abs
        for j in range(1, m + 1):
            cj = math.comb(m, j) / j
            val = val + cj * tau ** (m - j) * (mt ** j - one ** j)
            mg = mg + cj * np.abs(tau) ** (m - j) * (np.abs(mt) ** j + np.abs(one) ** j)
        out[:, m] = val
        mag[:, m] = mg
    return out, mag


def _plus_inv_moments(x, lo, hi, h):
    """∫ t^m/(x + y) dy with β = (x + lo)/h > 0."""
    beta = (x + lo) / h
    lg = np.log(x + hi) - np.log(x + lo)
    lg_abs = np.abs(np.log(x + hi)) + np.abs(np.log(x + lo))
    nb = -beta
    out = np.zeros((beta.size, 6))
    mag = np.zeros((beta.size, 6))
    for m in range(6):
        val = nb ** m * lg
        mg = beta ** m * lg_abs
        for j in range(1, m + 1):
            cj = math.comb(m, j) / j
            val = val + cj * nb ** (m - j) * ((1.0 + beta) ** j - beta ** j)
            mg = mg + cj * beta ** (m - j) * ((1.0 + beta) ** j + beta ** j)
        out[:, m] = val
        mag[:, m] = mg
    return out, mag


def _log_antiderivative(s, j: int, h):
    """A_j(s) = s^{j+1}/(j+1)·(log|h s| - 1/(j+1)), with A_j(0) = 0."""
    p = s ** (j + 1) / (j + 1)
    lg = _safe_log(np.abs(h * s))
    return p * (lg - 1.0 / (j + 1)), np.abs(p) * (np.abs(lg) + 1.0 / (j + 1))


def _minus_log_moments(x, lo, h):
    """∫ t^m log|x - y| dy."""
    tau = (x - lo) / h
    out = np.zeros((tau.size, 6))
    mag = np.zeros((tau.size, 6))
    ant = [(_log_antiderivative(1.0 - tau, j, h), _log_antiderivative(-tau, j, h)) for j in range(6)]
    for m in range(6):
        for j in range(m + 1):
            (a1, m1), (a0, m0) = ant[j]
            cj = math.comb(m, j)
            out[:, m] += cj * tau ** (m - j) * (a1 - a0)
            mag[:, m] += cj * np.abs(tau) ** (m - j) * (m1 + m0)
    return h[:, None] * out, h[:, None] * mag


def _plus_log_moments(x, lo, h):
    """∫ t^m log(x + y) dy."""
    beta = (x + lo) / h
    out = np.zeros((beta.size, 6))
    mag = np.zeros((beta.size, 6))
    ant = [(_log_antiderivative(beta + 1.0, j, h), _log_antiderivative(beta, j, h)) for j in range(6)]
    for m in range(6):
        for j in range(m + 1):
            (a1, m1), (a0, m0) = ant[j]
            cj = math.comb(m, j)
            out[:, m] += cj * (-beta) ** (m - j) * (a1 - a0)
            mag[:, m] += cj * beta ** (m - j) * (m1 + m0)
    return h[:, None] * out, h[:, None] * mag


def scaled_kernel_bounds(name: str, x, lo, hi, h, nmax: int) -> np.ndarray:
    """(Q, nmax+1) bounds of h^l |∂_y^l K(x, y)| over each interval."""
    l = np.arange(nmax + 1)[None, :]
    fact = _FACT[:nmax + 1][None, :]
    x, lo, hi, h = (np.asarray(v, dtype=float)[:, None] for v in (x, lo, hi, h))
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        if name in ('odd', 'even', 'log'):
            dm = np.maximum(np.maximum(lo - x, x - hi), 0.0)
            dp = x + lo
            if name == 'log':
                fm1 = _FACT[np.maximum(l - 1, 0)]
                out = fm1 * ((h / dm) ** l + (h / dp) ** l)
                k0 = np.maximum(np.abs(_kernel_values('log', x, lo)), np.abs(_kernel_values('log', x, hi)))
                out[:, :1] = k0
            else:
                out = fact * ((h / dm) ** l / dm + (h / dp) ** l / dp)
        elif name == 'plus_inv':
            dp = x + lo
            out = fact * (h / dp) ** l / dp
        elif name == 'plus_log':
            dp = x + lo
            fm1 = _FACT[np.maximum(l - 1, 0)]
            out = fm1 * (h / dp) ** l
            out[:, :1] = np.maximum(np.abs(np.log(x + lo)), np.abs(np.log(x + hi)))
        elif name == 'log_right':
            q, g = x / lo, (h / lo) ** l
            out = g * (2.0 * q * fact + q ** 3 * _FACT[2:nmax + 3][None, :] / 3.0)
        elif name == 'even_right':
            q, g = x / lo, (h / lo) ** l
            out = g / lo * (2.0 * q * _FACT[1:nmax + 2][None, :]
                            + q ** 3 * _FACT[3:nmax + 4][None, :] / 3.0
                            + q ** 5 * _FACT[5:nmax + 6][None, :] / 60.0)
        elif name in ('log_left', 'even_left'):
            # polynomial kernels: Gauss is exact
            out = np.zeros((x.shape[0], nmax + 1))
        else:
            raise HilbertError(f"unknown kernel {name!r}")
    return np.where(np.isnan(out), np.inf, out)


def _regimes(x, lo, hi, h, kernel: str, params: HilbertParams) -> np.ndarray:
    dist = np.maximum(np.maximum(lo - x, x - hi), 0.0)
    near = dist <= params.m_near * h
    code = np.where(near, NEAR, GAUSS)
    if kernel in ('log', 'even'):
        left = (~near) & (hi <= params.delta * x)
        right = (~near) & (x <= params.delta * lo)
        code = np.where(left, TAYLOR_LEFT, np.where(right, TAYLOR_RIGHT, code))
        code = np.where(x == 0.0, ORIGIN, code)
    else:
        code = np.where((x == 0.0) & (lo == 0.0), ORIGIN, code)
    return code.astype(np.int8)


def _chunk_weights(x: np.ndarray, left: np.ndarray, h: np.ndarray, kernel: str,
                   params: HilbertParams, rule: GaussRule):
    """Weights W[t, i, m] with velocity = Σ_{i,m} W c_{i,m}, magnitudes and regime codes."""
    right = left + h
    code = _regimes(x[:, None], left[None, :], right[None, :], h[None, :], kernel, params)
    T, n = code.shape
    W = np.zeros((T, n, 6))
    Wabs = np.zeros((T, n, 6))
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        ti, ii = np.nonzero(code == NEAR)
        if ti.size:
            xs, lo, hi, hh = x[ti], left[ii], right[ii], h[ii]
            if kernel == 'log':
                mval, mabs = _minus_log_moments(xs, lo, hh)
            else:
                mval, mabs = _minus_inv_moments(xs, lo, hi, hh)
            sign = 1.0 if kernel == 'even' else -1.0
            pval = np.zeros_like(mval)
            pabs = np.zeros_like(mabs)
            closed = (xs + lo) <= params.beta_max * hh
            if np.any(closed):
                fn = _plus_log_moments if kernel == 'log' else (
                    lambda a, b, c: _plus_inv_moments(a, b, b + c, c))
                pval[closed], pabs[closed] = fn(xs[closed], lo[closed], hh[closed])
            far = ~closed
            if np.any(far):
                pname = 'plus_log' if kernel == 'log' else 'plus_inv'
                pval[far], pabs[far] = _gauss_moments(xs[far], lo[far], hh[far], pname, rule)
            W[ti, ii] = mval + sign * pval
            Wabs[ti, ii] = mabs + pabs
        for reg in (GAUSS, TAYLOR_LEFT, TAYLOR_RIGHT):
            ti, ii = np.nonzero(code == reg)
            if ti.size:
                name = kernel if reg == GAUSS else _TAYLOR_KERNEL[(kernel, reg)]
                W[ti, ii], Wabs[ti, ii] = _gauss_moments(x[ti], left[ii], h[ii], name, rule)
        if kernel == 'odd':
            ti, ii = np.nonzero(code == ORIGIN)
            if ti.size:
                # ∫_0^h t^m (-2/y) dy = -2/m; the t^0 coefficient vanishes for odd data
                w0 = np.concatenate([[0.0], -2.0 / np.arange(1.0, 6.0)])
                W[ti, ii] = w0
                Wabs[ti, ii] = np.abs(w0)
    return W / math.pi, Wabs / math.pi, code


def _chunk_budget(x, dens: Density, kernel: str, code, Wabs, params: HilbertParams,
                  rule: GaussRule) -> np.ndarray:
    P = dens.magnitudes()
    left, h = dens.left, dens.h
    right = left + h
    budget = 32.0 * _EPS * np.einsum('tnm,nm->t', Wabs, np.abs(dens.coeffs))
    nmax = 2 * rule.order
    ti, ii = np.nonzero(code == GAUSS)
    if ti.size:
        S = scaled_kernel_bounds(kernel, x[ti], left[ii], right[ii], h[ii], nmax)
        np.add.at(budget, ti, gq_error(P[ii], h[ii], S, rule) / math.pi)
    ti, ii = np.nonzero(code == NEAR)
    if ti.size:
        far = (x[ti] + left[ii]) > params.beta_max * h[ii]
        ti, ii = ti[far], ii[far]
        if ti.size:
            pname = 'plus_log' if kernel == 'log' else 'plus_inv'
            S = scaled_kernel_bounds(pname, x[ti], left[ii], right[ii], h[ii], nmax)
            np.add.at(budget, ti, gq_error(P[ii], h[ii], S, rule) / math.pi)
    if kernel in ('log', 'even'):
        ti, ii = np.nonzero(code == TAYLOR_RIGHT)
        if ti.size:
            name = _TAYLOR_KERNEL[(kernel, TAYLOR_RIGHT)]
            S = scaled_kernel_bounds(name, x[ti], left[ii], right[ii], h[ii], nmax)
            np.add.at(budget, ti, gq_error(P[ii], h[ii], S, rule) / math.pi)
            q = x[ti] / left[ii]
            if kernel == 'log':
                rem = 0.41 * q ** 5
            else:
                rem = 1.01 * 2.0 * x[ti] / left[ii] ** 2 * q ** 6
            np.add.at(budget, ti, h[ii] * P[ii, 0] * rem / math.pi)
        ti, ii = np.nonzero(code == TAYLOR_LEFT)
        if ti.size:
            q = right[ii] / x[ti]
            if kernel == 'log':
                rem = 0.41 * q ** 5
            else:
                rem = 1.01 * 2.0 / x[ti] * q ** 6
            np.add.at(budget, ti, h[ii] * P[ii, 0] * rem / math.pi)
    return budget


def _trace_counts(code: np.ndarray) -> List[Dict[str, int]]:
    out = []
    for row in code:
        counts: Dict[str, int] = {}
        for reg, name in REGIME_NAMES.items():
            c = int(np.count_nonzero(row == reg))
            if c:
                counts[name] = counts.get(name, 0) + c
        out.append(counts)
    return out


def velocity_density(dens: Density, xs, kernel: str, params: HilbertParams = DEFAULT_PARAMS,
                     with_budget: bool = True, progress: bool = False,
                     extra: Optional[Callable] = None, want_trace: bool = False):
    """Integrate a density against a kernel at many targets x ≥ 0.

    Args:
        dens: Piecewise quintic density.
        xs: Target points (nonnegative).
        kernel: 'log', 'odd' or 'even'.
        params: Regime thresholds.
        with_budget: Also compute error budgets.
        progress: Show a tqdm bar over target chunks.
        extra: Optional callback (x_chunk, code_chunk) -> additional budget.
        want_trace: Also return per-target regime counts.

    Returns:
        Tuple (values, budgets[, traces]).

    Raises:
        HilbertError: On negative targets.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs < 0.0):
        raise HilbertError("targets must be nonnegative")
    rule = gauss_rule(params.gauss_order)
    values = np.zeros(xs.size)
    budgets = np.zeros(xs.size)
    traces: List[Dict[str, int]] = []
    starts = range(0, xs.size, params.chunk)
    for s in tqdm(starts, desc="velocity", disable=not progress, leave=False):
        xc = xs[s:s + params.chunk]
        W, Wabs, code = _chunk_weights(xc, dens.left, dens.h, kernel, params, rule)
        values[s:s + xc.size] = np.einsum('tnm,nm->t', W, dens.coeffs)
        if with_budget:
            b = _chunk_budget(xc, dens, kernel, code, Wabs, params, rule)
            if extra is not None:
                b = b + extra(xc, code)
            budgets[s:s + xc.size] = b
        if want_trace:
            traces.extend(_trace_counts(code))
    if want_trace:
        return values, budgets, traces
    return values, budgets


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class VelocityEval:
    """A velocity value with a rigorous error budget and the regimes used."""

    value: float
    budget: float
    trace: Dict[str, int] = field(default_factory=dict)

    def enclosure(self) -> Interval:
        return Interval(math.nextafter(self.value - self.budget, -math.inf),
                        math.nextafter(self.value + self.budget, math.inf))

    def __add__(self, other: 'VelocityEval') -> 'VelocityEval':
        value = self.value + other.value
        trace = dict(self.trace)
        for k, v in other.trace.items():
            trace[k] = trace.get(k, 0) + v
        pad = 2.0 * _EPS * abs(value)
        return VelocityEval(value, self.budget + other.budget + pad, trace)

    def scaled(self, c: float) -> 'VelocityEval':
        return VelocityEval(c * self.value, abs(c) * self.budget * (1 + 2 * _EPS), dict(self.trace))

    def to_dict(self) -> dict:
        return {'value': self.value, 'budget': self.budget, 'trace': dict(self.trace)}


def _check_order(k: int) -> None:
    if k not in KERNEL_FOR_ORDER:
        raise HilbertError(f"velocity derivative order {k} out of range 0..3")


def velocity_spline_many(spline: QuinticSpline, xs, k: int, params: HilbertParams = DEFAULT_PARAMS,
                         progress: bool = False, with_budget: bool = True):
    """k-th velocity derivative of a spline density at many points x ≥ 0."""
    _check_order(k)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if spline.is_zero():
        return np.zeros(xs.size), np.zeros(xs.size)
    kernel, d = KERNEL_FOR_ORDER[k]
    dens = Density.from_spline(spline).derivative(d)
    return velocity_density(dens, xs, kernel, params, with_budget=with_budget, progress=progress)


def velocity_spline(spline: QuinticSpline, x: float, k: int,
                    params: HilbertParams = DEFAULT_PARAMS) -> VelocityEval:
    """k-th derivative of the velocity of a spline perturbation at one x ≥ 0.

    Raises:
        HilbertError: If k > 3 or x < 0.
    """
    _check_order(k)
    if x < 0.0:
        raise HilbertError("x must be nonnegative")
    if spline.is_zero():
        return VelocityEval(0.0, 0.0, {})
    kernel, d = KERNEL_FOR_ORDER[k]
    dens = Density.from_spline(spline).derivative(d)
    v, b, tr = velocity_density(dens, [x], kernel, params, want_trace=True)
    return VelocityEval(float(v[0]), float(b[0]), tr[0])


# ---------------------------------------------------------------------------
# Solver operator
# ---------------------------------------------------------------------------


class VelocityOperator:
    """Dense maps from spline node data (values, slopes) to velocities at the nodes.

    Curvatures are folded in through the spline curvature operator, so each
    stage of the time stepper needs one matrix-vector product per order.
    """

    def __init__(self, mesh: AdaptiveMesh, orders=(0, 1, 2), params: HilbertParams = DEFAULT_PARAMS,
                 progress: bool = False):
        self.mesh = mesh
        self.orders = tuple(orders)
        rule = gauss_rule(params.gauss_order)
        Cf, Cd = curvature_operator(mesh)
        n = mesh.n
        left, h = mesh.left, mesh.widths
        targets = mesh.nodes
        self.matrices: Dict[int, np.ndarray] = {}
        for k in self.orders:
            _check_order(k)
            kernel, d = KERNEL_FOR_ORDER[k]
            Mk = np.linalg.matrix_power(DMAT, d) @ HERMITE
            A_f = np.zeros((n + 1, n + 1))
            A_d = np.zeros((n + 1, n + 1))
            A_s = np.zeros((n + 1, n + 1))
            starts = range(0, n + 1, params.chunk)
            for s in tqdm(starts, desc=f"operator k={k}", disable=not progress, leave=False):
                xc = targets[s:s + params.chunk]
                rows = slice(s, s + xc.size)
                W, _, _ = _chunk_weights(xc, left, h, kernel, params, rule)
                B = np.einsum('tnm,mq->tnq', W, Mk) / h[None, :, None] ** d
                A_f[rows, :-1] += B[:, :, 0]
                A_f[rows, 1:] += B[:, :, 3]
                A_d[rows, :-1] += B[:, :, 1] * h
                A_d[rows, 1:] += B[:, :, 4] * h
                A_s[rows, :-1] += B[:, :, 2] * h ** 2
                A_s[rows, 1:] += B[:, :, 5] * h ** 2
            self.matrices[k] = np.hstack([A_f + A_s @ Cf, A_d + A_s @ Cd])
            logger.debug("velocity operator k=%d built (%d nodes)", k, n + 1)

    def apply(self, values: np.ndarray, slopes: np.ndarray, k: int) -> np.ndarray:
        if k not in self.matrices:
            raise HilbertError(f"order {k} was not assembled")
        return self.matrices[k] @ np.concatenate([values, slopes])


# ---------------------------------------------------------------------------
# Far field of a compactly supported perturbation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FarMoments:
    """m_i = (2/π)∫ y^i ω dy (i = 1, 3) and m5 ≥ (2/π)∫ y^5 |ω| dy."""

    m1: float
    m3: float
    m5: float
    L: float
    factor: float = 100.0

    def up(self, x: float, k: int) -> VelocityEval:
        """Moment expansion of the k-th velocity derivative for x ≥ factor·L.

        Raises:
            HilbertError: If x is inside the guard region or k > 3.
        """
        _check_order(k)
        if x < self.factor * self.L:
            raise HilbertError(f"far expansion needs x ≥ {self.factor}·L")
        m1, m3 = self.m1, self.m3
        if k == 0:
            v = -m1 / x - m3 / (3.0 * x ** 3)
        elif k == 1:
            v = m1 / x ** 2 + m3 / x ** 4
        elif k == 2:
            v = -2.0 * m1 / x ** 3 - 4.0 * m3 / x ** 5
        else:
            v = 6.0 * m1 / x ** 4 + 20.0 * m3 / x ** 6
        budget = FAR_UP_CONST[k] * 1.02 * self.m5 * x ** (-5.0 - k) + 8.0 * _EPS * abs(v)
        return VelocityEval(v, budget, {'far': 1})


def far_moments(spline: QuinticSpline, factor: float = 100.0) -> FarMoments:
    rule = gauss_rule(8)
    mesh = spline.mesh
    t = 0.5 * (1.0 + rule.nodes)
    w = 0.5 * rule.weights
    y = mesh.left[:, None] + mesh.widths[:, None] * t[None, :]
    p = np.polynomial.polynomial.polyval(t, spline.coeffs.T)
    hw = mesh.widths[:, None] * w[None, :]
    m1 = 2.0 / math.pi * float(np.sum(hw * p * y))
    m3 = 2.0 / math.pi * float(np.sum(hw * p * y ** 3))
    P0 = np.abs(spline.coeffs).sum(axis=1)
    m5 = 2.0 / math.pi * float(np.sum(mesh.widths * mesh.right ** 5 * P0)) * (1 + 1e-12)
    return FarMoments(m1, m3, m5, mesh.L, factor)


# ---------------------------------------------------------------------------
# F_a velocity
# ---------------------------------------------------------------------------


def _iv(value: float, rel: float = 8 * _EPS) -> Interval:
    pad = abs(value) * rel
    return Interval(math.nextafter(value - pad, -math.inf), math.nextafter(value + pad, math.inf))


def moment_Cu(a: float, A: float = 0.1, B: float = 10.0, panels: int = 20000) -> Interval:
    """Enclosure of C_u = H(f_a x^2)(0) = -(2/π)(I1 + I4 - I2 + I3), f_a = F_a - x^{-a}.

    I1 = ∫_0^A x F_a and I3 = ∫_B^∞ x f_a by four-term expansions with
    remainders, I2 = ∫_0^B x^{1-a} exactly, I4 = ∫_A^B x F_a by composite
    Simpson with the fourth-derivative error bound.

    Raises:
        HilbertError: If a is outside (0, 1).
    """
    if not 0.0 < a < 1.0:
        raise HilbertError("a must lie in (0, 1)")
    e = 5.0 + a
    I1 = sum((_iv((-1) ** i * A ** (7 + e * i) / (7 + e * i)) for i in range(4)), Interval(0.0, 0.0))
    I1 = I1 + Interval(0.0, _iv(A ** (27 + 4 * a) / (27 + 4 * a)).hi)
    I3 = sum((_iv((-1) ** (i + 1) * B ** (-e * i - 3 - 2 * a) / (3 + 2 * a + e * i)) for i in range(4)),
             Interval(0.0, 0.0))
    I3 = I3 + Interval(-_iv(B ** (-23 - 6 * a) / (23 + 6 * a)).hi, 0.0)
    I2 = _iv(B ** (2 - a) / (2 - a))

    y = np.linspace(A, B, panels + 1)
    hs = (B - A) / panels
    mids = 0.5 * (y[:-1] + y[1:])
    g = y * eval_Fa(a, y, 0)
    gm = mids * eval_Fa(a, mids, 0)
    terms = g[:-1] + g[1:] + 4.0 * gm
    simpson = hs / 6.0 * float(np.sum(terms))
    B3 = _monotone_fa(a, y[:-1], y[1:], 3)
    B4 = _monotone_fa(a, y[:-1], y[1:], 4)
    # (x F)'''' = x F'''' + 4 F'''
    err = hs ** 5 / 2880.0 * float(np.sum(y[1:] * B4 + 4.0 * B3))
    rounding = 64.0 * _EPS * (abs(simpson) + hs * float(np.sum(np.abs(terms)))) + 4 * _EPS * (B - A)
    I4 = Interval(simpson - err - rounding, simpson + err + rounding)

    total = I1 + I4 - I2 + I3
    return -(Interval(2.0, 2.0) / iv_pi()) * total


def Cu_closed_form(a: float) -> float:
    """2/((5+a) sin(π(2-a)/(5+a))), the exact value of C_u."""
    return 2.0 / ((5.0 + a) * math.sin(math.pi * (2.0 - a) / (5.0 + a)))


def cu_error_constant(a: float, k: int, x0: float) -> float:
    """C_{u,err}(k) for x ≥ x0, k = 0, 1, 2.

    (3+k)!/(3π)(1/(4-a) + 1/(1+2a)) + 2/(π x0)·‖x^{k+4}∂^k f_a‖_{L¹(R)}
    + (2/π) sup_{y ≥ x0/2} |y ∂_y(y^{k+4} ∂^k f_a)|.
    """
    if k not in (0, 1, 2):
        raise HilbertError("C_u,err is defined for k = 0, 1, 2")
    term1 = math.factorial(3 + k) / (3 * math.pi) * (1.0 / (4 - a) + 1.0 / (1 + 2 * a))
    # L¹ on [0, 9] from per-interval maxima of |x^{k+4}∂^k F_a| and |x^{k+4}∂^k x^{-a}|
    nodes = np.linspace(0.0, 9.0, 901)
    mesh = AdaptiveMesh(nodes, 0.0101, 0.0)
    Fb = Fa_bounds(a, mesh, k + 2)[k].magnitude()
    c0 = float(_series_coeffs(a, k)[0])
    xr = mesh.right
    part = np.sum(mesh.widths * xr ** (k + 4) * Fb) + np.sum(mesh.widths * c0 * xr ** (4.0 - a))
    tail = series_constant(9.0, a, k) * 9.0 ** (-2 * a) / (2 * a)
    l1 = 2.0 * (float(part) + tail) * 1.01
    term2 = 2.0 / (math.pi * x0) * l1
    y0 = x0 / 2.0
    term3 = 2.0 / math.pi * ((k + 4) * series_constant(y0, a, k)
                             + series_constant(y0, a, k + 1)) * y0 ** (-1 - 2 * a)
    return (term1 + term2 + term3) * (1 + 1e-12)


def _tail_value(a: float, L: float, x, k: int):
    """k-th velocity derivative of F_a restricted to [L, ∞), leading terms and budget."""
    x = np.asarray(x, dtype=float)
    if k == 0:
        v = -(1 / math.pi) * (2 * x * L ** (-a) / a + (2.0 / 3.0) * x ** 3 * L ** (-2 - a) / (2 + a))
        b = 2.01 * x * L ** (-5 - 2 * a) / (5 + 2 * a) + 0.41 * x ** 5 * L ** (-4 - a) / (4 + a)
    elif k == 1:
        v = -(2 / math.pi) * (L ** (-a) / a + x ** 2 * L ** (-a - 2) / (a + 2))
        b = 2.01 * L ** (-5 - 2 * a) / (5 + 2 * a) + 2.01 * x ** 4 * L ** (-4 - a) / (4 + a)
    elif k == 2:
        v = -(4 / math.pi) * x * L ** (-a - 2) / (a + 2)
        b = 4.01 * x * L ** (-7 - 2 * a) / (7 + 2 * a) + 8.1 * x ** 3 * L ** (-4 - a) / (4 + a)
    else:
        v = -(4 / math.pi) * L ** (-a - 2) / (a + 2) + 0.0 * x
        b = 4.01 * L ** (-7 - 2 * a) / (7 + 2 * a) + 28.0 * x ** 2 * L ** (-4 - a) / (4 + a)
    return v, b / math.pi + 8 * _EPS * np.abs(v)


def _abs_log_integral(c):
    """∫_0^c |log s| ds."""
    c = np.asarray(c, dtype=float)
    small = c * (1.0 - _safe_log(c))
    big = 2.0 + c * _safe_log(c) - c
    return np.where(c <= 1.0, np.where(c > 0.0, small, 0.0), big)


def _hermite_errors(h: np.ndarray, sup6: np.ndarray, data) -> List[np.ndarray]:
    """Bounds of |∂^j (g - p)|, j = 0..3, for the quintic Hermite interpolant p of g.

    sup6 bounds |g⁽⁶⁾| per interval; data = (δf, δd, δs) bounds the node
    data errors, which reach p through the Hermite basis.
    """
    interp = [h ** 6 / 46080.0 * sup6] + [h ** (6 - j) / math.factorial(6 - j) * sup6
                                         for j in range(1, 4)]
    df, dd, ds = data
    ends = (df[:-1] + h * dd[:-1] + h * h * ds[:-1]) + (df[1:] + h * dd[1:] + h * h * ds[1:])
    return [interp[j] + HERMITE_BASIS_MAX[j] * ends / h ** j for j in range(4)]


def _interp_callback(left: np.ndarray, h: np.ndarray, e0: np.ndarray, e1: np.ndarray,
                     kernel: str) -> Callable:
    """Budget callback for velocity_density: the velocity of a density error.

    e0 bounds the density error on each interval and e1 its derivative.
    """
    right = left + h

    def extra(xc, code):
        out = np.zeros(xc.size)
        for r, x in enumerate(xc):
            c = code[r]
            near = c == NEAR
            if x == 0.0 and kernel == 'odd':
                val = 2.0 * e1[0] * h[0] + np.sum(2.0 * e0[1:] * h[1:] / left[1:])
                out[r] = val / math.pi
                continue
            if x == 0.0:
                continue
            far = ~near
            S0 = scaled_kernel_bounds(kernel, np.full(np.count_nonzero(far), x), left[far],
                                      right[far], h[far], 0)[:, 0]
            total = float(np.sum(e0[far] * h[far] * S0))
            if np.any(near):
                A, B = float(left[near].min()), float(right[near].max())
                en0, en1 = float(e0[near].max()), float(e1[near].max())
                if kernel == 'log':
                    total += en0 * float(_abs_log_integral(x - A) + _abs_log_integral(B - x))
                    plus = np.maximum(np.abs(np.log(x + left[near])), np.abs(np.log(x + right[near])))
                else:
                    total += en1 * (B - A)
                    if A < x < B:
                        total += en0 * abs(math.log((x - A) / (B - x)))
                    plus = 1.0 / (x + left[near])
                total += float(np.sum(e0[near] * h[near] * plus))
            out[r] = total / math.pi * (1 + 1e-12)
        return out

    return extra


def edge_terms(g: float, dg: float, c: float, x, k: int) -> np.ndarray:
    """Boundary terms at an upper cutoff y = c of a density with g(c), g'(c).

    The density forms of u_xx and u_xxx integrate by parts; u and u_x have
    no boundary terms.
    """
    x = np.asarray(x, dtype=float)
    if k == 2:
        return -g * 2.0 * x / ((x - c) * (x + c)) / math.pi
    if k == 3:
        return (-dg * 2.0 * c / ((x - c) * (x + c))
                + g * (1.0 / (x - c) ** 2 + 1.0 / (x + c) ** 2)) / math.pi
    return np.zeros_like(x)


def power_core(a: float, x, k: int) -> np.ndarray:
    """k-th velocity derivative of sgn(y)|y|^{-a} at x > 0.

    u_x = -cot(πa/2) x^{-a}, and u = -cot(πa/2) x^{1-a}/(1-a) with u(0) = 0.
    """
    x = np.asarray(x, dtype=float)
    c = hilbert_power_law(a)
    if k == 0:
        return c / (1.0 - a) * x ** (1.0 - a)
    return c * (-1.0) ** (k - 1) * _series_coeffs(a, k - 1)[0] * x ** (1.0 - a - k)


def power_head_velocity(a: float, y0: float, x, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """k-th velocity derivative of y^{-a} on [0, y0], for x ≥ 4·y0, with budget.

    Expanding the log kernel in y/x gives
        u = -(2/π) Σ_{n odd} y0^{n+1-a} x^{-n} / (n (n+1-a)),
    summed to n = 2·HEAD_TERMS - 1. With y0/x ≤ 1/4 consecutive terms shrink
    by at least half, so the tail is below twice the first dropped term.

    Raises:
        HilbertError: If some x < 4·y0.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 4.0 * y0):
        raise HilbertError("the cut power law is only expanded for x ≥ 4·y0")
    r = y0 / x
    scale = -(2.0 / math.pi) * (-1.0) ** k * y0 ** (1.0 - a) * x ** (-float(k))

    def term(n):
        rising = math.prod(n + m for m in range(k))
        return scale * rising / (n * (n + 1.0 - a)) * r ** n

    value = np.zeros_like(x)
    mag = np.zeros_like(x)
    for n in range(2 * HEAD_TERMS - 1, 0, -2):
        t = term(n)
        value += t
        mag += np.abs(t)
    tail = 2.0 * np.abs(term(2 * HEAD_TERMS + 1))
    return value, tail + 8 * HEAD_TERMS * _EPS * mag


def _remainder_tail(a: float, L: float, x, k: int) -> np.ndarray:
    """Bound on the velocity of F_a - y^{-a} restricted to [L, ∞), density form, x ≤ L/100."""
    x = np.asarray(x, dtype=float)
    kernel, d = KERNEL_FOR_ORDER[k]
    p = 5.0 + 2.0 * a + d
    C = series_constant(L, a, d)
    if kernel == 'log':
        b = 2.01 * x * C * L ** (-p) / p
    elif kernel == 'odd':
        b = 2.01 * C * L ** (-p) / p + 0.0 * x
    else:
        b = 2.01 * x * C * L ** (-p - 1.0) / (p + 1.0)
    return b / math.pi


class FaVelocity:
    """Velocity of F_a and its derivatives with budgets.

    For x ≥ M1 the two-term far-field expansion with C_u and C_{u,err} is
    used. Below M2 (everywhere below M1 with fa_method 'hermite') F_a is
    replaced by its quintic Hermite interpolant on a geometric mesh up to
    fa_L, integrated like any other density, plus the analytic tail on
    [fa_L, ∞) and the interpolation error carried through kernel L¹ bounds.

    On [M2, M1) with fa_method 'split', F_a = y^{-a} + f_a: the power law
    contributes its exact velocity -cot(πa/2) x^{-a}, the smooth f_a is
    interpolated on [y0, fa_L], and near the origin the Hermite F_a on
    [0, y0] replaces y^{-a}, whose cut velocity is summed in closed form.
    """

    def __init__(self, a: float, params: HilbertParams = DEFAULT_PARAMS):
        if not 0.0 < a < 1.0:
            raise HilbertError("a must lie in (0, 1)")
        if params.fa_method not in FA_METHODS:
            raise HilbertError(f"unknown fa_method {params.fa_method!r}, expected one of {FA_METHODS}")
        self.a = a
        self.params = params
        mesh = build_mesh(params.fa_L, params.fa_abs_cap, params.fa_rel_cap)
        self.mesh = mesh
        x, h = mesh.nodes, mesh.widths
        f, d, s = (eval_Fa(a, x, j) for j in range(3))
        f[0] = 0.0
        coeffs = hermite_coefficients(h, f[:-1], d[:-1], s[:-1], f[1:], d[1:], s[1:])
        self.density = Density(mesh.left, h, coeffs)
        self.F_end = (float(f[-1]), float(d[-1]))
        F6 = Fa_bounds(a, mesh, 8)[6].magnitude()
        self.interp_err = _hermite_errors(h, F6, [eval_Fa_error(a, x, j) for j in range(3)])
        self.C_u = moment_Cu(a, params.cu_A, params.cu_B, params.cu_panels)
        self.C_err = [cu_error_constant(a, k, params.M1) for k in range(3)]
        self.cot = 1.0 / math.tan(math.pi * a / 2.0)
        if params.fa_method == FA_SPLIT:
            self._build_split(F6)
        logger.info("F_a velocity ready: a=%.9f, %d Hermite intervals, method=%s, C_u=%s",
                    a, mesh.n, params.fa_method, self.C_u)

    def _build_split(self, F6: np.ndarray):
        """Hermite interpolant of f_a = F_a - y^{-a} on [y0, fa_L]."""
        a, mesh, params = self.a, self.mesh, self.params
        if params.M2 >= params.M1 or params.fa_L < 100.0 * params.M1:
            raise HilbertError("the split method needs M2 < M1 and fa_L ≥ 100·M1")
        j0 = int(np.searchsorted(mesh.nodes, params.M2 / 4.0, side='right')) - 1
        if j0 < 1:
            raise HilbertError(f"M2={params.M2} leaves no F_a mesh node below M2/4")
        self.j0 = j0
        self.y0 = float(mesh.nodes[j0])
        x = mesh.nodes[j0:]
        h = mesh.widths[j0:]
        left = mesh.left[j0:]
        (f, ef), (d, ed), (s, es) = (eval_fa_remainder(a, x, j) for j in range(3))
        coeffs = hermite_coefficients(h, f[:-1], d[:-1], s[:-1], f[1:], d[1:], s[1:])
        self.remainder = Density(left, h, coeffs)
        sup6 = F6[j0:] + _series_coeffs(a, 6)[0] * left ** (-a - 6.0)
        far = left >= SERIES_MIN_X
        series = np.array([series_constant(float(v), a, 6) for v in left[far]])
        sup6[far] = np.minimum(sup6[far], series * left[far] ** (-11.0 - 2.0 * a))
        self.remainder_err = _hermite_errors(h, sup6, (ef, ed, es))
        logger.debug("F_a split: y0=%.6g, %d remainder intervals", self.y0, h.size)

    def _asymptotic(self, x: np.ndarray, k: int):
        a, cot = self.a, self.cot
        cu, cu_rad = self.C_u.mid, 0.5 * self.C_u.width
        if k == 0:
            lead = -cot / (1.0 - a) * x ** (1.0 - a)
            coef = 1.0 / x
            err = self.C_err[0] / (3.0 * x ** 3)
        elif k == 1:
            lead = -cot * x ** (-a)
            coef = -1.0 / x ** 2
            err = self.C_err[0] * x ** -4.0
        elif k == 2:
            lead = a * cot * x ** (-a - 1.0)
            coef = 2.0 / x ** 3
            err = self.C_err[1] * x ** -5.0
        else:
            lead = -a * (a + 1.0) * cot * x ** (-a - 2.0)
            coef = -6.0 / x ** 4
            err = self.C_err[2] * x ** -6.0
        v = lead + cu * coef
        return v, err + cu_rad * np.abs(coef) + 16 * _EPS * (np.abs(lead) + np.abs(cu * coef))

    def _hermite(self, x: np.ndarray, k: int, progress: bool):
        kernel, d = KERNEL_FOR_ORDER[k]
        dens = self.density
        v, b = velocity_density(dens.derivative(d), x, kernel, self.params, progress=progress,
                                extra=_interp_callback(dens.left, dens.h, self.interp_err[d],
                                                       self.interp_err[d + 1], kernel))
        L = self.params.fa_L
        FL, dFL = self.F_end
        bnd = edge_terms(FL, dFL, L, x, k)
        tv, tb = _tail_value(self.a, L, x, k)
        return v + bnd + tv, b + tb + 8 * _EPS * (np.abs(bnd) + np.abs(v))

    def _split(self, x: np.ndarray, k: int, progress: bool):
        a, y0, j0 = self.a, self.y0, self.j0
        kernel, d = KERNEL_FOR_ORDER[k]
        full = self.density
        head = Density(full.left[:j0], full.h[:j0], full.coeffs[:j0])
        vh, bh = velocity_density(head.derivative(d), x, kernel, self.params, progress=progress,
                                  extra=_interp_callback(head.left, head.h, self.interp_err[d][:j0],
                                                         self.interp_err[d + 1][:j0], kernel))
        rest = self.remainder
        vr, br = velocity_density(rest.derivative(d), x, kernel, self.params, progress=progress,
                                  extra=_interp_callback(rest.left, rest.h, self.remainder_err[d],
                                                         self.remainder_err[d + 1], kernel))
        core = power_core(a, x, k)
        vp, bp = power_head_velocity(a, y0, x, k)
        edge = edge_terms(y0 ** -a, -a * y0 ** (-a - 1.0), y0, x, k)
        value = core + vh + vr - vp + edge
        rounding = 16 * _EPS * (np.abs(core) + np.abs(vh) + np.abs(vr) + np.abs(vp) + np.abs(edge))
        budget = bh + br + bp + _remainder_tail(a, self.params.fa_L, x, k) + rounding
        return value, budget

    def regime(self, x: float) -> str:
        if x >= self.params.M1:
            return 'asymptotic'
        if self.params.fa_method == FA_SPLIT and x >= self.params.M2:
            return FA_SPLIT
        return FA_HERMITE

    def eval_many(self, xs, k: int, progress: bool = False):
        """k-th velocity derivative of F_a at many x ≥ 0 as (values, budgets)."""
        _check_order(k)
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        values = np.zeros(xs.size)
        budgets = np.zeros(xs.size)
        asym = xs >= self.params.M1
        split = ~asym & (xs >= self.params.M2) & (self.params.fa_method == FA_SPLIT)
        inner = ~(asym | split)
        for mask, method in ((asym, lambda x: self._asymptotic(x, k)),
                             (split, lambda x: self._split(x, k, progress)),
                             (inner, lambda x: self._hermite(x, k, progress))):
            if np.any(mask):
                values[mask], budgets[mask] = method(xs[mask])
        return values, budgets

    def eval(self, x: float, k: int) -> VelocityEval:
        v, b = self.eval_many([x], k)
        return VelocityEval(float(v[0]), float(b[0]), {self.regime(x): 1})


@lru_cache(maxsize=8)
def fa_velocity(a: float, params: HilbertParams = DEFAULT_PARAMS) -> FaVelocity:
    return FaVelocity(a, params)


def velocity_Fa(a: float, x: float, k: int, params: HilbertParams = DEFAULT_PARAMS) -> VelocityEval:
    """k-th derivative of the velocity of F_a at x ≥ 0."""
    if x < 0.0:
        raise HilbertError("x must be nonnegative")
    return fa_velocity(a, params).eval(x, k)


def velocity_closed_rational(s: float, r: float, x: float, k: int) -> float:
    """Exact k-th derivative of the velocity of s·y/(1+(r y)^2)."""
    _check_order(k)
    return rational_velocity(s, r, x, k)


def hilbert_power_law(a: float) -> float:
    """H(sgn(x)|x|^{-a}) = -cot(πa/2)|x|^{-a}: the coefficient -cot(πa/2)."""
    return -1.0 / math.tan(math.pi * a / 2.0)


# ---------------------------------------------------------------------------
# Full fields
# ---------------------------------------------------------------------------


class FieldVelocity:
    """Velocity of b·F_a + R_{s,r} + spline, evaluated with budgets."""

    def __init__(self, b: float, a: float, s: float, r: float, spline: QuinticSpline,
                 params: HilbertParams = DEFAULT_PARAMS):
        self.b, self.a, self.s, self.r = b, a, s, r
        self.spline = spline
        self.params = params
        self._far: Optional[FarMoments] = None

    @classmethod
    def omega(cls, profile: ExplicitProfile, spline: QuinticSpline,
              params: HilbertParams = DEFAULT_PARAMS) -> 'FieldVelocity':
        return cls(profile.b_w, profile.a_w, profile.s_w, profile.r_w, spline, params)

    @classmethod
    def theta(cls, profile: ExplicitProfile, spline: QuinticSpline,
              params: HilbertParams = DEFAULT_PARAMS) -> 'FieldVelocity':
        """Hv̄ (= ū_{θ,x} for k = 1) from the v-profile."""
        return cls(profile.b_v, profile.a_v, profile.s_v, profile.r_v, spline, params)

    @property
    def far(self) -> FarMoments:
        if self._far is None:
            self._far = far_moments(self.spline, self.params.far_factor)
        return self._far

    def explicit_many(self, xs, k: int, progress: bool = False):
        """Velocity of the explicit part b·F_a + R_{s,r} alone."""
        v, bud = fa_velocity(self.a, self.params).eval_many(xs, k, progress=progress)
        rv = rational_velocity(self.s, self.r, np.asarray(xs, dtype=float), k)
        return self.b * v + rv, abs(self.b) * bud + 8 * _EPS * (np.abs(rv) + np.abs(self.b * v))

    def spline_many(self, xs, k: int, progress: bool = False):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        values = np.zeros(xs.size)
        budgets = np.zeros(xs.size)
        cut = self.params.far_factor * self.spline.L
        far = xs >= cut
        if np.any(~far):
            values[~far], budgets[~far] = velocity_spline_many(self.spline, xs[~far], k,
                                                               self.params, progress=progress)
        for i in np.nonzero(far)[0]:
            ev = self.far.up(float(xs[i]), k)
            values[i], budgets[i] = ev.value, ev.budget
        return values, budgets

    def eval_many(self, xs, k: int, progress: bool = False):
        """(values, budgets) of the k-th velocity derivative at x ≥ 0."""
        _check_order(k)
        ev, eb = self.explicit_many(xs, k, progress)
        sv, sb = self.spline_many(xs, k, progress)
        total = ev + sv
        return total, eb + sb + 4 * _EPS * np.abs(total)

    def eval(self, x: float, k: int) -> VelocityEval:
        """Single evaluation; negative x uses u^{(k)}(-x) = (-1)^{k+1} u^{(k)}(x)."""
        _check_order(k)
        sign = 1.0
        if x < 0.0:
            sign = (-1.0) ** (k + 1)
            x = -x
        fa = velocity_Fa(self.a, x, k, self.params).scaled(self.b)
        rat = VelocityEval(rational_velocity(self.s, self.r, x, k), 0.0, {'closed': 1})
        if x >= self.params.far_factor * self.spline.L:
            sp = self.far.up(x, k)
        else:
            sp = velocity_spline(self.spline, x, k, self.params)
        total = fa + rat + sp
        return total.scaled(sign)


def velocity_total(profile: ExplicitProfile, omega_p: QuinticSpline, x: float, k: int,
                   params: HilbertParams = DEFAULT_PARAMS) -> VelocityEval:
    """u^{(k)}(x) for ω = b_ω F_{a_ω} + R_{s_ω,r_ω} + ω_p."""
    return FieldVelocity.omega(profile, omega_p, params).eval(x, k)
