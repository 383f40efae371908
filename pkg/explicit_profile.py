"""
Explicit far-field parts of the approximate steady state.

The profile is ω̄ = b_ω F_{a_ω} + R_{s_ω, r_ω} + ω_p and likewise for v̄, with
    F_a(x) = x^5 / (1 + |x|^{5+a})      (odd extension)
    R_{s,r}(x) = s x / (1 + (r x)^2).

This module provides:
- ExplicitProfile: the parameter record of ω_b and v_b
- FaDerivTable: cached polynomial tables for the derivatives of F_a
- eval_Fa / eval_Fa_series / Fa_bounds: values, tail series and per-interval
  derivative bounds of F_a
- eval_Fa_error / eval_fa_remainder: node-data error bounds, and F_a - x^{-a}
  without cancellation for the mid field
- eval_rational / far_bound / rational_velocity: the rational normalizer,
  its far-field derivative bound and its closed-form Hilbert transform
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from grid import AdaptiveMesh, PiecewiseBound

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

MAX_FA_ORDER = 24
MAX_SERIES_ORDER = 20
SERIES_TERMS = 10
SERIES_MIN_X = 9.0
SERIES_SWITCH_X = 1e5
SERIES_BOUND_X = 10.0
RATIONAL_FAR_RX = 1e10
RATIONAL_FAR_EPS = 0.02

DEFAULT_PARAMS = {
    'b_w': 1.37954,
    'a_w': 1.00043212 / 3,
    's_w': 0.6734,
    'r_w': 1.3468,
    'b_v': 1.7711,
    'a_v': None,
    's_v': 1.0101,
    'r_v': 1.0101,
}


class ProfileError(ValueError):
    """Raised for invalid profile parameters or derivative orders."""


@dataclass(frozen=True)
class ExplicitProfile:
    """Parameters of ω_b = b_ω F_{a_ω} + R_{s_ω,r_ω} and v_b = b_v F_{a_v} + R_{s_v,r_v}."""

    b_w: float = DEFAULT_PARAMS['b_w']
    a_w: float = DEFAULT_PARAMS['a_w']
    s_w: float = DEFAULT_PARAMS['s_w']
    r_w: float = DEFAULT_PARAMS['r_w']
    b_v: float = DEFAULT_PARAMS['b_v']
    a_v: float = 2 * DEFAULT_PARAMS['a_w']
    s_v: float = DEFAULT_PARAMS['s_v']
    r_v: float = DEFAULT_PARAMS['r_v']

    def __post_init__(self):
        for name in ('a_w', 'a_v'):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ProfileError(f"{name}={value} must lie in (0, 1)")
        if abs(self.a_v - 2.0 * self.a_w) > 4 * _EPS:
            raise ProfileError(f"a_v={self.a_v} must equal 2·a_w={2 * self.a_w}")
        for name in ('s_w', 'r_w', 's_v', 'r_v'):
            if getattr(self, name) <= 0.0:
                raise ProfileError(f"{name} must be positive")

    def omega_b(self, x, k: int = 0):
        """k-th derivative of ω_b."""
        return self.b_w * eval_Fa(self.a_w, x, k) + eval_rational(self.s_w, self.r_w, x, k)

    def v_b(self, x, k: int = 0):
        """k-th derivative of v_b = ∂_x θ_b."""
        return self.b_v * eval_Fa(self.a_v, x, k) + eval_rational(self.s_v, self.r_v, x, k)

    def omega_b_bounds(self, mesh: AdaptiveMesh, max_k: int) -> List[PiecewiseBound]:
        return _combine_bounds(self.b_w, Fa_bounds(self.a_w, mesh, max_k),
                               rational_bounds(self.s_w, self.r_w, mesh, max_k))

    def v_b_bounds(self, mesh: AdaptiveMesh, max_k: int) -> List[PiecewiseBound]:
        return _combine_bounds(self.b_v, Fa_bounds(self.a_v, mesh, max_k),
                               rational_bounds(self.s_v, self.r_v, mesh, max_k))

    def envelope(self, field: str, k: int, L: float) -> Tuple[float, float]:
        """(A, p) with |∂^k part(x)| ≤ A x^{-p} for every x ≥ L, part = ω_b or v_b.

        The F_a term is bounded by its leading series term plus the series
        remainder, the rational term by s k! r^{-2} x^{-k-1} ≤ s k! r^{-2} L^{a-1} x^{-a-k}.

        Raises:
            ProfileError: If L < 9 or field is unknown.
        """
        if field == 'omega':
            b, a, s, r = self.b_w, self.a_w, self.s_w, self.r_w
        elif field == 'v':
            b, a, s, r = self.b_v, self.a_v, self.s_v, self.r_v
        else:
            raise ProfileError(f"unknown field {field!r}")
        lead = float(_series_coeffs(a, k)[0]) + series_constant(L, a, k) * L ** (-5.0 - a)
        rational = s * math.factorial(k) / r ** 2 * L ** (a - 1.0)
        return (abs(b) * lead + rational) * (1.0 + 1e-12), a + k

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in DEFAULT_PARAMS}


def make_explicit(config=None) -> ExplicitProfile:
    """Build the explicit profile from the `profile` config section.

    Unset entries take the reference defaults; a_v defaults to 2·a_w.

    Raises:
        ProfileError: If parameters are out of range.
    """
    section = (config.get('profile', {}) if config is not None else {}) or {}
    params = {}
    for name, default in DEFAULT_PARAMS.items():
        value = section.get(name, default)
        if value is not None:
            params[name] = float(value)
    params.setdefault('a_v', 2.0 * params['a_w'])
    return ExplicitProfile(**params)


# ---------------------------------------------------------------------------
# F_a derivatives
# ---------------------------------------------------------------------------


class FaDerivTable:
    """Polynomials P_{j,k} with ∂^k F_a = Σ_j g^{(j)}(x^{5+a}) x^{ja+5-k} P_{j,k}(x).

    g(s) = 1/(1+s), so g^{(j)}(s) = (-1)^j j!/(1+s)^{j+1}. The tables follow
        P_{0,0} = 1,
        P_{j,k} = (5+a) x^5 P_{j-1,k-1} + (ja+6-k) P_{j,k-1} + x P'_{j,k-1}.
    Coefficients are stored in ascending powers.
    """

    def __init__(self, a: float, order: int = MAX_FA_ORDER):
        self.a = float(a)
        self.order = order
        table = [[np.zeros(1)] * (order + 1) for _ in range(order + 1)]
        table[0][0] = np.ones(1)
        x5 = np.zeros(6)
        x5[5] = 1.0
        for k in range(1, order + 1):
            for j in range(0, k + 1):
                acc = np.zeros(5 * j + 1)
                if j >= 1:
                    prev = npoly.polymul(x5, table[j - 1][k - 1]) * (5.0 + self.a)
                    acc[:prev.size] += prev[:acc.size]
                if j <= k - 1:
                    p = table[j][k - 1]
                    xdp = npoly.polymulx(npoly.polyder(p)) if p.size > 1 else np.zeros(1)
                    same = (j * self.a + 6.0 - k) * p
                    acc[:same.size] += same
                    acc[:xdp.size] += xdp[:acc.size]
                table[j][k] = acc
        self.P = table
        self.absP = [[np.abs(p) for p in row] for row in table]


@lru_cache(maxsize=16)
def get_table(a: float) -> FaDerivTable:
    return FaDerivTable(a)


def _check_order(k: int, limit: int) -> None:
    if not 0 <= k <= limit:
        raise ProfileError(f"derivative order {k} out of range 0..{limit}")


def _fa_positive(a: float, x: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """∂^k F_a and the sum of term magnitudes for x > 0 (recursion form)."""
    tab = get_table(a)
    val = np.zeros_like(x)
    mag = np.zeros_like(x)
    with np.errstate(over='ignore', under='ignore', divide='ignore', invalid='ignore'):
        s = np.power(x, 5.0 + a)
        big = x > 1.0
        # x ≤ 1: direct form
        q = 1.0 / (1.0 + s)
        # x > 1: scaled form with w = s/(1+s) and y = 1/x
        w = s / (1.0 + s)
        y = 1.0 / x
        lead = np.power(x, -a - k)
        for j in range(0, k + 1):
            p = tab.P[j][k]
            if not np.any(p):
                continue
            fact = math.factorial(j) * (-1.0) ** j
            direct = fact * np.power(x, j * a + 5.0 - k) * npoly.polyval(x, p) * q ** (j + 1)
            # P(x)/x^{5j} = Σ_m p_m y^{5j-m}
            scaled = fact * lead * w ** (j + 1) * npoly.polyval(y, p[::-1])
            term = np.where(big, scaled, direct)
            term = np.where(np.isfinite(term), term, 0.0)
            val += term
            mag += np.abs(term)
    return val, mag


def eval_Fa(a: float, x, k: int = 0):
    """k-th derivative of the odd extension of F_a(x) = x^5/(1+|x|^{5+a}).

    Raises:
        ProfileError: For k > 24, or k > 10 at x = 0.
    """
    _check_order(k, MAX_FA_ORDER)
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    out = np.zeros_like(ax)
    pos = ax > 0.0
    if np.any(~pos):
        if k > 10:
            raise ProfileError(f"∂^{k} F_a is unbounded at x = 0")
        out[~pos] = 120.0 if k == 5 else 0.0
    mid = pos & (ax <= SERIES_SWITCH_X)
    if np.any(mid):
        out[mid] = _fa_positive(a, ax[mid], k)[0]
    far = ax > SERIES_SWITCH_X
    if np.any(far):
        series_k = min(k, MAX_SERIES_ORDER)
        if series_k != k:
            out[far] = _fa_positive(a, ax[far], k)[0]
        else:
            out[far] = eval_Fa_series(a, ax[far], k)[0]
    sign = np.where(xa < 0.0, (-1.0) ** (k + 1), 1.0)
    out = sign * out
    if np.ndim(x) == 0:
        return float(out)
    return out


def _series_coeffs(a: float, k: int) -> np.ndarray:
    """C_{i,k} = Π_{j<k} ((5+a) i + a + j) for i = 0..SERIES_TERMS."""
    e = (5.0 + a) * np.arange(SERIES_TERMS + 1) + a
    c = np.ones(SERIES_TERMS + 1)
    for j in range(k):
        c *= e + j
    return c


def series_remainder(a: float, x, k: int):
    """Bound on the tail Σ_{i≥10} of the alternating series of ∂^k F_a."""
    x = np.asarray(x, dtype=float)
    c = _series_coeffs(a, k)
    e10 = (5.0 + a) * SERIES_TERMS + a
    rho = (1.0 + (5.0 + a) / e10) ** k * np.power(x, -(5.0 + a))
    computed = c[SERIES_TERMS] * np.power(x, -e10 - k) / (1.0 - rho)
    stated = np.power(x, -30.0 - a) / (1.0 - np.power(x, -3.0))
    return np.maximum(computed, stated)


def eval_Fa_series(a: float, x, k: int = 0):
    """Ten-term series of ∂^k F_a for x ≥ 9 and its remainder bound.

    ∂^k F_a(x) = Σ_{i=0}^{9} (-1)^{i+k} C_{i,k} x^{-(5+a)i-a-k} + Err,
    |Err| ≤ x^{-30-a}/(1 - x^{-3}) (widened when C_{10,k} dominates).

    Returns:
        Tuple of (value, err) with the shape of x.

    Raises:
        ProfileError: If x < 9 or k > 20.
    """
    _check_order(k, MAX_SERIES_ORDER)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < SERIES_MIN_X):
        raise ProfileError("the series form needs x ≥ 9")
    c = _series_coeffs(a, k)
    val = np.zeros_like(xa)
    for i in range(SERIES_TERMS - 1, -1, -1):
        val += (-1.0) ** (i + k) * c[i] * np.power(xa, -(5.0 + a) * i - a - k)
    err = series_remainder(a, xa, k)
    if np.ndim(x) == 0:
        return float(val), float(err)
    return val, err


def eval_Fa_error(a: float, x, k: int = 0) -> np.ndarray:
    """Error bound of eval_Fa at the same points."""
    _check_order(k, MAX_SERIES_ORDER)
    ax = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
    err = np.zeros_like(ax)
    mid = (ax > 0.0) & (ax <= SERIES_SWITCH_X)
    if np.any(mid):
        err[mid] = 16 * _EPS * _fa_positive(a, ax[mid], k)[1]
    far = ax > SERIES_SWITCH_X
    if np.any(far):
        value, tail = eval_Fa_series(a, ax[far], k)
        err[far] = tail + 4 * SERIES_TERMS * _EPS * np.abs(value)
    return err


def eval_fa_remainder(a: float, x, k: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """∂^k f_a for f_a = F_a - x^{-a} at x > 0, with an error bound.

    From x = 9 on the series without its leading term is summed directly,
    so the difference never cancels.

    Returns:
        Tuple of (value, err) arrays.
    """
    _check_order(k, MAX_SERIES_ORDER)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0.0):
        raise ProfileError("f_a is only evaluated at x > 0")
    c = _series_coeffs(a, k)
    lead = (-1.0) ** k * c[0] * np.power(x, -a - k)
    value = np.zeros_like(x)
    err = np.zeros_like(x)
    near = x < SERIES_MIN_X
    if np.any(near):
        full, mag = _fa_positive(a, x[near], k)
        value[near] = full - lead[near]
        err[near] = 16 * _EPS * (mag + np.abs(lead[near]))
    far = ~near
    if np.any(far):
        xf = x[far]
        s = np.zeros_like(xf)
        for i in range(SERIES_TERMS - 1, 0, -1):
            s += (-1.0) ** (i + k) * c[i] * np.power(xf, -(5.0 + a) * i - a - k)
        value[far] = s
        err[far] = series_remainder(a, xf, k) + 4 * SERIES_TERMS * _EPS * np.abs(s)
    return value, err


def series_constant(x0: float, a: float, k: int) -> float:
    """C(x0, a, k) with |∂^k(F_a - x^{-a})| ≤ C(x0, a, k) x^{-5-2a-k} for x ≥ x0."""
    if x0 < SERIES_MIN_X:
        raise ProfileError("x0 must be ≥ 9")
    c = _series_coeffs(a, k)
    total = sum(c[i] * x0 ** (-(5.0 + a) * (i - 1)) for i in range(1, SERIES_TERMS))
    total += float(series_remainder(a, x0, k)) * x0 ** (5.0 + 2.0 * a + k)
    return total * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# Per-interval bounds
# ---------------------------------------------------------------------------


def _monotone_fa(a: float, lo: np.ndarray, hi: np.ndarray, k: int) -> np.ndarray:
    """Σ_j j! Σ_m |p_m| sup x^{ja+5-k+m} / inf (1+x^{5+a})^{j+1} on [lo, hi]."""
    tab = get_table(a)
    out = np.zeros_like(lo)
    with np.errstate(over='ignore', divide='ignore', invalid='ignore'):
        base = 1.0 + np.power(lo, 5.0 + a)
        for j in range(0, k + 1):
            p = tab.absP[j][k]
            inv = np.power(base, -(j + 1.0))
            for m, pm in enumerate(p):
                if pm == 0.0:
                    continue
                e = j * a + 5.0 - k + m
                if e >= 0:
                    factor = np.power(hi, e)
                else:
                    factor = np.where(lo > 0.0, np.power(lo, e), np.inf)
                out += math.factorial(j) * pm * factor * inv
    return np.where(np.isnan(out), np.inf, out) * (1.0 + 1e-12)


def _intersect(low1, up1, low2, up2) -> Tuple[np.ndarray, np.ndarray]:
    low = np.maximum(low1, low2)
    up = np.minimum(up1, up2)
    # rounding can leave empty intersections only when both are sharp
    bad = low > up
    if np.any(bad):
        low = np.where(bad, np.minimum(low1, low2), low)
        up = np.where(bad, np.maximum(up1, up2), up)
    return low, up


def _downward(mesh: AdaptiveMesh, max_k: int,
              endpoint: Callable[[np.ndarray, int], Tuple[np.ndarray, np.ndarray]],
              monotone: Callable[[np.ndarray, np.ndarray, int], np.ndarray],
              extra: Optional[Callable[[int], Tuple[np.ndarray, np.ndarray]]] = None
              ) -> List[PiecewiseBound]:
    """Per-interval bounds for orders max_k..0.

    The two top orders use monotone-factor estimates; lower orders intersect
    those with endpoint values plus h²/8 times the bound two orders up.
    """
    lo, hi = mesh.left, mesh.right
    h2 = mesh.widths ** 2 / 8.0
    bounds: List[Optional[PiecewiseBound]] = [None] * (max_k + 1)
    for k in range(max_k, -1, -1):
        mag = monotone(lo, hi, k)
        low, up = -mag, mag
        if k <= max_k - 2:
            vl, pl = endpoint(lo, k)
            vr, pr = endpoint(hi, k)
            curv = bounds[k + 2].magnitude()
            with np.errstate(invalid='ignore', over='ignore'):
                pad = h2 * curv
            pad = np.where(np.isnan(pad), np.inf, pad)
            ilow = np.minimum(vl - pl, vr - pr) - pad
            iup = np.maximum(vl + pl, vr + pr) + pad
            low, up = _intersect(low, up, ilow, iup)
        if extra is not None:
            elow, eup = extra(k)
            low, up = _intersect(low, up, elow, eup)
        bounds[k] = PiecewiseBound(mesh, np.nextafter(low, -np.inf), np.nextafter(up, np.inf))
    return bounds


def Fa_bounds(a: float, mesh: AdaptiveMesh, max_k: int) -> List[PiecewiseBound]:
    """PiecewiseBounds of ∂^k F_a on the mesh intervals for k = 0..max_k.

    Intervals with x_{i-1} ≥ 10 are also bounded by the leading series term
    and the C(x_{i-1}, a, k) remainder.

    Raises:
        ProfileError: If max_k exceeds the table order minus two.
    """
    if not 0 <= max_k <= MAX_FA_ORDER - 2:
        raise ProfileError(f"max_k={max_k} out of range")

    def endpoint(x, k):
        val = np.empty_like(x)
        pad = np.zeros_like(x)
        pos = x > 0.0
        zero = ~pos
        if np.any(zero):
            val[zero] = 120.0 if k == 5 else 0.0
            if k > 10:
                val[zero] = 0.0
                pad[zero] = np.inf
        if np.any(pos):
            v, m = _fa_positive(a, x[pos], k)
            val[pos] = v
            pad[pos] = 64.0 * _EPS * m + np.finfo(float).tiny
        return val, pad

    far = mesh.left >= SERIES_BOUND_X

    def extra(k):
        low = np.full(mesh.n, -np.inf)
        up = np.full(mesh.n, np.inf)
        if np.any(far) and k <= MAX_SERIES_ORDER:
            xl, xh = mesh.left[far], mesh.right[far]
            c0 = float(_series_coeffs(a, k)[0])
            sgn = (-1.0) ** k
            v1 = sgn * c0 * np.power(xl, -a - k)
            v2 = sgn * c0 * np.power(xh, -a - k)
            rem = np.array([series_constant(x0, a, k) for x0 in xl]) * np.power(xl, -5.0 - 2.0 * a - k)
            pad = rem + 16.0 * _EPS * np.maximum(np.abs(v1), np.abs(v2))
            low[far] = np.minimum(v1, v2) - pad
            up[far] = np.maximum(v1, v2) + pad
        return low, up

    return _downward(mesh, max_k, endpoint, lambda lo, hi, k: _monotone_fa(a, lo, hi, k), extra)


# ---------------------------------------------------------------------------
# Rational normalizer
# ---------------------------------------------------------------------------


def eval_rational(s: float, r: float, x, k: int = 0):
    """k-th derivative of s·x/(1+(r x)^2), computed as (s/r) r^k G^{(k)}(r x).

    G(x) = x/(1+x^2) = Re 1/(x - i), so G^{(k)}(x) = Re((-1)^k k! (x - i)^{-(k+1)}).
    """
    if k < 0:
        raise ProfileError("negative derivative order")
    z = r * np.asarray(x, dtype=float) - 1j
    val = (s / r) * r ** k * np.real((-1.0) ** k * math.factorial(k) * z ** (-(k + 1)))
    if np.ndim(x) == 0:
        return float(val)
    return val


def far_bound(s: float, r: float, x, k: int):
    """(1 + 0.02) s k! r^{-2} x^{-k-1}, valid for r·x ≥ 1e10.

    Raises:
        ProfileError: For k > 4 or r·x below 1e10.
    """
    _check_order(k, 4)
    xa = np.asarray(x, dtype=float)
    if np.any(r * xa < RATIONAL_FAR_RX):
        raise ProfileError("far_bound needs r·x ≥ 1e10")
    out = (1.0 + RATIONAL_FAR_EPS) * s * math.factorial(k) / r ** 2 * np.power(xa, -k - 1.0)
    if np.ndim(x) == 0:
        return float(out)
    return out


def rational_bounds(s: float, r: float, mesh: AdaptiveMesh, max_k: int) -> List[PiecewiseBound]:
    """PiecewiseBounds of ∂^k R_{s,r} for k = 0..max_k."""

    def endpoint(x, k):
        v = eval_rational(s, r, x, k)
        return v, 16.0 * _EPS * np.abs(s * r ** (k - 1) * math.factorial(k)) / (1.0 + (r * x) ** 2) ** ((k + 1) / 2)

    def monotone(lo, hi, k):
        # |G^{(k)}(y)| ≤ k!/(1+y^2)^{(k+1)/2}, decreasing in y ≥ 0
        return s * r ** (k - 1) * math.factorial(k) / (1.0 + (r * lo) ** 2) ** ((k + 1) / 2) * (1 + 1e-12)

    return _downward(mesh, max_k, endpoint, monotone)


def rational_velocity(s: float, r: float, x, k: int = 0):
    """k-th derivative of the Hilbert velocity of s·y/(1+(r y)^2).

    u = -(s/r^2) arctan(r x), u_x = -(s/r)/(1+(r x)^2) and so on; u(0) = 0.

    Raises:
        ProfileError: For k > 3.
    """
    _check_order(k, 3)
    xa = np.asarray(x, dtype=float)
    y = r * xa
    d = 1.0 + y * y
    if k == 0:
        out = -(s / r ** 2) * np.arctan(y)
    elif k == 1:
        out = -(s / r) / d
    elif k == 2:
        out = 2.0 * s * y / d ** 2
    else:
        out = 2.0 * s * r * (1.0 - 3.0 * y * y) / d ** 3
    if np.ndim(x) == 0:
        return float(out)
    return out


def _combine_bounds(b: float, fa: List[PiecewiseBound], rat: List[PiecewiseBound]) -> List[PiecewiseBound]:
    out = []
    for f, g in zip(fa, rat):
        low = b * f.low + g.low
        up = b * f.up + g.up
        pad = 4.0 * _EPS * (np.abs(b * f.low) + np.abs(b * f.up) + np.abs(g.low) + np.abs(g.up))
        out.append(PiecewiseBound(f.mesh, low - pad, up + pad))
    return out
