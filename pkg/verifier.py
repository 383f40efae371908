"""
Verification of the stability estimates for a converged profile.

This module provides:
- VerifyParams: thresholds and far-field settings from the `verify` section
- index_sets_at / index_supersets: near, Gauss and Taylor index sets for
  the velocity integrals at a point and for a whole mesh interval
- gq_budget: Gauss quadrature error of one velocity derivative, valid for
  every x in a mesh interval
- far_error_decay: power-law coefficients of the residual beyond L_B
- uxxx_bounds / uxxx_variation_bounds: per-interval bounds of ∂³ū and, by
  recursion, of ū, ū_x, ū_xx
- gram_table / copt_matrix / copt_bound: the C_opt trace bound
- build_context / verify_state: the full pipeline on the verification mesh
  and its cells, producing a VerificationReport

The integral error bounds (tail, trapezoid and interpolation budgets) live in
integrals and are re-exported here.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cells import (CellError, cell_evaluation, density_norm, field_bounds, node_velocities,
                   theta_velocity_bounds, variation_bounds)
from checks import CheckContext, CheckRegistry, VerificationReport, build_registry
from energy import (EnergyError, Evaluation, FarDecay, StabilityParameters, WeightSet,
                    best_fit_far_coefficients, constant_ledger, evaluate, far_samples, ode_ledger,
                    sample_profile, sample_residuals)
from explicit_profile import ProfileError
from grid import AdaptiveMesh, PiecewiseBound
from hilbert import (KERNEL_FOR_ORDER, TAYLOR_RIGHT, Density, FieldVelocity, HilbertParams, _TAYLOR_KERNEL,
                     gauss_rule, gq_error, hilbert_power_law, scaled_kernel_bounds)
from integrals import (TRULE1, TRULE2, IntegralError, hardy_constant, l2_interp_budget, l2_norm_bound,
                       tail_budget, trapezoid_budget)
from interval import Interval, IntervalArray, IntervalError, IntervalMatrix
from spline import QuinticSpline

logger = logging.getLogger(__name__)

__all__ = [
    'VerificationError', 'VerifyParams', 'QuadBudget', 'UxxxBounds', 'CoptResult',
    'index_sets_at', 'index_supersets', 'gq_budget', 'far_error_decay', 'uxxx_bounds',
    'uxxx_variation_bounds', 'verification_mesh', 'build_context',
    'gram_table', 'copt_matrix', 'copt_bound', 'copt_estimate', 'check_inequalities',
    'verify_state', 'HARDY_CONSTANTS',
    'tail_budget', 'trapezoid_budget', 'l2_interp_budget', 'l2_norm_bound', 'hardy_constant',
    'TRULE1', 'TRULE2', 'IntegralError',
]

_EPS = np.finfo(float).eps

# constants of the weighted Hardy inequalities used for ψ and φ
HARDY_CONSTANTS = {3.0: 4.0 / 25.0, 2.0: 4.0 / 9.0, 5.0 / 3.0: 36.0 / 49.0}

# far-field decay exponents β of |g_i| ≤ A_i x^{-β_i}
GRAM_DECAY = {1: 2.0 / 3.0, 2: 1.0, 3: 2.0 / 3.0, 4: 4.0 / 3.0, 5: 2.0 / 3.0,
              6: 1.0, 7: 1.0, 8: 2.0 / 3.0, 9: 1.0}

# multiples of L_B where the far residual remainder is sampled
FAR_DECAY_SAMPLES = (1.0, 2.0, 4.0, 8.0)

# subspaces of the g_i: inner products across them vanish
GRAM_SPACE = {1: 1, 2: 1, 3: 1, 4: 1, 5: 2, 6: 2, 7: 2, 8: 3, 9: 3}


class VerificationError(RuntimeError):
    """Raised when verification inputs are missing or inconsistent."""


@dataclass(frozen=True)
class VerifyParams:
    """Thresholds of the checks (desk values) and far-field settings."""

    refine: int = 1
    cell_split: int = 4
    LB_factor: float = 100.0
    far_max: float = 1e14
    far_ratio: float = 1.5
    copt_p: int = 36
    m_near: float = 10.0
    delta: float = 1e-6
    eps_bar_max: float = 1e-4
    copt_max: float = 0.999
    theta_margin_min: float = 0.025
    omega_margin_min: float = 0.04
    window: float = 40.0
    ratio_target: float = -0.333477
    ratio_tol: float = 3e-3
    speed_min: float = 0.4
    h1_shear_max: float = 0.02
    q_max: float = 36.0
    p_sum_max: float = 300.0
    cu_max: float = 20.0
    range_c: float = 0.01

    @classmethod
    def from_config(cls, config=None) -> 'VerifyParams':
        section = (config.get('verify', {}) if config is not None else {}) or {}
        known = {}
        for name, f in cls.__dataclass_fields__.items():
            if name in section:
                known[name] = int(section[name]) if f.type in (int, 'int') else float(section[name])
        return cls(**known)


# ---------------------------------------------------------------------------
# Index sets
# ---------------------------------------------------------------------------


def _taylor_mask(k: int, x_lo: float, x_hi: float, left: np.ndarray, right: np.ndarray,
                 delta: float) -> np.ndarray:
    """Intervals in the Taylor region for every x in [x_lo, x_hi] (x_lo = x_hi for a point)."""
    kernel = KERNEL_FOR_ORDER[k][0]
    near_origin = right <= delta * x_lo
    if kernel == 'log':
        return near_origin | (x_hi <= delta * left)
    if kernel == 'even':
        return near_origin
    return np.zeros(left.shape, dtype=bool)


def index_sets_at(mesh: AdaptiveMesh, x: float, k: int, m: float = 10.0,
                  delta: float = 1e-6) -> Dict[str, np.ndarray]:
    """J1, J3 (near x and near -x), TL (Taylor), J2, J4 (Gauss) at the point x ≥ 0.

    Interval j is [x_j, x_{j+1}] with 0-based j; h(x) is the width of the
    interval containing x and the last width beyond L.
    """
    _, h = mesh.locate(x)
    left, right = mesh.left, mesh.right
    j = np.arange(mesh.n)
    J1 = j[np.abs(x - left) <= m * h]
    J3 = j[np.abs(x + left) <= m * h]
    TL = j[_taylor_mask(k, x, x, left, right, delta)]
    return {'J1': J1, 'J3': J3, 'TL': TL,
            'J2': np.setdiff1d(j, np.union1d(J1, TL)),
            'J4': np.setdiff1d(j, np.union1d(J3, TL))}


def index_supersets(mesh: AdaptiveMesh, i: int, k: int, m: float = 10.0,
                    delta: float = 1e-6) -> Dict[str, np.ndarray]:
    """Subsets (suffix l) and supersets (suffix u) valid for every x in interval i.

    J1l ⊆ J1(x) ⊆ J1u, J3l ⊆ J3(x) ⊆ J3u, TLl ⊆ TL(x) ⊆ TLu, J2(x) ⊆ J2u
    and J4(x) ⊆ J4u for x in [x_i, x_{i+1}). J5 = J0 minus (J1u ∪ J3u) lies in
    J2(x) ∩ J4(x) whenever TL(x) is empty, as for u_x and u_xxx.

    Raises:
        VerificationError: If i is not an interval index.
    """
    if not 0 <= i < mesh.n:
        raise VerificationError(f"interval index {i} out of range")
    a, b = float(mesh.left[i]), float(mesh.right[i])
    h = float(mesh.widths[i])
    left, right = mesh.left, mesh.right
    j = np.arange(mesh.n)
    da, db = np.abs(a - left), np.abs(b - left)
    sa, sb = np.abs(a + left), np.abs(b + left)
    J1l = j[np.maximum(da, db) <= m * h]
    J1u = j[np.minimum(da, db) <= m * h]
    J3l = j[np.maximum(sa, sb) <= m * h]
    J3u = j[np.minimum(sa, sb) <= m * h]
    TLl = j[_taylor_mask(k, a, b, left, right, delta)]
    TLu = j[_taylor_mask(k, b, a, left, right, delta)]
    return {'J1l': J1l, 'J1u': J1u, 'J3l': J3l, 'J3u': J3u, 'TLl': TLl, 'TLu': TLu,
            'J2u': np.setdiff1d(j, J1l), 'J4u': np.setdiff1d(j, J3l),
            'J5': np.setdiff1d(j, np.union1d(J1u, J3u))}


# ---------------------------------------------------------------------------
# Gauss quadrature budgets
# ---------------------------------------------------------------------------


@dataclass
class QuadBudget:
    """Per-interval Gauss error contributions for one target interval."""

    interval: int
    k: int
    errors: np.ndarray
    orders: np.ndarray
    sets: Dict[str, np.ndarray]

    @property
    def total(self) -> float:
        return float(np.sum(self.errors) * (1 + 2 * self.errors.size * _EPS))

    def to_dict(self) -> dict:
        return {'interval': self.interval, 'k': self.k, 'total': self.total,
                'gauss_intervals': int(np.count_nonzero(self.errors)),
                'max_order': int(np.max(self.orders)) if self.orders.size else 0}


def _uniform_kernel_bounds(kernel: str, a: float, b: float, lo, hi, h, nmax: int,
                           cancel: bool = False) -> np.ndarray:
    """h^l |∂_y^l K(x, y)| for every x in [a, b] and y in [lo, hi], l = 0..nmax.

    Distances use their minima over the target interval: |x - y| ≥ gap and
    x + y ≥ a + lo. With `cancel` (odd kernel only) the even orders also
    take the difference bound |A^{-l-1} - B^{-l-1}| ≤ (l+1)(B-A)/(|A|^{l+1}B)
    for A = x - y, B = x + y and B - A = 2y ≤ 2·hi.
    """
    l = np.arange(nmax + 1)[None, :]
    fact = np.array([float(math.factorial(n)) for n in range(nmax + 1)])[None, :]
    dm = np.maximum(lo - b, a - hi)[:, None]
    dp = (a + lo)[:, None]
    hh, top = h[:, None], hi[:, None]
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        if kernel == 'log':
            fm1 = np.array([float(math.factorial(max(n - 1, 0))) for n in range(nmax + 1)])[None, :]
            out = fm1 * ((hh / dm) ** l + (hh / dp) ** l)
            # |log(|x-y|/(x+y))| ≤ log((b+hi)/gap)
            out[:, :1] = np.log((b + top) / dm)
        else:
            out = fact * ((hh / dm) ** l / dm + (hh / dp) ** l / dp)
            if cancel:
                diff = fact * (l + 1) * 2.0 * top * (hh / dm) ** l / (dm * dp)
                out = np.where(l % 2 == 0, np.minimum(out, diff), out)
    out = np.where(np.isnan(out), np.inf, out)
    return out * (1 + 1e-12)


def _worst_gq(kernel: str, xs: Sequence[float], lo, hi, h, P, rule) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss errors maximized over the evaluation points xs (kernels monotone in x)."""
    best = np.zeros(lo.size)
    order = np.ones(lo.size, dtype=int)
    nmax = 2 * rule.order
    for x in xs:
        S = scaled_kernel_bounds(kernel, np.full(lo.size, x), lo, hi, h, nmax)
        err, k1 = gq_error(P, h, S, rule, return_order=True)
        worse = err > best
        best = np.where(worse, err, best)
        order = np.where(worse, k1, order)
    return best, order


def gq_budget(spline: QuinticSpline, i: int, k: int,
              params: Optional[HilbertParams] = None, cancel: bool = True) -> QuadBudget:
    """Gauss error of ∂^k u of the spline density, valid on all of interval i.

    Gauss intervals are J2u (minus the certain Taylor set), bounded with
    kernel derivatives uniform over interval i. For u_x and u_xxx (odd
    kernel) the intervals of J5 = J0 minus (J1u ∪ J3u) also use the
    difference bound of the two kernel parts when `cancel` is set.
    Intervals that are Taylor for some x in interval i take the larger of
    the Gauss error of the full kernel and the Taylor-kernel error plus its
    remainder. The near set J1u contributes the Gauss error of the x + y
    kernel where that part is integrated numerically.

    Raises:
        VerificationError: For k outside 0..3 or an overlapping Gauss interval.
    """
    if k not in KERNEL_FOR_ORDER:
        raise VerificationError(f"velocity derivative order {k} out of range 0..3")
    params = params or HilbertParams()
    mesh = spline.mesh
    kernel, d = KERNEL_FOR_ORDER[k]
    dens = Density.from_spline(spline).derivative(d)
    rule = gauss_rule(params.gauss_order)
    nmax = 2 * rule.order
    sets = index_supersets(mesh, i, k, params.m_near, params.delta)
    a, b = float(mesh.left[i]), float(mesh.right[i])
    P = dens.magnitudes()
    lo, h = dens.left, dens.h
    hi = lo + h
    errors = np.zeros(mesh.n)
    orders = np.zeros(mesh.n, dtype=int)

    gauss = np.setdiff1d(sets['J2u'], sets['TLl'])
    if gauss.size:
        gap = np.maximum(np.maximum(lo[gauss] - b, a - hi[gauss]), 0.0)
        if np.any(gap <= 0.0):
            raise VerificationError(f"Gauss interval touches target interval {i}")
        use_cancel = cancel and kernel == 'odd'
        diff = np.isin(gauss, sets['J5']) if use_cancel else np.zeros(gauss.size, dtype=bool)
        for mask, flag in ((~diff, False), (diff, True)):
            idx = gauss[mask]
            if idx.size:
                S = _uniform_kernel_bounds(kernel, a, b, lo[idx], hi[idx], h[idx], nmax, cancel=flag)
                e, o = gq_error(P[idx], h[idx], S, rule, return_order=True)
                errors[idx], orders[idx] = e / math.pi, o

    taylor = sets['TLu']
    if taylor.size:
        right_side = lo[taylor] > b
        e_t = np.zeros(taylor.size)
        idx = taylor[right_side]
        if idx.size:
            q = b / lo[idx]
            e, _ = _worst_gq(_TAYLOR_KERNEL[(kernel, TAYLOR_RIGHT)], (a, b), lo[idx], hi[idx],
                             h[idx], P[idx], rule)
            rem = 0.41 * q ** 5 if kernel == 'log' else 1.01 * 2.0 * b / lo[idx] ** 2 * q ** 6
            e_t[right_side] = (e + h[idx] * P[idx, 0] * rem) / math.pi
        idx = taylor[~right_side]
        if idx.size:
            # polynomial Taylor kernel near the origin: Gauss is exact, only the remainder counts
            x0 = max(a, np.finfo(float).tiny)
            q = hi[idx] / x0
            rem = 0.41 * q ** 5 if kernel == 'log' else 1.01 * 2.0 / x0 * q ** 6
            e_t[~right_side] = h[idx] * P[idx, 0] * rem / math.pi
        errors[taylor] = np.maximum(errors[taylor], e_t)

    near = sets['J1u']
    if near.size:
        numeric = (a + lo[near]) > params.beta_max * h[near]
        idx = near[numeric]
        if idx.size:
            pname = 'plus_log' if kernel == 'log' else 'plus_inv'
            e, o = _worst_gq(pname, (a,), lo[idx], hi[idx], h[idx], P[idx], rule)
            errors[idx] += e / math.pi
            orders[idx] = np.maximum(orders[idx], o)

    return QuadBudget(i, k, errors, orders, sets)


# ---------------------------------------------------------------------------
# Far-field residual decay
# ---------------------------------------------------------------------------


def far_error_decay(state, L_B: float, hilbert: Optional[HilbertParams] = None) -> FarDecay:
    """Coefficients of |(x∂_x)^i F| ≤ C(i,1)x^{-p} + C(i,2)x^{-p-a}, i = 0, 1, beyond L_B.

    ω̄ ≈ b_ω x^{-a}, θ̄_x ≈ b_v x^{-2a} and ū ≈ b_ω C_a x^{1-a} give the
    leading terms in closed form; the remainder is evaluated at the points
    L_B·FAR_DECAY_SAMPLES and its largest scaled size is carried as a
    coefficient of the next power.
    """
    prof = state.profile
    a, b, bv = prof.a_w, prof.b_w, prof.b_v
    c_l, c_w = float(state.c_l), float(state.c_w)
    C_a = hilbert_power_law(a) / (1.0 - a)
    xs = L_B * np.asarray(FAR_DECAY_SAMPLES)
    res = sample_residuals(sample_profile(state, xs, hilbert))

    def remainder(F: IntervalArray, F_x: IntervalArray, lead: float, p1: float, nxt: float, p2: float,
                  i: int) -> float:
        worst = 0.0
        for s, x in enumerate(xs):
            x = float(x)
            value = F[s] if i == 0 else F_x[s] * x
            model = lead * (-p1) ** i * x ** (-p1) + nxt * (-p2) ** i * x ** (-p2)
            worst = max(worst, (value - model).mag * x ** p2)
        return worst * (1 + 1e-12)

    w_lead = b * (c_l * a + c_w)
    w_next = C_a * b * b * a + bv
    v_lead = bv * (2.0 * c_w + 2.0 * a * c_l)
    v_next = b * bv * C_a * (3.0 * a - 1.0)
    C_omega = tuple(
        (abs(w_lead) * a ** i,
         abs(w_next) * (2.0 * a) ** i + remainder(res.F_omega, res.F_omega_x, w_lead, a, w_next, 2 * a, i))
        for i in (0, 1))
    C_v = tuple(
        (abs(v_lead) * (2.0 * a) ** i,
         abs(v_next) * (3.0 * a) ** i + remainder(res.F_v, res.F_v_x, v_lead, 2 * a, v_next, 3 * a, i))
        for i in (0, 1))
    logger.debug("far decay: C_omega=%s C_v=%s", C_omega, C_v)
    return FarDecay(a, C_omega, C_v)


# ---------------------------------------------------------------------------
# Third derivative of the velocity
# ---------------------------------------------------------------------------


@dataclass
class UxxxBounds:
    """Per-interval bounds of ∂^k ū for k = 0..3 and the branch used for ∂³ū."""

    bounds: List[PiecewiseBound]
    branch: np.ndarray
    norm_l2: float
    norm_weighted: float

    def to_dict(self) -> dict:
        return {'max_abs': [b.max_abs() for b in self.bounds],
                'weighted_branch_intervals': int(np.count_nonzero(self.branch == 2)),
                'norm_l2': self.norm_l2, 'norm_weighted': self.norm_weighted}


def uxxx_variation_bounds(mesh: AdaptiveMesh, nodes: List[IntervalArray], norm_l2: float,
                          norm_weighted: float) -> UxxxBounds:
    """Cell bounds of ∂^k ū, k = 0..3, from node enclosures and the two density norms.

    On [x_{i-1}, x_i] the variation of ∂³ū is at most
    I_1 = h_i^{1/2}‖∂³ω‖_{L²(ℝ)} (Hilbert isometry) or
    I_2 = (2+√3)((x_{i-1}^{-13/3} - x_i^{-13/3})·3/13)^{1/2}‖x^{8/3}∂³ω‖_{L²(ℝ)};
    the smaller one is used.

    Raises:
        VerificationError: If the ∂³ū node enclosures are inconsistent.
    """
    h = mesh.widths
    I1 = np.sqrt(h) * norm_l2
    xl = mesh.left
    with np.errstate(divide='ignore', invalid='ignore'):
        span = np.where(xl > 0.0, (xl ** (-13.0 / 3.0) - mesh.right ** (-13.0 / 3.0)) * 3.0 / 13.0, np.inf)
        I2 = np.where(np.isfinite(span),
                      (2.0 + math.sqrt(3.0)) * 1.0000001 * np.sqrt(span) * norm_weighted, np.inf)
    branch = np.where(I2 < I1, 2, 1)
    try:
        bounds = variation_bounds(mesh, nodes, np.minimum(I1, I2))
    except CellError as exc:
        raise VerificationError(f"∂³u: {exc}") from None
    return UxxxBounds(bounds, branch, norm_l2, norm_weighted)


def uxxx_bounds(state, mesh: Optional[AdaptiveMesh] = None, hilbert: Optional[HilbertParams] = None,
                progress: bool = False, nodes: Optional[List[IntervalArray]] = None) -> UxxxBounds:
    """Bound ∂³ū between grid values by the smaller of two variation budgets.

    `nodes` holds enclosures of ∂^k ū (k = 0..3) at every mesh node; they
    are computed when not given. The mesh must cover the spline support.
    """
    mesh = mesh or state.mesh
    if nodes is None:
        hilbert = hilbert or HilbertParams()
        field_w = FieldVelocity.omega(state.profile, state.omega_p, hilbert)
        nodes = [IntervalArray.from_budget(*field_w.eval_many(mesh.nodes, k, progress)) for k in range(4)]
    bounds = field_bounds(state, 'omega', mesh, 5)
    n1 = density_norm(state, 'omega', mesh, 3, bounds=bounds)
    n2 = density_norm(state, 'omega', mesh, 3, power=8.0 / 3.0, bounds=bounds)
    result = uxxx_variation_bounds(mesh, nodes, n1, n2)
    logger.info("∂³u bounds: max |∂³u| ≤ %.4g, weighted branch on %d of %d intervals",
                result.bounds[3].max_abs(), int(np.count_nonzero(result.branch == 2)), mesh.n)
    return result


# ---------------------------------------------------------------------------
# C_opt
# ---------------------------------------------------------------------------


def _tail_amp(x: IntervalArray, g: IntervalArray, beta: float) -> float:
    return float(np.max((abs(g) * (x ** beta)).hi)) if len(x) else 0.0


def gram_table(ev: Evaluation, g: Dict[int, Optional[IntervalArray]], cells=None) -> IntervalMatrix:
    """⟨g_a, g_b⟩ for a, b = 1..9 from cell sums and far-field power-law tails.

    `g` holds the g_i at the evaluation samples (for the tails); the
    integrals over [0, L_B] come from their cell enclosures.

    Raises:
        VerificationError: If the cells are missing or some g_i is undefined
            (a T_i is not positive).
    """
    if cells is None:
        raise VerificationError("the Gram table needs cell enclosures")
    missing = [i for i in range(1, 10) if g.get(i) is None or cells.g.get(i) is None]
    if missing:
        raise VerificationError(f"g_{missing[0]} is undefined")
    far = ev.far_part
    x_far = ev.sample.x[far]
    amp = {i: _tail_amp(x_far, g[i][far], GRAM_DECAY[i]) for i in range(1, 10)}
    lo = np.zeros((9, 9))
    hi = np.zeros((9, 9))
    for a in range(1, 10):
        for b in range(a, 10):
            tail = tail_budget(amp[a] * amp[b], GRAM_DECAY[a] + GRAM_DECAY[b], ev.L_B) if len(x_far) else 0.0
            product = cells.g[a].square() if a == b else cells.g[a] * cells.g[b]
            iv = cells.integral(product).widen(tail)
            if a == b:
                iv = Interval(max(iv.lo, 0.0), max(iv.hi, 0.0))
            lo[a - 1, b - 1] = lo[b - 1, a - 1] = iv.lo
            hi[a - 1, b - 1] = hi[b - 1, a - 1] = iv.hi
    return IntervalMatrix(lo, hi)


def _entry(G: IntervalMatrix, i: int, j: int) -> Interval:
    return Interval(float(G.lo[i - 1, j - 1]), float(G.hi[i - 1, j - 1]))


def reduced_inner(G: IntervalMatrix, s1: Interval, s2: Interval, a: int, b: int) -> Interval:
    """⟨g_a, D⁻¹ g_b⟩: zero across subspaces, rank-one corrected inside the first two."""
    if GRAM_SPACE[a] != GRAM_SPACE[b]:
        return Interval(0.0, 0.0)
    base = _entry(G, a, b)
    space = GRAM_SPACE[a]
    if space == 3:
        return base
    pivot, s = (1, s1) if space == 1 else (5, s2)
    d = 1.0 + s * _entry(G, pivot, pivot)
    # (1/d - 1)/‖g_p‖² = -s/d
    return base - s / d * _entry(G, a, pivot) * _entry(G, b, pivot)


def copt_matrix(G: IntervalMatrix, s1: Interval, s2: Interval, d_theta: Interval,
                lam2: Interval, lam3: Interval) -> IntervalMatrix:
    """U₂ᵀD⁻¹U₁ (16×16) from the Gram table.

    V₂ has columns g_3, g_7, g_5, g_2, g_6, g_4, g_8, g_9 and V₁ the matching
    multiples of g_1 and g_5; U₁ = [V₁, V₂] and U₂ = [V₂, V₁].

    Raises:
        VerificationError: If s1 or s2 is not positive.
    """
    if not (s1.lo > 0.0 and s2.lo > 0.0):
        raise VerificationError("s1 and s2 must be positive")
    one = Interval(1.0, 1.0)
    v2 = [(one, i) for i in (3, 7, 5, 2, 6, 4, 8, 9)]
    v1 = [(one, 1), (one, 1), (-(lam2 - d_theta * lam3), 1), (lam2, 1),
          (-lam3, 5), (lam3, 5), (lam2, 1), (-lam3, 5)]
    cols1 = v1 + v2
    cols2 = v2 + v1
    n = len(cols1)
    lo = np.zeros((n, n))
    hi = np.zeros((n, n))
    cache: Dict[Tuple[int, int], Interval] = {}
    for r, (sr, ir) in enumerate(cols2):
        for c, (sc, ic) in enumerate(cols1):
            key = (min(ir, ic), max(ir, ic))
            if key not in cache:
                cache[key] = reduced_inner(G, s1, s2, ir, ic)
            iv = sr * sc * cache[key]
            lo[r, c], hi[r, c] = iv.lo, iv.hi
    return IntervalMatrix(lo, hi)


def _root(iv: Interval, p: int) -> Interval:
    lo = max(iv.lo, 0.0)
    hi = max(iv.hi, 0.0)
    r_lo = math.nextafter(lo ** (1.0 / p), 0.0) if lo > 0.0 else 0.0
    r_hi = math.nextafter(hi ** (1.0 / p), math.inf) if hi > 0.0 else 0.0
    return Interval(r_lo, r_hi)


def trace_power_root(M: IntervalMatrix, p: int) -> Interval:
    """(Tr M^p)^{1/p}; the p-norm of the eigenvalues when they are real."""
    return _root(M.power(p).trace(), p)


def schatten_norm(M: IntervalMatrix, p: int) -> Interval:
    """(Tr (MᵀM)^{p/2})^{1/p} for even p."""
    if p % 2:
        raise VerificationError("Schatten trace bound needs an even p")
    gram = IntervalMatrix.from_array(M.T).matmul(M)
    return _root(gram.power(p // 2).trace(), p)


@dataclass
class CoptResult:
    bound: Interval
    estimate: float
    mean_part: Interval
    fluctuation_part: Interval
    p: int

    def to_dict(self) -> dict:
        return {'bound': [self.bound.lo, self.bound.hi], 'estimate': self.estimate,
                'mean_part': self.mean_part.hi, 'fluctuation_part': self.fluctuation_part.hi,
                'p': self.p}


def copt_estimate(K: IntervalMatrix) -> float:
    """Largest real eigenvalue part of K̄/2."""
    return float(np.max(np.linalg.eigvals(0.5 * (K.lo + K.hi) / 2.0).real))


def copt_bound(K: IntervalMatrix, p: int = 36) -> CoptResult:
    """½[(Tr K̄^p)^{1/p} + ‖ΔK‖_p] with K = K̄ + ΔK split at the midpoint.

    Raises:
        VerificationError: If p is odd.
    """
    if p % 2:
        raise VerificationError("C_opt bound needs an even p")
    mean, delta = K.midpoint_split()
    m_part = trace_power_root(mean, p)
    d_part = schatten_norm(delta, p)
    bound = (m_part + d_part) * 0.5
    return CoptResult(bound, copt_estimate(K), m_part, d_part, p)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def verification_mesh(state, params: VerifyParams) -> AdaptiveMesh:
    """Verification mesh (refined) extended geometrically to L_B = LB_factor·L."""
    mesh = state.mesh.refine(params.refine)
    return mesh.extend(params.LB_factor * mesh.L)


def verification_nodes(state, params: VerifyParams) -> np.ndarray:
    return verification_mesh(state, params).nodes


def check_inequalities(context: CheckContext, registry: Optional[CheckRegistry] = None,
                       config=None) -> VerificationReport:
    """Run every enabled check on the prepared context."""
    registry = registry or build_registry(config)
    return registry.run(context)


def build_context(state, config=None, progress: bool = False) -> CheckContext:
    """Evaluate everything the checks need; failures of a stage are recorded, not raised."""
    params = VerifyParams.from_config(config)
    hilbert = HilbertParams.from_config(config)
    weights = WeightSet.from_config(config)
    sp = StabilityParameters.from_config(config)
    mesh = verification_mesh(state, params)
    far = far_samples(mesh.L, params.far_max, params.far_ratio)
    ctx = CheckContext(solution=state, params=params)
    try:
        ctx.evaluation = evaluate(state, mesh.nodes, far, weights, sp, hilbert, progress)
    except EnergyError as exc:
        logger.error("weight evaluation failed: %s", exc)
        ctx.set_state('evaluation_error', str(exc))
        return ctx
    ev = ctx.evaluation
    fit = best_fit_far_coefficients(state, far)
    ctx.set_state('far_fit', fit)
    logger.info("profile-implied far coefficients: %s",
                ", ".join(f"{k}={v:.4g}" for k, v in fit.items()))
    u_nodes, ut_nodes = node_velocities(state, ev, hilbert)
    try:
        ctx.uxxx = uxxx_bounds(state, mesh, nodes=u_nodes)
        ut_bounds = theta_velocity_bounds(state, mesh, ut_nodes)
        ctx.cells = cell_evaluation(state, ev, ctx.uxxx.bounds, ut_bounds, params.cell_split)
    except (VerificationError, CellError, EnergyError, ProfileError, IntervalError) as exc:
        logger.warning("cell enclosures not computed: %s", exc)
        ctx.set_state('cells_error', str(exc))
        if ctx.uxxx is None:
            ctx.set_state('uxxx_error', str(exc))
    ctx.ode = ode_ledger(ev, state, ctx.cells)
    ctx.decay = far_error_decay(state, ev.L_B, hilbert)
    if ctx.cells is None:
        ctx.set_state('ledger_error', "cell enclosures are missing")
    else:
        try:
            ctx.ledger = constant_ledger(ev, ctx.cells, ctx.decay)
        except (EnergyError, IntegralError, IntervalError) as exc:
            logger.warning("constant ledger not computed: %s", exc)
            ctx.set_state('ledger_error', str(exc))
    try:
        if ctx.ode.d_theta is None:
            raise VerificationError("d_theta needs cell enclosures")
        ctx.gram = gram_table(ev, ctx.ode.g, ctx.cells)
        K = copt_matrix(ctx.gram, ctx.ode.s1, ctx.ode.s2, ctx.ode.d_theta,
                        sp.iv('lam2'), sp.iv('lam3'))
        ctx.copt = copt_bound(K, params.copt_p)
    except VerificationError as exc:
        logger.warning("C_opt not computed: %s", exc)
        ctx.set_state('copt_error', str(exc))
    return ctx


def verify_state(state, config=None, progress: bool = False) -> VerificationReport:
    """Full verification of a converged state."""
    logger.info("verifying state at t=%.4g (%d intervals)", state.t, state.mesh.n)
    ctx = build_context(state, config, progress)
    report = check_inequalities(ctx, config=config)
    logger.info("verification: %d of %d checks passed", report.n_passed, len(report.results))
    return report
