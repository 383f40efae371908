"""
Cell enclosures of the profile on a refined verification mesh.

Node values say nothing about a quantity between the nodes. Here every
quantity the estimates need is enclosed on each cell [x_{i-1}, x_i] of the
verification mesh refined `split` times: spline and explicit-part bounds
for ω̄ and θ̄_x, velocity bounds from the isometry variation budgets, and
everything built from them in interval arithmetic. Integrals are sums of
per-cell enclosures, intersected with the coarse trapezoid rule where a
slope bound is at hand.

This module provides:
- CellEvaluation / cell_evaluation: samples, weights, damping, costs, ODE
  functions and tightened residuals on every cell
- node_velocities: velocity enclosures at the verification nodes, x = 0 included
- density_norm: ‖x^p ∂^j f‖_{L²(ℝ)} for f = ω̄ or θ̄_x
- variation_bounds / theta_velocity_bounds: per-cell bounds from node
  enclosures and a bound on the variation of the top derivative
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from energy import (CostValues, Damping, Evaluation, ProfileSample, SampleResiduals, StabilityParameters,
                    WeightSet, WeightValues, chi_integral, cost_functions, damping, eval_weights,
                    ode_functions, sample_residuals)
from grid import AdaptiveMesh, PiecewiseBound, bound_combine, bounds_from_derivative
from hilbert import FieldVelocity, HilbertParams
from integrals import cell_integral, l2_norm_bound, node_integral, tail_budget
from interval import Interval, IntervalArray, iv_concat

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


class CellError(ValueError):
    """Raised when cell enclosures cannot be formed."""


# ---------------------------------------------------------------------------
# Density norms and variation bounds
# ---------------------------------------------------------------------------


def _field(state, name: str):
    if name == 'omega':
        return state.omega, state.omega_p, state.profile.omega_b_bounds
    if name == 'v':
        return state.v, state.v_p, state.profile.v_b_bounds
    raise CellError(f"unknown field {name!r}")


def field_bounds(state, name: str, mesh: AdaptiveMesh, max_k: int = 5) -> List[PiecewiseBound]:
    """∂^k of ω̄ (name='omega') or θ̄_x (name='v') on the mesh cells, k = 0..max_k."""
    _, spline, explicit = _field(state, name)
    sp = spline.derivative_bounds(mesh)
    ex = explicit(mesh, max_k)
    return [bound_combine('add', sp[k], ex[k]) for k in range(max_k + 1)]


def density_norm(state, name: str, mesh: AdaptiveMesh, j: int, power: float = 0.0,
                 bounds: Optional[List[PiecewiseBound]] = None) -> float:
    """Upper bound of ‖x^p ∂^j f‖_{L²(ℝ)} for f = ω̄ or θ̄_x.

    On [0, L] the smaller of the cell-sup sum and the interpolation bound
    from node values; beyond L the explicit part's power-law envelope. The
    odd or even extension doubles the square.

    Raises:
        CellError: For j > 3 or a power in (0, 2).
    """
    if not 0 <= j <= 3:
        raise CellError(f"derivative order {j} out of range 0..3")
    p = float(power)
    if 0.0 < p < 2.0:
        raise CellError("the weight power must be 0 or at least 2")
    fn, spline, _ = _field(state, name)
    if mesh.L < spline.L:
        raise CellError("the mesh must cover the spline support")
    bounds = bounds or field_bounds(state, name, mesh, j + 2)
    m = [bounds[k].magnitude() for k in (j, j + 1, j + 2)]
    xr = mesh.right
    h = mesh.widths
    scale = xr ** p
    sup_sq = float(np.sum(h * (scale * m[0]) ** 2)) * (1 + 4 * mesh.n * _EPS)
    fxx = scale * m[2]
    if p:
        fxx = fxx + 2.0 * p * xr ** (p - 1.0) * m[1] + p * (p - 1.0) * xr ** (p - 2.0) * m[0]
    x = mesh.nodes
    interp = l2_norm_bound(mesh, x ** p * fn(x, j), fxx * (1 + 8 * _EPS))
    A, q = state.profile.envelope(name, j, mesh.L)
    tail = tail_budget(A * A, 2.0 * (q - p), mesh.L)
    total = min(sup_sq, interp * interp) + tail
    return math.sqrt(2.0 * total) * (1 + 1e-12)


def variation_bounds(mesh: AdaptiveMesh, nodes: List[IntervalArray], variation) -> List[PiecewiseBound]:
    """Per-cell bounds of ∂^k g, k = 0..K, from node enclosures and the variation of ∂^K g.

    On a cell the top derivative stays within `variation` of both endpoint
    values; lower orders follow from bounds_from_derivative.

    Raises:
        CellError: If the endpoint enclosures are inconsistent.
    """
    top = nodes[-1]
    I = np.nextafter(np.asarray(variation, dtype=float), np.inf)
    up = np.minimum(top.hi[:-1], top.hi[1:]) + I
    low = np.maximum(top.lo[:-1], top.lo[1:]) - I
    if np.any(low > up):
        raise CellError("inconsistent endpoint enclosures")
    bounds = [PiecewiseBound(mesh, np.nextafter(low, -np.inf), np.nextafter(up, np.inf))]
    for values in reversed(nodes[:-1]):
        bounds.insert(0, bounds_from_derivative(mesh, values, bounds[0]))
    return bounds


def node_velocities(state, ev: Evaluation,
                    hilbert: Optional[HilbertParams] = None) -> Tuple[List[IntervalArray], List[IntervalArray]]:
    """(∂^k ū for k = 0..3, (ū_θ,x, ū_θ,xx)) at the evaluation nodes, x = 0 included."""
    hilbert = hilbert or HilbertParams()
    zero = np.zeros(1)
    fw = FieldVelocity.omega(state.profile, state.omega_p, hilbert)
    ft = FieldVelocity.theta(state.profile, state.v_p, hilbert)
    g, grid = ev.sample, ev.grid
    u = [iv_concat([IntervalArray.from_budget(*fw.eval_many(zero, k)), g.u[k][grid]]) for k in range(4)]
    ut = [iv_concat([IntervalArray.from_budget(*ft.eval_many(zero, k)), g.ut[i][grid]])
          for i, k in enumerate((1, 2))]
    return u, ut


def theta_velocity_bounds(state, mesh: AdaptiveMesh, ut_nodes: List[IntervalArray]) -> List[PiecewiseBound]:
    """Cell bounds of ū_θ,x and ū_θ,xx; ū_θ,xx varies by at most h^{1/2}‖θ̄_xxx‖₂ on a cell."""
    norm = density_norm(state, 'v', mesh, 2)
    bounds = variation_bounds(mesh, ut_nodes, np.sqrt(mesh.widths) * norm)
    logger.debug("ū_θ bounds: ‖θ̄_xxx‖₂ ≤ %.4g, max |ū_θ,xx| ≤ %.4g", norm, bounds[1].max_abs())
    return bounds


# ---------------------------------------------------------------------------
# Cell evaluation
# ---------------------------------------------------------------------------


@dataclass
class CellEvaluation:
    """Enclosures on the cells of `mesh`, the verification mesh `coarse` split `split` times.

    `full` covers every cell; `sample` and everything derived from it
    cover the inner cells, those away from the origin.
    """

    coarse: AdaptiveMesh
    mesh: AdaptiveMesh
    split: int
    weights: WeightSet
    params: StabilityParameters
    full: ProfileSample
    sample: ProfileSample
    wv: WeightValues
    damp: Damping
    costs: CostValues
    f: Dict[int, IntervalArray]
    T: Dict[int, IntervalArray]
    g: Dict[int, Optional[IntervalArray]]
    residuals: SampleResiduals

    @property
    def parent(self) -> np.ndarray:
        return np.arange(self.mesh.n) // self.split

    @property
    def inner(self) -> np.ndarray:
        return self.mesh.left > 0.0

    @property
    def widths(self) -> np.ndarray:
        return self.mesh.widths[self.inner]

    @property
    def origin_width(self) -> float:
        return float(self.mesh.widths[0])

    def integral(self, g: IntervalArray, slope: Optional[IntervalArray] = None,
                 node_values: Optional[IntervalArray] = None,
                 origin: Optional[Interval] = None) -> Interval:
        """∫ over [0, L_B] of an integrand enclosed by g on the inner cells.

        With a slope bound on the inner cells and values at the coarse nodes
        x_1..x_n, the cell sum is intersected with the trapezoid rule on
        [x_1, x_n]. `origin` encloses the integral over the first cell; it
        defaults to h_0·hull(0, g_1), taking the integrand on [0, h_0]
        between zero and its enclosure on the next cell.
        """
        total = cell_integral(self.widths, g)
        if slope is not None and node_values is not None:
            first = self.parent[self.inner] == 0
            head = cell_integral(self.widths[first], g[first])
            mags = np.concatenate([[0.0], slope.mag]).reshape(self.coarse.n, self.split).max(axis=1)
            trap = node_integral(self.coarse.nodes[1:], node_values, mags[1:])
            total = total.intersect(head + trap)
        if origin is None:
            origin = g[0].hull(Interval(0.0, 0.0)) * self.origin_width
        return total + origin


def _restrict(g: ProfileSample, mask) -> ProfileSample:
    return ProfileSample(g.x[mask], [w[mask] for w in g.w], [v[mask] for v in g.v],
                         [u[mask] for u in g.u], [u[mask] for u in g.ut], g.c_l, g.c_w)


def _parent_hull(arr: IntervalArray, split: int) -> Tuple[np.ndarray, np.ndarray]:
    return arr.lo.reshape(-1, split).min(axis=1), arr.hi.reshape(-1, split).max(axis=1)


def _tightened(direct: IntervalArray, node_values: IntervalArray, derivative: IntervalArray,
               coarse: AdaptiveMesh, split: int) -> IntervalArray:
    lo, hi = _parent_hull(derivative, split)
    bound = bounds_from_derivative(coarse, node_values, PiecewiseBound(coarse, lo, hi))
    parent = np.arange(direct.shape[0]) // split
    return direct.intersect(bound.as_intervals()[parent])


def cell_residuals(full: ProfileSample, ev: Evaluation, coarse: AdaptiveMesh, split: int) -> SampleResiduals:
    """F_ω, F_v and derivatives on every cell.

    The direct enclosures are intersected with the variation bounds from
    the node residuals: F vanishes at the origin and F_x(0) lies in its
    enclosure on the first cell.
    """
    direct = sample_residuals(full)
    node = sample_residuals(ev.sample)
    grid = ev.grid
    zero = IntervalArray.from_values(np.zeros(1))
    out = {}
    for name in ('F_omega', 'F_v'):
        F, F_x, F_xx = (getattr(direct, name + s) for s in ('', '_x', '_xx'))
        at_x = iv_concat([F_x[0:1], getattr(node, name + '_x')[grid]])
        at = iv_concat([zero, getattr(node, name)[grid]])
        F_x = _tightened(F_x, at_x, F_xx, coarse, split)
        out[name] = _tightened(F, at, F_x, coarse, split)
        out[name + '_x'] = F_x
        out[name + '_xx'] = F_xx
    return SampleResiduals(**out)


def cell_evaluation(state, ev: Evaluation, u_bounds: List[PiecewiseBound],
                    ut_bounds: List[PiecewiseBound], split: int = 4) -> CellEvaluation:
    """Enclose the profile, weights, damping, costs and residuals on every cell.

    u_bounds (∂^k ū, k = 0..3) and ut_bounds (ū_θ,x, ū_θ,xx) live on the
    verification mesh whose nodes are ev.nodes.

    Raises:
        CellError: If split < 1 or the velocity bounds live on another mesh.
        EnergyError: If a weight is undefined on some cell.
    """
    if split < 1:
        raise CellError("cell split must be at least 1")
    coarse = u_bounds[0].mesh
    if not np.array_equal(coarse.nodes, ev.nodes):
        raise CellError("velocity bounds and evaluation use different meshes")
    mesh = coarse.refine(split)
    parent = np.arange(mesh.n) // split
    w = [b.as_intervals() for b in field_bounds(state, 'omega', mesh, 3)]
    v = [b.as_intervals() for b in field_bounds(state, 'v', mesh, 3)]
    u = [b.as_intervals()[parent] for b in u_bounds]
    ut = [b.as_intervals()[parent] for b in ut_bounds]
    full = ProfileSample(mesh.cells(), w, v, u, ut, ev.sample.c_l, ev.sample.c_w)
    sample = _restrict(full, mesh.left > 0.0)
    ws, sp = ev.weights, ev.params
    wv = eval_weights(ws, sample)
    damp = damping(sample, wv)
    costs = cost_functions(ws, sp, sample, wv, chi_norm2=chi_integral(ws, ev.sample, ev.wv))
    f, T, gs = ode_functions(sample, wv, damp, costs, sp, ws)
    residuals = cell_residuals(full, ev, coarse, split)
    logger.info("cell enclosures on %d cells (%d per verification interval)", mesh.n, split)
    return CellEvaluation(coarse, mesh, split, ws, sp, full, sample, wv, damp, costs, f, T, gs, residuals)
