"""
Singular weights, damping, cost functions and constants of the stability estimates.

All profile quantities are carried as interval enclosures at sample points
x > 0: node values of the explicit part and the splines are padded by a few
ulps, velocities carry their Hilbert-transform budgets.

This module provides:
- WeightSet / StabilityParameters: the fixed weight and estimate parameters
- sample_profile: enclosures of ω̄, θ̄_x, ū, ū_θ and derivatives at sample points
- eval_weights / damping / cost_functions: pointwise ψ, φ, D_θ, D_ω, A, B, G
- evaluate: all of the above on integration nodes plus far-field samples
- ode_functions / ode_ledger: f_i, T_i, s_i and g_i of the c_ω / d_θ estimates
- weighted_norm: weighted L² norm from node values with a slope bound
- energy: weighted L² and H¹ energies of a perturbation on cell enclosures
- constant_ledger: k_c, C_u, z_i, q_i, p_i, K_1, K_2 and the residual norm ε̄
- export_weights_csv / export_stability_csv: plotting data
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from grid import bound_ratio_removable
from hilbert import FieldVelocity, HilbertParams
from integrals import cell_integral, node_integral, tail_budget
from interval import (Interval, IntervalArray, arctan, iv_concat, iv_from_real,
                      iv_pi, power, sqrt)

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_PAD = 16 * _EPS

STABILITY_COLUMNS = ('x', 'psi', 'phi', 'D_theta', 'D_omega', 'A_theta_over_psi',
                     'A_omega_over_phi', 'theta_margin', 'omega_margin')
WEIGHT_COLUMNS = ('x', 'psi', 'psi_n', 'psi_f', 'phi', 'phi_s', 'phi_n', 'phi_f', 'chi')


class EnergyError(ValueError):
    """Raised for profile defects that make a weight or norm undefined."""


def _iv(value) -> Interval:
    """Decimal literal as an enclosure: repr(0.32) is '0.32'."""
    return iv_from_real(repr(float(value)))


def _sqrt3() -> Interval:
    return sqrt(Interval.point(3.0))


def _two_p_sqrt3() -> Interval:
    return _sqrt3() + 2.0


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSet:
    """Coefficients of ψ = ψ_n + ψ_f and φ = φ_s + φ_n + φ_f and the far cutoff χ."""

    alpha1: float = 5.3
    alpha2: float = 3.3
    alpha3: float = 0.68
    alpha4: float = 12.1
    alpha5: float = 2.1
    alpha6: float = 0.77
    e1: float = 1.5349
    e2: float = 1.2650
    e3: float = 1.3729
    l1: float = 5e8
    l2: float = 5e9

    @classmethod
    def from_config(cls, config=None) -> 'WeightSet':
        section = (config.get('energy.weights', {}) if config is not None else {}) or {}
        return cls(**{k: float(v) for k, v in section.items() if k in cls.__dataclass_fields__})

    def iv(self, name: str) -> Interval:
        return _iv(getattr(self, name))

    def chi(self, x) -> IntervalArray:
        """(2/π)·arctan(((x - l_1)/l_2)³) beyond l_1, zero below."""
        t = self._shifted(x)
        return 2.0 * arctan(power(t, 3)) / iv_pi()

    def chi_x(self, x) -> IntervalArray:
        t = self._shifted(x)
        t2 = power(t, 2)
        return 6.0 * t2 / (iv_pi() * self.l2 * (1.0 + power(t, 6)))

    def _shifted(self, x) -> IntervalArray:
        x = x if isinstance(x, IntervalArray) else IntervalArray.from_values(x)
        t = (x - self.l1) / self.l2
        return IntervalArray(np.maximum(t.lo, 0.0), np.maximum(t.hi, 0.0), check=False)


@dataclass(frozen=True)
class StabilityParameters:
    """Fixed parameters of the L² and H¹ estimates."""

    lam1: float = 0.32
    lam2: float = 2.15
    lam3: float = 0.135
    lam4: float = 0.005
    t1: float = 1.29
    t2: float = 5.5
    t22: float = 13.5
    t31: float = 3.2
    t32: float = 0.5
    t34: float = 2.9
    tau1: float = 4.7
    t4: float = 3.8
    t61: float = 0.16
    kappa: float = 0.03
    r_cw: float = 0.15
    kappa2: float = 0.024
    t71: float = 2.8
    t72: float = 2.0
    t81: float = 5.0
    t82: float = 0.7
    t91: float = 1.0
    t92: float = 1.2
    gamma1: float = 0.98
    gamma2: float = 0.07
    E_star: float = 2.5e-5
    a_H1: float = 0.31
    eps1: float = 0.01
    p2: float = 6.5
    p3: float = 0.87
    b3: float = 0.5

    @classmethod
    def from_config(cls, config=None) -> 'StabilityParameters':
        section = (config.get('energy.parameters', {}) if config is not None else {}) or {}
        return cls(**{k: float(v) for k, v in section.items() if k in cls.__dataclass_fields__})

    def iv(self, name: str) -> Interval:
        return _iv(getattr(self, name))

    def D_u(self, w: WeightSet) -> Interval:
        """t_1 α_3 λ_1 α_6 / √3."""
        return self.iv('t1') * w.iv('alpha3') * self.iv('lam1') * w.iv('alpha6') / _sqrt3()

    def t12(self, w: WeightSet) -> Interval:
        return Interval.point(49.0) / 9.0 * _iv(0.9) * self.D_u(w)

    def damped_remainder(self, w: WeightSet) -> Interval:
        """D_u - (9/49)t_12 - (72λ_1/49)·10⁻⁵, required positive."""
        nine_49 = Interval.point(9.0) / 49.0
        return (self.D_u(w) - nine_49 * self.t12(w)
                - Interval.point(72.0) * self.iv('lam1') / 49.0 * _iv(1e-5))

    def t62(self, w: WeightSet) -> Interval:
        denom = Interval.point(1.0) / 25.0 + Interval.point(8.0) / 15.0 * (Interval.point(36.0) / 49.0)
        return (self.damped_remainder(w) - _iv(1e-6)) / denom


# ---------------------------------------------------------------------------
# Profile samples
# ---------------------------------------------------------------------------


@dataclass
class ProfileSample:
    """Enclosures at sample points x > 0.

    w[k] = ∂^k ω̄, v[k] = ∂^k θ̄_x, u[k] = ∂^k ū (k = 0..3),
    ut = (ū_θ,x, ū_θ,xx) with ū_θ,x = Hθ̄_x. Velocities may be absent
    when only the weights are needed.
    """

    x: IntervalArray
    w: List[IntervalArray]
    v: List[IntervalArray]
    u: List[IntervalArray] = field(default_factory=list)
    ut: List[IntervalArray] = field(default_factory=list)
    c_l: Interval = Interval(0.0, 0.0)
    c_w: Interval = Interval(0.0, 0.0)

    @property
    def points(self) -> np.ndarray:
        return self.x.mid

    @property
    def u_x0(self) -> Interval:
        """ū_x(0) = c̄_ω - c̄_l/2 by the normalization."""
        return self.c_w - self.c_l * 0.5

    @property
    def has_velocity(self) -> bool:
        return bool(self.u)


def _padded(values) -> IntervalArray:
    v = np.asarray(values, dtype=float)
    return IntervalArray.from_budget(v, _PAD * np.abs(v) + np.finfo(float).tiny)


def sample_profile(state, xs, hilbert: Optional[HilbertParams] = None, velocity: bool = True,
                   progress: bool = False) -> ProfileSample:
    """Evaluate the profile of a SolutionState at the points xs > 0.

    Raises:
        EnergyError: If any sample point is not positive.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs <= 0.0):
        raise EnergyError("sample points must be positive")
    x = IntervalArray.from_values(xs)
    w = [_padded(state.omega(xs, k)) for k in range(4)]
    v = [_padded(state.v(xs, k)) for k in range(4)]
    sample = ProfileSample(x, w, v, c_l=_iv(state.c_l), c_w=_iv(state.c_w))
    if velocity:
        params = hilbert or HilbertParams()
        wf = FieldVelocity.omega(state.profile, state.omega_p, params)
        tf = FieldVelocity.theta(state.profile, state.v_p, params)
        sample.u = [IntervalArray.from_budget(*wf.eval_many(xs, k, progress)) for k in range(4)]
        sample.ut = [IntervalArray.from_budget(*tf.eval_many(xs, k, progress)) for k in (1, 2)]
        logger.debug("sampled profile and velocity at %d points", xs.size)
    return sample


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


@dataclass
class WeightValues:
    """ψ, φ families, their x-derivatives, ξ_1..ξ_3 and χ at the sample points."""

    chi: IntervalArray
    chi_x: IntervalArray
    xi1: IntervalArray
    xi2: IntervalArray
    xi3: IntervalArray
    psi_n: IntervalArray
    psi_f: IntervalArray
    psi: IntervalArray
    psi_x: IntervalArray
    phi_s: IntervalArray
    phi_n: IntervalArray
    phi_f: IntervalArray
    phi: IntervalArray
    phi_x: IntervalArray

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name).mid


def eval_weights(ws: WeightSet, sample: ProfileSample) -> WeightValues:
    """Weights ψ, φ and their derivatives at the sample points.

    Raises:
        EnergyError: If θ̄_x + x θ̄_xx/5 + χξ_1 or its (3/7)-analogue is not
            certainly positive.
    """
    x = sample.x
    v0, v1, v2 = sample.v[0], sample.v[1], sample.v[2]
    a1, a2, a3, a4, a5, a6 = (ws.iv(f'alpha{i}') for i in range(1, 7))
    e1, e2, e3 = ws.iv('e1'), ws.iv('e2'), ws.iv('e3')
    x_23 = power(x, -2.0 / 3.0)
    x_53 = power(x, -5.0 / 3.0)
    x_43 = power(x, -4.0 / 3.0)

    chi = ws.chi(x)
    chi_x = ws.chi_x(x)

    P1 = v0 + x * v1 / 5.0
    P1_x = v1 * 1.2 + x * v2 / 5.0
    P2 = v0 + x * v1 * (Interval.point(3.0) / 7.0)
    P2_x = v1 * (Interval.point(10.0) / 7.0) + x * v2 * (Interval.point(3.0) / 7.0)

    xi1 = e1 * x_23 - P1
    xi1_x = -(Interval.point(2.0) / 3.0) * e1 * x_53 - P1_x
    xi2 = e2 * x_23 - P2
    xi2_x = -(Interval.point(2.0) / 3.0) * e2 * x_53 - P2_x
    xi3 = -(e3 / 3.0) * x_43 - sample.w[1]

    Q1 = P1 + chi * xi1
    Q2 = P2 + chi * xi2
    for name, q in (('θ̄_x + xθ̄_xx/5 + χξ_1', Q1), ('θ̄_x + 3xθ̄_xx/7 + χξ_2', Q2)):
        if np.any(q.lo <= 0.0):
            i = int(np.argmin(q.lo))
            raise EnergyError(f"{name} is not positive at x={sample.points[i]:.6g}")
    Q1_x = P1_x + chi_x * xi1 + chi * xi1_x
    Q2_x = P2_x + chi_x * xi2 + chi * xi2_x

    N_n = a1 * power(x, -4) + a2 * power(x, -3)
    N_n_x = -4.0 * a1 * power(x, -5) - 3.0 * a2 * power(x, -4)
    N_f = a3 * x_43
    N_f_x = -(Interval.point(4.0) / 3.0) * a3 * power(x, -7.0 / 3.0)

    psi_n = N_n / Q1
    psi_f = N_f / Q2
    psi_n_x = N_n_x / Q1 - psi_n * Q1_x / Q1
    psi_f_x = N_f_x / Q2 - psi_f * Q2_x / Q2

    phi_s = a4 * power(x, -4)
    phi_n = a5 * (a1 * power(x, -3) + a2 * power(x, -2))
    phi_f = a6 * x_23
    phi_x = (-4.0 * a4 * power(x, -5) + a5 * (-3.0 * a1 * power(x, -4) - 2.0 * a2 * power(x, -3))
             - (Interval.point(2.0) / 3.0) * a6 * x_53)

    return WeightValues(chi, chi_x, xi1, xi2, xi3, psi_n, psi_f, psi_n + psi_f, psi_n_x + psi_f_x,
                        phi_s, phi_n, phi_f, phi_s + phi_n + phi_f, phi_x)


# ---------------------------------------------------------------------------
# Damping and costs
# ---------------------------------------------------------------------------


@dataclass
class Damping:
    D_theta: IntervalArray
    D_omega: IntervalArray


def _need_velocity(sample: ProfileSample) -> None:
    if not sample.has_velocity:
        raise EnergyError("this quantity needs velocity samples")


def damping(sample: ProfileSample, wv: WeightValues) -> Damping:
    """D_θ = ((c̄_l x + ū)ψ)_x/(2ψ) + 2c̄_ω - ū_x and D_ω = ((c̄_l x + ū)φ)_x/(2φ) + c̄_ω."""
    _need_velocity(sample)
    u, u_x = sample.u[0], sample.u[1]
    speed = sample.x * sample.c_l + u
    stretch = (u_x + sample.c_l) * 0.5
    D_theta = stretch + speed * wv.psi_x / (wv.psi * 2.0) + sample.c_w * 2.0 - u_x
    D_omega = stretch + speed * wv.phi_x / (wv.phi * 2.0) + sample.c_w
    return Damping(D_theta, D_omega)


@dataclass
class CostValues:
    """Pointwise cost functions; G_c and G_c2 are global scalars."""

    A_theta: IntervalArray
    A_omega: IntervalArray
    B_theta: IntervalArray
    B_omega: IntervalArray
    A_omega2: IntervalArray
    G_theta: IntervalArray
    G_omega: IntervalArray
    G_omega2: IntervalArray
    G_omega3: IntervalArray
    S_u1: IntervalArray
    S_u2: IntervalArray
    S_u3: IntervalArray
    S_u4: IntervalArray
    K_uw: IntervalArray
    K_uw2: IntervalArray
    G_c: Interval
    G_c2: Interval


def chi_integral(ws: WeightSet, sample: ProfileSample, wv: WeightValues) -> Interval:
    """Bound of ‖x ξ_3 χ^{1/2} φ^{1/2}‖₂² through far-field power laws.

    With |ξ_3| ≤ K x^{-4/3} and φ ≤ Φ x^{-2/3} beyond l_1 the integrand is
    at most K²Φ x^{-4/3}, whose integral over [l_1, ∞) is 3K²Φ l_1^{-1/3}.
    K and Φ are maxima over the samples past l_1.

    Raises:
        EnergyError: If no sample lies beyond l_1.
    """
    pts = sample.points
    far = pts >= ws.l1
    if not np.any(far):
        raise EnergyError(f"no far-field samples beyond l_1={ws.l1:g}")
    x = sample.x[far]
    K = float(np.max((abs(wv.xi3[far]) * power(x, 4.0 / 3.0)).hi))
    Phi = float(np.max((wv.phi[far] * power(x, 2.0 / 3.0)).hi))
    bound = Interval.point(K) ** 2 * Phi * 3.0 * (Interval.point(ws.l1) ** (-1.0 / 3.0))
    return Interval(0.0, bound.hi)


def cost_functions(ws: WeightSet, sp: StabilityParameters, sample: ProfileSample,
                   wv: WeightValues, chi_norm2: Optional[Interval] = None) -> CostValues:
    """All cost functions of the L² and H¹ estimates at the sample points."""
    x = sample.x
    v1, v2 = sample.v[1], sample.v[2]
    w_x, w_xx = sample.w[1], sample.w[2]
    a1, a2, a3, a4, a5, a6 = (ws.iv(f'alpha{i}') for i in range(1, 7))
    e3 = ws.iv('e3')
    p = {f.name: sp.iv(f.name) for f in fields(sp)}
    lam1 = p['lam1']
    t12 = sp.t12(ws)
    c23 = _two_p_sqrt3()
    chi, xi3, phi, psi = wv.chi, wv.xi3, wv.phi, wv.psi

    x_1, x_2, x_3 = power(x, -1), power(x, -2), power(x, -3)
    x_4, x_5, x_6 = power(x, -4), power(x, -5), power(x, -6)
    x_23, x_43, x_103 = power(x, -2.0 / 3.0), power(x, -4.0 / 3.0), power(x, -10.0 / 3.0)
    x43 = power(x, 4.0 / 3.0)

    G_theta = 1e10 * c23 ** 2 / 4.0 * (chi * (wv.xi1 * wv.psi_n + wv.xi2 * wv.psi_f)).square()
    chi_xi_phi = x43 * chi * xi3 * phi
    G_omega = (_iv(1e-10) * x_43 + _iv(1e-5) * x_23
               + 1e5 / 4.0 * (6.0 * lam1 * c23 / 5.0) ** 2 * chi_xi_phi.square()
               + _iv(1e-2) * chi * phi)
    A_theta = (x_23 / (4.0 * p['t1'])
               + (wv.psi_f * v1 * power(x, 5.0 / 3.0)).square() / (4.0 * t12)
               + (a2 * x_1 + a1 * x_2).square() / (4.0 * p['t2'])
               + (power(x, 3) * v1 * wv.psi_n).square() / (4.0 * p['t22'])
               + (lam1 * a4) ** 2 / (4.0 * p['t4']) * x_5
               + G_theta)
    S_u1 = p['t31'] * x_6 + p['t32'] * x_4 + _iv(2e-5) * x_103
    K_uw = (w_x + chi * xi3) * phi + e3 * a6 / 3.0 * x_2 - p['tau1'] * x_4
    A_omega = (p['t1'] * (a3 ** 2 * x_2 + a3 * lam1 * a6 / _sqrt3() * x_43 + (lam1 * a6) ** 2 * x_23)
               + (p['t2'] * x_4 + p['t22'] / 25.0 * x_4 + p['t2'] * (lam1 * a5) ** 2 * x_2)
               + p['t4'] * x_3
               + lam1 * (4.0 * p['t31'] / 25.0 * x_4 + 4.0 * p['t32'] / 9.0 * x_2
                         + K_uw.square() / (S_u1 * 4.0)
                         + p['tau1'] * (p['t34'] / 25.0 * x_4 + x_2 / (4.0 * p['t34'])))
               + G_omega)

    S_u2 = p['t71'] * x_6 + p['t72'] * x_4 + _iv(2e-6) * x_103
    S_u3 = p['t81'] * x_6 + p['t82'] * x_4 + _iv(2e-6) * x_103
    S_u4 = p['t91'] * x_6 + p['t92'] * x_4 + _iv(5e-4) * x_103
    K_uw2 = (w_x + x * w_xx - chi * xi3 / 3.0) * phi - e3 * a6 / 9.0 * x_2
    G_omega2 = (2.0 * lam1 * c23 / 5.0) ** 2 / 4e6 * x_23
    G_omega3 = 1e6 * chi_xi_phi.square() + _iv(1e-3) * chi * phi
    B_theta = ((v1 * psi).square() / (S_u2 * 4.0)
               + (v1 + x * v2).square() * psi.square() / (S_u3 * 4.0))
    B_omega = lam1 / 4.0 * K_uw2.square() / S_u4 + G_omega3
    A_omega2 = ((p['t71'] + 4.0 * p['t81'] / 25.0) * x_4 + (p['t72'] + 4.0 * p['t82'] / 9.0) * x_2
                + lam1 * (4.0 * p['t91'] / 25.0 * x_4 + 4.0 * p['t92'] / 9.0 * x_2)
                + G_omega2)

    if chi_norm2 is None:
        chi_norm2 = chi_integral(ws, sample, wv)
    G_c = lam1 ** 2 * chi_norm2 / 4.0 * 1e2
    G_c2 = lam1 ** 2 * chi_norm2 / 36.0 * 1e3
    return CostValues(A_theta, A_omega, B_theta, B_omega, A_omega2, G_theta, G_omega, G_omega2,
                      G_omega3, S_u1, S_u2, S_u3, S_u4, K_uw, K_uw2, G_c, G_c2)


# ---------------------------------------------------------------------------
# Evaluation on nodes and far samples
# ---------------------------------------------------------------------------


@dataclass
class Evaluation:
    """Profile, weights, damping and costs on integration nodes and far samples.

    `nodes` runs from 0 to L_B; the sample holds nodes[1:] followed by the
    far-field points beyond L_B.
    """

    nodes: np.ndarray
    far: np.ndarray
    weights: WeightSet
    params: StabilityParameters
    sample: ProfileSample
    wv: WeightValues
    damp: Damping
    costs: CostValues

    @property
    def n_grid(self) -> int:
        return self.nodes.size - 1

    @property
    def grid(self) -> slice:
        return slice(0, self.n_grid)

    @property
    def far_part(self) -> slice:
        return slice(self.n_grid, None)

    @property
    def L_B(self) -> float:
        return float(self.nodes[-1])


def far_samples(L_B: float, x_max: float = 1e14, ratio: float = 1.5) -> np.ndarray:
    """Geometric far-field sample points L_B·ratio^k ≤ x_max."""
    if x_max <= L_B:
        return np.empty(0)
    n = int(math.floor(math.log(x_max / L_B) / math.log(ratio)))
    return L_B * ratio ** np.arange(1, n + 1)


def evaluate(state, nodes, far=None, weights: Optional[WeightSet] = None,
             params: Optional[StabilityParameters] = None, hilbert: Optional[HilbertParams] = None,
             progress: bool = False) -> Evaluation:
    """Sample everything the estimates need.

    Raises:
        EnergyError: If nodes do not start at 0 or a weight is undefined.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0.0):
        raise EnergyError("integration nodes must start at 0 and increase")
    far = far_samples(float(nodes[-1])) if far is None else np.asarray(far, dtype=float)
    weights = weights or WeightSet()
    params = params or StabilityParameters()
    xs = np.concatenate([nodes[1:], far])
    sample = sample_profile(state, xs, hilbert, progress=progress)
    wv = eval_weights(weights, sample)
    damp = damping(sample, wv)
    costs = cost_functions(weights, params, sample, wv)
    logger.info("evaluated estimates at %d nodes and %d far samples", nodes.size - 1, far.size)
    return Evaluation(nodes, far, weights, params, sample, wv, damp, costs)


def stability_margins(ev: Evaluation) -> Tuple[IntervalArray, IntervalArray]:
    """(-D_θ - A_θψ⁻¹, -λ_1 D_ω - A_ωφ⁻¹) at every sample."""
    lam1 = ev.params.iv('lam1')
    theta = -ev.damp.D_theta - ev.costs.A_theta / ev.wv.psi
    omega = -lam1 * ev.damp.D_omega - ev.costs.A_omega / ev.wv.phi
    return theta, omega


# ---------------------------------------------------------------------------
# ODE ledger
# ---------------------------------------------------------------------------


@dataclass
class OdeLedger:
    """Functions of the c_ω and d_θ estimates at the samples.

    g[i] is None for every i when the corresponding T is not certainly
    positive; `positive` records the sign checks.
    """

    f: Dict[int, IntervalArray]
    T: Dict[int, IntervalArray]
    g: Dict[int, Optional[IntervalArray]]
    s1: Interval
    s2: Interval
    d_theta: Optional[Interval]
    positive: Dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(self.positive.values())


def _inv_sqrt(T: IntervalArray) -> Optional[IntervalArray]:
    if np.any(T.lo <= 0.0):
        return None
    return 1.0 / sqrt(T)


def _times(f: IntervalArray, r: Optional[IntervalArray]) -> Optional[IntervalArray]:
    return None if r is None else f * r


def d_theta_bar(ev: Evaluation, state, cells) -> Interval:
    """⟨θ̄_x, x⁻¹⟩ from cell enclosures of θ̄_x/x and the x^{-1-a_v} tail.

    On the origin cell θ̄_x/x lies in the hull of θ̄_xx there.
    """
    x = cells.sample.x
    v, v_x = cells.sample.v[0], cells.sample.v[1]
    ratio = v / x
    slope = (v_x - ratio) / x
    g = ev.sample
    nodes = g.v[0][ev.grid] / g.x[ev.grid]
    x_far = g.points[ev.far_part]
    if x_far.size:
        a_v = state.profile.a_v
        amp = float(np.max((abs(g.v[0][ev.far_part]) * power(g.x[ev.far_part], a_v)).hi))
        tail = tail_budget(amp, 1.0 + a_v, ev.L_B)
    else:
        tail = 0.0
    origin = cells.full.v[1][0] * cells.origin_width
    return cells.integral(ratio, slope, nodes, origin=origin).widen(tail)


def ode_functions(sample: ProfileSample, wv: WeightValues, damp: Damping, costs: CostValues,
                  sp: StabilityParameters, ws: WeightSet):
    """f_i, T_i and g_i = f_i T^{-1/2} at the samples; g_i is None where T is not positive."""
    g, c = sample, costs
    x = g.x
    lam1 = sp.iv('lam1')
    kappa, t61 = sp.iv('kappa'), sp.iv('t61')
    u, u_x, u_xx = g.u[0], g.u[1], g.u[2]
    ut_x, ut_xx = g.ut[0], g.ut[1]
    ux_x = u_x / x

    f = {
        2: ux_x / 4.0 - (u_xx * 0.75 + ux_x * 0.25) / 5.0 - ux_x + u / x.square(),
        3: lam1 * (g.w[0] - x * g.w[1]) * wv.phi,
        4: ut_x / x * 0.6 + (ut_xx * 0.6 + ut_x / x * 0.4) / 5.0,
        6: u / x.square(),
        7: (g.v[0] - x * g.v[1]) * wv.psi,
        8: g.w[1] * 0.75 + g.w[0] / x * 0.25,
        9: g.v[1] * 0.6 + g.v[0] / x * 0.4,
    }
    T = {
        1: -lam1 * damp.D_omega * wv.phi - c.A_omega - lam1 * kappa * wv.phi - t61 * power(x, -4),
        2: -damp.D_theta * wv.psi - c.A_theta - kappa * wv.psi,
        3: 25.0 * t61 * power(x, -4) + sp.t62(ws) * power(x, -4.0 / 3.0),
    }
    r = {i: _inv_sqrt(T[i]) for i in T}
    two_over_pi = Interval.point(2.0) / iv_pi()
    gs: Dict[int, Optional[IntervalArray]] = {
        1: _times(-two_over_pi * power(x, -1), r[1]),
        2: _times(f[2], r[1]), 3: _times(f[3], r[1]), 4: _times(f[4], r[1]),
        5: _times(power(x, -1), r[2]),
        6: _times(f[6], r[2]), 7: _times(f[7], r[2]),
        8: _times(f[8], r[3]), 9: _times(f[9], r[3]),
    }
    return f, T, gs


def ode_ledger(ev: Evaluation, state, cells=None) -> OdeLedger:
    """f_2..f_9, T_1..T_3, s_1, s_2, g_1..g_9 and d̄_θ.

    With cell enclosures the T_i sign checks cover the cells too and d̄_θ
    is computed; without them d_theta is None.
    """
    g, c, sp, ws = ev.sample, ev.costs, ev.params, ev.weights
    lam1, lam2, lam3 = sp.iv('lam1'), sp.iv('lam2'), sp.iv('lam3')
    kappa = sp.iv('kappa')
    f, T, gs = ode_functions(g, ev.wv, ev.damp, c, sp, ws)
    e3, a6 = ws.iv('e3'), ws.iv('alpha6')
    s1 = (-(iv_pi() / 2.0) * lam2 * (g.c_w + g.u_x0) - sp.iv('r_cw')
          - iv_pi() * lam1 * e3 * a6 / 12.0 - c.G_c)
    s2 = -2.0 * g.c_w * lam3 - kappa * lam3
    positive = {f'T{i}': bool(np.all(T[i].lo > 0.0)) for i in T}
    d_theta = None
    if cells is not None:
        for i in T:
            positive[f'T{i}'] = positive[f'T{i}'] and bool(np.all(cells.T[i].lo > 0.0))
        d_theta = d_theta_bar(ev, state, cells)
    positive['s1'] = s1.lo > 0.0
    positive['s2'] = s2.lo > 0.0
    if not all(positive.values()):
        logger.warning("ODE ledger sign checks failed: %s",
                       ', '.join(k for k, ok in positive.items() if not ok))
    return OdeLedger(f, T, gs, s1, s2, d_theta, positive)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def _nonneg(iv: Interval) -> Interval:
    return Interval(max(iv.lo, 0.0), max(iv.hi, 0.0))


def weighted_norm(nodes, f, weight, slope, decay: Optional[Tuple[float, float]] = None) -> Interval:
    """Enclosure of ‖f·weight^{1/2}‖₂ over [x_0, ∞) from node values.

    Args:
        nodes: Increasing integration nodes x_0 < ... < x_N.
        f: Values of f at every node (array or IntervalArray).
        weight: Values of the weight at every node.
        slope: Per-interval bound of |(f²·weight)_x|.
        decay: (a, b) with f²·weight ≤ a x^{-b} beyond x_N, b > 1.

    Raises:
        EnergyError: If f does not vanish at x_N and no decay is declared.
    """
    nodes = np.asarray(nodes, dtype=float)
    f = f if isinstance(f, IntervalArray) else IntervalArray.from_values(f)
    w = weight if isinstance(weight, IntervalArray) else IntervalArray.from_values(weight)
    tail = 0.0
    if decay is not None:
        tail = tail_budget(decay[0], decay[1], float(nodes[-1]))
    elif f[-1].mag != 0.0:
        raise EnergyError("f does not vanish at the last node and has no declared decay")
    return sqrt(_nonneg(node_integral(nodes, f.square() * w, slope, tail=tail)))


def inner_with_inverse_x(nodes, f, slope, f_x0: float = 0.0,
                         decay: Optional[Tuple[float, float]] = None) -> Interval:
    """⟨f, x⁻¹⟩ over [0, ∞); f_x0 is the limit f/x at the origin.

    slope bounds |(f/x)_x| on every interval; decay (a, b) bounds
    |f|/x ≤ a x^{-b} beyond the last node.
    """
    nodes = np.asarray(nodes, dtype=float)
    f = f if isinstance(f, IntervalArray) else IntervalArray.from_values(f)
    inner = f[1:] / IntervalArray.from_values(nodes[1:])
    vals = iv_concat([IntervalArray.from_values([f_x0]), inner])
    tail = tail_budget(decay[0], decay[1], float(nodes[-1])) if decay is not None else 0.0
    return node_integral(nodes, vals, slope, tail=tail)


@dataclass
class EnergyValue:
    E1: Interval
    E: Interval

    def to_dict(self) -> dict:
        return {'E1': [self.E1.lo, self.E1.hi], 'E': [self.E.lo, self.E.hi]}


def energy(cells, theta_x, omega) -> EnergyValue:
    """E_1 and E of a perturbation (θ_x, ω) given as splines vanishing beyond their L.

    E_1² = ‖θ_xψ^{1/2}‖² + λ_1‖ωφ^{1/2}‖² + λ_2(π/2)c_ω² + λ_3 d_θ² with
    c_ω = -(2/π)⟨ω, x⁻¹⟩ and d_θ = ⟨θ_x, x⁻¹⟩;
    E² = E_1² + λ_4(‖x θ_xx ψ^{1/2}‖² + λ_1‖x ω_x φ^{1/2}‖²).
    Every integral is a sum of per-cell enclosures on the cells of `cells`.
    """
    params = cells.params
    th = theta_x.derivative_bounds(cells.mesh)
    om = omega.derivative_bounds(cells.mesh)
    lam1, lam2, lam3, lam4 = (params.iv(n) for n in ('lam1', 'lam2', 'lam3', 'lam4'))
    psi, phi = cells.wv.psi, cells.wv.phi
    x = cells.sample.x

    def on_cells(bound):
        return bound.as_intervals()[cells.inner]

    def inverse_x(b0, b1) -> Interval:
        ratio = bound_ratio_removable(b0, b1)
        return cell_integral(cells.mesh.widths, ratio.as_intervals())

    def sq_norm(f: IntervalArray, weight: IntervalArray) -> Interval:
        return _nonneg(cells.integral(f.square() * weight))

    d_theta = inverse_x(th[0], th[1])
    c_w = -(Interval.point(2.0) / iv_pi()) * inverse_x(om[0], om[1])
    E1_sq = (sq_norm(on_cells(th[0]), psi) + lam1 * sq_norm(on_cells(om[0]), phi)
             + lam2 * iv_pi() / 2.0 * c_w ** 2 + lam3 * d_theta ** 2)
    E_sq = E1_sq + lam4 * (sq_norm(x * on_cells(th[1]), psi) + lam1 * sq_norm(x * on_cells(om[1]), phi))
    return EnergyValue(sqrt(_nonneg(E1_sq)), sqrt(_nonneg(E_sq)))


# ---------------------------------------------------------------------------
# Residuals at the samples
# ---------------------------------------------------------------------------


@dataclass
class SampleResiduals:
    F_omega: IntervalArray
    F_v: IntervalArray
    F_omega_x: IntervalArray
    F_v_x: IntervalArray
    F_omega_xx: IntervalArray
    F_v_xx: IntervalArray

    def max_abs(self) -> Dict[str, float]:
        return {f.name: float(np.max(getattr(self, f.name).mag)) for f in fields(self)}


def sample_residuals(g: ProfileSample) -> SampleResiduals:
    """F_ω, F_v and their first two x-derivatives from the sampled enclosures."""
    _need_velocity(g)
    w, v, u = g.w, g.v, g.u
    speed = g.x * g.c_l + u[0]
    stretch = u[1] + g.c_l
    shrink = g.c_w * 2.0 - u[1]
    F_w = v[0] + g.c_w * w[0] - speed * w[1]
    F_v = shrink * v[0] - speed * v[1]
    F_w_x = -stretch * w[1] - speed * w[2] + g.c_w * w[1] + v[1]
    F_v_x = -stretch * v[1] - speed * v[2] + shrink * v[1] - u[2] * v[0]
    F_w_xx = -speed * w[3] - 2.0 * stretch * w[2] - u[2] * w[1] + g.c_w * w[2] + v[2]
    F_v_xx = (-speed * v[3] - 2.0 * stretch * v[2] - 3.0 * u[2] * v[1] + shrink * v[2]
              - u[3] * v[0])
    return SampleResiduals(F_w, F_v, F_w_x, F_v_x, F_w_xx, F_v_xx)


# ---------------------------------------------------------------------------
# Constant ledger
# ---------------------------------------------------------------------------


@dataclass
class FarDecay:
    """|(x∂_x)^i F_ω| ≤ C_ω[i][0] x^{-a} + C_ω[i][1] x^{-2a}, F_v with exponents 2a and 3a."""

    a: float
    C_omega: Tuple[Tuple[float, float], Tuple[float, float]]
    C_v: Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass
class ConstantLedger:
    """Fixed parameters and the constants computed from one profile."""

    parameters: Dict[str, float]
    weights: Dict[str, float]
    derived: Dict[str, Interval]
    computed: Dict[str, Interval]

    def get(self, name: str) -> Interval:
        if name in self.computed:
            return self.computed[name]
        if name in self.derived:
            return self.derived[name]
        if name in self.parameters:
            return _iv(self.parameters[name])
        return _iv(self.weights[name])

    def to_dict(self) -> dict:
        iv = lambda d: {k: [v.lo, v.hi] for k, v in d.items()}  # noqa: E731
        return {'parameters': dict(self.parameters), 'weights': dict(self.weights),
                'derived': iv(self.derived), 'computed': iv(self.computed)}


def kc_constant(sp: StabilityParameters) -> Interval:
    """k_c = (πλ_2/2)^{-1/2}."""
    return 1.0 / sqrt(iv_pi() * sp.iv('lam2') / 2.0)


def p1_constant(ws: WeightSet) -> Interval:
    """(7/4)(α_5 α_1 (4α_6/3)^{3/4})^{4/7}(1 - 10⁻⁷) + α_5 α_2."""
    a1, a2, a5, a6 = ws.iv('alpha1'), ws.iv('alpha2'), ws.iv('alpha5'), ws.iv('alpha6')
    inner = a5 * a1 * (Interval.point(4.0) * a6 / 3.0) ** 0.75
    return Interval.point(7.0) / 4.0 * inner ** (4.0 / 7.0) * (1.0 - _iv(1e-7)) + a5 * a2


def cu_cap(ws: WeightSet, sp: StabilityParameters) -> Interval:
    """((2+√3)√p_3 / (λ_1 √(α_6 λ_4)))^{1/2}, the far-field value of C_u."""
    inner = _two_p_sqrt3() * sqrt(sp.iv('p3')) / (sp.iv('lam1') * sqrt(ws.iv('alpha6') * sp.iv('lam4')))
    return sqrt(inner)


def cu_function(ws: WeightSet, sp: StabilityParameters, x: IntervalArray) -> IntervalArray:
    """C_u(x) = min((λ_1√λ_4)^{-1/2}(xφ_u)^{-1/2}, cu_cap) with φ_u = α_4x⁻⁴ + p_1x⁻²."""
    phi_u = ws.iv('alpha4') * power(x, -4) + p1_constant(ws) * power(x, -2)
    near = 1.0 / sqrt(sp.iv('lam1') * sqrt(sp.iv('lam4'))) / sqrt(x * phi_u)
    cap = cu_cap(ws, sp)
    return IntervalArray(np.minimum(near.lo, cap.lo), np.minimum(near.hi, cap.hi), check=False)


def min_S3x(ws: WeightSet, lo: float = 1e-4, hi: float = 1e10, cells: int = 4000) -> Interval:
    """Lower bound of S_3(x)·x over x > 0, S_3 = α_4x⁻⁴ + α_2α_5x⁻² + α_6(2+√3)⁻²x^{-2/3}.

    S_3·x is a sum of decreasing terms and one increasing term, so on a cell
    [a, b] it is at least the decreasing part at b plus the increasing part
    at a. Outside [lo, hi] a single term already exceeds the interior bound.
    """
    a2a5 = ws.iv('alpha2') * ws.iv('alpha5')
    a4 = ws.iv('alpha4')
    c = ws.iv('alpha6') / _two_p_sqrt3() ** 2
    edges = np.geomspace(lo, hi, cells + 1)
    a = IntervalArray.from_values(edges[:-1])
    b = IntervalArray.from_values(edges[1:])
    low = a4 * power(b, -3) + a2a5 * power(b, -1) + c * power(a, 1.0 / 3.0)
    bound = float(np.min(low.lo))
    # below lo the x⁻³ term alone, above hi the x^{1/3} term alone
    edge_lo = (a4 * Interval.point(lo) ** (-3)).lo
    edge_hi = (c * Interval.point(hi) ** (1.0 / 3.0)).lo
    if edge_lo < bound or edge_hi < bound:
        raise EnergyError("S_3·x minimum search range is too narrow")
    return Interval(bound, bound)


def _sup(arr: IntervalArray) -> Interval:
    return Interval(float(np.max(arr.lo)), float(np.max(arr.hi)))


def _tail_amplitude(x: IntervalArray, g: IntervalArray, b: float) -> float:
    """max |g| x^b over far samples."""
    return float(np.max((abs(g) * power(x, b)).hi))


def residual_norm(ev: Evaluation, cells, decay: Optional[FarDecay] = None) -> Tuple[Interval, Dict[str, Interval]]:
    """ε̄ and its six squared terms.

    ε̄² = ‖F_vψ^{1/2}‖² + λ_1‖F_ωφ^{1/2}‖² + λ_4‖xF_{v,x}ψ^{1/2}‖²
        + λ_1λ_4‖xF_{ω,x}φ^{1/2}‖² + (2λ_2/π)⟨F_ω, x⁻¹⟩² + λ_3⟨F_v, x⁻¹⟩².
    Integrals over [0, L_B] come from the residual enclosures on `cells`;
    tails beyond L_B use the far-field decay coefficients when given and
    sampled power-law amplitudes otherwise.
    """
    res = cells.residuals
    node = sample_residuals(ev.sample)
    sp = ev.params
    lam1, lam2, lam3, lam4 = (sp.iv(n) for n in ('lam1', 'lam2', 'lam3', 'lam4'))
    grid, far = ev.grid, ev.far_part
    x_all = ev.sample.x
    x_grid = x_all[grid]
    x_far = x_all[far]
    x = cells.sample.x
    inner = cells.inner
    wv = cells.wv
    L_B = ev.L_B
    a = decay.a if decay is not None else None

    def weight_amp(weight: IntervalArray) -> float:
        # weights decay like x^{-2/3}
        return _tail_amplitude(x_far, weight[far], 2.0 / 3.0) if x_far.size else 0.0

    def tail_sq(arr, weight, i, is_omega, scale_x) -> float:
        if not x_far.size:
            return 0.0
        W = weight_amp(weight)
        if decay is not None:
            C = decay.C_omega[i] if is_omega else decay.C_v[i]
            p = a if is_omega else 2.0 * a
            # (C1 x^{-p} + C2 x^{-p-a})² ≤ (C1 + C2 L_B^{-a})² x^{-2p}
            amp = (C[0] + C[1] * L_B ** (-a)) ** 2 * W
            return tail_budget(amp * (1 + 1e-12), 2.0 * p + 2.0 / 3.0, L_B)
        vals = arr[far] * x_far if scale_x else arr[far]
        b = 4.0 / 3.0
        return tail_budget(_tail_amplitude(x_far, vals.square() * weight[far], b), b, L_B)

    def tail_inv(arr, is_omega) -> float:
        if not x_far.size:
            return 0.0
        if decay is not None:
            C = decay.C_omega[0] if is_omega else decay.C_v[0]
            p = a if is_omega else 2.0 * a
            return tail_budget((C[0] + C[1] * L_B ** (-a)) * (1 + 1e-12), p + 1.0, L_B)
        b = 4.0 / 3.0 if is_omega else 5.0 / 3.0
        return tail_budget(_tail_amplitude(x_far, arr[far] / x_far, b), b, L_B)

    def weighted_sq(F, F_x, F_xx, node_F, node_F_x, weight, weight_x, node_weight, scale_x) -> Interval:
        if scale_x:
            f, f_x = x * F_x[inner], F_x[inner] + x * F_xx[inner]
            node_f = x_grid * node_F_x[grid]
        else:
            f, f_x = F[inner], F_x[inner]
            node_f = node_F[grid]
        g = f.square() * weight
        slope = 2.0 * f * f_x * weight + f.square() * weight_x
        return cells.integral(g, slope, node_f.square() * node_weight[grid])

    def inverse_x(F, F_x, node_F) -> Interval:
        ratio = F[inner] / x
        slope = (F_x[inner] - ratio) / x
        origin = F_x[0] * cells.origin_width
        return cells.integral(ratio, slope, node_F[grid] / x_grid, origin=origin)

    psi, phi = ev.wv.psi, ev.wv.phi
    terms = {
        'F_v_psi': _nonneg(weighted_sq(res.F_v, res.F_v_x, res.F_v_xx, node.F_v, node.F_v_x,
                                       wv.psi, wv.psi_x, psi, False)
                           .widen(tail_sq(node.F_v, psi, 0, False, False))),
        'F_omega_phi': lam1 * _nonneg(weighted_sq(res.F_omega, res.F_omega_x, res.F_omega_xx, node.F_omega,
                                                  node.F_omega_x, wv.phi, wv.phi_x, phi, False)
                                      .widen(tail_sq(node.F_omega, phi, 0, True, False))),
        'xF_v_x_psi': lam4 * _nonneg(weighted_sq(res.F_v, res.F_v_x, res.F_v_xx, node.F_v, node.F_v_x,
                                                 wv.psi, wv.psi_x, psi, True)
                                     .widen(tail_sq(node.F_v_x, psi, 1, False, True))),
        'xF_omega_x_phi': lam1 * lam4 * _nonneg(weighted_sq(res.F_omega, res.F_omega_x, res.F_omega_xx,
                                                            node.F_omega, node.F_omega_x, wv.phi, wv.phi_x,
                                                            phi, True)
                                                .widen(tail_sq(node.F_omega_x, phi, 1, True, True))),
    }
    inv_w = inverse_x(res.F_omega, res.F_omega_x, node.F_omega).widen(tail_inv(node.F_omega, True))
    inv_v = inverse_x(res.F_v, res.F_v_x, node.F_v).widen(tail_inv(node.F_v, False))
    terms['F_omega_inv_x'] = Interval.point(2.0) * lam2 / iv_pi() * inv_w ** 2
    terms['F_v_inv_x'] = lam3 * inv_v ** 2
    total = Interval(0.0, 0.0)
    for value in terms.values():
        total = total + value
    return sqrt(_nonneg(total)), terms


def _cell_norm(ev: Evaluation, cells, integrand: IntervalArray, integrand_far: IntervalArray,
               b: float) -> Interval:
    x_far = ev.sample.x[ev.far_part]
    tail = tail_budget(_tail_amplitude(x_far, integrand_far, b), b, ev.L_B) if x_far.size else 0.0
    return sqrt(_nonneg(cells.integral(integrand).widen(tail)))


def _k_integrands(g: ProfileSample, wv: WeightValues) -> Tuple[IntervalArray, IntervalArray]:
    x = g.x
    x2, x3 = x.square(), power(x, 3)
    d1 = 3.0 * x2 * g.v[2] * wv.psi + x3 * g.v[3] * wv.psi + x3 * g.v[2] * wv.psi_x
    d2 = 3.0 * x2 * g.w[2] * wv.phi + x3 * g.w[3] * wv.phi + x3 * g.w[2] * wv.phi_x
    return d1.square() / wv.psi, d2.square() / wv.phi


def k_constants(ev: Evaluation, cells) -> Tuple[Interval, Interval]:
    """K_1 = ‖∂_x(x³θ̄_xxxψ)ψ^{-1/2}‖₂ and K_2 = ‖∂_x(x³ω̄_xxφ)φ^{-1/2}‖₂ from cell enclosures."""
    k1, k2 = _k_integrands(cells.sample, cells.wv)
    k1_far, k2_far = _k_integrands(ev.sample, ev.wv)
    far = ev.far_part
    return (_cell_norm(ev, cells, k1, k1_far[far], 2.0),
            _cell_norm(ev, cells, k2, k2_far[far], 4.0 / 3.0))


def constant_ledger(ev: Evaluation, cells, decay: Optional[FarDecay] = None) -> ConstantLedger:
    """Compute every profile-dependent constant of the nonlinear estimates.

    The sup-type constants z_i cover both the nodes and the cells.
    """
    ws, sp = ev.weights, ev.params
    lam1, lam2, lam3, lam4 = (sp.iv(n) for n in ('lam1', 'lam2', 'lam3', 'lam4'))
    p3, b3 = sp.iv('p3'), sp.iv('b3')
    a6 = ws.iv('alpha6')
    kc = kc_constant(sp)
    half = 0.5

    def z_values(x: IntervalArray, wv: WeightValues) -> List[Interval]:
        cu = cu_function(ws, sp, x)
        psi_t = x * wv.psi_x / wv.psi
        phi_t = x * wv.phi_x / wv.phi
        return [_sup((cu + cu * abs(psi_t) + kc * abs(psi_t + 3.0)) * half),
                _sup((cu + cu * abs(phi_t) + kc * abs(phi_t + 3.0)) * half),
                _sup((3.0 * cu + cu * abs(psi_t + 2.0) + kc * abs(psi_t + 3.0)) * half),
                _sup((cu + cu * abs(phi_t + 2.0) + kc * abs(phi_t + 3.0)) * half)]

    z1, z2, z3, z4 = (Interval(max(a.lo, b.lo), max(a.hi, b.hi))
                      for a, b in zip(z_values(ev.sample.x, ev.wv), z_values(cells.sample.x, cells.wv)))
    s3x_inv = 1.0 / sqrt(min_S3x(ws))
    r15 = sqrt(Interval.point(15.0))
    lead = Interval.point(3.0) / 7.0 * sqrt(p3 * lam3 / (a6 * lam1))
    q34 = r15 / (2.0 * sqrt(lam1)) * s3x_inv
    p4 = sqrt(Interval.point(12.0) * _two_p_sqrt3() * sqrt(p3) / (7.0 * sqrt(a6)))
    kc_term = kc * (1.0 + 2.0 / sqrt(lam4))
    p4_term = p4 / sqrt(lam1 * lam4)
    computed = {
        'p1': p1_constant(ws),
        'k_c': kc,
        'C_u': cu_cap(ws, sp),
        'z1': z1, 'z2': z2, 'z3': z3, 'z4': z4,
        'q1': z1 + lead,
        'q2': z2 + lead + kc * lam2 / lam1 * sqrt(p3 / a6),
        'q3': z3 + q34,
        'q4': z4 + q34,
        'q5': kc,
        'q6': kc,
        'p4': p4,
        'p5': z1 + p4_term + kc_term + r15 * s3x_inv / sqrt(lam1),
        'p6': z2 + p4_term + kc_term,
        'p7': Interval.point(12.0) / 7.0 * sqrt(p3 * lam3 / (b3 * lam1)) + 2.0 * kc,
        'p8': lam2 * kc * (2.0 / lam1) * sqrt(p3 / a6) + 2.0 * kc,
    }
    computed['K1'], computed['K2'] = k_constants(ev, cells)
    computed['eps_bar'], _ = residual_norm(ev, cells, decay)
    derived = {'D_u': sp.D_u(ws), 't12': sp.t12(ws), 't62': sp.t62(ws),
               'damped_remainder': sp.damped_remainder(ws),
               'G_c': ev.costs.G_c, 'G_c2': ev.costs.G_c2}
    logger.info("constant ledger: eps_bar ≤ %.3e, p5+..+p8 ≤ %.2f", computed['eps_bar'].hi,
                sum(computed[k].hi for k in ('p5', 'p6', 'p7', 'p8')))
    return ConstantLedger(asdict(sp), asdict(ws), derived, computed)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _write(path, columns: Sequence[str], table: np.ndarray) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, table, delimiter=',', header=','.join(columns), comments='# ')
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def stability_table(ev: Evaluation, window: float = 40.0) -> np.ndarray:
    mask = ev.sample.points <= window
    wv, d, c = ev.wv, ev.damp, ev.costs
    theta, omega = stability_margins(ev)
    cols = [ev.sample.points, wv.psi.mid, wv.phi.mid, d.D_theta.mid, d.D_omega.mid,
            (c.A_theta / wv.psi).mid, (c.A_omega / wv.phi).mid, theta.mid, omega.mid]
    return np.column_stack([col[mask] for col in cols])


def export_stability_csv(ev: Evaluation, path, window: float = 40.0) -> None:
    """Grid values of the damping margins on (0, window]."""
    _write(path, STABILITY_COLUMNS, stability_table(ev, window))


def export_weights_csv(x: np.ndarray, wv: WeightValues, path) -> None:
    table = np.column_stack([x] + [wv.column(name) for name in WEIGHT_COLUMNS[1:]])
    _write(path, WEIGHT_COLUMNS, table)


def weights_at(state, xs, weights: Optional[WeightSet] = None) -> WeightValues:
    """Weights alone (no velocity) at the points xs > 0."""
    return eval_weights(weights or WeightSet(), sample_profile(state, xs, velocity=False))


def best_fit_far_coefficients(state, x_far: Sequence[float]) -> Dict[str, float]:
    """Profile-implied e_1, e_2, e_3 from the far samples (diagnostic).

    e_1 ≈ x^{2/3}(θ̄_x + xθ̄_xx/5), e_2 ≈ x^{2/3}(θ̄_x + 3xθ̄_xx/7), e_3 ≈ -3x^{4/3}ω̄_x
    evaluated at the largest sample.
    """
    x = float(np.max(x_far))
    v0, v1 = state.v(x, 0), state.v(x, 1)
    return {'e1': float(x ** (2.0 / 3.0) * (v0 + x * v1 / 5.0)),
            'e2': float(x ** (2.0 / 3.0) * (v0 + 3.0 * x * v1 / 7.0)),
            'e3': float(-3.0 * x ** (4.0 / 3.0) * state.omega(x, 1))}
