"""
Dynamic rescaling solver for the approximate steady state.

Unknowns are the node values and slopes of the perturbations ω_p and v_p;
the explicit parts ω_b, v_b stay fixed. At every Runge-Kutta stage the
curvatures are refit, the velocity u, u_x, u_xx is assembled at the nodes,
c_l and c_ω follow from the normalization conditions and the four equations

    (ω_p)_t  + (c_l x + u) ω_x  = c_ω ω + v
    (ω_p,x)_t + (c_l x + u) ω_xx = -(c_l + u_x) ω_x + c_ω ω_x + v_x
    (v_p)_t  + (c_l x + u) v_x  = (2c_ω - u_x) v
    (v_p,x)_t + (c_l x + u) v_xx = (2c_ω - c_l - 2u_x) v_x - u_xx v

are advanced at the interior nodes. Node 0 and node n stay pinned.

This module provides:
- SolutionState / ResidualReport: solver state and residual summary
- DynamicRescalingSolver: velocity assembly, rhs, RK4 step and run loop
- init_state / normalize / residual / step / run: functional entry points
- checkpoint_save / checkpoint_load / export_profile_csv
- run_uniqueness: the four-family uniqueness experiment
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc
from tqdm import tqdm

from explicit_profile import ExplicitProfile, make_explicit
from grid import AdaptiveMesh, build_mesh
from hilbert import FieldVelocity, HilbertParams, VelocityOperator
from spline import QuinticSpline

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PROFILE_COLUMNS = ('x', 'omega', 'omega_x', 'v', 'v_x', 'u', 'u_x', 'F_omega', 'F_v')
U_X0_TARGET = -2.5
C_L_INIT = 3.0


class SolverError(RuntimeError):
    """Raised when the time stepping cannot proceed."""

    def __init__(self, message: str, state: Optional['SolutionState'] = None):
        super().__init__(message)
        self.state = state


class DivergenceError(SolverError):
    """The residual grew by the divergence factor over its running minimum."""


class StepBudgetError(SolverError):
    """The step budget ran out before the tolerance was met."""


class CheckpointError(RuntimeError):
    """Raised for unreadable, corrupt or mismatched checkpoint files."""


# ---------------------------------------------------------------------------
# Initial data families
# ---------------------------------------------------------------------------


def _f1(x):
    return x / (1 + x ** 2), (1 - x ** 2) / (1 + x ** 2) ** 2


def _f2(x):
    g = x / (1 + x ** 2)
    dg = (1 - x ** 2) / (1 + x ** 2) ** 2
    e = np.exp(-(x / 10.0) ** 2)
    return g * e, (dg - g * x / 50.0) * e


def _f3(x):
    return x / (1 + x ** 4), (1 - 3 * x ** 4) / (1 + x ** 4) ** 2


def _f4(x):
    d = 1 + x ** 2
    return x * (1 - x ** 2) ** 2 / d ** 3, (1 - x ** 2) * (1 - 10 * x ** 2 + x ** 4) / d ** 4


@dataclass(frozen=True)
class InitialFamily:
    """ω⁽ⁱ⁾ = a·f(b x) with f'(0) = 1 and Hf(0) known in closed form."""

    name: str
    fn: Callable
    hilbert_at_zero: float

    def scaled(self, slope: float, ux0: float = U_X0_TARGET) -> Tuple[float, float]:
        """(a, b) with a·b = slope and a·Hf(0) = ux0."""
        a = ux0 / self.hilbert_at_zero
        return a, slope / a

    def evaluate(self, x, slope: float, ux0: float = U_X0_TARGET):
        a, b = self.scaled(slope, ux0)
        f, df = self.fn(b * np.asarray(x, dtype=float))
        return a * f, a * b * df


# Hf(0) = -(2/π) ∫_0^∞ f(x)/x dx
FAMILIES: Dict[str, InitialFamily] = {
    'f1': InitialFamily('f1', _f1, -1.0),
    'f2': InitialFamily('f2', _f2, -math.exp(0.01) * float(erfc(0.1))),
    'f3': InitialFamily('f3', _f3, -1.0 / math.sqrt(2.0)),
    'f4': InitialFamily('f4', _f4, -0.5),
}


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SolutionState:
    """Perturbation splines, explicit profile and scaling parameters at time t."""

    mesh: AdaptiveMesh
    profile: ExplicitProfile
    omega_p: QuinticSpline
    v_p: QuinticSpline
    c_l: float
    c_w: float
    t: float = 0.0
    steps: int = 0

    @property
    def ratio(self) -> float:
        """c_ω/c_l, the far-field decay exponent of ω."""
        return self.c_w / self.c_l

    def omega(self, x, k: int = 0):
        return self.profile.omega_b(x, k) + self.omega_p.eval(x, k)

    def v(self, x, k: int = 0):
        return self.profile.v_b(x, k) + self.v_p.eval(x, k)


@dataclass
class ResidualReport:
    """Grid residuals F_ω, F_v and Re = max of both magnitudes."""

    F_omega: np.ndarray
    F_v: np.ndarray
    weighted: Dict[str, float] = field(default_factory=dict)

    @property
    def Re(self) -> float:
        return float(max(np.max(np.abs(self.F_omega)), np.max(np.abs(self.F_v))))

    def to_dict(self) -> dict:
        return {'Re': self.Re, 'max_F_omega': float(np.max(np.abs(self.F_omega))),
                'max_F_v': float(np.max(np.abs(self.F_v))), 'weighted': dict(self.weighted)}


@dataclass
class NodeFields:
    """Total fields and velocity at the mesh nodes for one set of node data."""

    x: np.ndarray
    w: np.ndarray
    w_x: np.ndarray
    w_xx: np.ndarray
    v: np.ndarray
    v_x: np.ndarray
    v_xx: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    u_xx: np.ndarray
    c_l: float
    c_w: float

    @property
    def speed(self) -> np.ndarray:
        return self.c_l * self.x + self.u

    def residuals(self) -> Tuple[np.ndarray, np.ndarray]:
        F_w = -self.speed * self.w_x + self.c_w * self.w + self.v
        F_v = -self.speed * self.v_x + (2 * self.c_w - self.u_x) * self.v
        return F_w, F_v

    def rates(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Time derivatives of (ω_p, ∂ω_p, v_p, ∂v_p), pinned at both ends."""
        s = self.speed
        dw, dv = self.residuals()
        dwx = -s * self.w_xx - (self.c_l + self.u_x) * self.w_x + self.c_w * self.w_x + self.v_x
        dvx = -s * self.v_xx + (2 * self.c_w - self.c_l - 2 * self.u_x) * self.v_x - self.u_xx * self.v
        out = []
        for r in (dw, dwx, dv, dvx):
            r = r.copy()
            r[0] = 0.0
            r[-1] = 0.0
            out.append(r)
        return tuple(out)


def normalize_values(w_x0: float, v_x0: float, u_x0: float) -> Tuple[float, float]:
    """c_l = 2 v_x(0)/ω_x(0) and c_ω = c_l/2 + u_x(0).

    Raises:
        SolverError: If ω_x(0) = 0.
    """
    if w_x0 == 0.0:
        raise SolverError("ω_x(0) = 0: degenerate profile, c_l is undefined")
    c_l = 2.0 * v_x0 / w_x0
    return c_l, 0.5 * c_l + u_x0


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-6
    max_steps: int = 200000
    cfl: float = 0.1
    divergence_factor: float = 10.0
    log_every: int = 500

    @classmethod
    def from_config(cls, config=None) -> 'SolverParams':
        section = (config.get('solver', {}) if config is not None else {}) or {}
        known = {k: section[k] for k in cls.__dataclass_fields__ if k in section}
        return cls(**known)


class DynamicRescalingSolver:
    """Time stepper bound to one mesh and one explicit profile.

    The velocity of the explicit part at the nodes is computed once; the
    perturbation velocity goes through dense node operators.
    """

    def __init__(self, mesh: AdaptiveMesh, profile: ExplicitProfile,
                 params: SolverParams = SolverParams(), hilbert: HilbertParams = HilbertParams(),
                 progress: bool = False):
        self.mesh = mesh
        self.profile = profile
        self.params = params
        self.hilbert = hilbert
        self.progress = progress
        x = mesh.nodes
        self.x = x
        self.h_min = np.minimum(np.r_[np.inf, mesh.widths], np.r_[mesh.widths, np.inf])
        self.w_b = [profile.omega_b(x, k) for k in range(3)]
        self.v_b = [profile.v_b(x, k) for k in range(3)]
        explicit = FieldVelocity.omega(profile, QuinticSpline.zero(mesh), hilbert)
        self.u_b = [explicit.explicit_many(x, k, progress=progress)[0] for k in range(3)]
        # ω and v are odd, so every even-order quantity vanishes at 0
        for arr in (self.u_b[0], self.u_b[2]):
            arr[0] = 0.0
        self.operator = VelocityOperator(mesh, (0, 1, 2), hilbert, progress=progress)
        logger.info("solver ready: %d nodes, L=%g", mesh.n + 1, mesh.L)

    @classmethod
    def from_config(cls, config, progress: bool = False) -> 'DynamicRescalingSolver':
        return cls(make_mesh(config), make_explicit(config), SolverParams.from_config(config),
                   HilbertParams.from_config(config), progress)

    # -- evaluation ---------------------------------------------------------

    def fields(self, w_p: QuinticSpline, v_p: QuinticSpline) -> NodeFields:
        op = self.operator
        u = [self.u_b[k] + op.apply(w_p.values, w_p.slopes, k) for k in range(3)]
        w = [self.w_b[0] + w_p.values, self.w_b[1] + w_p.slopes, self.w_b[2] + w_p.curvatures]
        v = [self.v_b[0] + v_p.values, self.v_b[1] + v_p.slopes, self.v_b[2] + v_p.curvatures]
        c_l, c_w = normalize_values(w[1][0], v[1][0], u[1][0])
        return NodeFields(self.x, w[0], w[1], w[2], v[0], v[1], v[2], u[0], u[1], u[2], c_l, c_w)

    def state_fields(self, state: SolutionState) -> NodeFields:
        return self.fields(state.omega_p, state.v_p)

    def normalize(self, state: SolutionState) -> Tuple[float, float]:
        f = self.state_fields(state)
        return f.c_l, f.c_w

    def residual(self, state: SolutionState) -> ResidualReport:
        return ResidualReport(*self.state_fields(state).residuals())

    def rhs(self, state: SolutionState):
        return self.state_fields(state).rates()

    def time_step(self, f: NodeFields) -> float:
        speed = f.speed[1:-1]
        if np.any(speed <= 0.0):
            i = int(np.argmin(speed)) + 1
            raise SolverError(f"transport speed c_l x + u ≤ 0 at x={self.x[i]:.6g}")
        return self.params.cfl * float(np.min(self.h_min[1:-1] / speed))

    # -- stepping -----------------------------------------------------------

    def _splines(self, data: Sequence[np.ndarray]) -> Tuple[QuinticSpline, QuinticSpline]:
        w, wx, v, vx = (d.copy() for d in data)
        for arr in (w, v):
            arr[0] = 0.0
            arr[-1] = 0.0
        for arr in (wx, vx):
            arr[0] = 0.0
            arr[-1] = 0.0
        return QuinticSpline.fit(self.mesh, w, wx), QuinticSpline.fit(self.mesh, v, vx)

    def _advance(self, state: SolutionState, f0: NodeFields) -> SolutionState:
        """One classical RK4 step from a state whose fields are already known."""
        dt = self.time_step(f0)
        y0 = [state.omega_p.values, state.omega_p.slopes, state.v_p.values, state.v_p.slopes]
        k1 = f0.rates()
        stages = [k1]
        for c in (0.5, 0.5, 1.0):
            y = [a + c * dt * k for a, k in zip(y0, stages[-1])]
            stages.append(self.fields(*self._splines(y)).rates())
        k1, k2, k3, k4 = stages
        y1 = [a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
              for a, b1, b2, b3, b4 in zip(y0, k1, k2, k3, k4)]
        w_p, v_p = self._splines(y1)
        f1 = self.fields(w_p, v_p)
        return replace(state, omega_p=w_p, v_p=v_p, c_l=f1.c_l, c_w=f1.c_w,
                       t=state.t + dt, steps=state.steps + 1)

    def step(self, state: SolutionState) -> SolutionState:
        return self._advance(state, self.state_fields(state))

    def run(self, state: SolutionState, tol: Optional[float] = None,
            max_steps: Optional[int] = None) -> Tuple[SolutionState, List[dict]]:
        """March until Re ≤ tol.

        Returns:
            Tuple of (final state, history rows {step, t, Re, c_l, c_w}).

        Raises:
            DivergenceError: If Re exceeds divergence_factor times its minimum.
            StepBudgetError: If max_steps steps pass without reaching tol.
        """
        tol = self.params.tol if tol is None else tol
        max_steps = self.params.max_steps if max_steps is None else max_steps
        history: List[dict] = []
        best = math.inf
        bar = tqdm(total=max_steps, desc="rescaling", disable=not self.progress, leave=False)
        try:
            for n in range(max_steps + 1):
                f = self.state_fields(state)
                Re = ResidualReport(*f.residuals()).Re
                history.append({'step': state.steps, 't': state.t, 'Re': Re,
                                'c_l': f.c_l, 'c_w': f.c_w})
                if not math.isfinite(Re):
                    raise DivergenceError("residual is not finite", state)
                if Re <= tol:
                    logger.info("converged after %d steps: Re=%.3e, c_w/c_l=%.9f",
                                state.steps, Re, f.c_w / f.c_l)
                    return replace(state, c_l=f.c_l, c_w=f.c_w), history
                best = min(best, Re)
                if Re > self.params.divergence_factor * best:
                    raise DivergenceError(f"Re={Re:.3e} exceeds {self.params.divergence_factor}× "
                                          f"its minimum {best:.3e}", state)
                if n == max_steps:
                    break
                if state.steps % self.params.log_every == 0:
                    logger.info("step %d t=%.4f Re=%.3e c_l=%.6f c_w=%.6f",
                                state.steps, state.t, Re, f.c_l, f.c_w)
                state = self._advance(state, f)
                bar.update(1)
                bar.set_postfix(Re=f"{Re:.2e}")
        finally:
            bar.close()
        raise StepBudgetError(f"no convergence to {tol:g} within {max_steps} steps "
                              f"(Re={history[-1]['Re']:.3e})", state)

    # -- initial data -------------------------------------------------------

    def zero_state(self) -> SolutionState:
        z = QuinticSpline.zero(self.mesh)
        f = self.fields(z, z)
        return SolutionState(self.mesh, self.profile, z, z, f.c_l, f.c_w)

    def family_state(self, name: str) -> SolutionState:
        """ω = a·f(bx) with ω_x(0) = s_ω and u_x(0) = -2.5; v makes F_ω vanish at the nodes.

        Raises:
            SolverError: For an unknown family.
        """
        if name not in FAMILIES:
            raise SolverError(f"unknown initial family {name!r}; expected one of {sorted(FAMILIES)}")
        fam = FAMILIES[name]
        w_tot, w_x = fam.evaluate(self.x, self.profile.s_w)
        z = QuinticSpline.zero(self.mesh)
        w_p, _ = self._splines([w_tot - self.w_b[0], w_x - self.w_b[1], z.values, z.values])
        f = self.fields(w_p, z)
        c_l = C_L_INIT
        c_w = 0.5 * c_l + f.u_x[0]
        s = c_l * self.x + f.u
        v = s * f.w_x - c_w * f.w
        v_x = (c_l + f.u_x) * f.w_x + s * f.w_xx - c_w * f.w_x
        _, v_p = self._splines([w_p.values, w_p.slopes, v - self.v_b[0], v_x - self.v_b[1]])
        logger.info("family %s: a·b=%.6f, c_w=%.6f", name, self.profile.s_w, c_w)
        return SolutionState(self.mesh, self.profile, w_p, v_p, c_l, c_w)

    def init_state(self, kind: str = 'zero') -> SolutionState:
        """'zero' or 'family:f1'..'family:f4' (a bare 'f1' is accepted too)."""
        if kind == 'zero':
            return self.zero_state()
        return self.family_state(kind.split(':', 1)[-1])


# ---------------------------------------------------------------------------
# Functional entry points
# ---------------------------------------------------------------------------


def make_mesh(config=None) -> AdaptiveMesh:
    section = (config.get('mesh', {}) if config is not None else {}) or {}
    mesh = build_mesh(float(section.get('L', 1e4)), float(section.get('abs_cap', 0.05)),
                      float(section.get('rel_cap', 0.02)))
    factor = int(section.get('refine', 1))
    return mesh.refine(factor) if factor > 1 else mesh


def init_state(kind: str, mesh: AdaptiveMesh, profile: ExplicitProfile,
               hilbert: HilbertParams = HilbertParams()) -> SolutionState:
    return DynamicRescalingSolver(mesh, profile, hilbert=hilbert).init_state(kind)


def normalize(state: SolutionState, solver: Optional[DynamicRescalingSolver] = None) -> Tuple[float, float]:
    solver = solver or DynamicRescalingSolver(state.mesh, state.profile)
    return solver.normalize(state)


def residual(state: SolutionState, solver: Optional[DynamicRescalingSolver] = None) -> ResidualReport:
    solver = solver or DynamicRescalingSolver(state.mesh, state.profile)
    return solver.residual(state)


def step(state: SolutionState, solver: Optional[DynamicRescalingSolver] = None) -> SolutionState:
    solver = solver or DynamicRescalingSolver(state.mesh, state.profile)
    return solver.step(state)


def run(config, progress: bool = False) -> Tuple[SolutionState, List[dict]]:
    """Build the solver from a RunConfig, initialize and march to solver.tol."""
    solver = DynamicRescalingSolver.from_config(config, progress)
    state = solver.init_state(config.get('solver.init', 'zero'))
    return solver.run(state)


def refine_state(state: SolutionState, factor: int) -> SolutionState:
    """Resample the perturbations on a mesh refined by `factor` (convergence studies)."""
    mesh = state.mesh.refine(factor)
    x = mesh.nodes

    def resample(spline: QuinticSpline) -> QuinticSpline:
        f, d = spline.eval(x, 0), spline.eval(x, 1)
        # boundary data must vanish exactly
        f[0] = f[-1] = d[-1] = 0.0
        return QuinticSpline.fit(mesh, f, d)

    w, v = resample(state.omega_p), resample(state.v_p)
    return replace(state, mesh=mesh, omega_p=w, v_p=v)


# ---------------------------------------------------------------------------
# Checkpoints and export
# ---------------------------------------------------------------------------


def state_to_dict(state: SolutionState, residual_value: Optional[float] = None) -> dict:
    return {
        'version': CHECKPOINT_VERSION,
        'mesh': {'nodes': state.mesh.to_list(), 'abs_cap': state.mesh.abs_cap,
                 'rel_cap': state.mesh.rel_cap},
        'omega_p': state.omega_p.to_dict(),
        'v_p': state.v_p.to_dict(),
        'profile': state.profile.to_dict(),
        'c_l': state.c_l,
        'c_w': state.c_w,
        't': state.t,
        'steps': state.steps,
        'residual': residual_value,
    }


def state_from_dict(data: dict) -> SolutionState:
    """Rebuild a state from checkpoint data.

    Raises:
        CheckpointError: On version mismatch or missing and malformed fields.
    """
    version = data.get('version') if isinstance(data, dict) else None
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {version!r} is not {CHECKPOINT_VERSION}")
    try:
        m = data['mesh']
        mesh = AdaptiveMesh(np.array(m['nodes'], dtype=float), float(m['abs_cap']), float(m['rel_cap']))
        profile = ExplicitProfile(**{k: float(v) for k, v in data['profile'].items()})
        w = QuinticSpline.fit(mesh, data['omega_p']['values'], data['omega_p']['slopes'])
        v = QuinticSpline.fit(mesh, data['v_p']['values'], data['v_p']['slopes'])
        return SolutionState(mesh, profile, w, v, float(data['c_l']), float(data['c_w']),
                             float(data['t']), int(data['steps']))
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    except ValueError as exc:
        raise CheckpointError(f"invalid checkpoint data: {exc}") from exc


def checkpoint_save(state: SolutionState, path, residual_value: Optional[float] = None) -> None:
    """Write a version-tagged JSON checkpoint."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(state_to_dict(state, residual_value), fh)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc
    logger.info("checkpoint written to %s", path)


def checkpoint_load(path) -> SolutionState:
    """Read a checkpoint written by checkpoint_save.

    Raises:
        CheckpointError: On IO failure, invalid JSON or a bad version tag.
    """
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    return state_from_dict(data)


def _write_csv(path, columns: Sequence[str], table: np.ndarray) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, table, delimiter=',', header=','.join(columns), comments='# ')
    except OSError as exc:
        raise CheckpointError(f"cannot write {path}: {exc}") from exc


def profile_table(solver: DynamicRescalingSolver, state: SolutionState) -> np.ndarray:
    f = solver.state_fields(state)
    F_w, F_v = f.residuals()
    return np.column_stack([f.x, f.w, f.w_x, f.v, f.v_x, f.u, f.u_x, F_w, F_v])


def export_profile_csv(solver: DynamicRescalingSolver, state: SolutionState, path) -> None:
    _write_csv(path, PROFILE_COLUMNS, profile_table(solver, state))


def export_history_csv(history: List[dict], path) -> None:
    cols = ('step', 't', 'Re', 'c_l', 'c_w')
    _write_csv(path, cols, np.array([[row[c] for c in cols] for row in history], dtype=float))


# ---------------------------------------------------------------------------
# Uniqueness experiment
# ---------------------------------------------------------------------------


def count_peaks(values: np.ndarray) -> int:
    """Number of strict interior local maxima."""
    v = np.asarray(values)
    return int(np.count_nonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])))


@dataclass
class UniquenessResult:
    """ω on [0, window] per family and tolerance, with pairwise sup distances."""

    x: np.ndarray
    profiles: Dict[float, Dict[str, np.ndarray]]
    initial_peaks: Dict[str, int]
    final_peaks: Dict[str, int]

    def distances(self, tol: float) -> Dict[Tuple[str, str], float]:
        prof = self.profiles[tol]
        names = sorted(prof)
        return {(a, b): float(np.max(np.abs(prof[a] - prof[b])))
                for i, a in enumerate(names) for b in names[i + 1:]}

    def max_distance(self, tol: float) -> float:
        d = self.distances(tol)
        return max(d.values()) if d else 0.0


def run_uniqueness(solver: DynamicRescalingSolver, families: Sequence[str] = ('f1', 'f2', 'f3', 'f4'),
                   tols: Sequence[float] = (1e-4, 1e-6), window: float = 40.0) -> UniquenessResult:
    """Run every family to each tolerance in turn and compare ω on [0, window].

    Raises:
        SolverError: If any run diverges or exhausts its step budget.
    """
    mask = solver.x <= window
    x = solver.x[mask]
    profiles: Dict[float, Dict[str, np.ndarray]] = {tol: {} for tol in tols}
    initial, final = {}, {}
    for name in tqdm(families, desc="families", disable=not solver.progress):
        state = solver.family_state(name)
        initial[name] = count_peaks(state.omega(x))
        for tol in sorted(tols, reverse=True):
            state, _ = solver.run(state, tol)
            profiles[tol][name] = state.omega(x)
        final[name] = count_peaks(state.omega(x))
        logger.info("family %s done: c_w/c_l=%.6f", name, state.ratio)
    return UniquenessResult(x, profiles, initial, final)
