"""
Adaptive meshes on [0, L] and per-interval bound propagation.

An AdaptiveMesh keeps every spacing either below an absolute cap or below a
relative cap times the right node. A PiecewiseBound stores one (low, up)
pair per mesh interval and is the unit that rigorous estimates are built from.
"""

import bisect
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from interval import Interval, IntervalArray

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


class MeshError(ValueError):
    """Raised for invalid mesh parameters or mismatched meshes."""


@dataclass(frozen=True, eq=False)
class AdaptiveMesh:
    """Strictly increasing nodes 0 = x_0 < ... < x_n = L."""

    nodes: np.ndarray
    abs_cap: float
    rel_cap: float
    _widths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise MeshError("a mesh needs at least two intervals")
        if not np.all(np.isfinite(x)):
            raise MeshError("mesh nodes must be finite")
        if x[0] != 0.0:
            raise MeshError("the first node must be 0")
        h = np.diff(x)
        if np.any(h <= 0.0):
            raise MeshError("mesh nodes must be strictly increasing")
        if not np.all(spacing_ok(x, self.abs_cap, self.rel_cap)):
            raise MeshError("spacing invariant violated")
        x.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, 'nodes', x)
        object.__setattr__(self, '_widths', h)

    @property
    def L(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return self._widths

    @property
    def left(self) -> np.ndarray:
        return self.nodes[:-1]

    @property
    def right(self) -> np.ndarray:
        return self.nodes[1:]

    def cells(self) -> IntervalArray:
        """The mesh intervals as enclosures [x_{i-1}, x_i]."""
        return IntervalArray(self.left, self.right, check=False)

    def locate(self, x: float) -> Tuple[int, float]:
        """Return (j, h) with x in [x_{j-1}, x_j) and h its width (1-based j).

        For x ≥ L the last interval and its width are returned.

        Raises:
            MeshError: If x is negative.
        """
        if x < 0.0:
            raise MeshError(f"negative coordinate {x}")
        if x >= self.L:
            return self.n, float(self._widths[-1])
        j = bisect.bisect_right(self.nodes, x)
        return j, float(self._widths[j - 1])

    def locate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if np.any(xs < 0.0):
            raise MeshError("negative coordinate")
        j = np.searchsorted(self.nodes, xs, side='right')
        return np.clip(j, 1, self.n)

    def refine(self, factor: int) -> 'AdaptiveMesh':
        """Split every interval into `factor` equal parts."""
        if factor < 1:
            raise MeshError("refinement factor must be ≥ 1")
        if factor == 1:
            return self
        t = np.arange(factor) / factor
        inner = (self.left[:, None] + self._widths[:, None] * t[None, :]).ravel()
        nodes = np.append(inner, self.L)
        return AdaptiveMesh(nodes, self.abs_cap, self.rel_cap)

    def extend(self, L_new: float) -> 'AdaptiveMesh':
        """Append geometrically growing nodes up to L_new."""
        if L_new <= self.L:
            return self
        tail = build_mesh(L_new, self.abs_cap, self.rel_cap, start=self.nodes)
        return tail

    def to_list(self):
        return self.nodes.tolist()


def spacing_ok(nodes: np.ndarray, abs_cap: float, rel_cap: float) -> np.ndarray:
    x = np.asarray(nodes, dtype=float)
    h = np.diff(x)
    cap = np.maximum(abs_cap, rel_cap * x[1:])
    # node differences carry an absolute rounding error of order ulp(x)
    return h <= cap * (1 + 4 * _EPS) + 4 * _EPS * np.abs(x[1:])


def build_mesh(L: float, abs_cap: float, rel_cap: float,
               start: Optional[Sequence[float]] = None) -> AdaptiveMesh:
    """Build an adaptive mesh on [0, L].

    Nodes advance by h = max(abs_cap, rel_cap·x), so spacing is uniform
    up to x = abs_cap/rel_cap and grows geometrically beyond it. A step that
    would leave a sliver before L is split into two halves.

    Raises:
        MeshError: For nonpositive caps, rel_cap outside (0, 1) or L ≤ 0.
    """
    if abs_cap <= 0.0 or rel_cap <= 0.0:
        raise MeshError("mesh caps must be positive")
    if not rel_cap < 1.0:
        raise MeshError("rel_cap must lie in (0, 1)")
    if not L > 0.0:
        raise MeshError("L must be positive")
    nodes = [0.0] if start is None else list(start)
    x = nodes[-1]
    while x < L:
        h = max(abs_cap, rel_cap * x)
        if L - x <= h:
            x = L
        elif L - x < 1.25 * h:
            nodes.append(x + 0.5 * (L - x))
            x = L
        else:
            x = x + h
        nodes.append(x)
    if len(nodes) == 2:
        nodes.insert(1, 0.5 * L)
    logger.debug("built mesh with %d nodes on [0, %g]", len(nodes), L)
    return AdaptiveMesh(np.array(nodes), abs_cap, rel_cap)


# ---------------------------------------------------------------------------
# Piecewise bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PiecewiseBound:
    """Per-interval bounds low_i ≤ g(x) ≤ up_i on [x_{i-1}, x_i]."""

    mesh: AdaptiveMesh
    low: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        low = np.asarray(self.low, dtype=float)
        up = np.asarray(self.up, dtype=float)
        if low.shape != (self.mesh.n,) or up.shape != (self.mesh.n,):
            raise MeshError("bound length must equal the number of intervals")
        if np.any(low > up):
            raise MeshError("low > up in PiecewiseBound")
        object.__setattr__(self, 'low', low)
        object.__setattr__(self, 'up', up)

    @classmethod
    def from_intervals(cls, mesh: AdaptiveMesh, iv: IntervalArray) -> 'PiecewiseBound':
        return cls(mesh, iv.lo, iv.hi)

    @classmethod
    def constant(cls, mesh: AdaptiveMesh, low: float, up: float) -> 'PiecewiseBound':
        return cls(mesh, np.full(mesh.n, low), np.full(mesh.n, up))

    def as_intervals(self) -> IntervalArray:
        return IntervalArray(self.low, self.up, check=False)

    def magnitude(self) -> np.ndarray:
        """Per-interval bound on |g|."""
        return np.maximum(np.abs(self.low), np.abs(self.up))

    def max_abs(self) -> float:
        return float(np.max(self.magnitude()))

    def integral_bounds(self) -> Interval:
        """Enclosure of the integral of g over [0, L]."""
        h = IntervalArray.from_values(self.mesh.widths)
        return (self.as_intervals() * h).sum()

    def restrict(self, mask) -> IntervalArray:
        return IntervalArray(self.low[mask], self.up[mask], check=False)


def _same_mesh(a: PiecewiseBound, b: PiecewiseBound) -> None:
    if a.mesh is not b.mesh and not np.array_equal(a.mesh.nodes, b.mesh.nodes):
        raise MeshError("bounds live on different meshes")


def _endpoint_pair(mesh: AdaptiveMesh, values) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalize node values into (left_lo, left_hi, right_lo, right_hi)."""
    if isinstance(values, IntervalArray):
        if values.shape != (mesh.n + 1,):
            raise MeshError("node enclosure length must be n + 1")
        return values.lo[:-1], values.hi[:-1], values.lo[1:], values.hi[1:]
    if isinstance(values, tuple):
        left, right = (np.asarray(v, dtype=float) for v in values)
        if left.shape != (mesh.n,) or right.shape != (mesh.n,):
            raise MeshError("endpoint arrays must have one entry per interval")
        return left, left, right, right
    v = np.asarray(values, dtype=float)
    if v.shape != (mesh.n + 1,):
        raise MeshError("node values must have n + 1 entries")
    return v[:-1], v[:-1], v[1:], v[1:]


def bounds_from_derivative(mesh: AdaptiveMesh, values,
                           dmax: Union[PiecewiseBound, np.ndarray]) -> PiecewiseBound:
    """Bound g on each interval from its endpoint values and a bound on |g_x|.

    up_i = max(g(x_{i-1}), g(x_i)) + h_i/2 · max|g_x| and symmetrically for
    low_i. `values` may be node values, a (left, right) tuple of per-interval
    endpoint values, or node enclosures.

    Raises:
        MeshError: On mismatched lengths or meshes.
    """
    l_lo, l_hi, r_lo, r_hi = _endpoint_pair(mesh, values)
    if isinstance(dmax, PiecewiseBound):
        if dmax.mesh is not mesh and not np.array_equal(dmax.mesh.nodes, mesh.nodes):
            raise MeshError("derivative bound lives on a different mesh")
        slope = dmax.magnitude()
    else:
        slope = np.abs(np.asarray(dmax, dtype=float))
        if slope.shape != (mesh.n,):
            raise MeshError("derivative bound must have one entry per interval")
    pad = 0.5 * mesh.widths * slope
    pad = np.nextafter(pad, np.inf)
    up = np.nextafter(np.maximum(l_hi, r_hi) + pad, np.inf)
    low = np.nextafter(np.minimum(l_lo, r_lo) - pad, -np.inf)
    return PiecewiseBound(mesh, low, up)


def bounds_from_curvature(mesh: AdaptiveMesh, values, d2max) -> PiecewiseBound:
    """Bound g from endpoint values and a bound on |g_xx| (h²/8 rule)."""
    l_lo, l_hi, r_lo, r_hi = _endpoint_pair(mesh, values)
    if isinstance(d2max, PiecewiseBound):
        curv = d2max.magnitude()
    else:
        curv = np.abs(np.asarray(d2max, dtype=float))
    pad = np.nextafter(mesh.widths ** 2 / 8.0 * curv * (1 + 4 * _EPS), np.inf)
    up = np.nextafter(np.maximum(l_hi, r_hi) + pad, np.inf)
    low = np.nextafter(np.minimum(l_lo, r_lo) - pad, -np.inf)
    return PiecewiseBound(mesh, low, up)


def bound_combine(op: str, a: PiecewiseBound, b: Optional[PiecewiseBound] = None,
                  fn: Optional[Callable] = None, increasing: bool = True) -> PiecewiseBound:
    """Combine bounds with interval arithmetic on each interval.

    Args:
        op: 'add', 'sub', 'mul', 'div' or 'compose'.
        a: Left operand.
        b: Right operand (unused for 'compose').
        fn: Monotone scalar function for 'compose' (numpy-vectorized).
        increasing: Monotonicity direction of fn.

    Raises:
        MeshError: On mismatched meshes or unknown op.
        IntervalError: On division through zero.
    """
    if op == 'compose':
        if fn is None:
            raise MeshError("compose needs a function")
        f_low, f_up = fn(a.low), fn(a.up)
        if not increasing:
            f_low, f_up = f_up, f_low
        return PiecewiseBound(a.mesh, np.nextafter(f_low, -np.inf), np.nextafter(f_up, np.inf))
    if b is None:
        raise MeshError(f"{op} needs two operands")
    _same_mesh(a, b)
    x, y = a.as_intervals(), b.as_intervals()
    if op == 'add':
        out = x + y
    elif op == 'sub':
        out = x - y
    elif op == 'mul':
        out = x * y
    elif op == 'div':
        out = x / y
    else:
        raise MeshError(f"unknown op {op!r}")
    return PiecewiseBound.from_intervals(a.mesh, out)


def bound_ratio_removable(f: PiecewiseBound, fx: PiecewiseBound,
                          eps: Optional[float] = None) -> PiecewiseBound:
    """Bound f(x)/x for f with f(0) = 0.

    Intervals with x_{i-1} ≥ eps use interval division by [x_{i-1}, x_i];
    the others use the mean-value bound f(x)/x ∈ hull of f_x over [0, x_i].

    Raises:
        MeshError: If eps is smaller than the first mesh interval.
    """
    _same_mesh(f, fx)
    mesh = f.mesh
    h1 = float(mesh.widths[0])
    if eps is None:
        eps = 10.0 * h1
    if eps < h1:
        raise MeshError(f"eps={eps} is smaller than the first interval {h1}")
    low = np.empty(mesh.n)
    up = np.empty(mesh.n)
    far = mesh.left >= eps
    if np.any(far):
        cells = IntervalArray(mesh.left[far], mesh.right[far], check=False)
        ratio = f.restrict(far) / cells
        low[far], up[far] = ratio.lo, ratio.hi
    near = ~far
    # running hull of f_x over intervals 1..i
    run_low = np.minimum.accumulate(fx.low)
    run_up = np.maximum.accumulate(fx.up)
    low[near], up[near] = run_low[near], run_up[near]
    return PiecewiseBound(mesh, low, up)


def sample_cells(mesh: AdaptiveMesh, per_cell: int) -> np.ndarray:
    """Points strictly inside and at the ends of every interval, shape (n, per_cell)."""
    t = np.linspace(0.0, 1.0, per_cell)
    return mesh.left[:, None] + mesh.widths[:, None] * t[None, :]


def check_contains(bound: PiecewiseBound, fn: Callable, per_cell: int = 50) -> bool:
    """True when dense samples of fn lie inside the bound (test helper)."""
    pts = sample_cells(bound.mesh, per_cell)
    vals = fn(pts)
    return bool(np.all(vals >= bound.low[:, None]) and np.all(vals <= bound.up[:, None]))

