"""Construction and evaluation of fractal interpolants on a box.

Two constructions share the same chain machinery:

* the self-referential perturbation of a continuous field f by a scale
  field alpha and a base field s, the unique fixed point h of
  ``h(x) = f(x) + alpha(x) * (h(Q x) - s(Q x))`` where Q maps a point back
  through the inverse of its cell's affine maps;
* the delta-interpolant of node data z, the fixed point of
  ``A(x) = delta * A(Q x) + B_cell(Q x)`` with B_cell the multilinear
  blend of corner-adjusted data.

Both are evaluated by unrolling the fixed-point equation along the chain
x, Qx, Q^2 x, ...; the running product of scale factors damps the tail
geometrically, which gives a certified truncation bound at every call.
Truncated values are exact at the net nodes for every depth >= 1: node
chains land on box corners after one step, and both constructions vanish
there by the corner compatibility conditions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._fields import (
    ConstantField,
    NetInterpolant,
    as_field,
    grid_sup_norm,
    mesh_like,
    tensor_mesh,
)
from .net import Net, axis_coefficients, node_arrays, node_points

__all__ = [
    "AdmissibilityError",
    "ToleranceError",
    "IterationError",
    "FractalConfig",
    "DeltaFif",
    "EvalReport",
    "CheckReport",
    "GridFunction",
    "FixedPointResult",
    "make_config",
    "check_admissible",
    "required_depth",
    "eval_alpha_fractal",
    "FractalField",
    "make_delta_fif",
    "eval_fif_delta",
    "DeltaFifField",
    "rb_apply_grid",
    "solve_fixed_point_grid",
    "interpolation_check",
    "boundary_consistency_check",
    "sample_surface",
]

MAX_DEPTH = 64

# relative slack for the corner compatibility test
_CORNER_TOL = 1e-10


class AdmissibilityError(ValueError):
    """Scale field or base field violates the construction's hypotheses."""


class ToleranceError(RuntimeError):
    """Requested tolerance needs a chain deeper than MAX_DEPTH."""


class IterationError(RuntimeError):
    """Fixed-point iteration failed to reach the target residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class FractalConfig:
    """Validated ingredients of the scale-field perturbation.

    ``alpha_sup`` is the sup of |alpha| (exact for constant scale fields,
    a tensor-grid estimate otherwise) and ``fs_gap`` a grid estimate of
    ``sup |f - s|``; both feed the truncation-depth rule.
    """

    net: Net
    f: object
    alpha: object
    s: object
    alpha_sup: float
    fs_gap: float
    sup_resolution: int


@dataclass(frozen=True, eq=False)
class DeltaFif:
    """Node data plus a uniform vertical scale, |delta| < 1."""

    net: Net
    values: np.ndarray
    delta: float


@dataclass(frozen=True, eq=False)
class EvalReport:
    values: np.ndarray
    error_bound: float
    depth: int


@dataclass(frozen=True, eq=False)
class CheckReport:
    name: str
    max_error: float
    tol: float
    passed: bool
    details: dict


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on a uniform tensor grid, read-only."""

    axes: tuple
    values: np.ndarray

    def interpolant(self) -> NetInterpolant:
        return NetInterpolant(self.axes, self.values)

    def __call__(self, point) -> float:
        return self.interpolant()(point)


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    grid: GridFunction
    iterations: int
    residual: float


def check_admissible(net: Net, f, alpha, s, sup_resolution: int = 129) -> CheckReport:
    """Verify the perturbation hypotheses without raising.

    Checks sup |alpha| < 1 (grid estimate unless alpha is constant) and
    f = s at the 2^k box corners.
    """
    f = as_field(f)
    alpha = as_field(alpha)
    s = as_field(s)
    if isinstance(alpha, ConstantField):
        alpha_sup = abs(alpha.value)
    else:
        alpha_sup = grid_sup_norm(alpha, net.box, sup_resolution)
    corner_gap = 0.0
    for corner in net.box.corners():
        fv, sv = float(f(corner)), float(s(corner))
        corner_gap = max(corner_gap, abs(fv - sv) / max(1.0, abs(fv)))
    passed = alpha_sup < 1.0 and corner_gap <= _CORNER_TOL
    return CheckReport(
        name="admissible",
        max_error=corner_gap,
        tol=_CORNER_TOL,
        passed=passed,
        details={"alpha_sup": alpha_sup, "corner_gap": corner_gap},
    )


def make_config(net: Net, f, alpha, s, sup_resolution: int = 129) -> FractalConfig:
    """Build a FractalConfig, raising AdmissibilityError when the scale
    field is not a uniform contraction or f and s split at a box corner."""
    f = as_field(f)
    alpha = as_field(alpha)
    s = as_field(s)
    report = check_admissible(net, f, alpha, s, sup_resolution)
    if not report.passed:
        raise AdmissibilityError(
            f"inadmissible configuration: sup|alpha| = {report.details['alpha_sup']}, "
            f"corner gap = {report.details['corner_gap']}"
        )
    from ._fields import box_axes, mesh_eval

    axes = box_axes(net.box, sup_resolution)
    gap = float(np.max(np.abs(mesh_eval(f, axes) - mesh_eval(s, axes))))
    return FractalConfig(
        net=net,
        f=f,
        alpha=alpha,
        s=s,
        alpha_sup=report.details["alpha_sup"],
        fs_gap=gap,
        sup_resolution=sup_resolution,
    )


def required_depth(scale_sup: float, tail_constant: float, tol: float) -> int:
    """Smallest chain depth d with tail_constant * scale_sup**d <= tol.

    Raises ToleranceError when that needs more than MAX_DEPTH levels; the
    message states the bound MAX_DEPTH levels do achieve.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if scale_sup == 0.0 or tail_constant <= tol:
        return 1
    d = math.ceil(math.log(tol / tail_constant) / math.log(scale_sup))
    d = max(d, 1)
    if d > MAX_DEPTH:
        reachable = tail_constant * scale_sup**MAX_DEPTH
        raise ToleranceError(
            f"tolerance {tol} needs chain depth {d} > {MAX_DEPTH}; "
            f"depth {MAX_DEPTH} reaches {reachable:.3e}"
        )
    return d


def _tail_constant(config: FractalConfig) -> float:
    # || h - s || <= ||h - f|| + ||f - s|| <= fs_gap / (1 - alpha_sup)
    return config.fs_gap / (1.0 - config.alpha_sup)


def _as_point_array(net: Net, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != net.dim:
        raise ValueError(f"points must have shape (n, {net.dim})")
    for p in pts:
        if not net.box.contains(p):
            raise ValueError(f"point {tuple(p)} outside box {net.box.bounds}")
    return pts


def _locate_arrays(net: Net, coords):
    """0-based cell index arrays, one per axis; interior knots go right."""
    out = []
    for part, t in zip(net.axes, coords):
        i = np.searchsorted(np.asarray(part.knots), t, side="right") - 1
        out.append(np.clip(i, 0, part.n_cells - 1))
    return out


def _inverse_step(net: Net, coords, cells):
    coeffs = axis_coefficients(net)
    out = []
    for t, (a, b), c, (lo, hi) in zip(coords, coeffs, cells, net.box.bounds):
        out.append(np.clip((t - b[c]) / a[c], lo, hi))
    return out


def _alpha_chain(config: FractalConfig, coords, depth: int, top_cells=None):
    """Unrolled fixed-point sum over the chain x, Qx, ..., Q^(depth-1) x.

    v(x) = f(x) + sum_{l=1}^{depth-1} prod_{m<l} alpha(X_m) * (f - s)(X_l);
    the level-depth term cancels against the base value s(X_depth).
    ``top_cells`` optionally forces the 0-based cell index arrays for the
    first step, which lets callers evaluate on a face from either side.
    """
    net = config.net
    acc = mesh_like(config.f, coords)
    if depth == 1:
        return acc
    scale = mesh_like(config.alpha, coords)
    X = [np.asarray(c, dtype=float) for c in coords]
    for level in range(1, depth):
        if level == 1 and top_cells is not None:
            cells = top_cells
        else:
            cells = _locate_arrays(net, X)
        X = _inverse_step(net, X, cells)
        acc = acc + scale * (mesh_like(config.f, X) - mesh_like(config.s, X))
        if level < depth - 1:
            scale = scale * mesh_like(config.alpha, X)
    return acc


def eval_alpha_fractal(config: FractalConfig, points, tol: float = 1e-10,
                       depth: int | None = None) -> EvalReport:
    """Evaluate the perturbation fixed point at ``points`` (n, k).

    Either pass ``tol`` to derive the chain depth from the certified tail
    bound, or force ``depth`` directly; the report carries the resulting
    bound on the truncation error.
    """
    pts = _as_point_array(config.net, points)
    tail = _tail_constant(config)
    if depth is None:
        depth = required_depth(config.alpha_sup, tail, tol)
    coords = [pts[:, q] for q in range(config.net.dim)]
    values = _alpha_chain(config, coords, depth)
    bound = tail * config.alpha_sup**depth
    return EvalReport(values=values, error_bound=bound, depth=depth)


class FractalField:
    """Field view of a FractalConfig at a fixed evaluation tolerance.

    The chain depth is derived once; every call is then an O(depth) sweep
    with the same certified error bound.

    The bound covers truncation. The inverse cell maps expand by 1/|a| per
    level, so floating-point orbit noise is amplified geometrically; it
    stays damped as long as the scale sup does not exceed the smallest
    |a| in the net. Beyond that ratio, evaluations carry drift noise of
    roughly scale_sup ** (log(1/eps) / log(1/min|a|)) on top of the bound.
    """

    def __init__(self, config: FractalConfig, tol: float = 1e-10,
                 depth: int | None = None):
        self.config = config
        self.tol = tol
        tail = _tail_constant(config)
        if depth is None:
            depth = required_depth(config.alpha_sup, tail, tol)
        self.depth = depth
        self.error_bound = tail * config.alpha_sup**self.depth

    def __call__(self, point) -> float:
        coords = [np.asarray([float(t)]) for t in point]
        return float(_alpha_chain(self.config, coords, self.depth)[0])

    def eval_arrays(self, coords) -> np.ndarray:
        shape = np.shape(coords[0])
        flat = [np.asarray(c, dtype=float).ravel() for c in coords]
        out = _alpha_chain(self.config, flat, self.depth)
        return out.reshape(shape)


def make_delta_fif(net: Net, values, delta: float) -> DeltaFif:
    """Validate node data for the delta-interpolant; |delta| < 1."""
    values = np.asarray(values, dtype=float)
    expected = tuple(part.n_cells + 1 for part in net.axes)
    if values.shape != expected:
        raise ValueError(f"node values must have shape {expected}, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("node values must be finite")
    delta = float(delta)
    if not abs(delta) < 1.0:
        raise AdmissibilityError(f"|delta| must be < 1, got {delta}")
    values = values.copy()
    values.setflags(write=False)
    return DeltaFif(net=net, values=values, delta=delta)


def _corner_blend_table(fif: DeltaFif):
    """Per-cell corner data w[cells..., e] = z[eta(cell, corner)] -
    delta * z[corner]; e runs over corner labels, axis 1 least significant."""
    net, z, delta = fif.net, fif.values, fif.delta
    k = net.dim
    eta_tables = []
    for part in net.axes:
        n = part.n_cells
        j = np.arange(1, n + 1)
        odd = j % 2 == 1
        low = np.where(odd, j - 1, j)       # knot met when the map hits the axis low end
        high = np.where(odd, j, j - 1)
        eta_tables.append((low, high))
    shape = tuple(part.n_cells for part in net.axes) + (2**k,)
    w = np.empty(shape)
    for e, mask in enumerate(itertools.product((0, 1), repeat=k)):
        idx = [eta_tables[q][bit] for q, bit in enumerate(mask)]
        corner = tuple(bit * part.n_cells for bit, part in zip(mask, net.axes))
        w[..., e] = z[np.ix_(*idx)] - delta * z[corner]
    w.setflags(write=False)
    return w


def _blend_eval(net: Net, w, cells, coords):
    """Multilinear blend of the per-cell corner data at box coordinates."""
    thetas = [
        (t - lo) / (hi - lo) for t, (lo, hi) in zip(coords, net.box.bounds)
    ]
    out = np.zeros(coords[0].shape)
    for e, mask in enumerate(itertools.product((0, 1), repeat=net.dim)):
        weight = np.ones_like(out)
        for bit, th in zip(mask, thetas):
            weight = weight * (th if bit else 1.0 - th)
        out += weight * w[tuple(cells) + (e,)]
    return out


def _delta_chain(fif: DeltaFif, coords, depth: int, w, base, top_cells=None):
    # A(x) = sum_{l<depth} delta^l B_{cell(X_l)}(X_{l+1}) + delta^depth base(X_depth)
    net = fif.net
    X = [np.asarray(c, dtype=float) for c in coords]
    acc = np.zeros(X[0].shape)
    p = 1.0
    for level in range(depth):
        if level == 0 and top_cells is not None:
            cells = top_cells
        else:
            cells = _locate_arrays(net, X)
        X = _inverse_step(net, X, cells)
        acc += p * _blend_eval(net, w, cells, X)
        p *= fif.delta
    acc += p * base.eval_arrays(X)
    return acc


def _delta_tail_constant(fif: DeltaFif) -> float:
    zmax = float(np.max(np.abs(fif.values)))
    return (1.0 + abs(fif.delta)) * zmax / (1.0 - abs(fif.delta)) + zmax


def eval_fif_delta(fif: DeltaFif, points, tol: float = 1e-10,
                   depth: int | None = None) -> EvalReport:
    """Evaluate the delta-interpolant of the node data at ``points``.

    The chain is seeded with the plain multilinear interpolant of the
    data, so node values are exact at every depth.
    """
    pts = _as_point_array(fif.net, points)
    tail = _delta_tail_constant(fif)
    if depth is None:
        depth = required_depth(abs(fif.delta), tail, tol)
    w = _corner_blend_table(fif)
    base = NetInterpolant(node_arrays(fif.net), fif.values)
    coords = [pts[:, q] for q in range(fif.net.dim)]
    values = _delta_chain(fif, coords, depth, w, base)
    bound = tail * abs(fif.delta) ** depth
    return EvalReport(values=values, error_bound=bound, depth=depth)


class DeltaFifField:
    """Field view of a DeltaFif at a fixed evaluation tolerance."""

    def __init__(self, fif: DeltaFif, tol: float = 1e-10):
        self.fif = fif
        self.tol = tol
        tail = _delta_tail_constant(fif)
        self.depth = required_depth(abs(fif.delta), tail, tol)
        self.error_bound = tail * abs(fif.delta) ** self.depth
        self._w = _corner_blend_table(fif)
        self._base = NetInterpolant(node_arrays(fif.net), fif.values)

    def __call__(self, point) -> float:
        coords = [np.asarray([float(t)]) for t in point]
        return float(_delta_chain(self.fif, coords, self.depth, self._w, self._base)[0])

    def eval_arrays(self, coords) -> np.ndarray:
        shape = np.shape(coords[0])
        flat = [np.asarray(c, dtype=float).ravel() for c in coords]
        out = _delta_chain(self.fif, flat, self.depth, self._w, self._base)
        return out.reshape(shape)


def rb_apply_grid(config: FractalConfig, grid: GridFunction) -> GridFunction:
    """One sweep of h -> f + alpha * (h(Q .) - s(Q .)) on grid values.

    Off-grid values of h come from multilinear interpolation; on grids
    whose points are mapped onto grid points by Q the sweep is exact and
    iterating it converges at rate sup|alpha| to the true fixed point.
    """
    mesh = tensor_mesh(grid.axes)
    flat = [m.ravel() for m in mesh]
    cells = _locate_arrays(config.net, flat)
    pre = _inverse_step(config.net, flat, cells)
    h = NetInterpolant(grid.axes, grid.values)
    new = (
        mesh_like(config.f, flat)
        + mesh_like(config.alpha, flat) * (h.eval_arrays(pre) - mesh_like(config.s, pre))
    )
    values = new.reshape(mesh[0].shape)
    values.setflags(write=False)
    return GridFunction(axes=grid.axes, values=values)


def solve_fixed_point_grid(config: FractalConfig, resolution,
                           tol: float = 1e-12,
                           max_iter: int = 100_000) -> FixedPointResult:
    """Iterate the sweep on a uniform grid until the update is below
    ``tol * (1 - sup|alpha|)``, which bounds the distance to the grid
    fixed point by tol. Independent of the chain evaluator; serves as a
    cross-check oracle for it.
    """
    from ._fields import box_axes

    axes = tuple(box_axes(config.net.box, resolution))
    mesh = tensor_mesh(axes)
    flat = [m.ravel() for m in mesh]
    shape = mesh[0].shape
    cells = _locate_arrays(config.net, flat)
    pre = _inverse_step(config.net, flat, cells)
    f_here = mesh_like(config.f, flat)
    a_here = mesh_like(config.alpha, flat)
    s_pre = mesh_like(config.s, pre)
    target = tol * (1.0 - config.alpha_sup)
    values = f_here.reshape(shape).copy()
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        h = NetInterpolant(axes, values)
        new = (f_here + a_here * (h.eval_arrays(pre) - s_pre)).reshape(shape)
        residual = float(np.max(np.abs(new - values)))
        values = new
        if residual <= target:
            values.setflags(write=False)
            grid = GridFunction(axes=axes, values=values)
            return FixedPointResult(grid=grid, iterations=iteration, residual=residual)
    raise IterationError(
        f"no convergence to residual {target:.3e} in {max_iter} sweeps "
        f"(last residual {residual:.3e})",
        residual,
    )


def interpolation_check(field, net: Net, expected, tol: float = 1e-9) -> CheckReport:
    """Compare ``field`` against expected values at every net node.

    ``expected`` is a field or an array shaped like the node grid.
    """
    pts = node_points(net)
    coords = [pts[:, q] for q in range(net.dim)]
    got = mesh_like(field, coords)
    if hasattr(expected, "__call__") or hasattr(expected, "eval_arrays"):
        want = mesh_like(expected, coords)
    else:
        want = np.asarray(expected, dtype=float).reshape(-1, order="F")
    err = float(np.max(np.abs(got - want)))
    return CheckReport(
        name="interpolation",
        max_error=err,
        tol=tol,
        passed=err <= tol,
        details={"n_nodes": pts.shape[0]},
    )


def _face_points(net: Net, axis: int, knot_index: int, n_samples: int, rng) -> np.ndarray:
    """Sample points on the interior face x_axis = knot[knot_index]."""
    pts = np.empty((n_samples, net.dim))
    for q, (lo, hi) in enumerate(net.box.bounds):
        pts[:, q] = lo + (hi - lo) * rng.random(n_samples)
    pts[:, axis - 1] = net.axes[axis - 1].knots[knot_index]
    return pts


def boundary_consistency_check(obj, n_samples: int = 16, tol: float = 1e-8,
                               seed: int = 0) -> CheckReport:
    """Evaluate on every interior face from both adjacent cells and compare.

    The two evaluations force different top-level cells for the same
    points; the matching conditions make the underlying fixed point agree,
    so the truncated values must agree within twice the truncation bound.
    Accepts a FractalConfig or a DeltaFif.

    The comparison measures the evaluator's real seam mismatch, so for
    scale sups above the smallest cell ratio the orbit-drift noise
    described on FractalField counts against the tolerance.
    """
    rng = np.random.default_rng(seed)
    if isinstance(obj, FractalConfig):
        net = obj.net
        tail = _tail_constant(obj)
        sup = obj.alpha_sup

        def eval_forced(coords, cells, depth):
            return _alpha_chain(obj, coords, depth, top_cells=cells)

    elif isinstance(obj, DeltaFif):
        net = obj.net
        tail = _delta_tail_constant(obj)
        sup = abs(obj.delta)
        w = _corner_blend_table(obj)
        base = NetInterpolant(node_arrays(net), obj.values)

        def eval_forced(coords, cells, depth):
            return _delta_chain(obj, coords, depth, w, base, top_cells=cells)

    else:
        raise TypeError("expected a FractalConfig or a DeltaFif")

    try:
        depth = required_depth(sup, tail, tol / 4)
    except ToleranceError:
        depth = MAX_DEPTH
    bound = tail * sup**depth

    worst = 0.0
    n_faces = 0
    for q in range(1, net.dim + 1):
        part = net.axes[q - 1]
        for j in range(1, part.n_cells):
            pts = _face_points(net, q, j, n_samples, rng)
            coords = [pts[:, m] for m in range(net.dim)]
            cells = _locate_arrays(net, coords)
            left = list(cells)
            left[q - 1] = np.full_like(cells[q - 1], j - 1)
            right = list(cells)
            right[q - 1] = np.full_like(cells[q - 1], j)
            a = eval_forced(coords, left, depth)
            b = eval_forced(coords, right, depth)
            worst = max(worst, float(np.max(np.abs(a - b))))
            n_faces += 1
    limit = max(tol, 2.0 * bound + 1e-12)
    return CheckReport(
        name="boundary_consistency",
        max_error=worst,
        tol=limit,
        passed=worst <= limit,
        details={"n_faces": n_faces, "depth": depth, "truncation_bound": bound},
    )


def sample_surface(config, resolution, tol: float = 1e-8):
    """Evaluate the interpolant on a uniform grid over the box.

    Accepts a FractalConfig or a DeltaFif; returns (axes, grid values,
    report) with the report carrying the certified truncation bound.
    """
    from ._fields import box_axes

    if isinstance(config, FractalConfig):
        net = config.net
        field = FractalField(config, tol=tol)
        bound = field.error_bound
    elif isinstance(config, DeltaFif):
        net = config.net
        field = DeltaFifField(config, tol=tol)
        bound = field.error_bound
    else:
        raise TypeError("expected a FractalConfig or a DeltaFif")
    axes = box_axes(net.box, resolution)
    mesh = tensor_mesh(axes)
    values = field.eval_arrays(mesh)
    report = EvalReport(values=values, error_bound=bound, depth=field.depth)
    return axes, values, report
