"""Command line front end.

Subcommands: ``surface`` samples a construction on a uniform grid to CSV,
``eval`` evaluates at explicit points, ``verify`` runs the bound and
consistency battery and reports one CHECK line per item, ``approx`` runs
the perturbed-polynomial procedure, ``norms`` prints the certified
constants. Configuration is a JSON file; all output is deterministic for
a fixed config and seed. Exit codes: 0 success, 1 a check or tolerance
failed, 2 usage or configuration error.

FRACTALIS_THREADS (integer >= 1) splits surface evaluation into that many
chunks executed on a thread pool; results are concatenated in order, so
the output does not depend on the thread count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._fields import ConstantField, NetInterpolant, as_field, box_axes, mesh_eval
from .approx import ApproximationError, epsilon_approximate
from .field_expr import FieldDomainError, FieldParseError, parse_field
from .fractal_core import (
    AdmissibilityError,
    DeltaFif,
    DeltaFifField,
    FractalField,
    IterationError,
    ToleranceError,
    boundary_consistency_check,
    interpolation_check,
    make_config,
    make_delta_fif,
    required_depth,
    solve_fixed_point_grid,
)
from .lp_space import (
    ComplexFieldPair,
    complex_l2_identity_check,
    complex_perturbation_gap,
    lp_norm,
    lp_perturbation_gap,
    quadrature_rule,
)
from .net import build_net, jacobian_sum, node_arrays
from .operator_props import (
    OperatorSpec,
    alpha_sequence_convergence,
    blend_operator,
    bounded_below_check,
    fixed_point_check,
    identity_operator,
    linearity_check,
    make_operator_config,
    multiplication_operator,
    neumann_inverse,
    operator_norm_check,
    operator_norm_upper,
    operator_norms,
    operator_sequence_convergence,
    perturbation_gap,
    vanishing_invariance_check,
)

__all__ = ["main"]


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


class PointOutsideBoxError(Exception):
    """Evaluation point not in the domain box; maps to exit code 1."""


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config root must be an object")
    return cfg


def _build_net(cfg: dict):
    try:
        box = cfg["box"]["bounds"]
        knots = cfg["net"]["knots"]
    except (KeyError, TypeError) as exc:
        raise UsageError("config needs box.bounds and net.knots") from exc
    try:
        return build_net(box, knots)
    except ValueError as exc:
        raise UsageError(f"bad net: {exc}") from exc


def _field_from(spec, arity: int, what: str):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ConstantField(float(spec))
    if isinstance(spec, str):
        try:
            return parse_field(spec, arity)
        except FieldParseError as exc:
            raise UsageError(f"bad expression for {what}: {exc}") from exc
    raise UsageError(f"{what} must be a number or an expression string")


def _operator_from(cfg: dict, net) -> OperatorSpec | None:
    spec = cfg.get("operator")
    if spec is None:
        return None
    if not isinstance(spec, dict) or "kind" not in spec:
        raise UsageError("operator must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "identity":
        return identity_operator()
    if kind == "blend":
        if "t" not in spec:
            raise UsageError("blend operator needs 't'")
        try:
            return blend_operator(float(spec["t"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if kind == "multiplication":
        if "b" not in spec:
            raise UsageError("multiplication operator needs 'b'")
        return multiplication_operator(_field_from(spec["b"], net.dim, "operator.b"))
    raise UsageError(f"unknown operator kind {kind!r}")


class _Problem:
    """Parsed configuration: net plus either a scale-field construction
    (explicit base or operator) or node data for the delta construction."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.net = _build_net(cfg)
        run = cfg.get("run", {})
        if not isinstance(run, dict):
            raise UsageError("run section must be an object")
        self.run = run

        fields = cfg.get("fields", {})
        self.f = self.alpha = self.s = None
        if fields:
            if "f" not in fields or "alpha" not in fields:
                raise UsageError("fields section needs f and alpha")
            self.f = _field_from(fields["f"], self.net.dim, "fields.f")
            self.alpha = _field_from(fields["alpha"], self.net.dim, "fields.alpha")
            if "s" in fields:
                self.s = _field_from(fields["s"], self.net.dim, "fields.s")
        self.op = _operator_from(cfg, self.net)
        if self.s is not None and self.op is not None:
            raise UsageError("give either fields.s or an operator section, not both")

        self.fif = None
        fif = cfg.get("fif")
        if fif is not None:
            if "delta" not in fif or "values" not in fif:
                raise UsageError("fif section needs delta and values")
            try:
                self.fif = make_delta_fif(self.net, fif["values"], float(fif["delta"]))
            except ValueError as exc:
                raise UsageError(f"bad fif section: {exc}") from exc

        construction = run.get("construction")
        if construction is None:
            construction = "delta" if self.fif is not None else "alpha"
        if construction not in ("alpha", "delta"):
            raise UsageError("run.construction must be 'alpha' or 'delta'")
        if construction == "delta" and self.fif is None:
            raise UsageError("run.construction is 'delta' but there is no fif section")
        if construction == "alpha" and self.f is None:
            raise UsageError("the scale-field construction needs a fields section")
        self.construction = construction

    def resolution(self, args):
        """Grid resolution: a single count or one per axis."""
        raw = getattr(args, "resolution", None)
        if raw:
            parts = str(raw).split(",")
        elif "resolution" in self.run:
            got = self.run["resolution"]
            parts = got if isinstance(got, list) else [got]
        else:
            return {1: 257, 2: 129}.get(self.net.dim, 33)
        try:
            values = [int(t) for t in parts]
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad resolution {raw or self.run['resolution']!r}: "
                             f"{exc}") from exc
        if any(v < 2 for v in values):
            raise UsageError("resolution must be >= 2 per axis")
        if len(values) == 1:
            return values[0]
        if len(values) != self.net.dim:
            raise UsageError(f"resolution needs 1 or {self.net.dim} values, "
                             f"got {len(values)}")
        return tuple(values)

    def scalar_resolution(self, args) -> int:
        """Finest axis count; checks and quadrature use one shared grid."""
        res = self.resolution(args)
        return max(res) if isinstance(res, tuple) else res

    def tol(self, args, default: float) -> float:
        if getattr(args, "tol", None):
            return float(args.tol)
        if "tol" in self.run:
            return float(self.run["tol"])
        return default

    def seed(self, args) -> int:
        if getattr(args, "seed", None) is not None:
            return int(args.seed)
        return int(self.run.get("seed", 0))

    def p_values(self, args) -> list:
        raw = getattr(args, "p", None)
        if raw:
            parts = str(raw).split(",")
        else:
            got = self.run.get("p", 2)
            parts = got if isinstance(got, list) else [got]
        try:
            values = [float(t) for t in parts]
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad integral-norm exponent list: {exc}") from exc
        for v in values:
            if v < 1:
                raise UsageError(f"integral-norm exponent must be >= 1, got {v:g}")
        return values

    def alpha_config(self, sup_resolution: int = 129):
        if self.construction != "alpha":
            raise UsageError("this command needs the scale-field construction")
        if self.op is not None:
            return make_operator_config(self.net, self.f, self.alpha, self.op,
                                        sup_resolution)
        if self.s is None:
            raise UsageError("fields section needs s or an operator section")
        return make_config(self.net, self.f, self.alpha, self.s, sup_resolution)

    def evaluator(self, tol: float):
        if self.construction == "delta":
            return DeltaFifField(self.fif, tol=tol)
        return FractalField(self.alpha_config(), tol=tol)


def _thread_count() -> int:
    raw = os.environ.get("FRACTALIS_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"FRACTALIS_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise UsageError(f"FRACTALIS_THREADS must be >= 1, got {n}")
    return n


def _eval_chunked(field, pts: np.ndarray, threads: int) -> np.ndarray:
    coords = [pts[:, q] for q in range(pts.shape[1])]
    if threads == 1 or pts.shape[0] < 2 * threads:
        return field.eval_arrays(coords)
    chunks = np.array_split(np.arange(pts.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(
            pool.map(lambda idx: field.eval_arrays([c[idx] for c in coords]), chunks)
        )
    return np.concatenate(parts)


def _format(v: float) -> str:
    return format(float(v), ".17g")


def _write_rows(out_path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_format(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_surface(args) -> int:
    problem = _Problem(_load_config(args.config))
    net = problem.net
    tol = problem.tol(args, 1e-8)
    field = problem.evaluator(tol)
    axes = box_axes(net.box, problem.resolution(args))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1, order="F") for m in mesh], axis=1)
    values = _eval_chunked(field, pts, _thread_count())
    bound = field.error_bound
    header = [f"x{q + 1}" for q in range(net.dim)] + ["value", "error_bound"]
    rows = (tuple(pt) + (val, bound) for pt, val in zip(pts, values))
    _write_rows(args.out, header, rows)
    return 0


def _parse_points(args, problem) -> np.ndarray:
    k = problem.net.dim
    raw = []
    if args.points:
        for text in args.points:
            parts = text.split(",")
            if len(parts) != k:
                raise UsageError(f"point {text!r} must have {k} coordinates")
            try:
                raw.append([float(t) for t in parts])
            except ValueError as exc:
                raise UsageError(f"bad point {text!r}: {exc}") from exc
    elif "points" in problem.run:
        for entry in problem.run["points"]:
            if len(entry) != k:
                raise UsageError(f"config point {entry!r} must have {k} coordinates")
            raw.append([float(t) for t in entry])
    else:
        raise UsageError("no points given (positional arguments or run.points)")
    pts = np.asarray(raw, dtype=float)
    for p in pts:
        if not problem.net.box.contains(p):
            where = tuple(float(v) for v in p)
            raise PointOutsideBoxError(
                f"point {where} outside box {problem.net.box.bounds}"
            )
    return pts


def cmd_eval(args) -> int:
    problem = _Problem(_load_config(args.config))
    tol = problem.tol(args, 1e-10)
    field = problem.evaluator(tol)
    pts = _parse_points(args, problem)
    values = _eval_chunked(field, pts, _thread_count())
    header = [f"x{q + 1}" for q in range(problem.net.dim)] + ["value", "error_bound"]
    rows = (tuple(pt) + (val, field.error_bound) for pt, val in zip(pts, values))
    _write_rows(args.out, header, rows)
    return 0


def _check_line(name: str, lhs: float, rhs: float, ok: bool) -> bool:
    print(f"CHECK {name} lhs={lhs:.9e} rhs={rhs:.9e} {'PASS' if ok else 'FAIL'}")
    return ok


def _skip_line(name: str, reason: str) -> None:
    print(f"CHECK {name} SKIP {reason}")


def _sample_polynomials(net, rng, count: int):
    """Seeded low-degree tensor polynomials used as generic test fields."""
    out = []
    axes_vars = [f"x{q + 1}" for q in range(net.dim)]
    for _ in range(count):
        c = rng.uniform(-1.0, 1.0, size=3)
        parts = [f"{c[0]:.6f}"]
        for v in axes_vars:
            parts.append(f"{c[1]:.6f}*{v}")
            parts.append(f"{c[2]:.6f}*{v}^2")
        out.append(parse_field(" + ".join(parts), net.dim))
    return out


def _verify_alpha(problem, args) -> bool:
    net = problem.net
    seed = problem.seed(args)
    res = problem.scalar_resolution(args)
    eval_tol = problem.tol(args, 1e-9)
    rng = np.random.default_rng(seed)
    ok = True

    cfg = problem.alpha_config()
    field = FractalField(cfg, tol=eval_tol)

    rep = interpolation_check(field, net, cfg.f, tol=1e-9)
    ok &= _check_line("interpolation", rep.max_error, rep.tol, rep.passed)

    rep = boundary_consistency_check(cfg, seed=seed)
    ok &= _check_line("boundary_consistency", rep.max_error, rep.tol, rep.passed)

    a = cfg.alpha_sup
    # gap-form perturbation bound works for explicit bases and operators alike
    axes = box_axes(net.box, res)
    f_vals = mesh_eval(cfg.f, axes)
    lhs = float(np.max(np.abs(mesh_eval(field, axes) - f_vals)))
    gap = float(np.max(np.abs(f_vals - mesh_eval(cfg.s, axes))))
    rhs = a / (1.0 - a) * gap + field.error_bound
    ok &= _check_line("perturbation_gap", lhs, rhs, lhs <= rhs + 1e-12)

    ok &= _check_line("jacobian_sum", abs(jacobian_sum(net) - 1.0), 1e-12,
                      abs(jacobian_sum(net) - 1.0) <= 1e-12)

    scales = [0.5 / n for n in range(1, 7)]
    base = problem.op if problem.op is not None else cfg.s
    steps = alpha_sequence_convergence(net, cfg.f, base, scales, resolution=res,
                                       eval_tol=eval_tol)
    ok &= _check_line("scale_sequence", steps[-1].error, steps[-1].bound,
                      all(st.passed for st in steps))

    ps = problem.p_values(args)
    q_res = res if res % 2 == 1 else res + 1
    for p in ps:
        if problem.op is not None:
            rep = lp_perturbation_gap(net, cfg.f, problem.alpha, problem.op, p,
                                      resolution=q_res, eval_tol=eval_tol)
        else:
            rep = _explicit_lp_gap(problem, p, q_res, eval_tol)
        ok &= _check_line(f"lp_gap_p{p:g}", rep.lhs,
                          rep.rhs * 1.05 + rep.margin + 1e-8, rep.passed)

    if problem.op is None:
        for name in ("operator_norm", "bounded_below", "linearity", "fixed_point",
                     "inverse", "operator_sequence", "vanishing_invariance",
                     "complex_gap", "complex_l2_identity"):
            _skip_line(name, "needs an operator section")
        return ok

    op = problem.op
    samples = _sample_polynomials(net, rng, 4) + [cfg.f]
    rep = operator_norm_check(net, problem.alpha, op, samples, resolution=res,
                              eval_tol=eval_tol)
    ok &= _check_line("operator_norm", rep.lhs, rep.rhs, rep.passed)

    norm_d, norm_idd = operator_norms(op, net)
    if a * norm_d < 1.0:
        rep = bounded_below_check(net, cfg.f, problem.alpha, op, resolution=res,
                                  eval_tol=eval_tol)
        ok &= _check_line("bounded_below", rep.lhs, rep.rhs + rep.margin, rep.passed)
    else:
        _skip_line("bounded_below", "needs sup|alpha|*||D|| < 1")

    g1, g2 = _sample_polynomials(net, rng, 2)
    c1, c2 = float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))
    rep = linearity_check(net, problem.alpha, op, g1, g2, c1, c2, seed=seed,
                          eval_tol=eval_tol)
    ok &= _check_line("linearity", rep.max_error, rep.tol, rep.passed)

    if op.kind == "multiplication":
        _skip_line("fixed_point", "multiplication base maps fix only the zero field")
    else:
        nodes = node_arrays(net)
        interp = NetInterpolant(nodes, mesh_eval(cfg.f, nodes))
        rep = fixed_point_check(net, interp, problem.alpha, op, resolution=res,
                                eval_tol=eval_tol)
        ok &= _check_line("fixed_point", rep.max_error, rep.tol, rep.passed)

    mode = problem.cfg.get("verify", {}).get("inverse", "auto")
    if mode not in ("auto", "require", "skip"):
        raise UsageError("verify.inverse must be auto, require or skip")
    rate = a * norm_idd / (1.0 - a)
    if mode == "skip":
        _skip_line("inverse", "disabled in config")
    elif rate >= 1.0 and mode == "auto":
        _skip_line("inverse", f"contraction bound {rate:.6g} >= 1")
    else:
        try:
            inv = neumann_inverse(net, problem.alpha, op, cfg.f, resolution=res,
                                  tol=problem.tol(args, 1e-6),
                                  require_precondition=(mode == "require"))
            ok &= _check_line("inverse_residual", inv.residuals[-1],
                              problem.tol(args, 1e-6),
                              inv.residuals[-1] <= problem.tol(args, 1e-6))
            ok &= _check_line("inverse_norm", inv.recovered_norm,
                              inv.inverse_norm_bound * inv.target_norm,
                              inv.norm_bound_ok)
            if math.isfinite(inv.measured_rate):
                ok &= _check_line("inverse_rate", inv.measured_rate,
                                  1.1 * inv.rate_bound,
                                  inv.measured_rate <= 1.1 * inv.rate_bound)
            else:
                _skip_line("inverse_rate", "too few iterations to estimate")
        except (AdmissibilityError, IterationError) as exc:
            print(f"CHECK inverse_residual lhs=nan rhs=nan FAIL ({exc})")
            ok = False

    steps = operator_sequence_convergence(net, cfg.f, problem.alpha,
                                          [1.0 / n for n in range(1, 7)],
                                          resolution=res, eval_tol=eval_tol)
    ok &= _check_line("operator_sequence", steps[-1].error, steps[-1].bound,
                      all(st.passed for st in steps))

    # two nesting levels keep the cost near depth^2 while still exercising
    # a genuinely nested application
    seedling = _vanishing_seed(net)
    rep = vanishing_invariance_check(net, problem.alpha, op, seedling,
                                     r_max=2, eval_tol=eval_tol)
    ok &= _check_line("vanishing_invariance", rep.max_error, rep.tol, rep.passed)

    pair = ComplexFieldPair(real=cfg.f, imag=_sample_polynomials(net, rng, 1)[0])
    for p in ps:
        rep = complex_perturbation_gap(net, pair, problem.alpha, op, p,
                                       resolution=q_res, eval_tol=eval_tol)
        ok &= _check_line(f"complex_gap_p{p:g}", rep.lhs,
                          rep.rhs * 1.05 + rep.margin + 1e-8, rep.passed)

    rep = complex_l2_identity_check(net, pair, problem.alpha, op,
                                    resolution=q_res, eval_tol=eval_tol)
    ok &= _check_line("complex_l2_identity", rep.max_error, rep.tol, rep.passed)
    return ok


def _explicit_lp_gap(problem, p, resolution, eval_tol):
    """Integral-norm perturbation bound with an explicit base field."""
    from .operator_props import BoundsReport

    cfg = problem.alpha_config()
    field = FractalField(cfg, tol=eval_tol)
    rule = quadrature_rule(problem.net.box, resolution)
    f_vals = mesh_eval(cfg.f, rule.axes)
    lhs = lp_norm(mesh_eval(field, rule.axes) - f_vals, rule, p)
    gap = lp_norm(f_vals - mesh_eval(cfg.s, rule.axes), rule, p)
    a = cfg.alpha_sup
    rhs = a / (1.0 - a) * gap
    vol = math.prod(float(x[-1] - x[0]) for x in rule.axes)
    margin = field.error_bound * vol ** (1.0 / p)
    return BoundsReport(
        name="lp_perturbation_gap", lhs=lhs, rhs=rhs, margin=margin,
        passed=lhs <= rhs * 1.05 + margin + 1e-8, details={"p": p},
    )


class _KnotProduct:
    """Product over axes and knots of (x_q - knot); zero at every net node."""

    def __init__(self, net):
        self.knots = [np.asarray(part.knots, dtype=float) for part in net.axes]
        mesh = np.meshgrid(*box_axes(net.box, 65), indexing="ij")
        self.scale = max(1e-12, float(np.max(np.abs(self._raw(mesh)))))

    def _raw(self, coords):
        out = np.ones(np.shape(coords[0]))
        for q, ks in enumerate(self.knots):
            x = np.asarray(coords[q], dtype=float)
            for t in ks:
                out = out * (x - t)
        return out

    def __call__(self, point):
        return float(self._raw([np.asarray(float(v)) for v in point])) / self.scale

    def eval_arrays(self, coords):
        return self._raw(coords) / self.scale


def _vanishing_seed(net):
    return _KnotProduct(net)


def _verify_delta(problem, args) -> bool:
    net = problem.net
    ok = True
    rep = interpolation_check(
        DeltaFifField(problem.fif, tol=problem.tol(args, 1e-9)),
        net, problem.fif.values, tol=1e-9,
    )
    ok &= _check_line("interpolation", rep.max_error, rep.tol, rep.passed)
    rep = boundary_consistency_check(problem.fif, seed=problem.seed(args))
    ok &= _check_line("boundary_consistency", rep.max_error, rep.tol, rep.passed)
    jac = abs(jacobian_sum(net) - 1.0)
    ok &= _check_line("jacobian_sum", jac, 1e-12, jac <= 1e-12)
    return ok


def cmd_verify(args) -> int:
    problem = _Problem(_load_config(args.config))
    if problem.construction == "delta":
        ok = _verify_delta(problem, args)
    else:
        ok = _verify_alpha(problem, args)
    print(f"VERIFY {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_approx(args) -> int:
    problem = _Problem(_load_config(args.config))
    if problem.construction != "alpha" or problem.f is None:
        raise UsageError("approx needs the scale-field construction")
    op = problem.op
    if op is None:
        raise UsageError("approx needs an operator section")
    epsilon = args.epsilon if args.epsilon else problem.run.get("epsilon")
    if not epsilon:
        raise UsageError("no epsilon given (--epsilon or run.epsilon)")
    result = epsilon_approximate(problem.net, problem.f, op, float(epsilon),
                                 resolution=problem.scalar_resolution(args))
    print(f"APPROX degree {','.join(str(d) for d in result.poly.degrees)}")
    print(f"APPROX alpha {_format(result.alpha)}")
    print(f"APPROX fit_error {_format(result.components['fit_error'])}")
    print(f"APPROX perturbation_error "
          f"{_format(result.components['perturbation_error'])}")
    print(f"APPROX total_error {_format(result.error)}")
    print(f"APPROX epsilon {_format(result.epsilon)}")
    print(f"APPROX {'PASS' if result.passed else 'FAIL'}")
    if args.out:
        axes = box_axes(problem.net.box, problem.resolution(args))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1, order="F") for m in mesh], axis=1)
        values = _eval_chunked(result.fractal, pts, _thread_count())
        header = [f"x{q + 1}" for q in range(problem.net.dim)] + ["value", "error_bound"]
        rows = (tuple(pt) + (val, result.fractal.error_bound)
                for pt, val in zip(pts, values))
        _write_rows(args.out, header, rows)
    return 0 if result.passed else 1


def cmd_norms(args) -> int:
    problem = _Problem(_load_config(args.config))
    if problem.construction == "delta":
        fif = problem.fif
        print(f"NORM delta {_format(fif.delta)}")
        print(f"NORM data_sup {_format(float(np.max(np.abs(fif.values))))}")
        print(f"NORM jacobian_sum {_format(jacobian_sum(problem.net))}")
        return 0
    cfg = problem.alpha_config()
    tol = problem.tol(args, 1e-8)
    print(f"NORM alpha_sup {_format(cfg.alpha_sup)}")
    print(f"NORM base_gap_sup {_format(cfg.fs_gap)}")
    tail = cfg.fs_gap / (1.0 - cfg.alpha_sup)
    print(f"NORM tail_constant {_format(tail)}")
    try:
        depth = required_depth(cfg.alpha_sup, tail, tol)
        print(f"NORM chain_depth {depth}")
        print(f"NORM truncation_bound {_format(tail * cfg.alpha_sup ** depth)}")
    except ToleranceError as exc:
        print(f"NORM chain_depth UNREACHABLE ({exc})")
    print(f"NORM jacobian_sum {_format(jacobian_sum(problem.net))}")
    if problem.op is not None:
        norm_d, norm_idd = operator_norms(problem.op, problem.net)
        a = cfg.alpha_sup
        print(f"NORM operator_norm_d {_format(norm_d)}")
        print(f"NORM operator_norm_id_minus_d {_format(norm_idd)}")
        print(f"NORM operator_norm_upper "
              f"{_format(operator_norm_upper(problem.net, problem.alpha, problem.op))}")
        rate = a * norm_idd / (1.0 - a)
        print(f"NORM inverse_rate_bound {_format(rate)}")
        print(f"NORM inverse_precondition {'1' if rate < 1.0 else '0'}")
        if a * norm_d < 1.0:
            print(f"NORM inverse_norm_bound "
                  f"{_format((1.0 + a) / (1.0 - a * norm_d))}")

    # integral norms of the germ, the perturbation and their gap, with the
    # gap bound and its pass flag, one block per requested exponent
    res = problem.scalar_resolution(args)
    q_res = res if res % 2 == 1 else res + 1
    rule = quadrature_rule(problem.net.box, q_res)
    field = FractalField(cfg, tol=tol)
    f_vals = mesh_eval(cfg.f, rule.axes)
    h_vals = mesh_eval(field, rule.axes)
    s_vals = mesh_eval(cfg.s, rule.axes)
    a = cfg.alpha_sup
    for p in problem.p_values(args):
        base_gap = lp_norm(f_vals - s_vals, rule, p)
        gap = lp_norm(h_vals - f_vals, rule, p)
        bound = a / (1.0 - a) * base_gap
        print(f"NORM lp_f_p{p:g} {_format(lp_norm(f_vals, rule, p))}")
        print(f"NORM lp_perturbed_p{p:g} {_format(lp_norm(h_vals, rule, p))}")
        print(f"NORM lp_base_gap_p{p:g} {_format(base_gap)}")
        print(f"NORM lp_gap_p{p:g} {_format(gap)}")
        print(f"NORM lp_gap_bound_p{p:g} {_format(bound)}")
        print(f"NORM lp_gap_ok_p{p:g} "
              f"{'1' if gap <= bound * 1.05 + 1e-8 else '0'}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractalis",
        description="Build, evaluate and verify fractal interpolants on a box.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--resolution",
                       help="grid resolution: a single count or one per axis, "
                            "comma separated (e.g. 129 or 65,33)")
        p.add_argument("--tol", type=float, help="evaluation / check tolerance")
        p.add_argument("--seed", type=int, help="seed for sampled checks")
        if out:
            p.add_argument("--out", help="output CSV path (default stdout)")

    p = sub.add_parser("surface", help="sample the interpolant on a uniform grid")
    common(p)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("eval", help="evaluate at explicit points")
    common(p)
    p.add_argument("points", nargs="*",
                   help="points as comma-separated coordinates, e.g. 0.25,0.5")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run the bound and consistency battery")
    common(p, out=False)
    p.add_argument("--p", help="integral-norm exponent(s), comma separated")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("approx", help="perturbed-polynomial approximation")
    common(p)
    p.add_argument("--epsilon", type=float, help="target sup-norm accuracy")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("norms", help="print certified constants")
    common(p, out=False)
    p.add_argument("--p", help="integral-norm exponent(s), comma separated")
    p.set_defaults(func=cmd_norms)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FieldParseError, FieldDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AdmissibilityError, ApproximationError, IterationError,
            PointOutsideBoxError, ToleranceError) as exc:
        # analytic failures: the request was well formed but the
        # construction or a certified bound cannot satisfy it
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
