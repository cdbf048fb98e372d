"""Fractal interpolation and perturbation of continuous fields on a box.

The package builds two related constructions over a rectangular net: the
scale-field perturbation of a continuous field (an attractor-type fixed
point that agrees with the field at every net node) and the classical
multi-axis interpolant driven by a single vertical factor. On top of the
evaluators it ships certified truncation bounds, a grid fixed-point oracle,
operator-level bound checks, integral-norm inequalities with explicit
constants, and polynomial / hat-basis approximation utilities.
"""

from ._fields import (
    CallableField,
    ConstantField,
    LinCombField,
    NetInterpolant,
    ProductField,
    as_field,
    grid_sup_norm,
)
from .approx import (
    ApproximationError,
    EpsilonApproxResult,
    HatField,
    SchauderResult,
    TensorPolynomial,
    epsilon_approximate,
    faber_schauder,
    fractal_basis_reconstruct,
    fractal_polynomial,
    poly_fit_least_squares,
    schauder_coefficients,
)
from .field_expr import (
    FieldDomainError,
    FieldExpr,
    FieldParseError,
    eval_field,
    parse_field,
    sup_norm_grid,
)
from .fractal_core import (
    AdmissibilityError,
    CheckReport,
    DeltaFif,
    DeltaFifField,
    EvalReport,
    FractalConfig,
    FractalField,
    GridFunction,
    IterationError,
    ToleranceError,
    boundary_consistency_check,
    check_admissible,
    eval_alpha_fractal,
    eval_fif_delta,
    interpolation_check,
    make_config,
    make_delta_fif,
    required_depth,
    rb_apply_grid,
    sample_surface,
    solve_fixed_point_grid,
)
from .lp_space import (
    ComplexFieldPair,
    QuadratureRule,
    complex_l2_identity_check,
    complex_perturbation_gap,
    complexify_apply,
    lp_norm,
    lp_perturbation_gap,
    m_constant,
    quadrature_rule,
    refined_m_constant,
)
from .net import (
    AxisPartition,
    Box,
    CellMap,
    Net,
    build_net,
    cell_map,
    eta,
    inverse_point,
    jacobian_sum,
    locate_cell,
    map_point,
    node_arrays,
    node_points,
)
from .operator_props import (
    BoundsReport,
    ConvergenceStep,
    NeumannResult,
    OperatorSpec,
    alpha_sequence_convergence,
    apply_fractal_operator,
    apply_operator,
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
    validate_operator,
    vanishing_invariance_check,
)

__version__ = "1.0.0"

__all__ = [
    "AdmissibilityError",
    "ApproximationError",
    "AxisPartition",
    "BoundsReport",
    "Box",
    "CallableField",
    "CellMap",
    "CheckReport",
    "ComplexFieldPair",
    "ConstantField",
    "ConvergenceStep",
    "DeltaFif",
    "DeltaFifField",
    "EpsilonApproxResult",
    "EvalReport",
    "FieldDomainError",
    "FieldExpr",
    "FieldParseError",
    "FractalConfig",
    "FractalField",
    "GridFunction",
    "HatField",
    "IterationError",
    "LinCombField",
    "Net",
    "NetInterpolant",
    "NeumannResult",
    "OperatorSpec",
    "ProductField",
    "QuadratureRule",
    "SchauderResult",
    "TensorPolynomial",
    "ToleranceError",
    "alpha_sequence_convergence",
    "apply_fractal_operator",
    "apply_operator",
    "as_field",
    "blend_operator",
    "boundary_consistency_check",
    "bounded_below_check",
    "build_net",
    "cell_map",
    "check_admissible",
    "complex_l2_identity_check",
    "complex_perturbation_gap",
    "complexify_apply",
    "epsilon_approximate",
    "eta",
    "eval_alpha_fractal",
    "eval_field",
    "eval_fif_delta",
    "faber_schauder",
    "fixed_point_check",
    "fractal_basis_reconstruct",
    "fractal_polynomial",
    "grid_sup_norm",
    "identity_operator",
    "interpolation_check",
    "inverse_point",
    "jacobian_sum",
    "linearity_check",
    "locate_cell",
    "lp_norm",
    "lp_perturbation_gap",
    "m_constant",
    "make_config",
    "make_delta_fif",
    "make_operator_config",
    "map_point",
    "multiplication_operator",
    "neumann_inverse",
    "node_arrays",
    "node_points",
    "operator_norm_check",
    "operator_norm_upper",
    "operator_norms",
    "operator_sequence_convergence",
    "parse_field",
    "perturbation_gap",
    "poly_fit_least_squares",
    "quadrature_rule",
    "rb_apply_grid",
    "refined_m_constant",
    "required_depth",
    "sample_surface",
    "schauder_coefficients",
    "solve_fixed_point_grid",
    "sup_norm_grid",
    "validate_operator",
    "vanishing_invariance_check",
]
