"""Numerical laboratory for Lorentzian surface geometry.

The package covers four strands: curvature and lightlike foliations of
metrics E dx^2 + 2F dxdy + G dy^2 with EG - F^2 < 0, pullback sequences
under hyperbolic torus maps and their approximately stable direction
fields, the congruence action of the modular group on flat quadratic
forms, and the isometry classification of left-invariant Lorentzian
metrics on the 3-dimensional special linear group.
"""

from .errors import (
    BoundedSequenceError,
    ClosureError,
    DomainError,
    EquicontinuityError,
    ExpressionError,
    GeodesicIncompleteError,
    LorentzLabError,
    PeriodicityError,
    PreconditionError,
    ReductionError,
    SignatureError,
    TracingError,
)
from .expressions import parse_expression
from .components import ExprComponent, GridComponent, as_component
from .metrics import (
    Domain,
    LineField,
    MetricPatch,
    TorusDiffeo,
    UNIT_SQUARE,
    UNIT_TORUS,
    ck_distance,
    lightlike_fields,
    metric_csv_string,
    metric_from_csv,
    metric_to_csv,
    pullback,
    random_torus_metric,
    total_curvature,
)
from .geodesics import (
    exp_map,
    geodesic_residual,
    leaf_holonomy,
    parallel_transport,
    pregeodesic_residual,
    trace_csv_string,
    trace_leaf,
    trace_to_csv,
)
from .lightlike import (
    LightlikeAnnulus,
    annulus_gauss_bonnet,
    connection_form,
    constancy_deviation,
    curvature_integral,
    flatness_experiment,
    make_annulus,
)
from .approx import (
    ANOSOV_MATRIX,
    AnosovSystem,
    FormSequence,
    anosov_experiment,
    anosov_form,
    anosov_form_exact,
    as_field_estimate,
    as_field_report,
    check_anosov_rates,
    dilating_null_covector,
    dilating_null_covector_exact,
    duality_direction,
    expanding_direction,
    form_signature,
    h_null_residual,
    h_polar,
    invariant_function_limit,
    linear_AS,
    null_directions_2d,
    rate_table_csv,
    reduce_to_base,
    shrinking_null_vector,
)
from .moduli import (
    ANOSOV_STABILIZER_WORD,
    QuadraticForm2,
    act,
    anosov_fixed_form,
    congruence_residual_exact,
    continued_fraction,
    domain_chart,
    ergodicity_statistics,
    form_from_slopes,
    mobius,
    modular_reduce,
    orbit_probe,
    orbit_probe_csv,
    slopes,
    statistics_json,
    to_modular_geodesic,
    word_matrix,
    word_matrix_exact,
)
from .psl2r import (
    IsometryVerdict,
    LeftInvariantMetric,
    classify,
    common_lightlike_plane,
    killing_matrix,
    killing_matrix_exact,
    parse_metric_text,
    sequence_experiment,
    sequence_metric,
    structure_operator,
    verdict_table_json,
)

__version__ = "0.1.0"

__all__ = [
    "ANOSOV_MATRIX",
    "ANOSOV_STABILIZER_WORD",
    "AnosovSystem",
    "BoundedSequenceError",
    "ClosureError",
    "Domain",
    "DomainError",
    "EquicontinuityError",
    "ExprComponent",
    "ExpressionError",
    "FormSequence",
    "GeodesicIncompleteError",
    "GridComponent",
    "IsometryVerdict",
    "LeftInvariantMetric",
    "LightlikeAnnulus",
    "LineField",
    "LorentzLabError",
    "MetricPatch",
    "PeriodicityError",
    "PreconditionError",
    "QuadraticForm2",
    "ReductionError",
    "SignatureError",
    "TorusDiffeo",
    "TracingError",
    "UNIT_SQUARE",
    "UNIT_TORUS",
    "act",
    "annulus_gauss_bonnet",
    "anosov_experiment",
    "anosov_fixed_form",
    "anosov_form",
    "anosov_form_exact",
    "as_component",
    "as_field_estimate",
    "as_field_report",
    "check_anosov_rates",
    "ck_distance",
    "classify",
    "common_lightlike_plane",
    "congruence_residual_exact",
    "connection_form",
    "constancy_deviation",
    "continued_fraction",
    "curvature_integral",
    "dilating_null_covector",
    "dilating_null_covector_exact",
    "domain_chart",
    "duality_direction",
    "ergodicity_statistics",
    "exp_map",
    "expanding_direction",
    "flatness_experiment",
    "form_from_slopes",
    "form_signature",
    "geodesic_residual",
    "h_null_residual",
    "h_polar",
    "invariant_function_limit",
    "killing_matrix",
    "linear_AS",
    "null_directions_2d",
    "shrinking_null_vector",
    "killing_matrix_exact",
    "leaf_holonomy",
    "lightlike_fields",
    "make_annulus",
    "metric_csv_string",
    "metric_from_csv",
    "metric_to_csv",
    "mobius",
    "modular_reduce",
    "orbit_probe",
    "orbit_probe_csv",
    "parallel_transport",
    "parse_expression",
    "parse_metric_text",
    "pregeodesic_residual",
    "pullback",
    "random_torus_metric",
    "rate_table_csv",
    "reduce_to_base",
    "sequence_experiment",
    "sequence_metric",
    "slopes",
    "statistics_json",
    "structure_operator",
    "to_modular_geodesic",
    "total_curvature",
    "trace_csv_string",
    "trace_leaf",
    "trace_to_csv",
    "verdict_table_json",
    "word_matrix",
    "word_matrix_exact",
]
