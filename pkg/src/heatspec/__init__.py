"""Spectral statistics of Brownian motion on the unitary and general-linear
groups: trace-polynomial flows, limiting moments and densities, concentration
bounds, and reproducible Monte-Carlo experiments."""

__version__ = "0.1.0"

from .errors import (
    ConditioningWarning,
    DegreeCapExceeded,
    EigFailure,
    HeatspecError,
    IllConditioned,
    InvalidConfig,
    InvalidParameter,
    NoConvergence,
    NonInvertibleSeries,
    PoleAtOne,
    PolyParseError,
    PrecisionWarning,
    PreconditionViolated,
    RegimeViolation,
    SingularMatrix,
    ZeroSpectrumValue,
)
from .trace_poly import (
    TracePoly,
    WordPoly,
    eval_at_one,
    eval_on_matrix,
    eval_word_on_matrix,
    format_poly,
    l1_norm,
    lp_word,
    mono_degree,
    mono_index_sum,
    parse_poly,
    star_poly,
    tp_mul,
    trace_degree,
    unitary_reduce,
    v,
    wp_star,
)
from .moments import (
    MomentTable,
    PowerSeries,
    moment_table,
    nu_moment,
    revert_series,
    sigma_closed,
    sigma_from_moments,
)
from .flow import (
    GeneratorSpec,
    apply_D10,
    apply_L10,
    build_generator,
    concentration_bound,
    expm,
    finite_N_covariance_unitary,
    finite_N_expectation,
    hp_basis,
    intertwined_laplacian,
    limit_expectation,
    numerical_laplacian,
    operator_l1_norm,
    refined_bound,
)
from .density import (
    ArcSupport,
    CircleDensity,
    IntervalSupport,
    LineDensity,
    adaptive_simpson,
    positive_density,
    positive_support,
    unitary_density,
    unitary_support,
)
from .simulate import (
    EnsembleConfig,
    FunctionNorms,
    MCSummary,
    SpectralSample,
    TestFunction,
    empirical_integral,
    extract_spectrum,
    lp_norm_trace,
    mc_experiment,
    path_rng,
    sample_gl_heat,
    sample_gue,
    sample_matrix,
    sample_unitary_heat,
    test_function_norms,
    unitarity_drift,
    variance_bound_rhs,
)
