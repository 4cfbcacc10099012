"""Random-feature collocation for 1D second-order boundary-value problems.

The trial space is a linear span of random trigonometric features (optionally
glued over a partition of unity); only the outer coefficients are trained, by
a truncated-SVD least squares on a collocation grid.  Alongside the solver
the package ships the spectral diagnostics that explain its behaviour:
closed-form singular-value decay bounds, condition-number lower bounds,
two-sided block comparisons for partitioned assemblies, convergence-rate
fits, and the constructive objects (Vandermonde inverses, Taylor-matching
coefficients, moment bounds) those results are built from.
"""

from .problem import (
    BoundaryOperator,
    Domain,
    GevreyEnvelope,
    ManufacturedSolution,
    PDEProblem,
    ScalarField,
    apply_L,
    constant,
    cosine,
    envelope_combine,
    envelope_primitive,
    exponential,
    field_from_expression,
    make_manufactured,
    monomial,
    parse_expression,
    power_cusp,
    sine,
)
from .features import (
    FeatureSample,
    GlobalPUMModel,
    PoUGrid,
    RandomFeatureModel,
    SplitMix64,
    eval_model,
    eval_pum_model,
    partition_check,
    pou_bump,
    pum_skeleton,
    sample_frequencies,
)
from .assembly import (
    CollocationGrid,
    FeatureMatrix,
    RightHandSide,
    assemble_plain,
    assemble_pum,
    blockdiag_compare,
    equidistant_grid,
    extract_blocks,
)
from .solver import (
    FeatureConfig,
    SolveOptions,
    SolveResult,
    error_norms,
    function_norms,
    loss_eval,
    lstsq_svd,
    solve_problem,
)
from .spectra import (
    BoundParams,
    ConditionLowerBound,
    LossBoundParams,
    SpectralReport,
    condition_lower_bound,
    expected_loss_bound,
    pum_sandwich,
    rate_fit,
    singular_value_upper_bound,
    singular_values,
    tail_decay_factor,
    truncate_at_floor,
)
from . import oracle

__version__ = "0.1.0"
