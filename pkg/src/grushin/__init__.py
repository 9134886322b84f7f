"""Spectral statistics of Grushin-type product models.

Derived parameters and cross spectra (core), certified half-line
Sturm-Liouville solves (sturm1d), the scale-invariant reference spectrum
(scaling), boundary concentration profiles (profile), full product-model
eigenvalue tables with Weyl/Riesz/density diagnostics (model), and a
batch CLI (cli).
"""

from .core import (
    CrossSpectrum,
    GasPlanetParams,
    GrushinParams,
    alpha_of_beta,
    beta_of_alpha,
    circle_spectrum,
    derive_gas_planet,
    derive_params,
    load_cross_spectrum,
    map_u_to_x,
    map_x_to_u,
    save_cross_spectrum,
    torus_spectrum,
)
from .errors import (
    NUMERICAL_ERRORS,
    VALIDATION_ERRORS,
    ConsistencyError,
    DegeneracyError,
    DiscretizationError,
    EngineError,
    IncompleteTableError,
    InconclusiveCountError,
    IterationError,
    ParameterDomainError,
    QuadratureError,
    RegimeError,
    ResolutionError,
    SchemaError,
    SupportWarning,
    TableRangeError,
    ToleranceError,
    TruncationError,
)
from .model import (
    CrossObservable,
    EigenTable,
    HFReport,
    ModelOperator,
    MomentReport,
    SQuadratureConfig,
    WeylFit,
    assemble_spectrum,
    counting_function,
    density_moment,
    eigen_table_csv_bytes,
    hellmann_feynman,
    lemma1_rhs,
    mass_capture,
    moment_report_json_obj,
    required_mu_max,
    riesz_mean,
    trace_with_potential,
    weyl_fit,
)
from .profile import (
    BoundaryProfile,
    QuadratureConfig,
    WeylConstant,
    compute_profile_A,
    compute_profile_B,
    profile_csv_bytes,
    profile_json_obj,
    profile_quantile,
    spectral_zeta,
    weyl_constant,
)
from .scaling import (
    ReferenceSpectrum,
    cached_reference_spectrum,
    cutoff_S,
    fit_eigenvalue_growth,
    load_reference,
    n_s,
    powerlaw_tail_sum,
    reference_spectrum,
    save_reference,
    scaled_eigenfunction,
    scaled_eigenvalue,
)
from .sturm1d import (
    Grid1D,
    GridPolicy,
    Potential,
    PotentialSpec,
    count_below,
    discretize,
    eigenfunction,
    eigenvalues_below,
    load_tabulated_potential,
    smallest_eigenvalues,
    solve_with_refinement,
    trace_neg,
)

__version__ = "0.1.0"
