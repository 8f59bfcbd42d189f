"""Gaussian Edwards-Anderson model on the Nishimori line: surface terms,
exact engines, quenched averaging, and executable identity checks."""

from .exact import (
    ENUMERATION_CAP,
    CouplingField,
    GibbsReport,
    SizeCapExceeded,
    bond_correlation,
    corridor_average,
    effective_couplings,
    log_partition,
    pair_correlation,
)
from .lattice import (
    Bond,
    Boundary,
    Corridor,
    CorridorKind,
    Decomposition,
    LatticeSpec,
    build_lattice,
    decompose_box,
    tiling_interfaces,
    torus_cut,
)
from .mcmc import (
    ChainDiagnostics,
    McmcConfig,
    PoorMixingWarning,
    estimate_correlations,
    quenched_estimate_mcmc,
)
from .model import (
    DisorderRealization,
    GaussianBondModel,
    InterpolationSchedule,
    NishimoriParams,
    OffNishimoriError,
    interpolated_params,
    interpolation_schedule,
    nl_from_physical,
    sample_disorder,
    shift_disorder,
    uniform_params,
)
from .quenched import (
    AveragingMethod,
    DisorderMC,
    Estimate,
    GridTooLarge,
    Quadrature,
    combined_std_error,
    quenched_correlation,
    quenched_pressure,
    t_integrand,
)
from .surface import (
    SurfaceTermKind,
    SurfaceTermResult,
    adjacency_direct,
    adjacency_integral,
    adjacency_term,
    periodic_minus_free,
    scaling_sweep,
    surface_pressure_free,
    surface_pressure_periodic,
)
from .cli import RunManifest
from .verify import CheckId, VerificationReport, run_standard_suite, suite_report

__version__ = "0.1.0"
