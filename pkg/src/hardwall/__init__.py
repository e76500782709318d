"""Monte Carlo laboratory for gradient interface fields above a hard wall.

Heights phi >= 0 on a finite cube interact through an even bond potential
(absolute value or quadratic) with zero boundary conditions, optionally
rewarded near the wall by a square well or a delta atom at height 0. The
package provides exact heat-bath / Metropolis samplers, a quadrature
oracle for tiny systems, estimators with batch-means errors, the map
inequalities behind the wetting bounds as executable checks, and a batch
CLI that writes CSV sweeps.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    FitError,
    HardwallError,
    InvariantViolation,
    ParameterError,
    QuadratureError,
    UsageError,
)
from .lattice import Lattice, boundary_sites, build_lattice, snake_path
from .model import (
    DELTA,
    FieldConfig,
    GAUSSIAN,
    NONE,
    Pinning,
    Potential,
    SOS,
    SQUARE_WELL,
    energy_delta,
    energy_total,
    epsilon_of,
    site_conditional,
    well_log_weight,
)
from .sampling import (
    ChainParams,
    Trace,
    heat_bath_site,
    metropolis_site,
    run_chain,
    sample_piecewise_exponential,
    sample_truncated_gaussian,
)
from .observables import (
    Estimate,
    FitResult,
    batch_means,
    estimate_rho,
    fit_scaling,
    pinned_count,
    tail_probability,
)
from .chalker import (
    StratifiedConfig,
    boundary_sum_X,
    check_boundary_moment,
    check_S_inequality_gauss,
    check_S_inequality_sos,
    check_T_inequality,
    map_S,
    map_T,
    verify_suite,
)
from .oracle import (
    ExactResult,
    QuadratureSpec,
    chain_site_marginal,
    check_integral_identity,
    check_lower_bound_Z,
    check_rho_monotone,
    exact_Z_chain,
    exact_Z_subset_expansion,
    exact_rho,
    log_Z_density,
)
