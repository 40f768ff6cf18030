"""Random band matrices: quantum diffusion at desk scale.

Sampling of Hermitian band ensembles on periodic lattices, Chebyshev
propagation, the diffusive profile and its limiting density, the supporting
nonbacktracking / diagram combinatorics, and spectral edge experiments.
"""

from .lattice import (
    Lattice,
    ShapeFunction,
    BandProfile,
    build_profile,
    get_shape,
    periodic_reduce,
    wigner_profile,
)
from .ensemble import (
    EntryDistribution,
    BandMatrixSample,
    sample_matrix,
    truncated_variance_check,
)
from .chebyshev import (
    AlphaCoefficients,
    ConvergenceError,
    PropagationResult,
    alpha_coefficients,
    bessel_jn,
    cheb_U,
    propagate,
    rho_via_expansion,
)
from .nonbacktracking import (
    path_expansion_check,
    phi_matrices,
    vn_direct,
    vn_recursive,
    vn_sequence,
)
from .limit_density import (
    CovarianceMatrix,
    covariance_of_shape,
    heat_kernel,
    limit_L,
    limit_profile,
    limit_second_moment,
    limit_weak_integral,
)
from .diffusion import (
    DiffusionProfile,
    RescaledSummary,
    SecondMomentReport,
    estimate_rho,
    second_moment_check,
    weak_test,
)
from .diagrams import (
    Lumping,
    NoCaseError,
    RefiningPairing,
    Skeleton,
    StemCycle,
    TaggedPairing,
    bough_census,
    catalan,
    count_constrained_boughs,
    detect_parallel,
    even_lumpings,
    greedy_refining_pairing,
    ladder,
    leaf_census,
    min_skeleton_size,
    narayana,
    skeleton,
)
from .spectral_edge import (
    EdgeReport,
    EigenConvergenceError,
    TailBoundReport,
    TraceEstimate,
    cheb_trace,
    edge_experiment,
    edge_tail_bound,
    lambda_max,
    schur_norm_bound,
)
from .config import RunConfig
from .verify import CheckResult, run_suite

__version__ = "0.1.0"
