"""Weighted sum-rate maximization for MIMO interference networks.

Iterative minimax solver for weighted sum-rate maximization under general
linear power-covariance constraints, with reciprocal-network duality
certification and the supporting Hermitian PSD matrix algebra.
"""

from .matops import (
    DEFAULT_RANK_TOL,
    IllPosedLogdetError,
    IndefiniteMatrixError,
    MatrixShapeError,
    TruncationDecomposition,
    ext_logdet_diff,
    hermitize,
    is_psd,
    pseudo_inverse,
    psd_eigh,
    range_projector,
    rank_psd,
    simultaneous_decompose,
)
from .network import (
    ConstraintGroup,
    Link,
    Network,
    NetworkValidationError,
    Scenario,
    achievable_rate,
    constraint_usage,
    interference_plus_noise,
    load_network,
    network_from_dict,
    network_to_dict,
    objective_value,
    random_network,
    save_network,
    weighted_sum_rate,
)
from .solver import (
    DualState,
    IterationTrace,
    KKTReport,
    MonotonicityError,
    SolveResult,
    SolverConfig,
    SolverError,
    default_initial_sigma,
    dual_lambda,
    dual_phi,
    iterate,
    kkt_residual,
    saddle_step,
    scale_and_commit,
    solve,
    solve_mu,
)
from .duality import (
    DegenerateCorrespondence,
    DualityReport,
    UnsupportedDualityMode,
    certify_duality,
    detect_mode,
    duality_map,
    reciprocal_network,
)
from .bench import BenchResult, benchmark_complexity
from .experiments import (
    ConfigError,
    ExperimentConfig,
    emit_convergence_plot_data,
    load_config,
    run_experiment,
    summarize_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
