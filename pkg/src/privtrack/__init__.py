"""Compressed, differentially private decentralized gradient tracking.

A numpy toolkit with three pillars:

* a simulator for gradient tracking over doubly stochastic networks with
  contractive message compression and decaying Laplace privacy noise,
* numerical convergence certificates (a 5-dimensional error recursion,
  spectral-radius bounds, admissible step-size regions),
* closed-form per-agent differential-privacy budgets.
"""

from .algorithm import (
    DivergenceError,
    NetworkState,
    RunConfig,
    TrialStreams,
    apply_step,
    conservation_residual,
    diadsp_config,
    init_state,
    run,
    step,
    step_reference,
    streams_for_trial,
)
from .analysis import (
    ConvergenceSystem,
    PrivacyBudget,
    SystemParams,
    ZetaCheck,
    adjacency_distance,
    build_system,
    default_zetas,
    lemma2_zeta_check,
    power_iteration_radius,
    privacy_epsilon,
    spectral_radius,
    theorem1_bounds,
)
from .compressors import (
    CompressorSpec,
    bbit_spec,
    compress,
    declared_contraction,
    estimate_contraction,
    identity_spec,
    parse_compressor,
    topk_spec,
    with_phi,
)
from .config import (
    ConfigError,
    apply_overrides,
    build_experiment,
    default_config,
    load_config,
    validate_config,
)
from .graph import (
    GraphError,
    MixingMatrix,
    build_mixing_matrix,
    graph_preset,
    lazy_mix,
    matrix_spectral_scalars,
    spectral_scalars,
)
from .harness import (
    ComparisonReport,
    TrialSet,
    accuracy_sweep,
    check_config_bounds,
    compare_presets,
    fit_log_residual,
    realized_fixed_point,
    run_trials,
    table1_presets,
)
from .noise import (
    NoiseAccumulator,
    NoiseSchedule,
    sample_laplace,
    sample_noise_matrix,
    scale_at,
    standard_laplace,
    tail_bound,
)
from .objective import (
    ProblemInstance,
    export_csv,
    generate_problem,
    gradient,
    gradient_matrix,
    import_csv,
    instance_from_data,
    smoothness_constants,
    solve_shifted_optimum,
    total_gradient,
)
from .records import SweepReport, Trace, read_trace_csv, write_trace_csv

__version__ = "0.1.0"
