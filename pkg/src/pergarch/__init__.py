"""Seasonal jump-driven continuous-time GARCH toolkit.

Simulation of a compound-Poisson driver with periodic intensity and
season-dependent jump laws, the COGARCH(p,q) state/volatility/log-price
dynamics it drives, stability and volatility-floor diagnostics, Monte
Carlo moment structure, and a squared-coherence test for periodically
correlated increments.
"""

from .cogarch import (
    CogarchParams,
    CogarchPath,
    GridSamples,
    IntegrityError,
    TransitionPair,
    companion_matrix,
    increments,
    matrix_exponential,
    sample_grid,
    simulate,
    state_at,
    state_update_at_jump,
    transition_pair,
    transition_prefixes,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    builtin_example_config,
    config_digest,
    load_config,
    parse_config,
)
from .moments import (
    PeriodOperators,
    StationarityError,
    estimate_period_operators,
    increment_moments,
    scalar_envelope,
    squared_increment_cov_mc,
    state_cov,
    state_mean,
    stationary_mean,
    stationary_second_moment,
    volatility_cov,
    volatility_mean,
)
from .pc_test import (
    CoherenceReport,
    PeriodDetection,
    alpha_threshold,
    analyze_series,
    coherence_diagonal_means,
    detect_period,
    dft,
    remove_periodic_mean,
    sample_autocorrelation,
    squared_coherence,
)
from .rng import stream
from .semi_levy import (
    CosineIntensity,
    DriftFunction,
    NormalLaw,
    PiecewiseConstantIntensity,
    PointMassLaw,
    SeasonPartition,
    SemiLevyModel,
    SemiLevyPath,
    UniformLaw,
    characteristic_function,
    cumulative_intensity,
    generate_arrivals,
    increment_characteristic_function,
    inverse_cumulative_intensity,
    local_levy_measure,
    path_value,
    sample_jumps,
    sample_paths,
    season_segments,
)
from .stationarity import (
    LogMomentReport,
    NonnegativityReport,
    SpectralCheck,
    StabilityReport,
    certified_gamma,
    check_log_moment_condition,
    check_nonnegativity,
    lyapunov_mc,
    spectral_check,
)

__version__ = "0.1.0"
