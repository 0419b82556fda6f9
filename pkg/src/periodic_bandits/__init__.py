"""Bandits with unknown periodic mean rewards.

Spectral period estimation from a short exploration block, then nested
confidence-bound learning over (arm, phase) effective arms, plus baselines and
a reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .env import (
    BanditInstance,
    MeanProfile,
    NoiseModel,
    NoiseStream,
    RunResult,
    instance_from_dict,
    instance_metric,
    instance_to_dict,
    load_instance,
    make_demo_instance,
    make_lower_bound_instance,
    mean_at,
    pseudo_regret,
    sample_reward,
    save_instance,
    validity_report,
)
from .spectral import (
    FrequencyEstimate,
    Periodogram,
    ThresholdConstants,
    a_sup,
    amplitude_condition_coefficients,
    candidate_frequencies,
    compute_periodogram,
    default_H,
    default_t_max,
    dft_at,
    estimate_periods,
    failure_probability_bound,
    frequency_grid,
    identify_frequencies,
    lcm_of_denominators,
    noise_bound,
    threshold,
    threshold_constants,
    u_constants,
)
from .policies import (
    EliminationState,
    InstanceView,
    LcmUCB,
    NestedCBState,
    OraclePolicy,
    PerPhaseUCB,
    Policy,
    SequentialEliminationPolicy,
    StationaryUCB,
    TwoStagePolicy,
    count_same_phase,
    elimination_schedule,
    make_policy,
    nested_cb_decide,
    recommended_parameters,
    stage_one_schedule,
)
from .harness import (
    AggregateStats,
    bound_overlay,
    default_sweep_config,
    default_sweep_instance,
    loglog_slope,
    make_preset_instance,
    monte_carlo,
    regret_rate_envelope,
    report_from_dir,
    run_episode,
)
