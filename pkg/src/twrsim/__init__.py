"""Two-way-ranging timing simulation, variance models and response-delay optimization."""

from twrsim.errors import (
    DegenerateInterval,
    NoPositiveRoot,
    SingularInformation,
    ZeroMeasurements,
)
from twrsim.timebase import (
    SPEED_OF_LIGHT,
    ClockParams,
    NoiseModel,
    sample_noise,
    to_clock,
)
from twrsim.protocol import (
    Mode,
    Protocol,
    Scene,
    TimingConfig,
    TimestampSet,
    TofEstimate,
    estimate,
    estimate_ds,
    estimate_ss,
    simulate_transaction,
    simulate_transactions,
)
from twrsim.analytics import (
    CrlbResult,
    CrlbState,
    RelativeClock,
    brute_force_ds_variance,
    crlb,
    crlb_closed_form,
    ds_variance,
    ss_bias,
    ss_variance,
)
from twrsim.optimizer import (
    ObjectiveParams,
    OptimalDelay,
    grid_argmin_r_avg,
    optimality_cubic,
    r_avg,
    solve_optimal_delay,
)
from twrsim.harness import (
    SweepRow,
    TrialConfig,
    TrialResult,
    run_session,
    run_trial,
    ss_drift_experiment,
    sweep_dt53,
)

__version__ = "0.1.0"
