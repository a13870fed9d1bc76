"""PID tuning benchmark suite for the classic four-block automatic voltage regulator."""
from .lintf import (
    AvrParams,
    PidGains,
    Polynomial,
    StateSpaceModel,
    TransferFunction,
    avr_closed_loop,
    avr_pid_closed_loop,
    block_tf,
    loop_tf,
    pid_tf,
    poly_roots,
    tf_feedback,
    tf_series,
    tf_to_state_space,
)
from .metrics import (
    FrequencyMetrics,
    PoleZeroReport,
    TransientMetrics,
    frequency_metrics,
    pole_zero_report,
    transient_metrics,
)
from .objectives import ObjectiveSpec, ObjectiveValue, evaluate_gains, integral_index
from .sim import DisturbanceEvent, SimGrid, StepResponse, scenario_response, step_response
from .tuners import Bounds, OptimizerConfig, OptimizerResult, optimize, ultimate_gain, ziegler_nichols

__version__ = "0.1.0"
