"""Cluster synchronization of delayed coupled neural networks.

Simulation under pinning impulsive and finite-time hybrid control, plus
mechanical checks of the associated sufficient synchronization criteria.
"""

from __future__ import annotations

from .controllers import (
    HybridConfig,
    PinningImpulsiveConfig,
    hybrid_control_input,
    hybrid_control_inputs,
    impulsive_control_jump,
    psi,
    psi_flow,
    select_pinned_nodes,
    signed_power,
)
from .criteria import (
    CriteriaReport,
    Theorem1Params,
    Theorem2Params,
    check_theorem1,
    check_theorem2,
    compute_mu_upsilon,
    eta_k,
    lyapunov_V1,
    lyapunov_V2,
    power_mean_check,
    quadratic_bound_check,
    settling_time,
)
from .engine import (
    HistoryBuffer,
    ImpulseSchedule,
    IntegratorConfig,
    Trajectory,
    apply_impulse_event,
    rk4_step,
    running_integral,
    sample_history,
)
from .errors import *  # noqa: F401,F403
from .experiment import (
    PRESETS,
    ExperimentConfig,
    RunSummary,
    detect_settling,
    export_csv,
    load_config,
    run_case,
    write_config,
)
from .network import (
    ActivationSpec,
    ClusterParams,
    ClusterPartition,
    DelayEvaluator,
    NetworkSpec,
    ValidatedNetwork,
    cluster_of,
    validate_network,
)
from .simulation import InitialCondition, integrate

__version__ = "0.1.0"
