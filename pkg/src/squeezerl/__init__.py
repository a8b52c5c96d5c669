"""Reinforcement-learned control pulses for long-lived spin squeezing.

A small numpy/scipy stack for open collective-spin systems: Dicke-basis
operators, a Lindblad propagator for piecewise-constant one-axis-twisting
controls, squeezing and quantum Fisher information metrics, and a
from-scratch deep Q-learning agent that designs pulse schedules.
"""

from .spin_core import (
    SpinOperators,
    build_spin_operators,
    coherent_spin_state,
    css_state_vector,
    expectation,
    hermitize,
    purity,
)
from .dynamics import (
    IntegratorConfig,
    NoiseParams,
    PropagationError,
    build_hamiltonian,
    evolve_segment,
    lindblad_rhs,
    propagate_exact,
)
from .metrics import (
    MeanSpinFrame,
    SqueezingReport,
    averaged_qfi,
    husimi_grid,
    husimi_grid_axes,
    mean_spin_frame,
    qfi,
    squeezing_report,
    to_decibels,
    xi_perp_squared,
    xi_z_squared,
)
from .dqn import (
    AgentConfig,
    DqnAgent,
    OptimizerState,
    QNetworkParams,
    ReplayMemory,
    Transition,
    adamw_update,
    bellman_targets,
    checkpoint_from_bytes,
    checkpoint_to_bytes,
    huber_loss,
    init_qnetwork,
    qnet_forward,
    select_action,
)
from .env import (
    BestOfSummary,
    ControlSchedule,
    EnvState,
    ExperimentConfig,
    TrainingRecord,
    TrajectoryRecord,
    best_of,
    constant_schedule,
    env_reset,
    env_step,
    evaluate_schedule,
    is_divergent,
    observe,
    run_training,
    train_agent,
)

__version__ = "0.1.0"
