"""Pulse-design environment and training loop.

One episode = one experiment: start from the coherent spin state along +x,
apply n_segments piecewise-constant control amplitudes chosen by the agent,
one per segment of duration t_final/n_segments. The observation is the
normalized first and second moments of the collective spin plus the segment
clock; the reward is +10 whenever the inverse squeezing parameter 1/xi_z^2
did not decrease over the segment and -1 otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dqn import AgentConfig, DqnAgent, Transition, epsilon_for_epoch
from .dynamics import (
    IntegratorConfig,
    NoiseParams,
    PropagationError,
    _SegmentStepper,
    _finalize,
    evolve_segment,
)
from .metrics import (
    MEAN_SPIN_TOL,
    averaged_qfi,
    squeezing_report,
    to_decibels,
)
from .spin_core import SpinOperators, build_spin_operators, coherent_spin_state, purity

D_OBS = 10  # 3 means + 3 second moments + 3 anticommutators + segment clock

REWARD_IMPROVE = 10.0
REWARD_PENALTY = -1.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one training experiment."""

    n_atoms: int = 20
    t_final: float = 2.0
    n_segments: int = 100
    action_set: tuple[float, ...] = (2.0, 0.0, -2.0)
    noise: NoiseParams = field(default_factory=lambda: NoiseParams(
        gamma=0.001, gamma_z=0.001, n_th=0.0))
    n_epochs: int = 600
    master_seed: int = 0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        if not isinstance(self.n_atoms, (int, np.integer)) or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not (isinstance(self.t_final, (int, float)) and math.isfinite(self.t_final)
                and self.t_final > 0):
            raise ValueError(f"t_final must be a positive number, got {self.t_final!r}")
        if not isinstance(self.n_segments, (int, np.integer)) or self.n_segments < 1:
            raise ValueError(f"n_segments must be a positive integer, got {self.n_segments!r}")
        if not isinstance(self.n_epochs, (int, np.integer)) or self.n_epochs < 1:
            raise ValueError(f"n_epochs must be a positive integer, got {self.n_epochs!r}")
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise ValueError(f"master_seed must be a non-negative integer, "
                             f"got {self.master_seed!r}")
        acts = tuple(float(a) for a in self.action_set)
        if len(acts) == 0:
            raise ValueError("action_set must not be empty")
        if any(not math.isfinite(a) for a in acts):
            raise ValueError(f"action_set must be finite, got {acts}")
        if len(set(acts)) != len(acts):
            raise ValueError(f"action_set must not contain duplicates, got {acts}")
        object.__setattr__(self, "action_set", acts)

    @property
    def segment_duration(self) -> float:
        return self.t_final / self.n_segments

    @property
    def n_actions(self) -> int:
        return len(self.action_set)


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control amplitudes, one per segment."""

    amplitudes: tuple[float, ...]
    segment_duration: float

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        if len(amps) == 0:
            raise ValueError("schedule must contain at least one segment")
        if any(not math.isfinite(a) for a in amps):
            raise ValueError("schedule amplitudes must be finite")
        if not (math.isfinite(self.segment_duration) and self.segment_duration > 0):
            raise ValueError(
                f"segment_duration must be positive, got {self.segment_duration!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_segments(self) -> int:
        return len(self.amplitudes)

    @property
    def t_final(self) -> float:
        return self.n_segments * self.segment_duration

    def times(self) -> np.ndarray:
        """Sample times including t = 0: shape (n_segments + 1,)."""
        return np.arange(self.n_segments + 1) * self.segment_duration


def constant_schedule(config: ExperimentConfig, amplitude: float) -> ControlSchedule:
    """The constant-control benchmark: the same amplitude in every segment."""
    return ControlSchedule(amplitudes=(float(amplitude),) * config.n_segments,
                           segment_duration=config.segment_duration)


@dataclass(frozen=True)
class EnvState:
    """Environment state: density matrix plus the segment clock."""

    rho: np.ndarray
    segment_index: int
    inverse_xi_prev: float


class _EnvSession:
    """Per-config caches: operators, one stepper per action, observable stack."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.ops = build_spin_operators(config.n_atoms)
        ops = self.ops
        self.substeps = config.integrator.substeps_for(config.segment_duration)
        self.steppers = [_SegmentStepper(ops, config.noise, a) for a in config.action_set]
        jx, jy, jz = ops.jx, ops.jy, ops.jz
        stack = np.stack([
            jx, jy, jz,
            jx @ jx, jy @ jy, jz @ jz,
            jx @ jy + jy @ jx, jy @ jz + jz @ jy, jz @ jx + jx @ jz,
        ])
        self._stack_flat = stack.reshape(9, -1).copy()
        self.rho0 = coherent_spin_state(config.n_atoms, math.pi / 2.0, 0.0)
        self.xi0 = self.xi_z_from_moments(self.moments(self.rho0))
        self.qfi0 = averaged_qfi(self.rho0, ops)
        self.purity0 = purity(self.rho0)

    def moments(self, rho: np.ndarray) -> np.ndarray:
        """The nine spin moments [means, squares, anticommutators], unnormalized."""
        return (self._stack_flat @ rho.T.reshape(-1)).real

    def observation(self, moments: np.ndarray, segment_index: int) -> np.ndarray:
        j = self.config.n_atoms / 2.0
        obs = np.empty(D_OBS)
        obs[0:3] = moments[0:3] / j
        obs[3:6] = moments[3:6] / (j * j)
        obs[6:9] = moments[6:9] / (2.0 * j * j)
        obs[9] = segment_index / self.config.n_segments
        return obs

    def xi_z_from_moments(self, m: np.ndarray) -> float:
        norm_sq = m[0] * m[0] + m[1] * m[1] + m[2] * m[2]
        if not np.all(np.isfinite(m)) or norm_sq < MEAN_SPIN_TOL ** 2:
            raise PropagationError("mean spin degenerate or non-finite moments")
        var = m[5] - m[2] * m[2]
        return self.config.n_atoms * var / norm_sq


@lru_cache(maxsize=8)
def _session_for(config: ExperimentConfig) -> _EnvSession:
    return _EnvSession(config)


def observe(rho: np.ndarray, segment_index: int,
            config: ExperimentConfig) -> np.ndarray:
    """Observation vector the agent sees: normalized moments plus clock."""
    session = _session_for(config)
    return session.observation(session.moments(rho), segment_index)


def env_reset(config: ExperimentConfig) -> tuple[EnvState, np.ndarray]:
    """Fresh episode at the +x coherent spin state; returns (state, observation)."""
    session = _session_for(config)
    m = session.moments(session.rho0)
    state = EnvState(rho=session.rho0.copy(), segment_index=0,
                     inverse_xi_prev=1.0 / session.xi_z_from_moments(m))
    return state, session.observation(m, 0)


def env_step(state: EnvState, action_index: int,
             config: ExperimentConfig) -> tuple[EnvState, np.ndarray, float, bool]:
    """Apply one control segment.

    Returns (next_state, next_observation, reward, done). A numerically
    divergent segment (non-finite state or degenerate mean spin) terminates
    the episode with the penalty reward and a NaN-filled state; use
    `is_divergent` on the returned state to tell the two done cases apart.
    """
    session = _session_for(config)
    if not 0 <= action_index < config.n_actions:
        raise ValueError(f"action_index {action_index} outside "
                         f"[0, {config.n_actions})")
    k = state.segment_index
    if k >= config.n_segments:
        raise ValueError("episode is already complete")
    try:
        rho = session.steppers[action_index].evolve(
            state.rho, config.segment_duration, session.substeps)
        rho = _finalize(rho, f"segment {k}")
        m = session.moments(rho)
        xi = session.xi_z_from_moments(m)
    except PropagationError:
        next_state = EnvState(rho=np.full_like(state.rho, np.nan),
                              segment_index=k + 1,
                              inverse_xi_prev=math.nan)
        return next_state, np.full(D_OBS, np.nan), REWARD_PENALTY, True

    inverse_xi = 1.0 / xi if xi > 0 else math.inf
    delta = inverse_xi - state.inverse_xi_prev
    reward = REWARD_IMPROVE if delta >= 0 else REWARD_PENALTY
    next_state = EnvState(rho=rho, segment_index=k + 1, inverse_xi_prev=inverse_xi)
    done = (k + 1 == config.n_segments)
    return next_state, session.observation(m, k + 1), reward, done


def is_divergent(state: EnvState) -> bool:
    """True when the state marks a numerically failed episode."""
    return math.isnan(state.inverse_xi_prev)


@dataclass(frozen=True)
class TrainingRecord:
    """Everything retained from one training epoch."""

    epoch: int
    schedule: ControlSchedule
    xi_z_sq: np.ndarray      # n_segments + 1 samples, nan after divergence
    avg_qfi: np.ndarray
    purity: np.ndarray
    total_reward: float
    epsilon: float
    divergent: bool
    failed_segment: int | None
    seed: int
    config: ExperimentConfig


def train_agent(config: ExperimentConfig,
                progress=None) -> tuple[list[TrainingRecord], DqnAgent]:
    """Run the full training experiment; the agent persists across epochs.

    One RNG stream seeded by config.master_seed drives network init,
    exploration, and replay sampling, so runs are bit-reproducible.
    `progress(epoch, record)` is called after each epoch when given.
    """
    session = _session_for(config)
    ops = session.ops
    rng = np.random.default_rng(config.master_seed)
    agent = DqnAgent.fresh(config.agent, D_OBS, config.n_actions, rng)
    n_seg = config.n_segments
    records: list[TrainingRecord] = []

    for epoch in range(config.n_epochs):
        eps = epsilon_for_epoch(config.agent, epoch)
        agent.epsilon = eps
        state, obs = env_reset(config)
        xi = np.full(n_seg + 1, np.nan)
        fisher = np.full(n_seg + 1, np.nan)
        pur = np.full(n_seg + 1, np.nan)
        xi[0], fisher[0], pur[0] = session.xi0, session.qfi0, session.purity0
        action_indices: list[int] = []
        total_reward = 0.0
        divergent = False
        failed_segment: int | None = None

        for seg in range(n_seg):
            a = agent.act(obs, eps, rng)
            action_indices.append(a)
            next_state, next_obs, reward, done = env_step(state, a, config)
            agent.remember(Transition(obs, a, reward, next_obs, done))
            agent.maybe_train(rng)
            total_reward += reward
            if is_divergent(next_state):
                divergent = True
                failed_segment = seg
                break
            xi[seg + 1] = 1.0 / next_state.inverse_xi_prev
            pur[seg + 1] = purity(next_state.rho)
            fisher[seg + 1] = averaged_qfi(next_state.rho, ops)
            state, obs = next_state, next_obs

        schedule = ControlSchedule(
            amplitudes=tuple(config.action_set[a] for a in action_indices),
            segment_duration=config.segment_duration)
        record = TrainingRecord(
            epoch=epoch, schedule=schedule, xi_z_sq=xi, avg_qfi=fisher,
            purity=pur, total_reward=total_reward, epsilon=eps,
            divergent=divergent, failed_segment=failed_segment,
            seed=config.master_seed, config=config)
        records.append(record)
        if progress is not None:
            progress(epoch, record)
    return records, agent


def run_training(config: ExperimentConfig, progress=None) -> list[TrainingRecord]:
    """Train and return the per-epoch records; see `train_agent` for the agent."""
    records, _ = train_agent(config, progress=progress)
    return records


@dataclass(frozen=True)
class TrajectoryRecord:
    """Metrics along one replayed schedule."""

    schedule: ControlSchedule
    times: np.ndarray
    xi_z_sq: np.ndarray
    xi_z_db: np.ndarray
    xi_perp_sq: np.ndarray
    varphi: np.ndarray
    avg_qfi: np.ndarray
    purity: np.ndarray
    states: list[np.ndarray] | None = None


def evaluate_schedule(config: ExperimentConfig, schedule: ControlSchedule,
                      keep_states: bool = False) -> TrajectoryRecord:
    """Replay a schedule without any agent and record metrics at every boundary.

    Propagation failure raises PropagationError carrying the failing segment
    index. With keep_states=True the density matrix at every sample time is
    retained (for phase-space snapshots).
    """
    ops = build_spin_operators(config.n_atoms)
    n = schedule.n_segments
    rho = coherent_spin_state(config.n_atoms, math.pi / 2.0, 0.0)
    xi_z = np.empty(n + 1)
    xi_p = np.empty(n + 1)
    varphi = np.empty(n + 1)
    fisher = np.empty(n + 1)
    pur = np.empty(n + 1)
    states = [rho.copy()] if keep_states else None

    def measure(idx: int, state: np.ndarray) -> None:
        rep = squeezing_report(state, ops)
        xi_z[idx], xi_p[idx], varphi[idx] = rep.xi_z_sq, rep.xi_perp_sq, rep.varphi
        fisher[idx] = averaged_qfi(state, ops)
        pur[idx] = purity(state)

    try:
        measure(0, rho)
    except ValueError as exc:
        raise PropagationError(f"initial state metrics undefined: {exc}",
                               segment_index=0) from exc
    for seg, amplitude in enumerate(schedule.amplitudes):
        try:
            rho = evolve_segment(rho, amplitude, schedule.segment_duration,
                                 ops, config.noise, config.integrator)
            measure(seg + 1, rho)
        except (PropagationError, ValueError) as exc:
            raise PropagationError(
                f"propagation diverged in segment {seg}: {exc}",
                segment_index=seg) from exc
        if keep_states:
            states.append(rho.copy())

    return TrajectoryRecord(
        schedule=schedule, times=schedule.times(), xi_z_sq=xi_z,
        xi_z_db=to_decibels(xi_z), xi_perp_sq=xi_p, varphi=varphi,
        avg_qfi=fisher, purity=pur, states=states)


@dataclass(frozen=True)
class BestOfSummary:
    """Which epoch won and what it achieved."""

    epoch: int
    final_xi_z_sq: float
    final_xi_z_db: float
    total_reward: float
    epsilon: float
    n_divergent_epochs: int


def best_of(records: list[TrainingRecord]) -> tuple[ControlSchedule, BestOfSummary]:
    """Schedule with the smallest final xi_z^2; ties go to the earliest epoch.

    Divergent epochs rank as +inf and can never win unless every epoch
    diverged, in which case a ValueError is raised.
    """
    if not records:
        raise ValueError("best_of requires at least one record")
    finals = np.array([
        math.inf if (r.divergent or not math.isfinite(r.xi_z_sq[-1]))
        else float(r.xi_z_sq[-1])
        for r in records])
    idx = int(np.argmin(finals))
    if not math.isfinite(finals[idx]):
        raise ValueError("every epoch diverged; no usable schedule")
    best = records[idx]
    summary = BestOfSummary(
        epoch=best.epoch,
        final_xi_z_sq=float(best.xi_z_sq[-1]),
        final_xi_z_db=float(to_decibels(best.xi_z_sq[-1])),
        total_reward=best.total_reward,
        epsilon=best.epsilon,
        n_divergent_epochs=int(sum(r.divergent for r in records)),
    )
    return best.schedule, summary
