"""Deep Q-learning built directly on numpy.

The value network is a small MLP (ReLU hidden layers, identity output) whose
forward pass, backward pass, Huber loss, and AdamW optimizer are written out
explicitly so every number in the update is inspectable and reproducible.
Checkpoints are canonical JSON: sorted keys, fixed separators, arrays as
nested lists, so saving the same agent twice yields identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters of the Q-learning agent."""

    gamma_q: float = 0.99
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    weight_decay: float = 1e-4
    huber_delta: float = 1.0
    grad_clip_norm: float = 10.0
    replay_capacity: int = 20000
    batch_size: int = 64
    warmup_transitions: int = 500
    target_sync_every: int = 100
    epsilon_start: float = 1.0
    epsilon_min: float = 0.05
    epsilon_decay: float = 0.99
    hidden_sizes: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not (0.0 <= self.gamma_q <= 1.0):
            raise ValueError(f"gamma_q must be in [0, 1], got {self.gamma_q}")
        for name in ("learning_rate", "huber_delta", "grad_clip_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("replay_capacity", "batch_size", "warmup_transitions",
                     "target_sync_every"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.batch_size > self.replay_capacity:
            raise ValueError("batch_size cannot exceed replay_capacity")
        if self.warmup_transitions < self.batch_size:
            raise ValueError("warmup_transitions must cover at least one batch")
        if not (0.0 <= self.epsilon_min <= self.epsilon_start <= 1.0):
            raise ValueError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if not (0.0 < self.epsilon_decay <= 1.0):
            raise ValueError("epsilon_decay must be in (0, 1]")
        if len(self.hidden_sizes) < 1 or any(int(h) < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be a non-empty tuple of positive ints")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))


def epsilon_for_epoch(cfg: AgentConfig, epoch: int) -> float:
    """Exploration schedule: epsilon_start * decay^epoch, floored at epsilon_min."""
    return max(cfg.epsilon_min, cfg.epsilon_start * cfg.epsilon_decay ** epoch)


@dataclass
class QNetworkParams:
    """Weights (in, out) and biases of the MLP, input layer first."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def d_obs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_actions(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    def copy(self) -> "QNetworkParams":
        return QNetworkParams([w.copy() for w in self.weights],
                              [b.copy() for b in self.biases])


def init_qnetwork(d_obs: int, n_actions: int, hidden_sizes: tuple[int, ...],
                  rng: np.random.Generator) -> QNetworkParams:
    """Uniform fan-in initialization: U(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
    sizes = [int(d_obs), *[int(h) for h in hidden_sizes], int(n_actions)]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return QNetworkParams(weights, biases)


def _forward_trace(params: QNetworkParams, x: np.ndarray):
    """Forward pass keeping pre/post activations for backprop."""
    pre, post = [], [x]
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        post.append(h)
    q = h @ params.weights[-1] + params.biases[-1]
    return q, pre, post


def qnet_forward(params: QNetworkParams, obs: np.ndarray) -> np.ndarray:
    """Q-values for one observation (d,) or a batch (B, d)."""
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    q, _, _ = _forward_trace(params, x[None, :] if single else x)
    return q[0] if single else q


def huber_loss(residual, delta: float = 1.0):
    """Elementwise Huber value: e^2/2 inside |e| <= delta, linear growth outside."""
    e = np.asarray(residual, dtype=np.float64)
    a = np.abs(e)
    out = np.where(a <= delta, 0.5 * e * e, delta * (a - 0.5 * delta))
    return float(out) if np.isscalar(residual) else out


def _huber_grad(residual: np.ndarray, delta: float) -> np.ndarray:
    return np.clip(residual, -delta, delta)


@dataclass
class OptimizerState:
    """AdamW first/second moments matching the parameter tree, plus step count."""

    m_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_weights: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0

    @staticmethod
    def zeros_like(params: QNetworkParams) -> "OptimizerState":
        return OptimizerState(
            m_weights=[np.zeros_like(w) for w in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_weights=[np.zeros_like(w) for w in params.weights],
            v_biases=[np.zeros_like(b) for b in params.biases],
        )


def adamw_update(params: QNetworkParams, grads: QNetworkParams,
                 state: OptimizerState, cfg: AgentConfig) -> None:
    """One AdamW step, in place. Weight decay is decoupled from the moments:

        theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for ws, gs, ms, vs in ((params.weights, grads.weights, state.m_weights, state.v_weights),
                           (params.biases, grads.biases, state.m_biases, state.v_biases)):
        for w, g, m, v in zip(ws, gs, ms, vs):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            w -= cfg.learning_rate * (m_hat / (np.sqrt(v_hat) + cfg.eps_opt)
                                      + cfg.weight_decay * w)


def select_action(params: QNetworkParams, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy action; greedy ties break to the lowest action index."""
    if rng.random() < epsilon:
        return int(rng.integers(params.n_actions))
    return int(np.argmax(qnet_forward(params, obs)))


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ReplayMemory:
    """Fixed-capacity ring buffer over preallocated arrays."""

    def __init__(self, capacity: int, d_obs: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._obs = np.zeros((capacity, d_obs))
        self._next_obs = np.zeros((capacity, d_obs))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._terminal = np.zeros(capacity)
        self._size = 0
        self._cursor = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        i = self._cursor
        self._obs[i] = t.obs
        self._next_obs[i] = t.next_obs
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._terminal[i] = 1.0 if t.terminal else 0.0
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform sample with replacement: (obs, actions, rewards, next_obs, terminal)."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay memory")
        idx = rng.integers(0, self._size, size=batch_size)
        return (self._obs[idx], self._actions[idx], self._rewards[idx],
                self._next_obs[idx], self._terminal[idx])


def bellman_targets(rewards: np.ndarray, next_obs: np.ndarray,
                    terminal: np.ndarray, target_params: QNetworkParams,
                    gamma_q: float) -> np.ndarray:
    """r + gamma * max_a' Q_target(s', a'), truncated to r on terminal steps."""
    next_q = qnet_forward(target_params, next_obs)
    return rewards + (1.0 - terminal) * gamma_q * next_q.max(axis=1)


class DqnAgent:
    """Online/target network pair with replay memory and AdamW training."""

    def __init__(self, cfg: AgentConfig, params: QNetworkParams,
                 target_params: QNetworkParams, opt: OptimizerState,
                 replay: ReplayMemory, train_steps: int = 0, epsilon: float | None = None):
        self.cfg = cfg
        self.params = params
        self.target_params = target_params
        self.opt = opt
        self.replay = replay
        self.train_steps = train_steps
        self.epsilon = cfg.epsilon_start if epsilon is None else epsilon

    @classmethod
    def fresh(cls, cfg: AgentConfig, d_obs: int, n_actions: int,
              rng: np.random.Generator) -> "DqnAgent":
        params = init_qnetwork(d_obs, n_actions, cfg.hidden_sizes, rng)
        return cls(cfg, params, params.copy(), OptimizerState.zeros_like(params),
                   ReplayMemory(cfg.replay_capacity, d_obs))

    def act(self, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        return select_action(self.params, obs, epsilon, rng)

    def remember(self, t: Transition) -> None:
        self.replay.push(t)

    def ready(self) -> bool:
        return len(self.replay) >= self.cfg.warmup_transitions

    def maybe_train(self, rng: np.random.Generator) -> float | None:
        if not self.ready():
            return None
        batch = self.replay.sample(self.cfg.batch_size, rng)
        return self.train_step(batch)

    def train_step(self, batch) -> float:
        """One gradient step on a replay batch; returns the mean Huber loss."""
        obs, actions, rewards, next_obs, terminal = batch
        cfg = self.cfg
        targets = bellman_targets(rewards, next_obs, terminal,
                                  self.target_params, cfg.gamma_q)

        q, pre, post = _forward_trace(self.params, obs)
        batch_size = obs.shape[0]
        taken = q[np.arange(batch_size), actions]
        residual = taken - targets
        loss = float(np.mean(huber_loss(residual, cfg.huber_delta)))

        # gradient of mean Huber loss, routed only through the taken actions
        dq = np.zeros_like(q)
        dq[np.arange(batch_size), actions] = _huber_grad(residual, cfg.huber_delta) / batch_size
        grads = self._backward(dq, pre, post)
        _clip_global_norm(grads, cfg.grad_clip_norm)
        adamw_update(self.params, grads, self.opt, cfg)

        self.train_steps += 1
        if self.train_steps % cfg.target_sync_every == 0:
            self.target_params = self.params.copy()
        return loss

    def _backward(self, dq: np.ndarray, pre: list[np.ndarray],
                  post: list[np.ndarray]) -> QNetworkParams:
        n_layers = len(self.params.weights)
        gw = [None] * n_layers
        gb = [None] * n_layers
        delta = dq
        for layer in range(n_layers - 1, -1, -1):
            gw[layer] = post[layer].T @ delta
            gb[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.params.weights[layer].T) * (pre[layer - 1] > 0.0)
        return QNetworkParams(gw, gb)


def _clip_global_norm(grads: QNetworkParams, max_norm: float) -> None:
    total = 0.0
    for g in (*grads.weights, *grads.biases):
        total += float(np.sum(g * g))
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in (*grads.weights, *grads.biases):
            g *= scale


# --- checkpoint serialization ------------------------------------------------

def _probe_obs(d_obs: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, d_obs)


def checkpoint_to_bytes(agent: DqnAgent) -> bytes:
    """Serialize an agent to canonical JSON bytes (replay contents excluded)."""
    p = agent.params
    probe = _probe_obs(p.d_obs)
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "d_obs": p.d_obs,
        "n_actions": p.n_actions,
        "hidden_sizes": list(p.hidden_sizes),
        "hyperparameters": {
            "gamma_q": agent.cfg.gamma_q,
            "learning_rate": agent.cfg.learning_rate,
            "beta1": agent.cfg.beta1,
            "beta2": agent.cfg.beta2,
            "eps_opt": agent.cfg.eps_opt,
            "weight_decay": agent.cfg.weight_decay,
            "huber_delta": agent.cfg.huber_delta,
            "grad_clip_norm": agent.cfg.grad_clip_norm,
            "replay_capacity": agent.cfg.replay_capacity,
            "batch_size": agent.cfg.batch_size,
            "warmup_transitions": agent.cfg.warmup_transitions,
            "target_sync_every": agent.cfg.target_sync_every,
            "epsilon_start": agent.cfg.epsilon_start,
            "epsilon_min": agent.cfg.epsilon_min,
            "epsilon_decay": agent.cfg.epsilon_decay,
            "hidden_sizes": list(agent.cfg.hidden_sizes),
        },
        "weights": [w.tolist() for w in p.weights],
        "biases": [b.tolist() for b in p.biases],
        "target_weights": [w.tolist() for w in agent.target_params.weights],
        "target_biases": [b.tolist() for b in agent.target_params.biases],
        "opt": {
            "m_weights": [a.tolist() for a in agent.opt.m_weights],
            "m_biases": [a.tolist() for a in agent.opt.m_biases],
            "v_weights": [a.tolist() for a in agent.opt.v_weights],
            "v_biases": [a.tolist() for a in agent.opt.v_biases],
            "step": agent.opt.step,
        },
        "train_steps": agent.train_steps,
        "epsilon": agent.epsilon,
        "probe": {
            "obs": probe.tolist(),
            "q_values": qnet_forward(p, probe).tolist(),
        },
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def _as_arrays(rows, template_shapes, what: str) -> list[np.ndarray]:
    arrays = [np.asarray(r, dtype=np.float64) for r in rows]
    shapes = [a.shape for a in arrays]
    if shapes != template_shapes:
        raise ValueError(f"checkpoint {what} shapes {shapes} do not match "
                         f"declared layout {template_shapes}")
    if any(not np.all(np.isfinite(a)) for a in arrays):
        raise ValueError(f"checkpoint {what} contain non-finite values")
    return arrays


def checkpoint_from_bytes(data: bytes) -> DqnAgent:
    """Reconstruct an agent from checkpoint bytes, validating version and shapes."""
    try:
        doc = json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("checkpoint root must be a JSON object")
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}, "
                         f"expected {CHECKPOINT_VERSION}")
    try:
        d_obs = int(doc["d_obs"])
        n_actions = int(doc["n_actions"])
        hidden = tuple(int(h) for h in doc["hidden_sizes"])
        hyper = dict(doc["hyperparameters"])
        hyper["hidden_sizes"] = tuple(hyper.get("hidden_sizes", hidden))
        cfg = AgentConfig(**hyper)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"checkpoint is missing or has malformed fields: {exc}") from exc
    if cfg.hidden_sizes != hidden:
        raise ValueError("checkpoint hidden_sizes disagree between layout and hyperparameters")

    sizes = [d_obs, *hidden, n_actions]
    w_shapes = [(a, b) for a, b in zip(sizes[:-1], sizes[1:])]
    b_shapes = [(b,) for b in sizes[1:]]
    try:
        params = QNetworkParams(_as_arrays(doc["weights"], w_shapes, "weights"),
                                _as_arrays(doc["biases"], b_shapes, "biases"))
        target = QNetworkParams(_as_arrays(doc["target_weights"], w_shapes, "target weights"),
                                _as_arrays(doc["target_biases"], b_shapes, "target biases"))
        opt_doc = doc["opt"]
        opt = OptimizerState(
            m_weights=_as_arrays(opt_doc["m_weights"], w_shapes, "optimizer m"),
            m_biases=_as_arrays(opt_doc["m_biases"], b_shapes, "optimizer m"),
            v_weights=_as_arrays(opt_doc["v_weights"], w_shapes, "optimizer v"),
            v_biases=_as_arrays(opt_doc["v_biases"], b_shapes, "optimizer v"),
            step=int(opt_doc["step"]),
        )
        agent = DqnAgent(cfg, params, target, opt,
                         ReplayMemory(cfg.replay_capacity, d_obs),
                         train_steps=int(doc["train_steps"]),
                         epsilon=float(doc["epsilon"]))
    except KeyError as exc:
        raise ValueError(f"checkpoint is missing field {exc}") from exc
    return agent
