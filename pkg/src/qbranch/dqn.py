"""Deep Q-learning for the branching policy.

Single-threaded by design: every random draw comes from one of four
generators (exploration, replay sampling, problem sampling, initialisation)
spawned from the master seed, so a run is reproducible bit for bit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cnf import CnfFormula
from .env import AlreadyTerminal, EnvConfig, SatEnv, greedy_action
from .graph_net import GraphNetConfig, GraphNetParams, backward, forward, init_params, q_values
from .solver import SolverConfig
from .state_graph import StateGraph, decode_action

log = logging.getLogger(__name__)


@dataclass
class DQNConfig:
    batch_updates: int = 50_000
    learning_rate: float = 2e-5
    batch_size: int = 64
    replay_size: int = 20_000
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay_steps: int = 30_000
    warmup_steps: int = 5000
    gamma: float = 0.99
    update_freq: int = 4
    target_update_freq: int = 10
    max_decisions_train: int = 500
    step_penalty: float = -0.1
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    grad_clip: float = 1.0
    eval_freq: int = 1000
    eval_cap: int | None = None
    max_nonfinite_streak: int = 5
    network: GraphNetConfig = field(default_factory=GraphNetConfig)


@dataclass
class Transition:
    state: StateGraph
    vertex: int
    column: int
    reward: float
    next_state: StateGraph | None
    done: bool
    truncated: bool = False

    def __post_init__(self):
        if self.done and self.next_state is not None:
            raise ValueError("terminal transitions carry no next state")
        if not self.done and self.next_state is None:
            raise ValueError("non-terminal transitions need a next state")

    @property
    def action(self) -> tuple[int, bool]:
        lit = decode_action(self.state, self.vertex, self.column)
        return lit.variable, not lit.negated


class ReplayBuffer:
    """Fixed-capacity ring buffer; uniform sampling with replacement."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.items: list[Transition] = []
        self.pos = 0

    def __len__(self):
        return len(self.items)

    def add(self, t: Transition) -> None:
        if len(self.items) < self.capacity:
            self.items.append(t)
        else:
            self.items[self.pos] = t
        self.pos = (self.pos + 1) % self.capacity

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.integers(0, len(self.items), size=n)
        return [self.items[i] for i in idx]


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.01
    decay_steps: int = 30_000

    def __call__(self, t: int) -> float:
        if self.decay_steps <= 0 or t >= self.decay_steps:
            return self.end
        return max(self.end, self.start - (self.start - self.end) * t / self.decay_steps)


class Adam:
    """Adam with bias correction (the common deep-learning formulation)."""

    def __init__(self, params: GraphNetParams, lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: GraphNetParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        c1 = 1.0 - self.b1 ** self.step_count
        c2 = 1.0 - self.b2 ** self.step_count
        for k, p in params.arrays.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class NonFiniteGradient(FloatingPointError):
    pass


class TrainingAborted(RuntimeError):
    pass


def select_action(params: GraphNetParams, graph: StateGraph, epsilon: float,
                  rng: np.random.Generator, q: np.ndarray | None = None) -> tuple[int, int]:
    """Epsilon-greedy (vertex, column).  ``q`` overrides the network output."""
    n = graph.num_var_vertices
    if n == 0:
        raise ValueError("graph has no variable vertices")
    if rng.random() < epsilon:
        a = int(rng.integers(0, 2 * n))
        return a // 2, a % 2
    if q is None:
        q = q_values(params, graph)
    return greedy_action(q)


def td_targets(target: GraphNetParams, batch: Sequence[Transition], gamma: float) -> np.ndarray:
    y = np.empty(len(batch))
    for i, t in enumerate(batch):
        y[i] = t.reward if t.done else t.reward + gamma * float(np.max(q_values(target, t.next_state)))
    return y


def td_loss(online: GraphNetParams, target: GraphNetParams, batch: Sequence[Transition],
            gamma: float) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared TD error over the batch and its gradient w.r.t. the online net.

    Targets are constants: they use the target network and bootstrap unless
    the transition is terminal (truncated transitions do bootstrap).
    """
    if not batch:
        raise ValueError("empty batch")
    y = td_targets(target, batch, gamma)
    grads = {k: np.zeros_like(v) for k, v in online.items()}
    total = 0.0
    B = len(batch)
    for t, yi in zip(batch, y):
        q, tape = forward(online, t.state)
        err = q[t.vertex, t.column] - yi
        total += err * err
        dq = np.zeros_like(q)
        dq[t.vertex, t.column] = 2.0 * err / B
        backward(online, tape, dq, grads)
    return total / B, grads


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``; returns the scale."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
        return scale
    return 1.0


@dataclass
class TrainerState:
    config: DQNConfig
    online: GraphNetParams
    target: GraphNetParams
    optimizer: Adam
    buffer: ReplayBuffer
    schedule: EpsilonSchedule
    rngs: dict[str, np.random.Generator]
    env_steps: int = 0
    batch_updates: int = 0
    episodes: int = 0
    best_params: GraphNetParams | None = None
    best_mrir: float = -math.inf
    best_at: int = -1
    last_eval_at: int = -1
    last_loss: float | None = None
    target_syncs: list[int] = field(default_factory=list)  # batch_updates at each sync


def make_rngs(seed: int) -> dict[str, np.random.Generator]:
    roles = ("explore", "buffer", "problem", "init")
    seqs = np.random.SeedSequence(seed).spawn(len(roles))
    return {r: np.random.default_rng(s) for r, s in zip(roles, seqs)}


def new_trainer(config: DQNConfig, seed: int) -> TrainerState:
    rngs = make_rngs(seed)
    init_seed = int(rngs["init"].integers(0, 2**63 - 1))
    online = init_params(init_seed, config.network)
    return TrainerState(
        config=config, online=online, target=online.copy(),
        optimizer=Adam(online, config.learning_rate, config.adam_betas, config.adam_eps),
        buffer=ReplayBuffer(config.replay_size),
        schedule=EpsilonSchedule(config.eps_start, config.eps_end, config.eps_decay_steps),
        rngs=rngs)


def apply_update(trainer: TrainerState, grads: dict[str, np.ndarray]) -> None:
    """Clip, take one Adam step, and sync the target network on schedule."""
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NonFiniteGradient(f"non-finite gradients in {bad} at update {trainer.batch_updates}")
    clip_by_global_norm(grads, trainer.config.grad_clip)
    trainer.optimizer.step(trainer.online, grads)
    trainer.batch_updates += 1
    if trainer.batch_updates % trainer.config.target_update_freq == 0:
        trainer.target = trainer.online.copy()
        trainer.target_syncs.append(trainer.batch_updates)


@dataclass
class TrainResult:
    best_params: GraphNetParams
    last_params: GraphNetParams
    log: list[dict]
    best_validation_mrir: float | None
    best_at: int
    trainer: TrainerState


Validator = Callable[[GraphNetParams], float]


def default_validator(val_set: Sequence[CnfFormula], config: DQNConfig,
                      solver: SolverConfig | None = None) -> Validator:
    from .evaluation import BaselineCache, compute_mrir, evaluate_problems

    cache = BaselineCache(val_set, solver)

    def validate(params: GraphNetParams) -> float:
        results = evaluate_problems(params, val_set, cap=config.eval_cap, baselines=cache, solver=solver)
        return compute_mrir(results).median

    return validate


def train(train_set: Sequence[CnfFormula], val_set: Sequence[CnfFormula], config: DQNConfig,
          seed: int = 0, validator: Validator | None = None, resume: TrainerState | None = None,
          on_record: Callable[[dict], None] | None = None,
          solver: SolverConfig | None = None) -> TrainResult:
    """Epsilon-greedy episodes on uniformly sampled training problems.

    After the warm-up, one batch update every ``update_freq`` environment
    steps; every ``eval_freq`` updates (and at the end of the budget) the
    online net is scored on the validation set and the best scoring snapshot
    is returned.
    """
    if not train_set:
        raise ValueError("empty training set")
    if not val_set:
        raise ValueError("empty validation set")
    tr = resume if resume is not None else new_trainer(config, seed)
    cfg = tr.config
    if validator is None:
        validator = default_validator(val_set, cfg, solver)
    env = SatEnv(EnvConfig(cfg.step_penalty, cfg.max_decisions_train, solver or SolverConfig()))
    records: list[dict] = []

    def emit(rec: dict) -> None:
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    def evaluate_now() -> None:
        score = float(validator(tr.online))
        tr.last_eval_at = tr.batch_updates
        if score > tr.best_mrir:
            tr.best_mrir, tr.best_at = score, tr.batch_updates
            tr.best_params = tr.online.copy()
        emit({"event": "validation", "env_steps": tr.env_steps, "batch_updates": tr.batch_updates,
              "loss": tr.last_loss, "epsilon": tr.schedule(tr.env_steps), "episode_return": None,
              "validation_mrir": score})

    emit({"event": "start", "env_steps": tr.env_steps, "batch_updates": tr.batch_updates,
          "loss": None, "epsilon": tr.schedule(tr.env_steps), "episode_return": None})
    nonfinite = 0
    while tr.batch_updates < cfg.batch_updates:
        problem = train_set[int(tr.rngs["problem"].integers(0, len(train_set)))]
        s = env.reset(problem)
        if isinstance(s, AlreadyTerminal):
            continue
        losses = []
        while True:
            eps = tr.schedule(tr.env_steps)
            vertex, column = select_action(tr.online, s, eps, tr.rngs["explore"])
            res = env.step(decode_action(s, vertex, column))
            tr.env_steps += 1
            tr.buffer.add(Transition(s, vertex, column, res.reward, res.state, res.done, res.truncated))
            since = tr.env_steps - cfg.warmup_steps
            if since > 0 and since % cfg.update_freq == 0 and len(tr.buffer) >= cfg.batch_size:
                batch = tr.buffer.sample(cfg.batch_size, tr.rngs["buffer"])
                loss, grads = td_loss(tr.online, tr.target, batch, cfg.gamma)
                try:
                    if not math.isfinite(loss):
                        raise NonFiniteGradient(f"non-finite loss {loss} at update {tr.batch_updates}")
                    apply_update(tr, grads)
                    nonfinite = 0
                    tr.last_loss = float(loss)
                    losses.append(float(loss))
                except NonFiniteGradient as exc:
                    nonfinite += 1
                    log.warning("skipped update: %s", exc)
                    emit({"event": "nonfinite", "env_steps": tr.env_steps,
                          "batch_updates": tr.batch_updates, "loss": None,
                          "epsilon": eps, "episode_return": None, "message": str(exc)})
                    if nonfinite >= cfg.max_nonfinite_streak:
                        raise TrainingAborted(f"{nonfinite} consecutive non-finite updates") from exc
                else:
                    if tr.batch_updates % cfg.eval_freq == 0:
                        evaluate_now()
                    if tr.batch_updates >= cfg.batch_updates:
                        break
            if res.done or res.truncated:
                break
            s = res.state
        tr.episodes += 1
        emit({"event": "episode", "env_steps": tr.env_steps, "batch_updates": tr.batch_updates,
              "loss": float(np.mean(losses)) if losses else None,
              "epsilon": tr.schedule(tr.env_steps), "episode_return": env.episode_return})
    if cfg.batch_updates > 0 and tr.last_eval_at != tr.batch_updates:
        evaluate_now()
    best = tr.best_params if tr.best_params is not None else tr.online.copy()
    best_mrir = tr.best_mrir if math.isfinite(tr.best_mrir) else None
    return TrainResult(best, tr.online.copy(), records, best_mrir, tr.best_at, tr)
