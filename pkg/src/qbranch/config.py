"""Run configuration: a flat ``key = value`` file checked against a schema.

Every DQN and network hyperparameter defaults to the values the method was
published with; the remaining keys locate datasets and outputs.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .dqn import DQNConfig
from .graph_net import GraphNetConfig


class ConfigError(ValueError):
    pass


# fixed architectural choices: accepted in config files but only with these values
FIXED = {
    "grad_clip_norm": "l2",
    "optimizer": "adam",
    "activation": "relu",
    "edge_to_vertex_aggregator": "sum",
    "vertex_to_global_aggregator": "average",
    "edge_to_global_aggregator": "average",
    "normalization": "layer_norm",
    "core_hidden_layers": 1,
}


@dataclass
class RunConfig:
    # DQN
    batch_updates: int = 50_000
    learning_rate: float = 0.00002
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
    max_decisions_eval: int = 500
    step_penalty: float = -0.1
    # optimisation
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-08
    grad_clip: float = 1.0
    grad_clip_norm: str = "l2"
    eval_freq: int = 1000
    eval_cap: str = "unlimited"
    # graph network
    mp_iterations: int = 4
    core_hidden_layers: int = 1
    core_hidden_units: int = 64
    encoder_dim: int = 32
    core_vertex_dim: int = 64
    core_edge_dim: int = 64
    core_global_dim: int = 32
    decoder_dim: int = 32
    activation: str = "relu"
    edge_to_vertex_aggregator: str = "sum"
    vertex_to_global_aggregator: str = "average"
    edge_to_global_aggregator: str = "average"
    normalization: str = "layer_norm"
    # data and bookkeeping
    dataset_dir: str = ""
    train_dir: str = ""
    val_dir: str = ""
    test_dir: str = ""
    n_train: int = 800
    n_val: int = 100
    n_test: int = 100
    seed: int = 0
    output_dir: str = "runs/default"

    def __post_init__(self):
        for key, value in FIXED.items():
            if getattr(self, key) != value:
                raise ConfigError(f"{key} = {getattr(self, key)!r} is not supported (only {value!r})")
        parse_cap(self.eval_cap)

    def dqn_config(self) -> DQNConfig:
        net = GraphNetConfig(
            encoder_dim=self.encoder_dim, core_vertex=self.core_vertex_dim,
            core_edge=self.core_edge_dim, core_global=self.core_global_dim,
            core_hidden=self.core_hidden_units, decoder_dim=self.decoder_dim,
            iterations=self.mp_iterations)
        return DQNConfig(
            batch_updates=self.batch_updates, learning_rate=self.learning_rate,
            batch_size=self.batch_size, replay_size=self.replay_size, eps_start=self.eps_start,
            eps_end=self.eps_end, eps_decay_steps=self.eps_decay_steps,
            warmup_steps=self.warmup_steps, gamma=self.gamma, update_freq=self.update_freq,
            target_update_freq=self.target_update_freq,
            max_decisions_train=self.max_decisions_train, step_penalty=self.step_penalty,
            adam_betas=(self.adam_beta1, self.adam_beta2), adam_eps=self.adam_eps,
            grad_clip=self.grad_clip, eval_freq=self.eval_freq,
            eval_cap=parse_cap(self.eval_cap), network=net)


def parse_cap(text) -> int | None:
    if text is None or str(text).lower() in ("unlimited", "none", "inf"):
        return None
    try:
        cap = int(text)
    except ValueError:
        raise ConfigError(f"cap must be an integer or 'unlimited', got {text!r}") from None
    if cap < 0:
        raise ConfigError("cap must be non-negative")
    return cap


def _convert(key: str, typ: type, raw: str):
    try:
        if typ is bool:
            if raw.lower() not in ("true", "false"):
                raise ValueError
            return raw.lower() == "true"
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None
    return raw


def _types() -> dict[str, type]:
    return {f.name: {"int": int, "float": float, "str": str, "bool": bool}[f.type]
            for f in fields(RunConfig)}


def loads(text: str) -> RunConfig:
    types = _types()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, types[key], raw)
    return RunConfig(**values)


def dumps(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {repr(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def load(path: str | os.PathLike) -> RunConfig:
    return loads(Path(path).read_text())


def save(cfg: RunConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(dumps(cfg))
