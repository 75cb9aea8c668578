import pytest

from qbranch import config as run_config
from qbranch.config import ConfigError, RunConfig, dumps, loads

GOLDEN = {
    "batch_updates": 50_000, "learning_rate": 0.00002, "batch_size": 64, "replay_size": 20_000,
    "eps_start": 1.0, "eps_end": 0.01, "eps_decay_steps": 30_000, "warmup_steps": 5000,
    "gamma": 0.99, "update_freq": 4, "target_update_freq": 10, "max_decisions_train": 500,
    "max_decisions_eval": 500, "step_penalty": -0.1, "optimizer": "adam", "adam_beta1": 0.9,
    "adam_beta2": 0.999, "adam_eps": 1e-08, "grad_clip": 1.0, "grad_clip_norm": "l2",
    "eval_freq": 1000, "mp_iterations": 4, "core_hidden_layers": 1, "core_hidden_units": 64,
    "encoder_dim": 32, "core_vertex_dim": 64, "core_edge_dim": 64, "core_global_dim": 32,
    "decoder_dim": 32, "activation": "relu", "edge_to_vertex_aggregator": "sum",
    "vertex_to_global_aggregator": "average", "edge_to_global_aggregator": "average",
    "normalization": "layer_norm", "n_train": 800, "n_val": 100, "n_test": 100,
}


def test_defaults_match_golden_table():
    cfg = RunConfig()
    for key, value in GOLDEN.items():
        assert getattr(cfg, key) == value, key


def test_defaults_flow_into_training_config():
    d = RunConfig().dqn_config()
    assert d.learning_rate == 2e-5 and d.batch_size == 64 and d.eval_cap is None
    assert d.network.core_hidden == 64 and d.network.iterations == 4


def test_roundtrip(tmp_path):
    cfg = RunConfig(learning_rate=1.5e-4, seed=7, dataset_dir="data/x", eval_cap="10")
    assert loads(dumps(cfg)) == cfg
    path = tmp_path / "run.cfg"
    run_config.save(cfg, path)
    assert run_config.load(path) == cfg


def test_comments_and_partial_files():
    cfg = loads("# toy run\nbatch_updates = 20  # short\n\nseed=3\n")
    assert cfg.batch_updates == 20 and cfg.seed == 3 and cfg.batch_size == 64


@pytest.mark.parametrize("text", [
    "no_such_key = 1\n",
    "batch_size = 1\nbatch_size = 2\n",
    "batch_size = many\n",
    "just a line\n",
    "activation = tanh\n",
    "eval_cap = -3\n",
])
def test_rejected_files(text):
    with pytest.raises(ConfigError):
        loads(text)


def test_parse_cap():
    assert run_config.parse_cap("unlimited") is None
    assert run_config.parse_cap("10") == 10
    with pytest.raises(ConfigError):
        run_config.parse_cap("ten")
