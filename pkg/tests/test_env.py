import numpy as np
import pytest

from qbranch.cnf import CnfFormula, Literal, evaluate_assignment, generate_random_3sat
from qbranch.env import (
    AlreadyTerminal, EnvConfig, HybridTrace, SatEnv, greedy_action, solve_hybrid,
)
from qbranch.graph_net import init_params
from qbranch.solver import SolverConfig, SolverError, solve
from qbranch.state_graph import StateGraph


def test_config_validation():
    with pytest.raises(ValueError):
        EnvConfig(step_penalty=0.0)
    with pytest.raises(ValueError):
        EnvConfig(max_decisions=-1)


def test_two_clause_episode(two_clause):
    env = SatEnv()
    state = env.reset(two_clause)
    assert isinstance(state, StateGraph) and state.num_vertices == 5
    res = env.step((1, False))  # x1 false forces ~x2, then x3
    assert res.done and res.state is None and res.reward == 0.0
    assert res.info["verdict"].is_sat and res.info["decisions"] == 1
    assert env.episode_return == 0.0
    with pytest.raises(SolverError):
        env.step((2, True))


def test_nonterminal_step_reward_and_counting():
    f = CnfFormula(4, ((1, 2, 3), (-1, -2), (3, 4), (-3, -4, 2)))
    env = SatEnv()
    env.reset(f)
    res = env.step(Literal(1, False))   # x1: 1 propagation (~x2)
    assert not res.done and res.reward == -0.1
    assert res.info["propagations"] == 1 and res.info["assignments"] == 2
    assert env.episode_return == pytest.approx(-0.1)


def test_level_zero_formula_is_already_terminal():
    env = SatEnv()
    r = env.reset(CnfFormula(2, ((1,), (-1, 2))))
    assert isinstance(r, AlreadyTerminal) and r.verdict.is_sat
    r = env.reset(CnfFormula(1, ((1,), (-1,))))
    assert isinstance(r, AlreadyTerminal) and r.verdict.is_unsat


def test_truncation_at_decision_cap():
    env = SatEnv(EnvConfig(max_decisions=2))
    f = generate_random_3sat(40, 160, seed=2)
    s = env.reset(f)
    steps = 0
    while True:
        res = env.step((int(s.var_vertex_map[0]), False))
        steps += 1
        if res.done or res.truncated:
            break
        s = res.state
    assert res.truncated and not res.done and steps == 2
    assert res.state is not None
    assert env.episode_return == pytest.approx(-0.2)


def test_episode_return_is_exact_multiple_of_penalty():
    env = SatEnv()
    f = generate_random_3sat(30, 128, seed=5)
    s = env.reset(f)
    rewards = []
    rng = np.random.default_rng(0)
    while True:
        v = int(rng.choice(s.var_vertex_map))
        res = env.step((v, bool(rng.integers(2))))
        rewards.append(res.reward)
        if res.done:
            break
        s = res.state
    assert rewards[-1] == 0.0 and all(r == -0.1 for r in rewards[:-1])
    assert env.episode_return == (len(rewards) - 1) * -0.1


def test_greedy_action_annotated_q_and_ties():
    q = np.array([[42.0, 3.14], [1.62, 2.70], [6.02, 1.67]])
    assert greedy_action(q) == (0, 0)
    assert greedy_action(np.array([[1.0, 2.0], [2.0, 0.0]])) == (0, 1)
    with pytest.raises(ValueError):
        greedy_action(np.zeros((0, 2)))


def test_hybrid_cap_zero_equals_vsids():
    params = init_params(0)
    for seed in range(10):
        f = generate_random_3sat(25, 105, seed)
        for restarts in (False, True):
            cfg = SolverConfig(restarts=restarts, restart_unit=2)
            v0, s0 = solve(f, config=cfg)
            v1, s1, calls = solve_hybrid(f, params, 0, cfg)
            assert calls == 0 and v0 == v1 and s0 == s1


def test_hybrid_is_complete_and_traced():
    params = init_params(1)
    f = generate_random_3sat(20, 86, seed=3)
    trace = HybridTrace()
    v, stats, calls = solve_hybrid(f, params, None, trace=trace)
    assert v.status == solve(f)[0].status
    if v.is_sat:
        assert evaluate_assignment(f, v.assignment)
    assert calls == stats.decisions == len(trace.model_decisions) == len(trace.step_assignments)
    assert trace.total_time >= trace.propagation_time + trace.inference_time


def test_hybrid_cap_limits_model_calls():
    calls_seen = []

    def q_fn(params, graph):
        calls_seen.append(graph.num_vertices)
        return np.zeros((graph.num_var_vertices, 2))

    f = generate_random_3sat(30, 128, seed=8)
    _, stats, calls = solve_hybrid(f, None, 3, q_fn=q_fn)
    assert calls == len(calls_seen) == min(3, stats.decisions)
