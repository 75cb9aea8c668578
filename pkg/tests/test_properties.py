"""Property-based checks over randomly generated formulas and graphs."""
import numpy as np
from hypothesis import given, settings, strategies as st

from qbranch.cnf import CnfFormula, brute_force_solve, evaluate_assignment, parse_dimacs, serialize_dimacs
from qbranch.graph_net import init_params, q_values
from qbranch.solver import SolverConfig, SolverCore, run_to_completion
from qbranch.state_graph import build_state_graph, check_graph_invariants

from conftest import naive_is_sat


@st.composite
def formulas(draw, max_vars=8, max_clauses=30):
    n = draw(st.integers(1, max_vars))
    lit = st.integers(1, n).flatmap(lambda v: st.sampled_from([v, -v]))
    clauses = draw(st.lists(st.lists(lit, min_size=1, max_size=4), max_size=max_clauses))
    return CnfFormula.from_clauses(clauses, num_vars=n)


@settings(max_examples=200, deadline=None)
@given(formulas(), st.booleans())
def test_solver_agrees_with_brute_force(f, restarts):
    core = SolverCore(f, SolverConfig(restarts=restarts, restart_unit=1))
    verdict = run_to_completion(core)
    assert verdict.is_sat == brute_force_solve(f).is_sat == naive_is_sat(f)
    if verdict.is_sat:
        assert evaluate_assignment(f, verdict.assignment)


@settings(max_examples=100, deadline=None)
@given(formulas())
def test_dimacs_roundtrip(f):
    assert parse_dimacs(serialize_dimacs(f)) == f


@settings(max_examples=60, deadline=None)
@given(formulas(max_vars=10), st.integers(0, 2**32 - 1))
def test_graph_invariants_and_equivariance(f, seed):
    core = SolverCore(f)
    if not core.active:
        return
    g = build_state_graph(core)
    check_graph_invariants(g)
    rng = np.random.default_rng(seed)
    vp = rng.permutation(g.num_var_vertices)
    cp = rng.permutation(g.num_vertices - g.num_var_vertices)
    p = init_params(1)
    np.testing.assert_allclose(q_values(p, g.permuted(vp, cp)), q_values(p, g)[vp], atol=1e-6, rtol=0)
