import numpy as np
import pytest

from qbranch.cnf import (
    CnfFormula, Literal, brute_force_solve, conjoin_negation, evaluate_assignment,
    generate_random_3sat,
)
from qbranch.kernel import get_kernel_class
from qbranch.solver import (
    SolverConfig, SolverCore, SolverError, StepOutcome, luby, run_to_completion, solve,
    vsids_pick,
)

BACKENDS = ["python", "cython"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    try:
        get_kernel_class(request.param)
    except ImportError:
        pytest.skip("compiled kernel not built")
    return request.param


def luby_recursive(i: int) -> int:
    # 1-based textbook definition: t_i = 2^(k-1) if i = 2^k - 1, else t_{i - 2^(k-1) + 1}
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    if i == (1 << k) - 1:
        return 1 << (k - 1)
    return luby_recursive(i - (1 << (k - 1)) + 1)


def test_luby_prefix():
    assert [luby(i) for i in range(15)] == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


def test_luby_matches_recursive_definition():
    assert all(luby(i) == luby_recursive(i + 1) for i in range(2000))


def random_instances(count, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(5, 16))
        m = int(round(n * rng.uniform(2, 6)))
        yield generate_random_3sat(n, m, seed=10_000 * seed + i)


@pytest.mark.parametrize("restarts", [False, True])
def test_verdicts_match_brute_force(backend, restarts):
    cfg = SolverConfig(restarts=restarts, restart_unit=2, backend=backend)
    for f in random_instances(150, seed=int(restarts)):
        verdict, _ = solve(f, config=cfg)
        assert verdict.is_sat == brute_force_solve(f).is_sat, f.name
        if verdict.is_sat:
            assert evaluate_assignment(f, verdict.assignment)


def test_learned_clauses_are_implied(backend):
    checked = 0
    for f in random_instances(60, seed=5):
        core = SolverCore(f, SolverConfig(backend=backend))
        run_to_completion(core)
        for c in core.learned_clauses():
            assert brute_force_solve(conjoin_negation(f, c)).is_unsat, (f.name, c)
            checked += 1
    assert checked > 50


def test_watch_invariant_holds_between_decisions(backend):
    for f in random_instances(40, seed=9):
        core = SolverCore(f, SolverConfig(backend=backend, restarts=True, restart_unit=1))
        while core.active:
            assert core.kernel.check_watches()
            core.step_decision(vsids_pick(core))


def test_custom_branching_stays_complete(backend):
    rng = np.random.default_rng(3)

    def random_branch(core):
        return Literal(int(rng.choice(core.unassigned_vars())), bool(rng.integers(2)))

    for f in random_instances(80, seed=4):
        verdict, stats = solve(f, random_branch, SolverConfig(backend=backend))
        assert verdict.is_sat == brute_force_solve(f).is_sat


def test_two_clause_first_decision_and_propagation(two_clause):
    core = SolverCore(two_clause)
    assert vsids_pick(core) == Literal(1, True)  # lowest index, saved phase false
    assert core.step_decision(Literal(1, True)) is StepOutcome.SAT
    assert core.trail() == [(-1, 1), (-2, 1), (3, 1)]
    assert core.stats.propagations == 2 and core.stats.decisions == 1


def test_level_zero_outcomes():
    unsat = SolverCore(CnfFormula(1, ((1,), (-1,))))
    assert unsat.outcome is StepOutcome.UNSAT and not unsat.active
    chain = CnfFormula(4, ((1,), (-1, 2), (-2, 3), (-3, 4)))
    v, stats = solve(chain)
    assert v.is_sat and stats.decisions == 0 and stats.propagations == 4
    empty = SolverCore(CnfFormula(3, ()))
    assert empty.outcome is StepOutcome.SAT
    assert empty.verdict.assignment == {1: False, 2: False, 3: False}


def test_step_decision_validation(two_clause):
    core = SolverCore(two_clause)
    with pytest.raises(SolverError):
        core.step_decision(4)
    core2 = SolverCore(CnfFormula(3, ((1, 2, 3), (-1, 2, 3), (1, -2, -3))))
    core2.step_decision(1)
    with pytest.raises(SolverError):
        core2.step_decision(-1)
    core.step_decision(-1)
    with pytest.raises(SolverError):
        core.step_decision(3)


def test_primitives_guard_levels(two_clause):
    core = SolverCore(two_clause)
    with pytest.raises(SolverError):
        core.backjump(0)
    with pytest.raises(SolverError):
        core.analyze_conflict(0)


def test_decision_limit_gives_unknown():
    f = generate_random_3sat(40, 170, seed=1)
    verdict, stats = solve(f, config=SolverConfig(decision_limit=3))
    assert verdict.status == "UNKNOWN" and stats.decisions == 3


def test_activity_bump_decay_and_rescale(backend):
    k = get_kernel_class(backend)(3)
    k.bump_and_decay([0, 1])
    assert k.activity == [1.0, 1.0, 0.0]
    assert k.var_inc == pytest.approx(1 / 0.95, rel=1e-15)
    k.bump_and_decay([0])
    assert k.activity[0] == pytest.approx(1 + 1 / 0.95, rel=1e-15)
    k.set_activity(2, 1.5e100)
    k.bump_and_decay([2])
    assert max(k.activity) < 1e100
    assert k.activity[2] == pytest.approx(1.5, rel=1e-12)
    assert k.activity[0] == pytest.approx((1 + 1 / 0.95) * 1e-100, rel=1e-12)


def test_phase_saving(backend):
    # deciding x1 true, then restarting, keeps x1's polarity true
    f = CnfFormula(3, ((1, 2, 3), (-1, -2, 3), (2, -3)))
    core = SolverCore(f, SolverConfig(backend=backend))
    core.step_decision(1)
    core.kernel.cancel_until(0)
    assert core.kernel.polarity[0] == 0  # 0 encodes "true" as the saved phase
    assert vsids_pick(core).variable in (1, 2, 3)


def test_restarts_counted_on_conflict_heavy_instance():
    f = generate_random_3sat(60, 258, seed=2)
    v0, s0 = solve(f, config=SolverConfig(restarts=True, restart_unit=1))
    v1, s1 = solve(f, config=SolverConfig(restarts=False))
    assert v0.status == v1.status
    assert s0.restarts > 0 and s1.restarts == 0


def test_heuristic_bumps_through_callbacks(two_clause):
    core = SolverCore(two_clause)
    core.bump_and_decay([3])
    assert core.activities()[3] == 1.0
    assert vsids_pick(core) == Literal(3, True)


def test_solver_is_deterministic():
    f = generate_random_3sat(50, 218, seed=11)
    assert solve(f) == solve(f)
