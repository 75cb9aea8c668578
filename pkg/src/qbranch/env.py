"""Episodic MDP over the CDCL solver, plus the model/VSIDS hybrid solver."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cnf import CnfFormula, Literal, Verdict
from .solver import SolverConfig, SolverCore, SolverError, SolverStats, StepOutcome, vsids_pick
from .state_graph import StateGraph, build_state_graph, decode_action

UNLIMITED = None


@dataclass(frozen=True)
class EnvConfig:
    step_penalty: float = -0.1
    max_decisions: int | None = 500
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if not self.step_penalty < 0:
            raise ValueError("step penalty must be negative")
        if self.max_decisions is not None and self.max_decisions < 0:
            raise ValueError("decision cap must be non-negative")


@dataclass(frozen=True)
class AlreadyTerminal:
    verdict: Verdict


@dataclass
class StepResult:
    state: StateGraph | None
    reward: float
    done: bool
    truncated: bool
    info: dict = field(default_factory=dict)


class SatEnv:
    """Gym-style environment: ``reset(formula)`` then ``step(literal)``."""

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        self.core: SolverCore | None = None
        self.finished = True
        self.nonterminal_steps = 0
        self.initial_propagations = 0

    def reset(self, formula: CnfFormula) -> StateGraph | AlreadyTerminal:
        self.core = SolverCore(formula, self.config.solver)
        self.nonterminal_steps = 0
        self.initial_propagations = self.core.stats.propagations
        if not self.core.active:
            self.finished = True
            return AlreadyTerminal(self.core.verdict)
        self.finished = False
        return build_state_graph(self.core)

    @property
    def episode_return(self) -> float:
        return self.nonterminal_steps * self.config.step_penalty

    def step(self, action: Literal | tuple[int, bool]) -> StepResult:
        """Apply a decision; ``action`` is a Literal or (variable, polarity)."""
        if self.core is None or self.finished:
            raise SolverError("episode is over; call reset()")
        if not isinstance(action, Literal):
            var, polarity = action
            action = Literal(int(var), not polarity)
        before = self.core.stats.propagations
        outcome = self.core.step_decision(action)
        stats = self.core.stats
        props = stats.propagations - before
        info = {"propagations": props, "assignments": props + 1, "decisions": stats.decisions}
        if outcome is not StepOutcome.CONTINUE:
            self.finished = True
            info["verdict"] = self.core.verdict
            return StepResult(None, 0.0, True, False, info)
        self.nonterminal_steps += 1
        cap = self.config.max_decisions
        truncated = cap is not None and stats.decisions >= cap
        if truncated:
            self.finished = True
        return StepResult(build_state_graph(self.core), self.config.step_penalty, False, truncated, info)


def greedy_action(q: np.ndarray) -> tuple[int, int]:
    """Global argmax over (vertex, column); ties go to the lowest pair."""
    q = np.asarray(q)
    if q.size == 0:
        raise ValueError("empty Q matrix")
    flat = int(np.argmax(q))
    return flat // q.shape[1], flat % q.shape[1]


@dataclass
class HybridTrace:
    """Optional per-run detail filled in by :func:`solve_hybrid`."""

    step_assignments: list[int] = field(default_factory=list)
    model_decisions: list[int] = field(default_factory=list)
    initial_propagations: int = 0
    propagation_time: float = 0.0
    inference_time: float = 0.0
    total_time: float = 0.0


def solve_hybrid(formula: CnfFormula, params, cap: int | None = UNLIMITED,
                 config: SolverConfig | None = None,
                 q_fn: Callable | None = None,
                 trace: HybridTrace | None = None) -> tuple[Verdict, SolverStats, int]:
    """Model picks the first ``cap`` decisions greedily, VSIDS the rest.

    VSIDS activities keep being bumped during model-driven decisions, so the
    handoff starts from a warmed-up activity table.
    """
    if q_fn is None:
        from .graph_net import q_values as q_fn
    start = time.perf_counter()
    core = SolverCore(formula, config)
    if trace is not None:
        trace.initial_propagations = core.stats.propagations
    calls = 0
    limit = core.config.decision_limit
    verdict = core.verdict
    while core.active:
        if limit is not None and core.kernel.decisions >= limit:
            verdict = Verdict("UNKNOWN")
            break
        if cap is None or calls < cap:
            t0 = time.perf_counter()
            graph = build_state_graph(core)
            lit = decode_action(graph, *greedy_action(q_fn(params, graph)))
            calls += 1
            if trace is not None:
                trace.inference_time += time.perf_counter() - t0
                trace.model_decisions.append(lit.to_dimacs())
        else:
            lit = vsids_pick(core)
        before = core.stats.propagations
        t0 = time.perf_counter()
        core.step_decision(lit)
        if trace is not None:
            trace.propagation_time += time.perf_counter() - t0
            trace.step_assignments.append(core.stats.propagations - before + 1)
        verdict = core.verdict
    if trace is not None:
        trace.total_time = time.perf_counter() - start
    return verdict, core.stats, calls
