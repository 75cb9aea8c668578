"""Evaluation protocol: MRIR, baselines, sweeps, propagation statistics, inference cost."""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .cnf import CnfFormula
from .env import UNLIMITED, HybridTrace, solve_hybrid
from .solver import SolverConfig, SolverStats, solve


class CompletenessError(AssertionError):
    """Agent and baseline disagree on satisfiability."""


@dataclass
class ProblemResult:
    problem_id: str
    verdict: str
    baseline_no_restart: int
    baseline_restart: int
    agent_iterations: int
    model_calls: int
    agent_restarts_used: bool
    agent_props_per_step: float | None
    baseline_props_per_step: float | None
    propagation_time: float = 0.0
    inference_time: float = 0.0
    total_time: float = 0.0

    @property
    def best_baseline(self) -> int:
        return min(self.baseline_no_restart, self.baseline_restart)

    @property
    def excluded(self) -> bool:
        """Decided by level-0 propagation: no decisions, ratio undefined."""
        return self.best_baseline == 0

    @property
    def bookkeeping_time(self) -> float:
        return self.total_time - self.propagation_time - self.inference_time


@dataclass
class MrirReport:
    ratios: list[float]
    median: float
    problem_ids: list[str] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def compute_mrir(results: Sequence[ProblemResult]) -> MrirReport:
    """Median over problems of best-of-two baseline decisions / agent decisions."""
    if not results:
        raise ValueError("no results")
    ratios, ids, skipped = [], [], []
    for r in results:
        if r.excluded:
            skipped.append(r.problem_id)
            continue
        if r.agent_iterations < 1:
            raise ValueError(f"{r.problem_id}: agent made no decisions but baseline did")
        ratios.append(r.best_baseline / r.agent_iterations)
        ids.append(r.problem_id)
    if not ratios:
        raise ValueError("every problem was decided at level 0")
    return MrirReport(ratios, float(statistics.median(ratios)), ids, skipped)


def aggregate_runs(reports: Sequence[MrirReport]) -> dict[str, float]:
    """Average/min/max of per-run MRIR (one run per training seed)."""
    meds = [r.median for r in reports]
    return {"average": float(np.mean(meds)), "min": float(min(meds)), "max": float(max(meds)),
            "runs": len(meds)}


def _props_per_step(stats: SolverStats, initial: int) -> float | None:
    if stats.decisions == 0:
        return None
    return (stats.propagations - initial + stats.decisions) / stats.decisions


@dataclass
class BaselineRun:
    verdict: str
    decisions: int
    stats: SolverStats
    props_per_step: float | None


def _baseline(formula: CnfFormula, restarts: bool, solver: SolverConfig | None) -> BaselineRun:
    base = solver or SolverConfig()
    cfg = SolverConfig(**{**asdict(base), "restarts": restarts})
    from .solver import SolverCore, run_to_completion

    core = SolverCore(formula, cfg)
    initial = core.stats.propagations
    verdict = run_to_completion(core)
    st = core.stats
    return BaselineRun(verdict.status, st.decisions, st, _props_per_step(st, initial))


class BaselineCache:
    """Pure-VSIDS runs (with and without restarts) per problem, computed once."""

    def __init__(self, formulas: Sequence[CnfFormula], solver: SolverConfig | None = None):
        self.runs = [(_baseline(f, False, solver), _baseline(f, True, solver)) for f in formulas]

    def __getitem__(self, i):
        return self.runs[i]


def run_baseline(dataset: Sequence[CnfFormula], restarts: bool,
                 solver: SolverConfig | None = None) -> dict:
    runs = [_baseline(f, restarts, solver) for f in dataset]
    decisions = [r.decisions for r in runs]
    return {"restarts": restarts, "decisions": decisions,
            "verdicts": [r.verdict for r in runs],
            "median": float(statistics.median(decisions)) if decisions else None,
            "mean": float(np.mean(decisions)) if decisions else None}


def _agent_run(formula, params, cap, solver: SolverConfig, restarts: bool, q_fn):
    cfg = SolverConfig(**{**asdict(solver), "restarts": restarts})
    trace = HybridTrace()
    verdict, stats, calls = solve_hybrid(formula, params, cap, cfg, q_fn=q_fn, trace=trace)
    return verdict, stats, calls, trace


def evaluate_problems(params, formulas: Sequence[CnfFormula], cap: int | None = UNLIMITED,
                      baselines: BaselineCache | None = None, solver: SolverConfig | None = None,
                      agent_restarts: str = "best", q_fn=None) -> list[ProblemResult]:
    """Run agent and baselines on every problem.

    ``agent_restarts`` is ``"best"`` (agent runs with and without restarts and
    keeps the fewer decisions, mirroring the best-of-two baseline), ``"on"`` or
    ``"off"``.  Raises :class:`CompletenessError` on any verdict mismatch.
    """
    solver = solver or SolverConfig()
    if baselines is None:
        baselines = BaselineCache(formulas, solver)
    modes = {"best": (False, True), "off": (False,), "on": (True,)}[agent_restarts]
    out = []
    for i, f in enumerate(formulas):
        b_nr, b_r = baselines[i]
        if b_nr.verdict != b_r.verdict:
            raise CompletenessError(f"{f.name}: baselines disagree")
        best = None
        for restarts in modes:
            verdict, stats, calls, trace = _agent_run(f, params, cap, solver, restarts, q_fn)
            if verdict.status != b_nr.verdict:
                raise CompletenessError(
                    f"{f.name or i}: agent says {verdict.status}, baseline says {b_nr.verdict}")
            if best is None or stats.decisions < best[1].decisions:
                best = (verdict, stats, calls, trace, restarts)
        verdict, stats, calls, trace, restarts = best
        props = (b_nr if b_nr.decisions <= b_r.decisions else b_r).props_per_step
        out.append(ProblemResult(
            problem_id=f.name or str(i), verdict=verdict.status,
            baseline_no_restart=b_nr.decisions, baseline_restart=b_r.decisions,
            agent_iterations=stats.decisions, model_calls=calls, agent_restarts_used=restarts,
            agent_props_per_step=_props_per_step(stats, trace.initial_propagations),
            baseline_props_per_step=props, propagation_time=trace.propagation_time,
            inference_time=trace.inference_time, total_time=trace.total_time))
    return out


def decision_cap_sweep(params, dataset: Sequence[CnfFormula], caps: Sequence[int | None],
                       solver: SolverConfig | None = None) -> list[dict]:
    """MRIR per model-call cap, in the order the caps were given."""
    cache = BaselineCache(dataset, solver)
    out = []
    for cap in caps:
        rep = compute_mrir(evaluate_problems(params, dataset, cap, cache, solver))
        out.append({"cap": cap, "mrir": rep.median, "report": rep})
    return out


def data_efficiency_sweep(train_set: Sequence[CnfFormula], val_set: Sequence[CnfFormula],
                          eval_set: Sequence[CnfFormula], sizes: Sequence[int],
                          seeds: Sequence[int], config, cap: int | None = UNLIMITED,
                          solver: SolverConfig | None = None) -> list[dict]:
    """Train one model per (size, seed) on the first ``size`` training problems."""
    from .dqn import default_validator, train

    for n in sizes:
        if not 1 <= n <= len(train_set):
            raise ValueError(f"training-set size {n} outside 1..{len(train_set)}")
    cache = BaselineCache(eval_set, solver)
    validator = default_validator(val_set, config, solver)
    out = []
    for n in sizes:
        meds = []
        for seed in seeds:
            res = train(train_set[:n], val_set, config, seed=seed, validator=validator, solver=solver)
            meds.append(compute_mrir(evaluate_problems(res.best_params, eval_set, cap, cache, solver)).median)
        out.append({"size": n, "mrir": meds, "average": float(np.mean(meds)),
                    "min": float(min(meds)), "max": float(max(meds))})
    return out


def _mean_ci(xs: Sequence[float]) -> dict:
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        return {"mean": None, "ci95": None, "n": 0}
    half = 1.96 * xs.std(ddof=1) / math.sqrt(xs.size) if xs.size > 1 else float("nan")
    return {"mean": float(xs.mean()), "ci95": [float(xs.mean() - half), float(xs.mean() + half)],
            "n": int(xs.size)}


def propagation_stats(dataset: Sequence[CnfFormula], params=None, cap: int | None = UNLIMITED,
                      solver: SolverConfig | None = None) -> dict:
    """Mean assignments changed per decision (propagations plus the decision).

    ``params=None`` measures pure VSIDS.  Problems decided without any
    decision are excluded.
    """
    per_problem = []
    ids = []
    for i, f in enumerate(dataset):
        trace = HybridTrace()
        c = cap if params is not None else 0
        _, stats, _ = solve_hybrid(f, params, c, solver, trace=trace)
        value = _props_per_step(stats, trace.initial_propagations)
        if value is None:
            continue
        per_problem.append(value)
        ids.append(f.name or str(i))
    return {"per_problem": per_problem, "problem_ids": ids, **_mean_ci(per_problem)}


def linear_fit(x: Sequence[float], y: Sequence[float]) -> dict:
    """Least-squares line y = a x + b with R^2; undefined for fewer than two points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        return {"slope": None, "intercept": None, "r2": None}
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(a), "intercept": float(b), "r2": r2}


def inference_scaling_probe(params, sizes: Sequence[int], seed: int = 0, repeats: int = 1) -> dict:
    """Forward-pass cost versus |V| on random graphs with a 3-SAT-like degree profile.

    ``sizes`` are variable counts; each graph has 4 clauses per variable and
    every variable touches 13 clauses.
    """
    from .graph_net import forward
    from .state_graph import random_bipartite_graph

    vertices, macs, times = [], [], []
    for k, n in enumerate(sizes):
        g = random_bipartite_graph(int(n), seed=seed + k)
        best = math.inf
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            _, tape = forward(params, g)
            best = min(best, time.perf_counter() - t0)
        vertices.append(g.num_vertices)
        macs.append(tape.macs)
        times.append(best)
    return {"vertices": vertices, "macs": macs, "wall_times": times,
            "mac_fit": linear_fit(vertices, macs), "time_fit": linear_fit(vertices, times)}
