"""MiniSat-style CDCL solver with a pluggable branching callback.

The search loop is driven one decision at a time through
:meth:`SolverCore.step_decision`, so an external agent can choose branches and
a plain :func:`solve` run is just the same loop with :func:`vsids_pick`.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Callable

from .cnf import CnfFormula, Literal, UNKNOWN, UNSAT, Verdict, evaluate_assignment, from_internal, to_internal
from .kernel import get_kernel_class


@dataclass(frozen=True)
class SolverConfig:
    restarts: bool = False
    restart_unit: int = 100
    var_decay: float = 0.95
    var_inc: float = 1.0
    decision_limit: int | None = None
    seed: int = 0  # no randomised choices yet; kept for interface stability
    backend: str | None = None


@dataclass
class SolverStats:
    decisions: int = 0
    propagations: int = 0
    conflicts: int = 0
    restarts: int = 0

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


class StepOutcome(enum.Enum):
    CONTINUE = "CONTINUE"
    SAT = "SAT"
    UNSAT = "UNSAT"


class SolverError(RuntimeError):
    pass


def luby(i: int) -> int:
    """i-th term (0-based) of the Luby sequence 1, 1, 2, 1, 1, 2, 4, ..."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i %= size
    return 1 << seq


class SolverCore:
    """CDCL state for one formula.

    Construction performs level-0 propagation; ``outcome`` tells whether that
    already decided the instance.
    """

    def __init__(self, formula: CnfFormula, config: SolverConfig | None = None):
        self.formula = formula
        self.config = config or SolverConfig()
        cls = get_kernel_class(self.config.backend)
        self.kernel = cls(formula.num_vars, var_decay=self.config.var_decay,
                          var_inc=self.config.var_inc)
        for c in formula.clauses:
            self.kernel.add_clause([to_internal(l) for l in c])
        self.restarts = 0
        self._restart_index = 0
        self._conflicts_at_restart = 0
        self.decision_log: list[int] = []
        self.verdict: Verdict | None = None
        self.outcome = self._settle()

    # -- state ----------------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return self.formula.num_vars

    @property
    def active(self) -> bool:
        return self.outcome is StepOutcome.CONTINUE

    @property
    def stats(self) -> SolverStats:
        k = self.kernel
        return SolverStats(int(k.decisions), int(k.propagations), int(k.conflicts), self.restarts)

    @property
    def decision_level(self) -> int:
        return self.kernel.decision_level

    def value(self, var: int) -> bool | None:
        x = self.kernel.lit_value(2 * (var - 1))
        return None if x == 0 else x == 1

    def is_assigned(self, var: int) -> bool:
        return self.kernel.lit_value(2 * (var - 1)) != 0

    def unassigned_vars(self) -> list[int]:
        return [v + 1 for v, x in enumerate(self.kernel.var_values()) if x == 0]

    def trail(self) -> list[tuple[int, int]]:
        """(DIMACS literal, decision level) pairs in assignment order."""
        k = self.kernel
        return [(from_internal(l), k.var_level(l >> 1)) for l in k.trail]

    def learned_clauses(self) -> list[tuple[int, ...]]:
        k = self.kernel
        return [tuple(from_internal(l) for l in k.clause(i))
                for i in range(k.n_original, k.num_clauses)]

    def activities(self) -> dict[int, float]:
        return {v + 1: a for v, a in enumerate(self.kernel.activity)}

    def set_activity(self, var: int, value: float) -> None:
        self.kernel.set_activity(var - 1, value)

    # -- search primitives ------------------------------------------------------

    def propagate(self) -> int | None:
        """Unit propagation; the conflicting clause's index or ``None``."""
        confl = self.kernel.propagate()
        return None if confl < 0 else confl

    def analyze_conflict(self, confl: int) -> tuple[tuple[int, ...], int]:
        if self.kernel.decision_level == 0:
            raise SolverError("conflict at level 0: formula is UNSAT")
        learnt, bt = self.kernel.analyze(confl)
        return tuple(from_internal(l) for l in learnt), bt

    def backjump(self, level: int) -> None:
        if level >= self.kernel.decision_level or level < 0:
            raise SolverError(f"cannot backjump to level {level} from {self.kernel.decision_level}")
        self.kernel.cancel_until(level)

    def bump_and_decay(self, vars) -> None:
        self.kernel.bump_and_decay([v - 1 for v in vars])

    def maybe_restart(self) -> bool:
        if not self.config.restarts:
            return False
        bound = luby(self._restart_index) * self.config.restart_unit
        if self.kernel.conflicts - self._conflicts_at_restart < bound:
            return False
        self.kernel.cancel_until(0)
        self.restarts += 1
        self._restart_index += 1
        self._conflicts_at_restart = self.kernel.conflicts
        return True

    def _settle(self) -> StepOutcome:
        if self.kernel.resolve() == 1:
            self.verdict = UNSAT
            return StepOutcome.UNSAT
        if self.kernel.originals_satisfied():
            self.verdict = Verdict.sat(self._complete_assignment())
            return StepOutcome.SAT
        return StepOutcome.CONTINUE

    def _complete_assignment(self) -> dict[int, bool]:
        # unassigned variables take their saved phase
        pol = self.kernel.polarity
        a = {v + 1: (x == 1 if x else pol[v] == 0)
             for v, x in enumerate(self.kernel.var_values())}
        if not evaluate_assignment(self.formula, a):
            raise SolverError("internal error: model does not satisfy the formula")
        return a

    def step_decision(self, literal: Literal | int) -> StepOutcome:
        """Make one decision, then propagate/learn/backjump until quiescent."""
        if not self.active:
            raise SolverError(f"solver already finished ({self.outcome.value})")
        if isinstance(literal, Literal):
            literal = literal.to_dimacs()
        var = abs(literal)
        if not 1 <= var <= self.num_vars:
            raise SolverError(f"variable {var} out of range")
        if self.is_assigned(var):
            raise SolverError(f"variable {var} is already assigned")
        self.kernel.decide(to_internal(literal))
        self.decision_log.append(literal)
        self.outcome = self._settle()
        if self.outcome is StepOutcome.CONTINUE and self.maybe_restart():
            self.outcome = self._settle()
        return self.outcome


Branching = Callable[[SolverCore], "Literal | int"]


def vsids_pick(core: SolverCore) -> Literal:
    lit = core.kernel.pick_branch_lit()
    if lit < 0:
        raise SolverError("no unassigned variable to branch on")
    return Literal.from_dimacs(from_internal(lit))


def run_to_completion(core: SolverCore, branching: Branching = vsids_pick) -> Verdict:
    limit = core.config.decision_limit
    while core.active:
        if limit is not None and core.kernel.decisions >= limit:
            return UNKNOWN
        core.step_decision(branching(core))
    return core.verdict


def solve(formula: CnfFormula, branching: Branching = vsids_pick,
          config: SolverConfig | None = None) -> tuple[Verdict, SolverStats]:
    core = SolverCore(formula, config)
    verdict = run_to_completion(core, branching)
    return verdict, core.stats
