"""CNF formulas, DIMACS I/O, random 3-SAT generation and a brute-force oracle.

Literals are DIMACS-style signed integers on the outside (``3`` is x3,
``-3`` is not x3).  The solver kernel works on 0-based packed literals
(``2 * (var - 1) + negated``); :func:`to_internal` and :func:`from_internal`
own that mapping.
"""
from __future__ import annotations

import itertools
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX_VARS = 25


class DimacsError(ValueError):
    """Raised for malformed DIMACS input."""


class Literal(NamedTuple):
    variable: int
    negated: bool = False

    @classmethod
    def from_dimacs(cls, lit: int) -> "Literal":
        if lit == 0:
            raise ValueError("0 is not a literal")
        return cls(abs(lit), lit < 0)

    def to_dimacs(self) -> int:
        return -self.variable if self.negated else self.variable

    def __neg__(self) -> "Literal":
        return Literal(self.variable, not self.negated)

    def __str__(self) -> str:
        return ("~x%d" if self.negated else "x%d") % self.variable


def to_internal(lit: int) -> int:
    return 2 * (abs(lit) - 1) + (lit < 0)


def from_internal(ilit: int) -> int:
    var = (ilit >> 1) + 1
    return -var if ilit & 1 else var


def normalize_clause(lits: Iterable[int]) -> tuple[int, ...] | None:
    """Drop duplicate literals, keeping first occurrences; ``None`` for a tautology."""
    seen: dict[int, None] = {}
    for lit in lits:
        if -lit in seen:
            return None
        seen.setdefault(lit, None)
    return tuple(seen)


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        for c in clauses:
            if len(set(c)) != len(c):
                raise ValueError(f"duplicate literal in clause {c}")
            for lit in c:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(f"literal {lit} out of range for {self.num_vars} vars")
                if -lit in c:
                    raise ValueError(f"tautological clause {c}")
        object.__setattr__(self, "clauses", clauses)

    @classmethod
    def from_clauses(cls, clauses: Iterable[Iterable[int]], num_vars: int | None = None,
                     name: str = "") -> "CnfFormula":
        """Build a formula, removing tautologies and duplicate literals."""
        kept = []
        for c in clauses:
            norm = normalize_clause(c)
            if norm is not None:
                kept.append(norm)
        if num_vars is None:
            num_vars = max((abs(l) for c in kept for l in c), default=0)
        return cls(num_vars, tuple(kept), name)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def __str__(self) -> str:
        return " & ".join("(" + " | ".join(str(Literal.from_dimacs(l)) for l in c) + ")"
                          for c in self.clauses) or "true"


@dataclass(frozen=True)
class Verdict:
    """Solver outcome.  ``assignment`` is total over all variables when SAT."""

    status: str  # "SAT" | "UNSAT" | "UNKNOWN"
    assignment: Mapping[int, bool] | None = None

    @property
    def is_sat(self) -> bool:
        return self.status == "SAT"

    @property
    def is_unsat(self) -> bool:
        return self.status == "UNSAT"

    @classmethod
    def sat(cls, assignment: Mapping[int, bool]) -> "Verdict":
        return cls("SAT", dict(assignment))


UNSAT = Verdict("UNSAT")
UNKNOWN = Verdict("UNKNOWN")


# -- DIMACS -----------------------------------------------------------------

def parse_dimacs(text: str | bytes, name: str = "", warnings: list[str] | None = None) -> CnfFormula:
    """Parse DIMACS CNF.

    A clause-count mismatch with the header is tolerated; a note is logged and
    appended to ``warnings`` when that list is given.
    """
    if isinstance(text, bytes):
        text = text.decode("ascii", errors="replace")
    num_vars = None
    declared = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if num_vars is not None:
                raise DimacsError(f"line {lineno}: duplicate header")
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                num_vars, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if num_vars < 0 or declared < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            continue
        if line.startswith("%"):
            # SATLIB uf* files end with "%\n0\n"
            break
        if num_vars is None:
            raise DimacsError(f"line {lineno}: clause before header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                clauses.append(current)
                current = []
            else:
                if abs(lit) > num_vars:
                    raise DimacsError(f"line {lineno}: literal {lit} exceeds {num_vars} vars")
                current.append(lit)
    if num_vars is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("last clause is not terminated by 0")
    if len(clauses) != declared:
        msg = f"{name or '<input>'}: header declares {declared} clauses, found {len(clauses)}"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return CnfFormula.from_clauses(clauses, num_vars=num_vars, name=name)


def serialize_dimacs(formula: CnfFormula) -> bytes:
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    lines.extend(" ".join(map(str, c)) + " 0" for c in formula.clauses)
    return ("\n".join(lines) + "\n").encode("ascii")


def read_dimacs(path: str | os.PathLike) -> CnfFormula:
    path = Path(path)
    return parse_dimacs(path.read_bytes(), name=path.stem)


def write_dimacs(formula: CnfFormula, path: str | os.PathLike) -> None:
    Path(path).write_bytes(serialize_dimacs(formula))


def load_dataset(directory: str | os.PathLike) -> list[CnfFormula]:
    """All ``.cnf`` files of a directory, in lexicographic filename order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory {directory} does not exist")
    return [read_dimacs(p) for p in sorted(directory.glob("*.cnf"))]


# -- generation ---------------------------------------------------------------

def generate_random_3sat(n_vars: int, n_clauses: int, seed: int) -> CnfFormula:
    """Uniform random 3-SAT: 3 distinct variables per clause, fair polarities."""
    if n_vars < 3:
        raise ValueError("random 3-SAT needs at least 3 variables")
    rng = np.random.default_rng(seed)
    clauses = []
    for _ in range(n_clauses):
        vs = rng.choice(n_vars, size=3, replace=False) + 1
        signs = rng.integers(0, 2, size=3)
        clauses.append(tuple(int(-v if s else v) for v, s in zip(vs, signs)))
    return CnfFormula(n_vars, tuple(clauses), name=f"rand3-{n_vars}-{n_clauses}-s{seed}")


# -- semantics ----------------------------------------------------------------

def evaluate_assignment(formula: CnfFormula, assignment: Mapping[int, bool]) -> bool:
    missing = [v for v in range(1, formula.num_vars + 1) if v not in assignment]
    if missing:
        raise ValueError(f"assignment is partial; missing variables {missing[:5]}")
    for c in formula.clauses:
        if not any(assignment[abs(l)] == (l > 0) for l in c):
            return False
    return True


def _assignments(n: int) -> Iterator[np.ndarray]:
    # Chunked enumeration: each row of a block is one assignment (bit i -> var i+1).
    block = 1 << min(n, 16)
    low = ((np.arange(block)[:, None] >> np.arange(min(n, 16))) & 1).astype(bool)
    for hi in range(1 << max(0, n - 16)):
        if n > 16:
            high = ((hi >> np.arange(n - 16)) & 1).astype(bool)
            yield np.hstack([low, np.broadcast_to(high, (block, n - 16))])
        else:
            yield low


def brute_force_solve(formula: CnfFormula) -> Verdict:
    """Exhaustive enumeration; the independent oracle for solver tests."""
    n = formula.num_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_VARS} variables, got {n}")
    if any(len(c) == 0 for c in formula.clauses):
        return UNSAT
    if not formula.clauses:
        return Verdict.sat({v: False for v in range(1, n + 1)})
    for block in _assignments(n):
        ok = np.ones(len(block), dtype=bool)
        for c in formula.clauses:
            sat = np.zeros(len(block), dtype=bool)
            for l in c:
                col = block[:, abs(l) - 1]
                sat |= col if l > 0 else ~col
            ok &= sat
            if not ok.any():
                break
        hits = np.flatnonzero(ok)
        if hits.size:
            row = block[hits[0]]
            return Verdict.sat({v: bool(row[v - 1]) for v in range(1, n + 1)})
    return UNSAT


def conjoin_negation(formula: CnfFormula, clause: Sequence[int]) -> CnfFormula:
    """``formula AND NOT clause``, i.e. the formula plus one unit per negated literal."""
    return CnfFormula(formula.num_vars, formula.clauses + tuple((-l,) for l in clause))


def all_assignments(n: int) -> Iterator[dict[int, bool]]:
    for bits in itertools.product((False, True), repeat=n):
        yield {v + 1: b for v, b in enumerate(bits)}
