"""Desk-scale random 3-SAT datasets filtered by satisfiability."""
from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

from .cnf import CnfFormula, generate_random_3sat, load_dataset, write_dimacs
from .solver import solve

FAMILY = {None: "rand3", "sat": "uf", "unsat": "uuf"}


def generate_dataset(n_vars: int, n_clauses: int, count: int, seed: int,
                     want: str | None = None, max_tries: int = 1000) -> list[CnfFormula]:
    """``count`` random 3-SAT formulas; with ``want`` set, keep only SAT or UNSAT ones.

    Instance ``i`` is the first candidate seed ``seed * 1_000_003 + i * 1000 + j``
    (j = 0, 1, ...) whose verdict matches, so the set is deterministic and
    prefixes are stable when ``count`` grows.
    """
    if want not in (None, "sat", "unsat"):
        raise ValueError(f"want must be None, 'sat' or 'unsat', got {want!r}")
    family = FAMILY[want]
    out = []
    for i in range(count):
        for j in range(max_tries):
            f = generate_random_3sat(n_vars, n_clauses, seed * 1_000_003 + i * 1000 + j)
            if want is None or solve(f)[0].status.lower() == want:
                break
        else:
            raise RuntimeError(f"no {want} instance found after {max_tries} tries")
        out.append(CnfFormula(f.num_vars, f.clauses, name=f"{family}-{n_vars}-{n_clauses}-{i}"))
    return out


def write_dataset(formulas: Sequence[CnfFormula], outdir: str | os.PathLike) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for f in formulas:
        p = outdir / f"{f.name}.cnf"
        write_dimacs(f, p)
        paths.append(p)
    return paths


def split(formulas: Sequence[CnfFormula], n_train: int, n_val: int, n_test: int):
    """Consecutive train/validation/test slices of the canonical ordering."""
    need = n_train + n_val + n_test
    if len(formulas) < need:
        raise ValueError(f"dataset has {len(formulas)} problems, split needs {need}")
    return (list(formulas[:n_train]), list(formulas[n_train:n_train + n_val]),
            list(formulas[n_train + n_val:need]))


__all__ = ["generate_dataset", "write_dataset", "split", "load_dataset"]
