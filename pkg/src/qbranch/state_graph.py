"""Bipartite variable/clause graph of the residual problem.

Vertex order is canonical: variable vertices first (ascending variable id),
then clause vertices in clause-database order (original clauses, then learned
ones).  Each literal occurrence yields two directed edges variable->clause and
clause->variable, emitted back to back with identical polarity features.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cnf import Literal, from_internal

VAR_FEATURE = (1.0, 0.0)
CLAUSE_FEATURE = (0.0, 1.0)
NEGATED_EDGE = (1.0, 0.0)
POSITIVE_EDGE = (0.0, 1.0)


class TerminalStateError(RuntimeError):
    """The solver state has no residual problem to represent."""


@dataclass(eq=False)
class StateGraph:
    vertex_features: np.ndarray   # (V, 2)
    senders: np.ndarray           # (E,) int
    receivers: np.ndarray         # (E,) int
    edge_features: np.ndarray     # (E, 2)
    global_features: np.ndarray   # (1,)
    var_vertex_map: np.ndarray    # (num_var_vertices,) 1-based variable ids
    clause_ids: np.ndarray        # (num_clause_vertices,) clause-database indices
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_features)

    @property
    def num_edges(self) -> int:
        return len(self.senders)

    @property
    def num_var_vertices(self) -> int:
        return len(self.var_vertex_map)

    def vertex_of(self, var: int) -> int:
        idx = int(np.searchsorted(self.var_vertex_map, var))
        if idx >= len(self.var_vertex_map) or self.var_vertex_map[idx] != var:
            raise KeyError(f"variable {var} has no vertex")
        return idx

    @classmethod
    def from_occurrences(cls, var_ids, clause_ids, occurrences) -> "StateGraph":
        """Build from (clause slot, DIMACS literal) occurrence pairs.

        ``var_ids`` must be sorted and cover every occurring variable.
        """
        var_ids = np.asarray(var_ids, dtype=np.int64)
        clause_ids = np.asarray(clause_ids, dtype=np.int64)
        nv, nc = len(var_ids), len(clause_ids)
        occ = np.asarray(occurrences, dtype=np.int64).reshape(-1, 2)
        slots, lits = occ[:, 0], occ[:, 1]
        vpos = np.searchsorted(var_ids, np.abs(lits))
        cpos = nv + slots
        E = 2 * len(occ)
        senders = np.empty(E, dtype=np.int64)
        receivers = np.empty(E, dtype=np.int64)
        senders[0::2], receivers[0::2] = vpos, cpos
        senders[1::2], receivers[1::2] = cpos, vpos
        neg = np.repeat(lits < 0, 2)
        edge_features = np.where(neg[:, None], NEGATED_EDGE, POSITIVE_EDGE).astype(np.float64)
        vertex_features = np.empty((nv + nc, 2))
        vertex_features[:nv] = VAR_FEATURE
        vertex_features[nv:] = CLAUSE_FEATURE
        return cls(vertex_features, senders, receivers, edge_features.reshape(E, 2),
                   np.zeros(1), var_ids, clause_ids)

    def permuted(self, var_perm, clause_perm) -> "StateGraph":
        """Relabel vertices: new variable row i is old row ``var_perm[i]``, likewise clauses.

        Edge order is shuffled consistently so that the result is the same
        graph up to a type-preserving vertex permutation.
        """
        nv = self.num_var_vertices
        order = np.concatenate([np.asarray(var_perm), nv + np.asarray(clause_perm)])
        inverse = np.empty_like(order)
        inverse[order] = np.arange(len(order))
        edge_order = np.random.default_rng(len(order)).permutation(self.num_edges)
        return StateGraph(self.vertex_features[order], inverse[self.senders][edge_order],
                          inverse[self.receivers][edge_order], self.edge_features[edge_order],
                          self.global_features.copy(), self.var_vertex_map[np.asarray(var_perm)],
                          self.clause_ids[np.asarray(clause_perm)])


def build_state_graph(core) -> StateGraph:
    """Graph of unassigned variables and the not-yet-satisfied clauses (original and learned)."""
    if not core.active:
        raise TerminalStateError(f"solver is terminal ({core.outcome.value})")
    clause_ids, edge_slot, edge_lit = core.kernel.residual()
    if not clause_ids:
        raise TerminalStateError("every clause is satisfied")
    lits = np.asarray([from_internal(l) for l in edge_lit], dtype=np.int64)
    var_ids = np.unique(np.abs(lits))
    occ = np.stack([np.asarray(edge_slot, dtype=np.int64), lits], axis=1)
    return StateGraph.from_occurrences(var_ids, clause_ids, occ)


def decode_action(graph: StateGraph, vertex: int, column: int) -> Literal:
    """(variable vertex, column) -> literal; column 0 sets the variable true, 1 false."""
    if not 0 <= vertex < graph.num_var_vertices:
        raise ValueError(f"vertex {vertex} is not a variable vertex")
    if column not in (0, 1):
        raise ValueError(f"column must be 0 or 1, got {column}")
    return Literal(int(graph.var_vertex_map[vertex]), column == 1)


def random_bipartite_graph(n_vars: int, seed: int, var_degree: int = 13,
                           clause_ratio: int = 4) -> StateGraph:
    """Random 3-SAT-like graph: each variable joins ``var_degree`` distinct clauses."""
    rng = np.random.default_rng(seed)
    n_clauses = clause_ratio * n_vars
    occ = []
    for v in range(1, n_vars + 1):
        cs = np.sort(rng.choice(n_clauses, size=min(var_degree, n_clauses), replace=False))
        signs = rng.integers(0, 2, size=len(cs))
        occ.extend((int(c), -v if s else v) for c, s in zip(cs, signs))
    occ.sort()
    return StateGraph.from_occurrences(np.arange(1, n_vars + 1), np.arange(n_clauses), occ)


def check_graph_invariants(graph: StateGraph, canonical: bool = True) -> None:
    """Raise AssertionError if any structural invariant is violated.

    ``canonical`` also requires variable vertices in ascending id order.
    """
    nv = graph.num_var_vertices
    V = graph.num_vertices
    vf = graph.vertex_features
    assert np.array_equal(vf[:nv], np.tile(VAR_FEATURE, (nv, 1)))
    assert np.array_equal(vf[nv:], np.tile(CLAUSE_FEATURE, (V - nv, 1)))
    s, r = graph.senders, graph.receivers
    assert np.all((s < nv) != (r < nv)), "edge inside one side of the bipartition"
    ef = graph.edge_features
    assert np.all((ef == NEGATED_EDGE).all(1) | (ef == POSITIVE_EDGE).all(1))
    fwd = sorted(zip(s.tolist(), r.tolist(), ef[:, 0].tolist()))
    rev = sorted(zip(r.tolist(), s.tolist(), ef[:, 0].tolist()))
    assert fwd == rev, "edges do not come in reversed pairs"
    if canonical:
        assert np.all(np.diff(graph.var_vertex_map) > 0)
    if V:
        deg = np.bincount(s, minlength=V)
        assert np.all(deg[:nv] > 0), "isolated variable vertex"


def dump_graph(graph: StateGraph | None) -> str:
    """Text adjacency dump: vertex lines ``v <index> <type> <label>``, edge lines ``e <src> <dst> <pos|neg>``."""
    if graph is None or graph.num_vertices == 0:
        return "empty graph: no unassigned variables in unsatisfied clauses\n"
    nv = graph.num_var_vertices
    lines = [f"graph vertices={graph.num_vertices} edges={graph.num_edges} "
             f"variables={nv} clauses={graph.num_vertices - nv}"]
    for i, var in enumerate(graph.var_vertex_map):
        lines.append(f"v {i} var x{var}")
    for j, cid in enumerate(graph.clause_ids):
        lines.append(f"v {nv + j} clause c{cid + 1}")
    for s, r, f in zip(graph.senders, graph.receivers, graph.edge_features):
        lines.append(f"e {s} {r} {'neg' if f[0] == 1.0 else 'pos'}")
    return "\n".join(lines) + "\n"
