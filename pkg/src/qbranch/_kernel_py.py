"""Pure-Python CDCL kernel.

Reference implementation of the solver hot loop: two-watched-literal unit
propagation, first-UIP conflict analysis, backjumping and the VSIDS activity
table.  ``_kernel_ext.pyx`` mirrors it operation for operation so both
backends produce bit-identical traces.

Literals are packed ints ``2 * var + negated`` with 0-based variables.
Literal values: 1 true, -1 false, 0 unassigned.
"""

RESCALE_LIMIT = 1e100
RESCALE_FACTOR = 1e-100


class Kernel:
    backend = "python"

    def __init__(self, num_vars, var_decay=0.95, var_inc=1.0):
        if not 0.0 < var_decay < 1.0:
            raise ValueError("var_decay must lie in (0, 1)")
        n = int(num_vars)
        self.num_vars = n
        self._value = [0] * (2 * n)
        self._level = [0] * n
        self._reason = [-1] * n
        self._activity = [0.0] * n
        self._polarity = [1] * n
        self._seen = [0] * n
        self._trail = []
        self._trail_lim = []
        self._qhead = 0
        self._clauses = []
        self._watches = [[] for _ in range(2 * n)]
        self.n_original = 0
        self.var_inc = float(var_inc)
        self.var_decay = float(var_decay)
        self.ok = True
        self.propagations = 0
        self.conflicts = 0
        self.decisions = 0

    # -- clause database ------------------------------------------------------

    def add_clause(self, lits):
        """Add an original clause at level 0; returns its index."""
        if self._trail_lim:
            raise RuntimeError("original clauses are added at level 0 only")
        if self.n_original != len(self._clauses):
            raise RuntimeError("original clauses must precede learned ones")
        cr = len(self._clauses)
        c = list(lits)
        self._clauses.append(c)
        self.n_original += 1
        if not c:
            self.ok = False
        elif len(c) == 1:
            v = self._value[c[0]]
            if v == -1:
                self.ok = False
            elif v == 0:
                self._enqueue(c[0], cr)
        else:
            self._watches[c[0]].append(cr)
            self._watches[c[1]].append(cr)
        return cr

    def add_learnt(self, lits):
        """Store an asserting clause (asserting literal first) and enqueue it."""
        cr = len(self._clauses)
        c = list(lits)
        self._clauses.append(c)
        if len(c) >= 2:
            self._watches[c[0]].append(cr)
            self._watches[c[1]].append(cr)
        self._enqueue(c[0], cr)
        return cr

    @property
    def num_clauses(self):
        return len(self._clauses)

    def clause(self, cr):
        return list(self._clauses[cr])

    # -- assignment -----------------------------------------------------------

    def _enqueue(self, lit, reason):
        self._value[lit] = 1
        self._value[lit ^ 1] = -1
        v = lit >> 1
        self._level[v] = len(self._trail_lim)
        self._reason[v] = reason
        self._trail.append(lit)
        if reason >= 0:
            self.propagations += 1

    def decide(self, lit):
        if self._value[lit] != 0:
            raise ValueError("decision on an assigned variable")
        self._trail_lim.append(len(self._trail))
        self.decisions += 1
        self._enqueue(lit, -1)

    @property
    def decision_level(self):
        return len(self._trail_lim)

    def lit_value(self, lit):
        return self._value[lit]

    def var_level(self, v):
        return self._level[v]

    def var_reason(self, v):
        return self._reason[v] if self._value[2 * v] != 0 else -1

    @property
    def trail(self):
        return list(self._trail)

    @property
    def trail_lim(self):
        return list(self._trail_lim)

    @property
    def num_assigned(self):
        return len(self._trail)

    def var_values(self):
        """Per-variable values (1, -1, 0)."""
        val = self._value
        return [val[2 * v] for v in range(self.num_vars)]

    # -- propagation ----------------------------------------------------------

    def propagate(self):
        """Unit propagation to fixpoint; index of a conflicting clause or -1."""
        value = self._value
        clauses = self._clauses
        watches = self._watches
        trail = self._trail
        confl = -1
        while self._qhead < len(trail):
            p = trail[self._qhead]
            self._qhead += 1
            false_lit = p ^ 1
            ws = watches[false_lit]
            n = len(ws)
            i = j = 0
            while i < n:
                cr = ws[i]
                i += 1
                c = clauses[cr]
                if c[0] == false_lit:
                    c[0] = c[1]
                    c[1] = false_lit
                first = c[0]
                if value[first] == 1:
                    ws[j] = cr
                    j += 1
                    continue
                found = False
                for k in range(2, len(c)):
                    if value[c[k]] != -1:
                        c[1] = c[k]
                        c[k] = false_lit
                        watches[c[1]].append(cr)
                        found = True
                        break
                if found:
                    continue
                ws[j] = cr
                j += 1
                if value[first] == -1:
                    confl = cr
                    self._qhead = len(trail)
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                else:
                    self._enqueue(first, cr)
            del ws[j:]
            if confl >= 0:
                break
        return confl

    # -- conflict analysis ----------------------------------------------------

    def analyze(self, confl):
        """First-UIP learning.  Returns (learnt clause, backjump level).

        The asserting literal is ``learnt[0]``; ``learnt[1]`` carries the
        backjump level.  Bumps every variable met during resolution and decays.
        """
        if not self._trail_lim:
            raise ValueError("conflict at level 0: formula is UNSAT")
        seen = self._seen
        level = self._level
        trail = self._trail
        cur = len(self._trail_lim)
        learnt = [-1]
        bumped = []
        path_c = 0
        p = -1
        index = len(trail) - 1
        while True:
            c = self._clauses[confl]
            for k in range(0 if p == -1 else 1, len(c)):
                q = c[k]
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = 1
                    bumped.append(v)
                    if level[v] >= cur:
                        path_c += 1
                    else:
                        learnt.append(q)
            while not seen[trail[index] >> 1]:
                index -= 1
            p = trail[index]
            index -= 1
            confl = self._reason[p >> 1]
            seen[p >> 1] = 0
            path_c -= 1
            if path_c == 0:
                break
        learnt[0] = p ^ 1
        for q in learnt:
            seen[q >> 1] = 0
        if len(learnt) == 1:
            bt = 0
        else:
            mi = 1
            for k in range(2, len(learnt)):
                if level[learnt[k] >> 1] > level[learnt[mi] >> 1]:
                    mi = k
            learnt[1], learnt[mi] = learnt[mi], learnt[1]
            bt = level[learnt[1] >> 1]
        self.bump_and_decay(bumped)
        return learnt, bt

    def cancel_until(self, lvl):
        if len(self._trail_lim) <= lvl:
            return
        value = self._value
        start = self._trail_lim[lvl]
        trail = self._trail
        for k in range(len(trail) - 1, start - 1, -1):
            x = trail[k]
            v = x >> 1
            value[x] = 0
            value[x ^ 1] = 0
            self._reason[v] = -1
            self._polarity[v] = x & 1
        del trail[start:]
        del self._trail_lim[lvl:]
        self._qhead = start

    def resolve(self):
        """Propagate, learning and backjumping until quiescent.

        Returns 0 when propagation reaches a conflict-free fixpoint and 1 when
        a level-0 conflict proves the formula UNSAT.
        """
        if not self.ok:
            return 1
        while True:
            confl = self.propagate()
            if confl < 0:
                return 0
            self.conflicts += 1
            if not self._trail_lim:
                self.ok = False
                return 1
            learnt, bt = self.analyze(confl)
            self.cancel_until(bt)
            self.add_learnt(learnt)

    # -- VSIDS ----------------------------------------------------------------

    def bump_and_decay(self, vars):
        act = self._activity
        inc = self.var_inc
        for v in vars:
            act[v] += inc
            if act[v] > RESCALE_LIMIT:
                for u in range(self.num_vars):
                    act[u] *= RESCALE_FACTOR
                inc *= RESCALE_FACTOR
        self.var_inc = inc / self.var_decay

    def rescale(self, factor):
        act = self._activity
        for u in range(self.num_vars):
            act[u] *= factor
        self.var_inc *= factor

    def pick_branch_lit(self):
        """Unassigned variable of maximal activity (lowest index on ties), saved phase."""
        value = self._value
        act = self._activity
        best = -1
        best_act = -1.0
        for v in range(self.num_vars):
            if value[2 * v] == 0 and act[v] > best_act:
                best = v
                best_act = act[v]
        if best < 0:
            return -1
        return 2 * best + self._polarity[best]

    @property
    def activity(self):
        return list(self._activity)

    def set_activity(self, v, a):
        self._activity[v] = float(a)

    @property
    def polarity(self):
        return list(self._polarity)

    # -- queries used by the environment --------------------------------------

    def originals_satisfied(self):
        value = self._value
        for cr in range(self.n_original):
            for l in self._clauses[cr]:
                if value[l] == 1:
                    break
            else:
                return False
        return True

    def residual(self):
        """Unsatisfied clauses restricted to unassigned literals.

        Returns ``(clause_ids, edge_slot, edge_lit)``: the kept clause indices
        in database order and, per remaining literal occurrence, the position
        of its clause within ``clause_ids`` and the literal itself.
        """
        value = self._value
        clause_ids = []
        edge_slot = []
        edge_lit = []
        for cr, c in enumerate(self._clauses):
            free = []
            for l in c:
                x = value[l]
                if x == 1:
                    break
                if x == 0:
                    free.append(l)
            else:
                if free:
                    slot = len(clause_ids)
                    clause_ids.append(cr)
                    edge_slot.extend([slot] * len(free))
                    edge_lit.extend(free)
        return clause_ids, edge_slot, edge_lit

    def check_watches(self):
        """Full-scan check of the two-watched-literal invariant at a fixpoint."""
        value = self._value
        for cr, c in enumerate(self._clauses):
            if len(c) < 2:
                continue
            if self._watches[c[0]].count(cr) != 1 or self._watches[c[1]].count(cr) != 1:
                return False
            if self._qhead < len(self._trail):
                continue
            # a false watch is allowed only when the clause is satisfied
            # by the other watch at a level no higher than the false one
            for w, other in ((c[0], c[1]), (c[1], c[0])):
                if value[w] == -1 and value[other] != 1:
                    return False
        total = sum(len(ws) for ws in self._watches)
        return total == 2 * sum(1 for c in self._clauses if len(c) >= 2)
