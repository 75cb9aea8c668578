# distutils: language = c++
"""Compiled CDCL kernel.

Operation-for-operation mirror of ``_kernel_py.Kernel``; any change to one must
be made to the other (``tests/test_kernel_backends.py`` compares traces).
"""
from libcpp.vector cimport vector

cdef double RESCALE_LIMIT = 1e100
cdef double RESCALE_FACTOR = 1e-100


cdef class Kernel:
    cdef public int num_vars
    cdef public int n_original
    cdef public double var_inc
    cdef public double var_decay
    cdef public bint ok
    cdef public long long propagations
    cdef public long long conflicts
    cdef public long long decisions
    cdef vector[signed char] _value
    cdef vector[int] _level
    cdef vector[int] _reason
    cdef vector[double] _activity
    cdef vector[int] _polarity
    cdef vector[char] _seen
    cdef vector[int] _trail
    cdef vector[int] _trail_lim
    cdef int _qhead
    cdef vector[vector[int]] _clauses
    cdef vector[vector[int]] _watches

    backend = "cython"

    def __init__(self, num_vars, var_decay=0.95, var_inc=1.0):
        if not 0.0 < var_decay < 1.0:
            raise ValueError("var_decay must lie in (0, 1)")
        cdef int n = int(num_vars)
        self.num_vars = n
        self._value.assign(2 * n, 0)
        self._level.assign(n, 0)
        self._reason.assign(n, -1)
        self._activity.assign(n, 0.0)
        self._polarity.assign(n, 1)
        self._seen.assign(n, 0)
        self._watches.resize(2 * n)
        self._qhead = 0
        self.n_original = 0
        self.var_inc = float(var_inc)
        self.var_decay = float(var_decay)
        self.ok = True
        self.propagations = 0
        self.conflicts = 0
        self.decisions = 0

    # -- clause database ------------------------------------------------------

    def add_clause(self, lits):
        if self._trail_lim.size():
            raise RuntimeError("original clauses are added at level 0 only")
        if self.n_original != <int>self._clauses.size():
            raise RuntimeError("original clauses must precede learned ones")
        cdef int cr = self._clauses.size()
        cdef vector[int] c
        for l in lits:
            c.push_back(l)
        self._clauses.push_back(c)
        self.n_original += 1
        cdef signed char v
        if c.size() == 0:
            self.ok = False
        elif c.size() == 1:
            v = self._value[c[0]]
            if v == -1:
                self.ok = False
            elif v == 0:
                self._enqueue(c[0], cr)
        else:
            self._watches[c[0]].push_back(cr)
            self._watches[c[1]].push_back(cr)
        return cr

    cdef int _add_learnt(self, vector[int]& c):
        cdef int cr = self._clauses.size()
        self._clauses.push_back(c)
        if c.size() >= 2:
            self._watches[c[0]].push_back(cr)
            self._watches[c[1]].push_back(cr)
        self._enqueue(c[0], cr)
        return cr

    def add_learnt(self, lits):
        cdef vector[int] c
        for l in lits:
            c.push_back(l)
        return self._add_learnt(c)

    @property
    def num_clauses(self):
        return self._clauses.size()

    def clause(self, int cr):
        return list(self._clauses[cr])

    # -- assignment -----------------------------------------------------------

    cdef inline void _enqueue(self, int lit, int reason):
        self._value[lit] = 1
        self._value[lit ^ 1] = -1
        cdef int v = lit >> 1
        self._level[v] = self._trail_lim.size()
        self._reason[v] = reason
        self._trail.push_back(lit)
        if reason >= 0:
            self.propagations += 1

    def decide(self, int lit):
        if self._value[lit] != 0:
            raise ValueError("decision on an assigned variable")
        self._trail_lim.push_back(self._trail.size())
        self.decisions += 1
        self._enqueue(lit, -1)

    @property
    def decision_level(self):
        return self._trail_lim.size()

    def lit_value(self, int lit):
        return self._value[lit]

    def var_level(self, int v):
        return self._level[v]

    def var_reason(self, int v):
        return self._reason[v] if self._value[2 * v] != 0 else -1

    @property
    def trail(self):
        return list(self._trail)

    @property
    def trail_lim(self):
        return list(self._trail_lim)

    @property
    def num_assigned(self):
        return self._trail.size()

    def var_values(self):
        cdef int v
        return [self._value[2 * v] for v in range(self.num_vars)]

    # -- propagation ----------------------------------------------------------

    cdef int _propagate(self):
        cdef int confl = -1
        cdef int p, false_lit, cr, first, k, tmp
        cdef size_t i, j, n
        cdef bint found
        cdef vector[int]* ws
        cdef vector[int]* c
        while self._qhead < <int>self._trail.size():
            p = self._trail[self._qhead]
            self._qhead += 1
            false_lit = p ^ 1
            ws = &self._watches[false_lit]
            n = ws.size()
            i = 0
            j = 0
            while i < n:
                cr = ws[0][i]
                i += 1
                c = &self._clauses[cr]
                if c[0][0] == false_lit:
                    c[0][0] = c[0][1]
                    c[0][1] = false_lit
                first = c[0][0]
                if self._value[first] == 1:
                    ws[0][j] = cr
                    j += 1
                    continue
                found = False
                for k in range(2, <int>c.size()):
                    if self._value[c[0][k]] != -1:
                        c[0][1] = c[0][k]
                        c[0][k] = false_lit
                        # push_back may not touch ws: c[0][1] != false_lit
                        self._watches[c[0][1]].push_back(cr)
                        found = True
                        break
                if found:
                    continue
                ws[0][j] = cr
                j += 1
                if self._value[first] == -1:
                    confl = cr
                    self._qhead = self._trail.size()
                    while i < n:
                        ws[0][j] = ws[0][i]
                        j += 1
                        i += 1
                else:
                    self._enqueue(first, cr)
            ws.resize(j)
            if confl >= 0:
                break
        return confl

    def propagate(self):
        return self._propagate()

    # -- conflict analysis ----------------------------------------------------

    cdef int _analyze(self, int confl, vector[int]& learnt) except -2:
        cdef int cur = self._trail_lim.size()
        cdef vector[int] bumped
        cdef int path_c = 0
        cdef int p = -1
        cdef int index = self._trail.size() - 1
        cdef int k, q, v, mi, bt, tmp
        cdef vector[int]* c
        learnt.clear()
        learnt.push_back(-1)
        while True:
            c = &self._clauses[confl]
            for k in range(0 if p == -1 else 1, <int>c.size()):
                q = c[0][k]
                v = q >> 1
                if not self._seen[v] and self._level[v] > 0:
                    self._seen[v] = 1
                    bumped.push_back(v)
                    if self._level[v] >= cur:
                        path_c += 1
                    else:
                        learnt.push_back(q)
            while not self._seen[self._trail[index] >> 1]:
                index -= 1
            p = self._trail[index]
            index -= 1
            confl = self._reason[p >> 1]
            self._seen[p >> 1] = 0
            path_c -= 1
            if path_c == 0:
                break
        learnt[0] = p ^ 1
        for k in range(<int>learnt.size()):
            self._seen[learnt[k] >> 1] = 0
        if learnt.size() == 1:
            bt = 0
        else:
            mi = 1
            for k in range(2, <int>learnt.size()):
                if self._level[learnt[k] >> 1] > self._level[learnt[mi] >> 1]:
                    mi = k
            tmp = learnt[1]
            learnt[1] = learnt[mi]
            learnt[mi] = tmp
            bt = self._level[learnt[1] >> 1]
        self._bump_and_decay(bumped)
        return bt

    def analyze(self, int confl):
        if self._trail_lim.size() == 0:
            raise ValueError("conflict at level 0: formula is UNSAT")
        cdef vector[int] learnt
        bt = self._analyze(confl, learnt)
        return list(learnt), bt

    cdef void _cancel_until(self, int lvl):
        if <int>self._trail_lim.size() <= lvl:
            return
        cdef int start = self._trail_lim[lvl]
        cdef int k, x, v
        for k in range(<int>self._trail.size() - 1, start - 1, -1):
            x = self._trail[k]
            v = x >> 1
            self._value[x] = 0
            self._value[x ^ 1] = 0
            self._reason[v] = -1
            self._polarity[v] = x & 1
        self._trail.resize(start)
        self._trail_lim.resize(lvl)
        self._qhead = start

    def cancel_until(self, int lvl):
        self._cancel_until(lvl)

    def resolve(self):
        if not self.ok:
            return 1
        cdef int confl, bt
        cdef vector[int] learnt
        while True:
            confl = self._propagate()
            if confl < 0:
                return 0
            self.conflicts += 1
            if self._trail_lim.size() == 0:
                self.ok = False
                return 1
            bt = self._analyze(confl, learnt)
            self._cancel_until(bt)
            self._add_learnt(learnt)

    # -- VSIDS ----------------------------------------------------------------

    cdef void _bump_and_decay(self, vector[int]& vars):
        cdef double inc = self.var_inc
        cdef int u, v
        cdef size_t k
        for k in range(vars.size()):
            v = vars[k]
            self._activity[v] += inc
            if self._activity[v] > RESCALE_LIMIT:
                for u in range(self.num_vars):
                    self._activity[u] *= RESCALE_FACTOR
                inc *= RESCALE_FACTOR
        self.var_inc = inc / self.var_decay

    def bump_and_decay(self, vars):
        cdef vector[int] vs
        for v in vars:
            vs.push_back(v)
        self._bump_and_decay(vs)

    def rescale(self, double factor):
        cdef int u
        for u in range(self.num_vars):
            self._activity[u] *= factor
        self.var_inc *= factor

    def pick_branch_lit(self):
        cdef int best = -1
        cdef double best_act = -1.0
        cdef int v
        for v in range(self.num_vars):
            if self._value[2 * v] == 0 and self._activity[v] > best_act:
                best = v
                best_act = self._activity[v]
        if best < 0:
            return -1
        return 2 * best + self._polarity[best]

    @property
    def activity(self):
        return list(self._activity)

    def set_activity(self, int v, double a):
        self._activity[v] = a

    @property
    def polarity(self):
        return list(self._polarity)

    # -- queries used by the environment --------------------------------------

    def originals_satisfied(self):
        cdef int cr
        cdef size_t k
        cdef bint sat
        cdef vector[int]* c
        for cr in range(self.n_original):
            c = &self._clauses[cr]
            sat = False
            for k in range(c.size()):
                if self._value[c[0][k]] == 1:
                    sat = True
                    break
            if not sat:
                return False
        return True

    def residual(self):
        cdef vector[int] clause_ids, edge_slot, edge_lit, free
        cdef int cr, slot, l
        cdef signed char x
        cdef size_t k
        cdef bint sat
        cdef vector[int]* c
        for cr in range(<int>self._clauses.size()):
            c = &self._clauses[cr]
            free.clear()
            sat = False
            for k in range(c.size()):
                l = c[0][k]
                x = self._value[l]
                if x == 1:
                    sat = True
                    break
                if x == 0:
                    free.push_back(l)
            if not sat and free.size():
                slot = clause_ids.size()
                clause_ids.push_back(cr)
                for k in range(free.size()):
                    edge_slot.push_back(slot)
                    edge_lit.push_back(free[k])
        return list(clause_ids), list(edge_slot), list(edge_lit)

    def check_watches(self):
        cdef int cr, w, other, cnt0, cnt1, total_watch, total_clause
        cdef size_t k
        cdef vector[int]* c
        total_clause = 0
        for cr in range(<int>self._clauses.size()):
            c = &self._clauses[cr]
            if c.size() < 2:
                continue
            total_clause += 1
            cnt0 = 0
            cnt1 = 0
            for k in range(self._watches[c[0][0]].size()):
                if self._watches[c[0][0]][k] == cr:
                    cnt0 += 1
            for k in range(self._watches[c[0][1]].size()):
                if self._watches[c[0][1]][k] == cr:
                    cnt1 += 1
            if cnt0 != 1 or cnt1 != 1:
                return False
            if self._qhead < <int>self._trail.size():
                continue
            if self._value[c[0][0]] == -1 and self._value[c[0][1]] != 1:
                return False
            if self._value[c[0][1]] == -1 and self._value[c[0][0]] != 1:
                return False
        total_watch = 0
        for k in range(self._watches.size()):
            total_watch += self._watches[k].size()
        return total_watch == 2 * total_clause
