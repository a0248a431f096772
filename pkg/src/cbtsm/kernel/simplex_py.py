"""Two-phase bounded-variable tableau simplex (pure numpy backend).

Canonical problem: min c.x subject to A x (sense) b with lb <= x <= ub, where
sense codes are -1 (<=), 0 (=), +1 (>=).  One slack column per row turns every
row into an equality (slack bounds encode the sense); phase 1 starts from an
all-artificial basis whose columns are never materialized (artificials only
appear as basis labels, so pivots touch structural and slack columns only).

The Cython backend in ``_simplex.pyx`` mirrors this file pivot for pivot; any
behavioral change here must be ported there.

Pricing is Dantzig's rule with lowest-index tie breaking; after a run of
non-improving pivots the solver switches to Bland's rule, which guarantees
termination.  Duals are read off the slack reduced costs (y_i = -d_slack_i)
and satisfy min-objective = y.b + d.x at optimality.
"""

from __future__ import annotations

import math

import numpy as np

from .model import NumericalFailure

OPTIMAL, INFEASIBLE, UNBOUNDED = 0, 1, 2

NB_LOWER, NB_UPPER, NB_FREE, BASIC = 0, 1, 2, 3

TOL_DUAL = 1e-9
TOL_PIVOT = 1e-9
TOL_FEAS = 1e-7
STALL_LIMIT = 400


def solve_canonical(A, senses, b, c, lb, ub, max_iter: int = 0):
    """Returns (status, x, y, d, iterations); see module docstring for duals.

    On INFEASIBLE, (x, y, d) hold the phase-1 point and its certificate; on
    UNBOUNDED they hold the last basic point with duals set to None.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    m, n = A.shape
    nm = n + m
    if max_iter <= 0:
        max_iter = 2000 + 60 * (m + n)

    # Column data: structural then slack; artificials are labels nm..nm+m-1.
    L = np.empty(nm + m)
    U = np.empty(nm + m)
    L[:n], U[:n] = lb, ub
    for i in range(m):
        if senses[i] == -1:
            L[n + i], U[n + i] = 0.0, math.inf
        elif senses[i] == 1:
            L[n + i], U[n + i] = -math.inf, 0.0
        else:
            L[n + i], U[n + i] = 0.0, 0.0
    L[nm:] = 0.0
    U[nm:] = math.inf

    T = np.zeros((m, nm))
    T[:, :n] = A
    T[:, n:] = np.eye(m)

    xval = np.zeros(nm + m)
    status = np.full(nm + m, NB_LOWER, dtype=np.int8)
    for j in range(nm):
        if math.isfinite(L[j]):
            xval[j], status[j] = L[j], NB_LOWER
        elif math.isfinite(U[j]):
            xval[j], status[j] = U[j], NB_UPPER
        else:
            xval[j], status[j] = 0.0, NB_FREE

    # Crash basis: a row's slack starts basic whenever it can absorb the
    # residual; only the remaining rows get a basic artificial.
    resid = b - T @ xval[:nm]
    xB = np.empty(m)
    basis = np.empty(m, dtype=np.int64)
    art_rows = []
    for i in range(m):
        s = min(max(resid[i], L[n + i]), U[n + i])
        if s == resid[i]:
            basis[i] = n + i
            status[n + i] = BASIC
            xB[i] = s
        else:
            xval[n + i], status[n + i] = s, (NB_LOWER if s == L[n + i] else NB_UPPER)
            leftover = resid[i] - s
            if leftover < 0:
                T[i] *= -1.0
                leftover = -leftover
            basis[i] = nm + i
            status[nm + i] = BASIC
            xB[i] = leftover
            art_rows.append(i)

    state = _State(T, xB, xval, status, basis, L, U, n, m)
    scale = 1.0 + float(np.max(np.abs(b))) if m else 1.0

    # Phase 1: minimize the sum of basic artificials.
    d = -T[art_rows].sum(axis=0) if art_rows else np.zeros(nm)
    code, iters1 = _loop(state, d, phase=1, max_iter=max_iter,
                         p1_stop=1e-10 * scale)
    if code == UNBOUNDED:
        raise NumericalFailure("phase-1 subproblem reported unbounded")
    infeas = sum(state.xB[i] for i in range(m) if state.basis[i] >= nm)
    if infeas > TOL_FEAS * scale:
        x = state.solution()
        y = -d[n:nm].copy()
        return INFEASIBLE, x[:n], y, d[:n].copy(), iters1

    # Lock remaining (degenerate) artificials at zero and restore real costs.
    U[nm:] = 0.0
    for i in range(m):
        if state.basis[i] >= nm and abs(state.xB[i]) <= TOL_FEAS * scale:
            state.xB[i] = 0.0

    cost = np.zeros(nm + m)
    cost[:n] = c
    cB = cost[state.basis]
    d = cost[:nm] - cB @ state.T

    code, iters2 = _loop(state, d, phase=2, max_iter=max_iter, cost=cost)
    x = state.solution()
    if code == UNBOUNDED:
        return UNBOUNDED, x[:n], None, None, iters1 + iters2
    y = -d[n:nm].copy()
    return OPTIMAL, x[:n], y, d[:n].copy(), iters1 + iters2


class _State:
    def __init__(self, T, xB, xval, status, basis, L, U, n, m):
        self.T, self.xB, self.xval = T, xB, xval
        self.status, self.basis = status, basis
        self.L, self.U = L, U
        self.n, self.m = n, m

    def solution(self) -> np.ndarray:
        x = self.xval[: self.n + self.m].copy()
        for i in range(self.m):
            if self.basis[i] < self.n + self.m:
                x[self.basis[i]] = self.xB[i]
        return x


def _phase1_objective(state) -> float:
    nm = state.n + state.m
    return sum(state.xB[i] for i in range(state.m) if state.basis[i] >= nm)


def _phase2_objective(state, cost) -> float:
    nm = state.n + state.m
    nb = state.status[:nm] != BASIC
    total = float(np.dot(cost[:nm][nb], state.xval[:nm][nb]))
    total += float(np.dot(cost[state.basis], state.xB))
    return total


def _loop(state, d, phase: int, max_iter: int, cost=None, p1_stop: float = 0.0):
    T, xB, xval = state.T, state.xB, state.xval
    status, basis, L, U = state.status, state.basis, state.L, state.U
    m, nm = state.m, state.n + state.m

    bland = False
    stall = 0
    prev_obj = math.inf
    iters = 0
    not_fixed = U[:nm] > L[:nm]

    while True:
        at_lower = (status[:nm] == NB_LOWER) | (status[:nm] == NB_FREE)
        at_upper = (status[:nm] == NB_UPPER) | (status[:nm] == NB_FREE)
        eligible = not_fixed & (
            (at_lower & (d < -TOL_DUAL)) | (at_upper & (d > TOL_DUAL))
        )
        idx = np.nonzero(eligible)[0]
        if idx.size == 0:
            return OPTIMAL, iters

        iters += 1
        if iters > max_iter:
            raise NumericalFailure(
                f"simplex exceeded {max_iter} iterations in phase {phase}")

        if bland:
            q = int(idx[0])
        else:
            q = int(idx[np.argmax(np.abs(d[idx]))])
        dirn = 1.0 if (d[q] < 0 and status[q] != NB_UPPER) else -1.0
        col = T[:, q]
        w = dirn * col

        # Ratio test: first blocking basic bound, or a bound flip of q itself.
        LBb = L[basis]
        UBb = U[basis]
        with np.errstate(divide="ignore", invalid="ignore"):
            tpos = np.where(w > TOL_PIVOT, (xB - LBb) / w, math.inf)
            tneg = np.where(w < -TOL_PIVOT, (xB - UBb) / w, math.inf)
        tvals = np.minimum(tpos, tneg)
        tvals = np.maximum(tvals, 0.0)
        np.nan_to_num(tvals, copy=False, nan=math.inf)
        t_row = float(tvals.min()) if m else math.inf
        t_flip = U[q] - L[q]

        if math.isinf(t_flip) and math.isinf(t_row):
            return UNBOUNDED, iters
        if t_flip <= t_row:
            xB -= (dirn * t_flip) * col
            if dirn > 0:
                xval[q], status[q] = U[q], NB_UPPER
            else:
                xval[q], status[q] = L[q], NB_LOWER
        elif math.isinf(t_row):
            return UNBOUNDED, iters
        else:
            ties = np.nonzero(tvals == t_row)[0]
            if bland:
                r = int(min(ties, key=lambda i: basis[i]))
            else:
                r = int(min(ties, key=lambda i: (-abs(w[i]), basis[i])))
            piv = T[r, q]
            enter_val = xval[q] + dirn * t_row

            leaving = int(basis[r])
            if w[r] > 0:
                xval[leaving], status[leaving] = L[leaving], NB_LOWER
            else:
                xval[leaving], status[leaving] = U[leaving], NB_UPPER

            xB -= (dirn * t_row) * col
            xB[r] = enter_val

            colq = T[:, q].copy()
            trow = T[r] / piv
            T -= np.outer(colq, trow)
            T[r] = trow
            dq = d[q]
            d -= dq * trow
            d[q] = 0.0
            basis[r] = q
            status[q] = BASIC

        obj = _phase1_objective(state) if phase == 1 else _phase2_objective(state, cost)
        if obj < prev_obj - 1e-9 * (1.0 + abs(obj)):
            stall = 0
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True
        prev_obj = obj
        if phase == 1 and obj <= p1_stop:
            return OPTIMAL, iters
