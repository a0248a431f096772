# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``simplex_py``: same canonical form, same pivot rules.

Keep this file in lockstep with simplex_py.py; the pure-Python module is the
readable reference, this one exists because the rank-1 tableau update is the
hot loop of every LP (and therefore of branch-and-bound and Benders on top).
"""

import numpy as np

from .model import NumericalFailure

cdef extern from "math.h":
    double HUGE_VAL
    double fabs(double)
    int isfinite(double)
    int isinf(double)

DEF NB_LOWER = 0
DEF NB_UPPER = 1
DEF NB_FREE = 2
DEF BASIC = 3

cdef double TOL_DUAL = 1e-9
cdef double TOL_PIVOT = 1e-9
cdef double TOL_FEAS = 1e-7
cdef int STALL_LIMIT = 400

OPTIMAL, INFEASIBLE, UNBOUNDED = 0, 1, 2


def solve_canonical(A, senses, b, c, lb, ub, int max_iter=0):
    A = np.ascontiguousarray(A, dtype=np.float64)
    cdef int m = A.shape[0]
    cdef int n = A.shape[1]
    cdef int nm = n + m
    if max_iter <= 0:
        max_iter = 2000 + 60 * (m + n)

    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef signed char[::1] sv = np.ascontiguousarray(senses, dtype=np.int8)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)

    L_np = np.empty(nm + m)
    U_np = np.empty(nm + m)
    L_np[:n] = lb
    U_np[:n] = ub
    cdef double[::1] L = L_np
    cdef double[::1] U = U_np
    cdef int i, j
    for i in range(m):
        if sv[i] == -1:
            L[n + i] = 0.0; U[n + i] = HUGE_VAL
        elif sv[i] == 1:
            L[n + i] = -HUGE_VAL; U[n + i] = 0.0
        else:
            L[n + i] = 0.0; U[n + i] = 0.0
    for i in range(m):
        L[nm + i] = 0.0; U[nm + i] = HUGE_VAL

    T_np = np.zeros((m, nm))
    T_np[:, :n] = A
    cdef double[:, ::1] T = T_np
    for i in range(m):
        T[i, n + i] = 1.0

    xval_np = np.zeros(nm + m)
    status_np = np.full(nm + m, NB_LOWER, dtype=np.int8)
    cdef double[::1] xval = xval_np
    cdef signed char[::1] status = status_np
    for j in range(nm):
        if isfinite(L[j]):
            xval[j] = L[j]; status[j] = NB_LOWER
        elif isfinite(U[j]):
            xval[j] = U[j]; status[j] = NB_UPPER
        else:
            xval[j] = 0.0; status[j] = NB_FREE

    # Crash basis: a row's slack starts basic whenever it can absorb the
    # residual; only the remaining rows get a basic artificial.
    xB_np = np.empty(m)
    basis_np = np.empty(m, dtype=np.int64)
    art_np = np.zeros(m, dtype=np.int8)
    cdef double[::1] xB = xB_np
    cdef long long[::1] basis = basis_np
    cdef signed char[::1] art_row = art_np
    cdef double resid, s, leftover, scale = 1.0
    for i in range(m):
        resid = bv[i]
        for j in range(nm):
            if T[i, j] != 0.0 and xval[j] != 0.0:
                resid -= T[i, j] * xval[j]
        s = resid
        if s < L[n + i]:
            s = L[n + i]
        elif s > U[n + i]:
            s = U[n + i]
        if s == resid:
            basis[i] = n + i
            status[n + i] = BASIC
            xB[i] = s
        else:
            xval[n + i] = s
            status[n + i] = NB_LOWER if s == L[n + i] else NB_UPPER
            leftover = resid - s
            if leftover < 0.0:
                for j in range(nm):
                    T[i, j] = -T[i, j]
                leftover = -leftover
            basis[i] = nm + i
            status[nm + i] = BASIC
            xB[i] = leftover
            art_row[i] = 1
        if fabs(bv[i]) + 1.0 > scale:
            scale = fabs(bv[i]) + 1.0

    d_np = np.zeros(nm)
    cdef double[::1] d = d_np
    for j in range(nm):
        resid = 0.0
        for i in range(m):
            if art_row[i]:
                resid += T[i, j]
        d[j] = -resid

    cdef int iters1 = 0, iters2 = 0, code
    code = _loop(T, xB, xval, status, basis, L, U, n, m, d, 1, max_iter, cv,
                 &iters1, 1e-10 * scale)
    if code == UNBOUNDED:
        raise NumericalFailure("phase-1 subproblem reported unbounded")
    cdef double infeas = 0.0
    for i in range(m):
        if basis[i] >= nm:
            infeas += xB[i]
    cdef object xall
    if infeas > TOL_FEAS * scale:
        xall = _solution(xval_np, basis_np, xB_np, n, m)
        return INFEASIBLE, xall[:n], -d_np[n:nm].copy(), d_np[:n].copy(), iters1

    for i in range(m):
        U[nm + i] = 0.0
    for i in range(m):
        if basis[i] >= nm and fabs(xB[i]) <= TOL_FEAS * scale:
            xB[i] = 0.0

    cdef double cb
    for j in range(nm):
        d[j] = cv[j] if j < n else 0.0
    for i in range(m):
        cb = cv[basis[i]] if basis[i] < n else 0.0
        if cb != 0.0:
            for j in range(nm):
                d[j] -= cb * T[i, j]

    code = _loop(T, xB, xval, status, basis, L, U, n, m, d, 2, max_iter, cv,
                 &iters2, 0.0)
    xall = _solution(xval_np, basis_np, xB_np, n, m)
    if code == UNBOUNDED:
        return UNBOUNDED, xall[:n], None, None, iters1 + iters2
    return OPTIMAL, xall[:n], -d_np[n:nm].copy(), d_np[:n].copy(), iters1 + iters2


def _solution(xval_np, basis_np, xB_np, int n, int m):
    x = xval_np[:n + m].copy()
    for i in range(m):
        if basis_np[i] < n + m:
            x[basis_np[i]] = xB_np[i]
    return x


cdef int _loop(double[:, ::1] T, double[::1] xB, double[::1] xval,
               signed char[::1] status, long long[::1] basis,
               double[::1] L, double[::1] U, int n, int m,
               double[::1] d, int phase, int max_iter, double[::1] cv,
               int *iters_out, double p1_stop) except -1:
    cdef int nm = n + m
    cdef bint bland = False
    cdef int stall = 0
    cdef double prev_obj = HUGE_VAL
    cdef int iters = 0
    cdef int q, i, j, r
    cdef double best, dirn, t_row, t_flip, t, piv, dq, enter_val, obj, w_i, lbb, ubb
    cdef long long leaving
    cdef signed char st

    while True:
        # pricing
        q = -1
        best = 0.0
        for j in range(nm):
            if U[j] <= L[j]:
                continue
            st = status[j]
            if st == BASIC:
                continue
            if (st == NB_LOWER or st == NB_FREE) and d[j] < -TOL_DUAL:
                if bland:
                    q = j; break
                if fabs(d[j]) > best:
                    best = fabs(d[j]); q = j
            elif (st == NB_UPPER or st == NB_FREE) and d[j] > TOL_DUAL:
                if bland:
                    q = j; break
                if fabs(d[j]) > best:
                    best = fabs(d[j]); q = j
        if q < 0:
            iters_out[0] = iters
            return OPTIMAL

        iters += 1
        if iters > max_iter:
            raise NumericalFailure(
                f"simplex exceeded {max_iter} iterations in phase {phase}")

        dirn = 1.0 if (d[q] < 0 and status[q] != NB_UPPER) else -1.0

        # ratio test
        t_row = HUGE_VAL
        r = -1
        for i in range(m):
            w_i = dirn * T[i, q]
            if w_i > TOL_PIVOT:
                lbb = L[basis[i]]
                if isfinite(lbb):
                    t = (xB[i] - lbb) / w_i
                else:
                    continue
            elif w_i < -TOL_PIVOT:
                ubb = U[basis[i]]
                if isfinite(ubb):
                    t = (xB[i] - ubb) / w_i
                else:
                    continue
            else:
                continue
            if t < 0.0:
                t = 0.0
            if t < t_row:
                t_row = t
                r = i
            elif t == t_row and r >= 0:
                if bland:
                    if basis[i] < basis[r]:
                        r = i
                else:
                    if fabs(w_i) > fabs(dirn * T[r, q]) or (
                            fabs(w_i) == fabs(dirn * T[r, q]) and basis[i] < basis[r]):
                        r = i
        t_flip = U[q] - L[q]

        if isinf(t_flip) and isinf(t_row):
            iters_out[0] = iters
            return UNBOUNDED
        if t_flip <= t_row:
            for i in range(m):
                xB[i] -= (dirn * t_flip) * T[i, q]
            if dirn > 0:
                xval[q] = U[q]; status[q] = NB_UPPER
            else:
                xval[q] = L[q]; status[q] = NB_LOWER
        else:
            piv = T[r, q]
            enter_val = xval[q] + dirn * t_row
            leaving = basis[r]
            if dirn * T[r, q] > 0:
                xval[leaving] = L[leaving]; status[leaving] = NB_LOWER
            else:
                xval[leaving] = U[leaving]; status[leaving] = NB_UPPER
            for i in range(m):
                xB[i] -= (dirn * t_row) * T[i, q]
            xB[r] = enter_val

            # eliminate column q (saving it first, row r scaled by 1/piv)
            for j in range(nm):
                T[r, j] /= piv
            for i in range(m):
                if i == r:
                    continue
                w_i = T[i, q]
                if w_i != 0.0:
                    for j in range(nm):
                        T[i, j] -= w_i * T[r, j]
            dq = d[q]
            if dq != 0.0:
                for j in range(nm):
                    d[j] -= dq * T[r, j]
            d[q] = 0.0
            basis[r] = q
            status[q] = BASIC

        # stall detection drives the Bland's-rule fallback
        if phase == 1:
            obj = 0.0
            for i in range(m):
                if basis[i] >= nm:
                    obj += xB[i]
        else:
            obj = 0.0
            for j in range(nm):
                if status[j] != BASIC and j < n and xval[j] != 0.0:
                    obj += cv[j] * xval[j]
            for i in range(m):
                if basis[i] < n:
                    obj += cv[basis[i]] * xB[i]
        if obj < prev_obj - 1e-9 * (1.0 + fabs(obj)):
            stall = 0
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True
        prev_obj = obj
        if phase == 1 and obj <= p1_stop:
            iters_out[0] = iters
            return OPTIMAL
