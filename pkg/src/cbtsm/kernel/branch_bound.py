"""Best-first branch and bound over binary variables, with lazy row hooks.

Node selection is best-bound with node-id tie breaking; branching picks the
most fractional binary (ties to the smallest variable id).  When the model
carries a ``lazy_cut_hook``, it is invoked at every integer-feasible node; any
rows it returns are appended globally and the node is re-solved, which is how
Benders cuts ride inside a single master tree.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from . import _backend
from .model import KernelError, MilpModel, MilpSolution, WarmStartRejected

INT_TOL = 1e-6
DEFAULT_GAP = 1e-6
PRUNE_TOL = 1e-9
MAX_HOOK_ROUNDS = 10_000


def warm_start(model: MilpModel, values) -> None:
    """Register a feasible starting point as the initial incumbent.

    ``values`` maps variable ids to values (or is a full vector).  Rejected
    with a residual report when it violates rows, bounds, or integrality.
    """
    x = np.zeros(model.n_vars)
    if isinstance(values, dict):
        for vid, val in values.items():
            x[vid] = val
    else:
        x[:] = np.asarray(values, dtype=float)
    residuals = model.row_residuals(x)
    worst = float(residuals.max()) if len(residuals) else 0.0
    problems = []
    if worst > 1e-6:
        bad = int(np.argmax(residuals))
        problems.append(f"row {model.rows[bad].name!r} violated by {worst:.3g}")
    for v in model.variables:
        if x[v.id] < v.lower - 1e-9 or x[v.id] > v.upper + 1e-9:
            problems.append(f"variable {v.name!r} out of bounds")
            break
    for vid in model.binary_ids():
        if abs(x[vid] - round(x[vid])) > INT_TOL:
            problems.append(f"variable {model.variables[vid].name!r} fractional")
            break
    if problems:
        raise WarmStartRejected("; ".join(problems), residuals)
    model.warm_values = x


def solve_milp(model: MilpModel, time_limit: float = math.inf,
               gap_tol: float = DEFAULT_GAP) -> MilpSolution:
    integer_ids = model.binary_ids()
    for vid in integer_ids:
        v = model.variables[vid]
        if v.lower < -INT_TOL or v.upper > 1 + INT_TOL:
            raise KernelError(f"integer variable {v.name!r} is not binary")

    sign = 1.0 if model.sense == "max" else -1.0   # internal score = sign * obj
    A, senses, b, c, lb0, ub0 = model.dense()
    cmin = -sign * c        # canonical minimization cost of the score

    start = time.monotonic()
    nodes_done = 0
    lp_iters = 0
    cuts_added = 0
    bound_trace: list[float] = []

    incumbent_x = None
    incumbent_score = -math.inf
    if model.warm_values is not None:
        incumbent_x = model.warm_values.copy()
        incumbent_score = sign * model.objective_value(incumbent_x)

    def rebuild():
        nonlocal A, senses, b
        A, senses, b, _, _, _ = model.dense()

    def node_lp(lbv, ubv):
        nonlocal lp_iters
        status, x, _, _, iters = _backend.solve_canonical(A, senses, b, cmin,
                                                          lbv, ubv, 0)
        lp_iters += iters
        if status == _backend.UNBOUNDED:
            raise KernelError("MILP relaxation is unbounded")
        if status == _backend.INFEASIBLE:
            return None, -math.inf
        return x, float(-np.dot(cmin, x))

    def within_gap(bound, inc):
        if inc == -math.inf or math.isinf(bound):
            return False
        return bound - inc <= gap_tol * max(abs(bound), 1e-12) + PRUNE_TOL

    heap = [(-math.inf, 0, (), ())]   # (-bound, node id, lb overrides, ub overrides)
    next_id = 1
    proven_bound = math.inf           # valid upper bound on the max score
    hit_time_limit = False

    while heap:
        neg_bound, _, lb_over, ub_over = heapq.heappop(heap)
        pop_bound = max(-neg_bound, incumbent_score)
        proven_bound = min(proven_bound, pop_bound)
        bound_trace.append(proven_bound)
        if within_gap(pop_bound, incumbent_score):
            break
        if time.monotonic() - start > time_limit:
            hit_time_limit = True
            break

        lbv = lb0.copy()
        ubv = ub0.copy()
        for vid, val in lb_over:
            lbv[vid] = val
        for vid, val in ub_over:
            ubv[vid] = val

        # Solve; the stored bound may be stale after globally added cuts, and
        # the lazy hook may force several re-solves at integer points.
        hook_rounds = 0
        keep = None
        while True:
            x, score = node_lp(lbv, ubv)
            nodes_done += 1
            if x is None or score <= incumbent_score + PRUNE_TOL:
                break
            fracs = [abs(x[v] - round(x[v])) for v in integer_ids]
            if fracs and max(fracs) > INT_TOL:
                keep = (x, score)
                break
            if model.lazy_cut_hook is not None:
                new_rows = model.lazy_cut_hook(x)
                if new_rows:
                    hook_rounds += 1
                    if hook_rounds > MAX_HOOK_ROUNDS:
                        raise KernelError("lazy cut hook did not converge")
                    for coeffs, rsense, rhs in new_rows:
                        model.add_row(coeffs, rsense, rhs)
                        cuts_added += 1
                    rebuild()
                    continue
            incumbent_x, incumbent_score = x.copy(), score
            break
        if keep is None:
            continue
        x, score = keep

        # Branch on the most fractional binary; ties to the smallest id.
        cands = [(abs(abs(x[v] - round(x[v])) - 0.5), v) for v in integer_ids
                 if abs(x[v] - round(x[v])) > INT_TOL]
        _, branch_var = min(cands)
        children = (
            (tuple(lb_over), tuple(ub_over) + ((branch_var, 0.0),)),
            (tuple(lb_over) + ((branch_var, 1.0),), tuple(ub_over)),
        )
        for lo, uo in children:
            heapq.heappush(heap, (-score, next_id, lo, uo))
            next_id += 1

    if not hit_time_limit and not heap:
        # Search exhausted: the incumbent (if any) is proven optimal.
        proven_bound = incumbent_score if incumbent_x is not None else -math.inf
    # On a gap break the last popped bound already equals the proven bound;
    # remaining heap entries are no better (best-first order).

    trace = [sign * v for v in bound_trace]
    if incumbent_x is None:
        st = "time_limit" if hit_time_limit else "infeasible"
        return MilpSolution(st, None, math.nan, sign * proven_bound, math.inf,
                            nodes=nodes_done, lp_iterations=lp_iters,
                            cuts_added=cuts_added, bound_trace=trace)

    bound = max(proven_bound, incumbent_score)
    gap = (bound - incumbent_score) / max(abs(bound), 1e-12)
    if hit_time_limit:
        st = "time_limit"
    elif gap <= DEFAULT_GAP + 1e-15:
        st = "optimal"
    else:
        st = "gap_limit"
    return MilpSolution(st, incumbent_x, sign * incumbent_score, sign * bound,
                        max(gap, 0.0), nodes=nodes_done, lp_iterations=lp_iters,
                        cuts_added=cuts_added, bound_trace=trace)
