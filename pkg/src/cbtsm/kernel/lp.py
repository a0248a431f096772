"""LP solve front-end: canonicalization, dual conventions, certificates."""

from __future__ import annotations

import numpy as np

from . import _backend
from .model import LpSolution, MilpModel


def solve_lp(model: MilpModel, max_iter: int = 0) -> LpSolution:
    """Solve the LP relaxation of ``model`` (integrality markers ignored).

    Reported duals are shadow prices in the model's own sense, so that
    objective = duals . rhs + reduced_costs . x holds at optimality for both
    max and min models.  Infeasibility comes with a Farkas certificate in the
    sense-free convention of :func:`cbtsm.kernel.model.verify_farkas`.
    """
    A, senses, b, c, lb, ub = model.dense()
    return solve_lp_arrays(A, senses, b, c, lb, ub, model.sense, max_iter)


def solve_lp_arrays(A, senses, b, c, lb, ub, sense: str = "min",
                    max_iter: int = 0) -> LpSolution:
    sign = -1.0 if sense == "max" else 1.0
    status, x, y, d, iters = _backend.solve_canonical(
        np.asarray(A, dtype=np.float64), np.asarray(senses, dtype=np.int8),
        np.asarray(b, dtype=np.float64), sign * np.asarray(c, dtype=np.float64),
        np.asarray(lb, dtype=np.float64), np.asarray(ub, dtype=np.float64),
        max_iter)
    if status == _backend.OPTIMAL:
        return LpSolution(
            status="optimal", x=x, objective=float(np.dot(c, x)),
            duals=sign * y, reduced_costs=sign * d, iterations=iters)
    if status == _backend.INFEASIBLE:
        # Phase-1 certificate: y.b' + bound_term <= 0 is necessary for any
        # feasible right-hand side b'; the solved rhs violates it strictly.
        return LpSolution(
            status="infeasible", x=x, objective=float("nan"),
            farkas_ray=y, farkas_bound_term=float(np.dot(d, x)), iterations=iters)
    return LpSolution(status="unbounded", x=x,
                      objective=float("inf") if sense == "max" else float("-inf"),
                      iterations=iters)
