"""Self-contained LP/MILP kernel behind a small oracle interface.

``solve_lp`` / ``solve_milp`` are the kernel entry points; ``SolverOracle``
lets callers swap in a different engine (e.g. a commercial solver) without
touching model-building code.  The simplex inner loop ships as a compiled
Cython core with a pure numpy fallback (see ``_backend.BACKEND``).
"""

from ._backend import BACKEND
from .branch_bound import solve_milp, warm_start
from .lp import solve_lp, solve_lp_arrays
from .model import (BINARY, CONTINUOUS, EQUAL, GREATER, LESS, KernelError,
                    LpSolution, MilpModel, MilpSolution, NumericalFailure,
                    Row, Variable, WarmStartRejected, verify_farkas)


class SolverOracle:
    """Pluggable solver surface: anything with these two methods works."""

    def solve_lp(self, model: MilpModel, **kw) -> LpSolution:
        return solve_lp(model, **kw)

    def solve_milp(self, model: MilpModel, **kw) -> MilpSolution:
        return solve_milp(model, **kw)


DEFAULT_ORACLE = SolverOracle()

__all__ = [
    "BACKEND", "BINARY", "CONTINUOUS", "EQUAL", "GREATER", "LESS",
    "KernelError", "LpSolution", "MilpModel", "MilpSolution",
    "NumericalFailure", "Row", "SolverOracle", "DEFAULT_ORACLE", "Variable",
    "WarmStartRejected", "solve_lp", "solve_lp_arrays", "solve_milp",
    "verify_farkas", "warm_start",
]
