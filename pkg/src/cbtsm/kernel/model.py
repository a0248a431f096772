"""Model containers and solution records for the LP/MILP kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"

LESS, EQUAL, GREATER = "<=", "=", ">="
_SENSE_CODE = {LESS: -1, EQUAL: 0, GREATER: 1}


class KernelError(Exception):
    pass


class NumericalFailure(KernelError):
    """Simplex exceeded its anti-cycling safeguards or hit unusable pivots."""


class WarmStartRejected(KernelError):
    def __init__(self, message: str, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class Variable:
    id: int
    name: str
    lower: float
    upper: float
    integrality: str = CONTINUOUS


@dataclass
class Row:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""


class MilpModel:
    """Sparse variable/row container consumed by the kernel solvers.

    ``lazy_cut_hook``, when set, is called at integer-feasible branch-and-bound
    nodes with the candidate solution vector; any rows it returns are appended
    to the model (they must be globally valid) and the node is re-solved.
    """

    def __init__(self, name: str = "model", sense: str = "max"):
        if sense not in ("max", "min"):
            raise ValueError(f"objective sense must be max or min, got {sense!r}")
        self.name = name
        self.sense = sense
        self.variables: list[Variable] = []
        self.rows: list[Row] = []
        self.objective: dict[int, float] = {}
        self.lazy_cut_hook = None
        self.warm_values: np.ndarray | None = None

    # -- construction -------------------------------------------------------

    def add_var(self, name: str = "", lower: float = 0.0, upper: float = math.inf,
                integrality: str = CONTINUOUS) -> int:
        if lower > upper:
            raise ValueError(f"variable {name!r}: lower {lower} > upper {upper}")
        if integrality not in (CONTINUOUS, BINARY):
            raise ValueError(f"unsupported integrality {integrality!r}")
        vid = len(self.variables)
        self.variables.append(Variable(vid, name or f"x{vid}", float(lower),
                                       float(upper), integrality))
        return vid

    def add_binary(self, name: str = "") -> int:
        return self.add_var(name, 0.0, 1.0, BINARY)

    def add_row(self, coeffs: dict[int, float], sense: str, rhs: float,
                name: str = "") -> int:
        if sense not in _SENSE_CODE:
            raise ValueError(f"unsupported row sense {sense!r}")
        nvars = len(self.variables)
        clean = {}
        for vid, coef in coeffs.items():
            if not 0 <= vid < nvars:
                raise ValueError(f"row {name!r} references unknown variable id {vid}")
            if not math.isfinite(coef):
                raise ValueError(f"row {name!r} has non-finite coefficient on id {vid}")
            if coef != 0.0:
                clean[vid] = float(coef)
        rid = len(self.rows)
        self.rows.append(Row(clean, sense, float(rhs), name or f"c{rid}"))
        return rid

    def set_objective(self, coeffs: dict[int, float], sense: str | None = None) -> None:
        if sense is not None:
            if sense not in ("max", "min"):
                raise ValueError(f"objective sense must be max or min, got {sense!r}")
            self.sense = sense
        self.objective = {int(k): float(v) for k, v in coeffs.items() if v != 0.0}

    # -- dense views ---------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def binary_ids(self) -> list[int]:
        return [v.id for v in self.variables if v.integrality == BINARY]

    def dense(self):
        """(A, sense codes, b, c, lb, ub) in the model's own objective sense."""
        m, n = len(self.rows), len(self.variables)
        A = np.zeros((m, n))
        b = np.zeros(m)
        senses = np.zeros(m, dtype=np.int8)
        for i, row in enumerate(self.rows):
            for vid, coef in row.coeffs.items():
                A[i, vid] = coef
            b[i] = row.rhs
            senses[i] = _SENSE_CODE[row.sense]
        c = np.zeros(n)
        for vid, coef in self.objective.items():
            c[vid] = coef
        lb = np.array([v.lower for v in self.variables])
        ub = np.array([v.upper for v in self.variables])
        return A, senses, b, c, lb, ub

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(coef * x[vid] for vid, coef in self.objective.items()))

    def row_residuals(self, x: np.ndarray) -> np.ndarray:
        """Constraint violations (0 when satisfied), one entry per row."""
        res = np.zeros(len(self.rows))
        for i, row in enumerate(self.rows):
            act = sum(coef * x[vid] for vid, coef in row.coeffs.items())
            if row.sense == LESS:
                res[i] = max(0.0, act - row.rhs)
            elif row.sense == GREATER:
                res[i] = max(0.0, row.rhs - act)
            else:
                res[i] = abs(act - row.rhs)
        return res

    # -- LP text export ------------------------------------------------------

    def to_lp_format(self) -> str:
        def term(coef: float, name: str) -> str:
            sign = "-" if coef < 0 else "+"
            return f"{sign} {abs(coef):.12g} {name}"

        names = [_sanitize(v.name) for v in self.variables]
        lines = [f"\\ {self.name}", "Maximize" if self.sense == "max" else "Minimize"]
        obj_terms = " ".join(term(c, names[vid]) for vid, c in sorted(self.objective.items()))
        lines.append(f" obj: {obj_terms.lstrip('+ ') or '0'}")
        lines.append("Subject To")
        for row in self.rows:
            body = " ".join(term(c, names[vid]) for vid, c in sorted(row.coeffs.items()))
            lines.append(f" {_sanitize(row.name)}: {body.lstrip('+ ') or '0'} {row.sense} {row.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            lo = "-inf" if math.isinf(v.lower) else f"{v.lower:.12g}"
            hi = "+inf" if math.isinf(v.upper) else f"{v.upper:.12g}"
            lines.append(f" {lo} <= {names[v.id]} <= {hi}")
        binaries = [names[i] for i in self.binary_ids()]
        if binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(binaries))
        lines.append("End")
        return "\n".join(lines) + "\n"

    def export_lp(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_lp_format())


def _sanitize(name: str) -> str:
    out = "".join(ch if ch.isalnum() or ch in "_[]()." else "_" for ch in name)
    return out or "v"


@dataclass
class LpSolution:
    """LP result with duals under the kernel's minimization convention.

    ``duals`` and ``reduced_costs`` always refer to the canonical min form
    (the objective is negated internally for max models), and satisfy
    min-objective = duals . rhs + reduced_costs . x at optimality.  For max
    models the reported ``objective`` is the model's own value, i.e. minus the
    canonical one.  ``farkas_ray``/``farkas_bound_term`` certify infeasibility:
    feasibility of rhs b' would require farkas_ray . b' + farkas_bound_term <= 0,
    while the solved rhs gives a strictly positive value.
    """
    status: str                     # optimal | infeasible | unbounded
    x: np.ndarray
    objective: float
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    farkas_ray: np.ndarray | None = None
    farkas_bound_term: float = 0.0
    iterations: int = 0

    @property
    def dual_bound_term(self) -> float:
        """Constant bound contribution: sum of reduced cost times final value."""
        if self.reduced_costs is None:
            return 0.0
        return float(np.dot(self.reduced_costs, self.x))


@dataclass
class MilpSolution:
    status: str                     # optimal | infeasible | gap_limit | time_limit
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int = 0
    lp_iterations: int = 0
    cuts_added: int = 0
    bound_trace: list | None = None   # running proven bound, one entry per node pop


def verify_farkas(A: np.ndarray, senses: np.ndarray, b: np.ndarray,
                  lb: np.ndarray, ub: np.ndarray, ray: np.ndarray,
                  tol: float = 1e-7) -> float:
    """Recompute an infeasibility certificate's margin from scratch.

    Checks the row-sense sign conditions on the ray and returns
    ray . b + sum_j min over [lb_j, ub_j] of (-(ray^T A)_j * x_j); a strictly
    positive value proves the system has no feasible point.  Raises on sign
    violations or when an unbounded box direction breaks the certificate.
    """
    for i, s in enumerate(senses):
        if s == -1 and ray[i] > tol:
            raise AssertionError(f"farkas ray row {i}: expected <=-row multiplier <= 0")
        if s == 1 and ray[i] < -tol:
            raise AssertionError(f"farkas ray row {i}: expected >=-row multiplier >= 0")
    yA = ray @ A
    total = float(ray @ b)
    for j in range(A.shape[1]):
        d = -yA[j]
        if abs(d) <= tol:
            continue
        bound = lb[j] if d > 0 else ub[j]
        if math.isinf(bound):
            raise AssertionError(f"farkas certificate leaks through unbounded var {j}")
        total += d * bound
    return total
