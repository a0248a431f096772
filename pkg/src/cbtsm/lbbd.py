"""Two-phase logic-based Benders decomposition.

Phase 1 runs classical Benders against LP-relaxed routing subproblems (dual
optimality cuts / Farkas feasibility cuts); phase 2 switches to exact (or
column-generation) routing and the designed combinatorial cuts.  The master
keeps the assortment and the full choice block, so its transfer variables are
the per-scenario choices w; every generated cut is instantiated for all
scenarios (the routing data is scenario-independent, so a cut derived from one
scenario's choices is valid for any other scenario's choice vector).

Cut kinds:

* ``lbbd_optimality``: bounds the scenario profit epigraph z by the choice
  income minus the generating routing cost, relaxed by twice the worst leg
  cost of each dropped (slot, customer) pair.  The worst-leg set includes the
  depot: without it a route that loses all its customers (or a singleton
  route) relaxes the bound by less than the cost it actually saves, and the
  cut would cut off true optima.
* ``lbbd_feasibility``: at least one (slot, customer) pair of an unroutable
  choice set must be dropped; supersets stay unroutable, so the cut is exact.
* ``bd_optimality`` / ``bd_feasibility``: textbook dual cuts from the relaxed
  subproblem; every right-hand side that depends on w (visit counts, window
  bounds) enters the cut with its w expression.
* ``no_good``: the baseline assignment cut, linearized with an auxiliary
  "assortment unchanged" indicator; kept only for benchmarking.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .choice import compute_big_m, option_revenues, utilities
from .instance import Instance, OfferSet, ScenarioSet
from .kernel import DEFAULT_ORACLE, MilpModel
from .model_build import ProfitReport, evaluate_choices, solve_routing_exact


@dataclass
class Cut:
    kind: str                     # no_good | lbbd_* | bd_*
    coeffs_w: dict                # (option, customer) -> coefficient
    coeff_z: float                # multiplier on z_rhat (0 for feasibility)
    rhs: float
    origin_scenario: int
    signature: tuple = ()
    gamma_terms: dict | None = None    # only no-good cuts touch gamma
    big_m: float = 0.0                 # relaxation constant of no-good cuts


@dataclass
class SubproblemResult:
    status: str                    # optimal | infeasible
    routing_cost: float
    routes: list                   # per vehicle, ordered customer lists
    served: list                   # Omega_r as (slot, customer) pairs
    max_leg: dict                  # customer -> max arc cost within its route
    income: float
    heuristic: bool = False


@dataclass
class LogEntry:
    phase: int
    iteration: int
    ub: float
    lb: float
    gap: float
    cuts_added: int
    wall: float


@dataclass
class ConvergenceLog:
    entries: list[LogEntry] = field(default_factory=list)

    def add(self, *args):
        self.entries.append(LogEntry(*args))

    def to_csv(self) -> str:
        lines = ["phase,iteration,ub,lb,gap,cuts_added,wall_seconds"]
        for e in self.entries:
            lines.append(f"{e.phase},{e.iteration},{e.ub:.9g},{e.lb:.9g},"
                         f"{e.gap:.9g},{e.cuts_added},{e.wall:.3f}")
        return "\n".join(lines) + "\n"


@dataclass
class MasterIds:
    gamma: np.ndarray
    w: np.ndarray
    u: np.ndarray
    U: np.ndarray
    z: np.ndarray
    q: int


@dataclass
class MasterState:
    model: MilpModel
    ids: MasterIds
    cut_pool: list[Cut] = field(default_factory=list)
    signatures: set = field(default_factory=set)
    ub: float = math.inf
    lb: float = -math.inf
    iteration: int = 0


@dataclass
class LbbdResult:
    status: str                   # optimal | gap_limit | time_limit
    objective: float
    bound: float
    gap: float
    assortment: np.ndarray        # gamma matrix of the incumbent
    profit: ProfitReport
    log: ConvergenceLog
    iterations: int
    cuts_by_kind: dict[str, int]
    heuristic: bool = False


# ---------------------------------------------------------------------------
# Master problem


def build_master(instance: Instance, offer: OfferSet, scenarios: ScenarioSet,
                 force_full_slots: bool = False) -> MasterState:
    """Assortment + choice block plus per-scenario profit epigraphs z_r.

    z_r starts bounded only by the choice income (routing costs are
    nonnegative, so z_r <= income(w_r) is valid before any cut arrives).
    """
    I, C, R = offer.n_options, instance.n_customers, scenarios.R
    rho = option_revenues(offer, instance.base_fee, instance.revenue_mode)
    big = compute_big_m(scenarios, offer, instance.base_fee)
    base_u = utilities(offer, scenarios, instance.base_fee)

    m = MilpModel(name="lbbd_master", sense="max")
    gamma = np.asarray([[m.add_binary(f"g[{i},{n}]") for n in range(C)]
                        for i in range(I)], dtype=np.int64).reshape(I, C)
    w = np.asarray([[[m.add_binary(f"w[{i},{n},{r}]") for r in range(R)]
                     for n in range(C)] for i in range(I)],
                   dtype=np.int64).reshape(I, C, R)
    u = np.asarray([[[m.add_var(f"u[{i},{n},{r}]", -math.inf, math.inf)
                      for r in range(R)] for n in range(C)] for i in range(I)],
                   dtype=np.int64).reshape(I, C, R)
    U = np.asarray([[m.add_var(f"U[{n},{r}]", -math.inf, math.inf)
                     for r in range(R)] for n in range(C)],
                   dtype=np.int64).reshape(C, R)
    z = np.asarray([m.add_var(f"z[{r}]", -math.inf, math.inf) for r in range(R)],
                   dtype=np.int64)
    q = m.add_var("Q", -math.inf, math.inf)

    for n in range(C):
        m.add_row({gamma[0, n]: 1.0}, "=", 1.0, f"optout[{n}]")
        m.add_row({gamma[i, n]: 1.0 for i in range(I)}, ">=",
                  float(instance.min_offer), f"min_offer[{n}]")
    for t, ids in offer.slot_groups.items():
        for n in range(C):
            m.add_row({gamma[i, n]: 1.0 for i in ids},
                      "=" if force_full_slots else "<=", 1.0,
                      f"one_price[{t},{n}]")
    for i in range(I):
        for n in range(C):
            for r in range(R):
                p = float(big.m_link[n, r])
                m.add_row({u[i, n, r]: 1.0, gamma[i, n]: -p}, "=",
                          float(base_u[i, n, r]) - p, f"udef[{i},{n},{r}]")
    for n in range(C):
        for r in range(R):
            m.add_row({w[i, n, r]: 1.0 for i in range(I)}, "=", 1.0,
                      f"choice[{n},{r}]")
    for i in range(I):
        for n in range(C):
            for r in range(R):
                m.add_row({U[n, r]: 1.0, u[i, n, r]: -1.0}, ">=", 0.0,
                          f"umax[{i},{n},{r}]")
                mu = float(big.m_utility[n, r])
                m.add_row({U[n, r]: 1.0, u[i, n, r]: -1.0, w[i, n, r]: mu},
                          "<=", mu, f"upick[{i},{n},{r}]")
    for i in range(1, I):
        for n in range(C):
            for r in range(R):
                m.add_row({w[i, n, r]: 1.0, gamma[i, n]: -1.0}, "<=", 0.0,
                          f"wlink[{i},{n},{r}]")
    for n in range(C):
        for r in range(R):
            for i in range(I):
                for j in range(I):
                    if i == j or base_u[i, n, r] <= base_u[j, n, r] + 1e-12:
                        continue
                    if i == 0:
                        m.add_row({w[j, n, r]: 1.0}, "<=", 0.0,
                                  f"dom[{i},{j},{n},{r}]")
                    else:
                        m.add_row({w[j, n, r]: 1.0, gamma[i, n]: 1.0}, "<=", 1.0,
                                  f"dom[{i},{j},{n},{r}]")

    for r in range(R):
        coeffs = {z[r]: 1.0}
        for i in range(1, I):
            if rho[i] == 0.0:
                continue
            for n in range(C):
                coeffs[w[i, n, r]] = -float(rho[i])
        m.add_row(coeffs, "<=", 0.0, f"z_income[{r}]")
    qrow = {q: 1.0}
    for r in range(R):
        qrow[z[r]] = -1.0 / R
    m.add_row(qrow, "<=", 0.0, "value_link")
    m.set_objective({q: 1.0}, "max")

    ids = MasterIds(gamma=gamma, w=w, u=u, U=U, z=z, q=q)
    return MasterState(model=m, ids=ids)


def instantiate_cut(state: MasterState, cut: Cut) -> int:
    """Add one cut's rows (shared across every scenario) to the master."""
    if cut.signature in state.signatures:
        return 0
    state.signatures.add(cut.signature)
    state.cut_pool.append(cut)
    m = state.model
    ids = state.ids
    R = ids.z.shape[0]
    added = 0
    if cut.kind == "no_good":
        # z_r <= z* + M (1 - same) for the origin scenario, where same = 1 iff
        # gamma reproduces the generating assortment exactly.  The Hamming
        # distance D is linear in gamma; two rows pin the indicator:
        # same + D >= 1 (forced on when identical), total*same + D <= total.
        tag = len(state.cut_pool)
        same = m.add_binary(f"ng_same[{tag}]")
        dist = {}
        const = 0.0      # constant part of D
        for (i, n), g_val in cut.gamma_terms.items():
            gid = int(ids.gamma[i, n])
            if g_val >= 0.5:
                dist[gid] = dist.get(gid, 0.0) - 1.0
                const += 1.0
            else:
                dist[gid] = dist.get(gid, 0.0) + 1.0
        total = float(len(cut.gamma_terms))
        row_force = dict(dist)
        row_force[same] = 1.0
        m.add_row(row_force, ">=", 1.0 - const, f"ng_force[{tag}]")
        row_off = dict(dist)
        row_off[same] = total
        m.add_row(row_off, "<=", total - const, f"ng_off[{tag}]")
        m.add_row({int(ids.z[cut.origin_scenario]): 1.0, same: cut.big_m}, "<=",
                  cut.rhs + cut.big_m, f"no_good[{tag}]")
        added += 3
    else:
        for rh in range(R):
            coeffs = {}
            for (i, n), coef in cut.coeffs_w.items():
                vid = ids.w[i, n, rh]
                coeffs[vid] = coeffs.get(vid, 0.0) + coef
            if cut.coeff_z:
                coeffs[ids.z[rh]] = cut.coeff_z
            m.add_row(coeffs, "<=", cut.rhs,
                      f"{cut.kind}[{len(state.cut_pool)},{rh}]")
            added += 1
    return added


# ---------------------------------------------------------------------------
# Exact subproblem and the designed cuts


def choices_of(offer: OfferSet, w_slice: np.ndarray) -> list[int]:
    """Chosen option id per customer from a one-hot (I, C) slice."""
    return [int(np.argmax(w_slice[:, n])) for n in range(w_slice.shape[1])]


def omega_of(offer: OfferSet, w_slice: np.ndarray) -> tuple:
    """The (slot, customer) pairs chosen in one scenario, sorted."""
    pairs = []
    for n, i in enumerate(choices_of(offer, w_slice)):
        opt = offer.options[i]
        if not opt.is_opt_out:
            pairs.append((opt.slot, n))
    return tuple(sorted(pairs))


def solve_subproblem(instance: Instance, offer: OfferSet, w_slice: np.ndarray,
                     oracle=DEFAULT_ORACLE) -> SubproblemResult:
    """Exact routing for one scenario's fixed choices.

    The income term is a constant given the choices, so the subproblem is a
    pure cost-minimizing CVRPTW over the chosen (slot, customer) pairs.
    ``max_leg`` is the worst arc cost from a served customer to any other node
    its vehicle touches, depot included (see the module docstring for why).
    """
    rho = option_revenues(offer, instance.base_fee, instance.revenue_mode)
    chosen = choices_of(offer, w_slice)
    income = float(sum(rho[i] for i in chosen))
    served = []
    windows = {}
    for n, i in enumerate(chosen):
        opt = offer.options[i]
        if not opt.is_opt_out:
            served.append(n)
            windows[n] = instance.option_window(opt)
    res = solve_routing_exact(instance, served, windows, oracle)
    if res.status == "infeasible":
        return SubproblemResult("infeasible", math.inf, [], omega_of(offer, w_slice),
                                {}, income)
    max_leg = max_leg_costs(instance, res.routes)
    return SubproblemResult("optimal", res.cost, res.routes,
                            list(omega_of(offer, w_slice)), max_leg, income)


def max_leg_costs(instance: Instance, routes: list) -> dict:
    cost = instance.travel_cost
    out = {}
    for seq in routes:
        if not seq:
            continue
        nodes = [0] + [n + 1 for n in seq]
        for n in seq:
            nd = n + 1
            out[n] = max(float(cost[m, nd]) for m in nodes if m != nd)
    return out


def make_optimality_cut(result: SubproblemResult, offer: OfferSet,
                        rho: np.ndarray, n_customers: int,
                        origin: int = 0) -> Cut:
    """z_rhat <= income(w_rhat) - cost* + sum over dropped pairs of 2*max_leg.

    Rearranged to row form: z + sum_{(t,n) in Omega} 2*max_leg[n] *
    (sum_{i in I_t} w_in) - income(w) <= sum 2*max_leg - cost*.  At the
    generating choices the slack terms vanish and the bound is exactly the
    subproblem profit; dropping or switching a pair grants its 2*max_leg.
    """
    if result.status != "optimal":
        raise ValueError("optimality cut requires an optimal subproblem")
    coeffs: dict = {}
    slack_total = 0.0
    for (t, n) in result.served:
        leg = 2.0 * result.max_leg[n]
        slack_total += leg
        for i in offer.slot_groups[t]:
            coeffs[(i, n)] = coeffs.get((i, n), 0.0) + leg
    for opt in offer.options[1:]:
        if rho[opt.id]:
            for n in range(n_customers):
                coeffs[(opt.id, n)] = coeffs.get((opt.id, n), 0.0) - float(rho[opt.id])
    rhs = slack_total - result.routing_cost
    sig = ("opt", tuple(sorted(result.served)), round(result.routing_cost, 9))
    return Cut("lbbd_optimality", coeffs, 1.0, rhs, origin, signature=sig)


def make_feasibility_cut(result: SubproblemResult, offer: OfferSet,
                         origin: int = 0) -> Cut:
    """At least one (slot, customer) of an unroutable choice set must go.

    Row form: sum_{(t,n) in Omega} sum_{i in I_t} w_in <= |Omega| - 1.
    Supersets of an unroutable set stay unroutable (skipping a customer only
    relaxes timing), so no feasible point is cut.
    """
    if result.status != "infeasible":
        raise ValueError("feasibility cut requires an infeasible subproblem")
    coeffs: dict = {}
    for (t, n) in result.served:
        for i in offer.slot_groups[t]:
            coeffs[(i, n)] = coeffs.get((i, n), 0.0) + 1.0
    rhs = float(len(result.served) - 1)
    sig = ("feas", tuple(sorted(result.served)))
    return Cut("lbbd_feasibility", coeffs, 0.0, rhs, origin, signature=sig)


def make_no_good_cut(gamma_star: np.ndarray, z_star: float, income_upper: float,
                     origin: int) -> Cut:
    """Baseline assignment cut: any change of gamma relaxes the bound by M."""
    gamma_terms = {(i, n): float(gamma_star[i, n])
                   for i in range(gamma_star.shape[0])
                   for n in range(gamma_star.shape[1])}
    big = max(income_upper + 1.0, income_upper - z_star + 1.0)
    sig = ("ng", origin, gamma_star.tobytes())
    return Cut("no_good", {}, 0.0, z_star, origin, signature=sig,
               gamma_terms=gamma_terms, big_m=big)


def cut_rows(state: MasterState, cut: Cut) -> list:
    """Row specs (coeffs, sense, rhs) a cut contributes, one per scenario."""
    ids = state.ids
    R = ids.z.shape[0]
    rows = []
    for rh in range(R):
        coeffs = {}
        for (i, n), coef in cut.coeffs_w.items():
            vid = int(ids.w[i, n, rh])
            coeffs[vid] = coeffs.get(vid, 0.0) + coef
        if cut.coeff_z:
            coeffs[int(ids.z[rh])] = cut.coeff_z
        rows.append((coeffs, "<=", cut.rhs))
    return rows


def cut_violated(cut: Cut, w_all: np.ndarray, z_vals: np.ndarray,
                 tol: float = 1e-7) -> bool:
    R = w_all.shape[2]
    for rh in range(R):
        lhs = cut.coeff_z * z_vals[rh]
        for (i, n), coef in cut.coeffs_w.items():
            lhs += coef * w_all[i, n, rh]
        if lhs > cut.rhs + tol:
            return True
    return False


# ---------------------------------------------------------------------------
# Phase 1: LP-relaxed routing subproblems and textbook dual cuts


class RelaxedRoutingTemplate:
    """w-parameterized LP relaxation of one scenario's routing block.

    Arcs relax to [0, 1]; the only parts that move between iterations are the
    right-hand sides tied to the choices: visit counts and the two window
    rows.  Each such row carries an affine map from w, so an optimal dual (or
    Farkas ray) converts directly into a cut over (w, z) that is valid for
    every scenario.
    """

    def __init__(self, instance: Instance, offer: OfferSet):
        V = instance.n_nodes
        C = instance.n_customers
        K = instance.routing.vehicle_count
        I = offer.n_options
        travel = instance.travel_time
        cost = instance.travel_cost
        service = instance.service_times()
        demands = instance.demands()
        horizon = instance.horizon
        t_lo = np.empty(I)
        t_hi = np.empty(I)
        for opt in offer.options:
            t_lo[opt.id], t_hi[opt.id] = instance.option_window(opt)

        m = MilpModel(name="relaxed_routing", sense="min")
        x = np.empty((V, V, K), dtype=np.int64)
        for a in range(V):
            for b in range(V):
                for k in range(K):
                    hi = 0.0 if (a == b and a != 0) else 1.0
                    x[a, b, k] = m.add_var(f"x[{a},{b},{k}]", 0.0, hi)
        tau = np.empty(V, dtype=np.int64)
        for a in range(V):
            tau[a] = m.add_var(f"tau[{a}]", 0.0, 0.0 if a == 0 else horizon)

        self.wmap: list[dict] = []      # row index -> {(i, n): coefficient}

        def add(coeffs, sense, rhs, wdep=None):
            m.add_row(coeffs, sense, rhs)
            self.wmap.append(wdep or {})

        for n in range(C):
            nd = n + 1
            coeffs = {int(x[a, nd, k]): 1.0 for a in range(V) if a != nd
                      for k in range(K)}
            add(coeffs, "=", 0.0, {(i, n): 1.0 for i in range(1, I)})
        for a in range(V):
            for k in range(K):
                coeffs = {}
                for b in range(V):
                    if b != a:
                        coeffs[int(x[b, a, k])] = 1.0
                        coeffs[int(x[a, b, k])] = coeffs.get(int(x[a, b, k]), 0.0) - 1.0
                add(coeffs, "=", 0.0)
        for k in range(K):
            add({int(x[0, b, k]): 1.0 for b in range(V)}, "=", 1.0)
        for n in range(C):
            nd = n + 1
            add({int(tau[nd]): 1.0}, "<=", 0.0,
                {(i, n): float(t_hi[i]) for i in range(I)})
            add({int(tau[nd]): 1.0}, ">=", 0.0,
                {(i, n): float(t_lo[i]) for i in range(I)})
        for a in range(V):
            for n in range(C):
                nd = n + 1
                if a == nd:
                    continue
                mt = horizon + float(service[a]) + float(travel[a, nd])
                coeffs = {int(tau[a]): 1.0, int(tau[nd]): -1.0}
                for k in range(K):
                    coeffs[int(x[a, nd, k])] = mt
                add(coeffs, "<=", mt - float(travel[a, nd]) - float(service[a]))
        for k in range(K):
            coeffs = {}
            for n in range(C):
                nd = n + 1
                for a in range(V):
                    vid = int(x[a, nd, k])
                    coeffs[vid] = coeffs.get(vid, 0.0) + float(demands[n])
            add(coeffs, "<=", float(instance.routing.vehicle_capacity))
        for k in range(1, K):
            coeffs = {}
            for a in range(V):
                for b in range(V):
                    coeffs[int(x[a, b, k])] = 1.0
                    coeffs[int(x[a, b, k - 1])] = -float(V)
            add(coeffs, "<=", 0.0)
        for a in range(1, V):
            for b in range(a + 1, V):
                coeffs = {}
                for k in range(K):
                    coeffs[int(x[a, b, k])] = 1.0
                    coeffs[int(x[b, a, k])] = 1.0
                add(coeffs, "<=", 1.0)

        m.set_objective({int(x[a, b, k]): float(cost[a, b])
                         for a in range(V) for b in range(V) for k in range(K)
                         if cost[a, b] != 0.0}, "min")
        self.model = m
        self.base_rhs = np.array([row.rhs for row in m.rows])
        self.rho = option_revenues(offer, instance.base_fee, instance.revenue_mode)
        self.n_customers = C
        self.n_options = I

    def rhs_for(self, w_slice: np.ndarray) -> np.ndarray:
        rhs = self.base_rhs.copy()
        for ridx, wdep in enumerate(self.wmap):
            for (i, n), coef in wdep.items():
                if w_slice[i, n]:
                    rhs[ridx] += coef * float(w_slice[i, n])
        return rhs

    def solve(self, w_slice: np.ndarray):
        rhs = self.rhs_for(w_slice)
        for ridx, row in enumerate(self.model.rows):
            row.rhs = float(rhs[ridx])
        return kernel.solve_lp(self.model), rhs

    def income(self, w_slice: np.ndarray) -> float:
        return float(sum(self.rho[i] * w_slice[i, n]
                         for i in range(self.n_options)
                         for n in range(self.n_customers) if w_slice[i, n]))

    def optimality_cut(self, sol, origin: int) -> Cut:
        """z <= income(w) + dual bound on (-cost)(w), exact at the generator."""
        y = sol.duals
        coeffs: dict = {}
        dual_const = sol.dual_bound_term
        for ridx, wdep in enumerate(self.wmap):
            yv = float(y[ridx])
            if yv == 0.0:
                continue
            dual_const += yv * float(self.base_rhs[ridx])
            for key, coef in wdep.items():
                coeffs[key] = coeffs.get(key, 0.0) + yv * coef
        # row form: z + (dual w-terms) - income(w) <= -dual_const
        for i in range(1, self.n_options):
            if self.rho[i]:
                for n in range(self.n_customers):
                    coeffs[(i, n)] = coeffs.get((i, n), 0.0) - float(self.rho[i])
        sig = ("bd_opt", origin,
               tuple(sorted((k, round(v, 9)) for k, v in coeffs.items())),
               round(dual_const, 9))
        return Cut("bd_optimality", coeffs, 1.0, -dual_const, origin, signature=sig)

    def feasibility_cut(self, sol, origin: int) -> Cut:
        """Any feasible choice vector must keep the Farkas value nonpositive."""
        y = sol.farkas_ray
        coeffs: dict = {}
        const = -sol.farkas_bound_term
        for ridx, wdep in enumerate(self.wmap):
            yv = float(y[ridx])
            if yv == 0.0:
                continue
            const -= yv * float(self.base_rhs[ridx])
            for key, coef in wdep.items():
                coeffs[key] = coeffs.get(key, 0.0) + yv * coef
        sig = ("bd_feas", origin,
               tuple(sorted((k, round(v, 9)) for k, v in coeffs.items())),
               round(const, 9))
        return Cut("bd_feasibility", coeffs, 0.0, const, origin, signature=sig)


# ---------------------------------------------------------------------------
# Drivers


def decode_master(state: MasterState, xvec: np.ndarray):
    ids = state.ids
    gamma = np.rint(xvec[ids.gamma]).astype(np.int8)
    w = np.rint(xvec[ids.w]).astype(np.int8)
    z = xvec[ids.z].astype(float)
    return gamma, w, z


def master_warm_vector(state: MasterState, instance: Instance, offer: OfferSet,
                       scenarios: ScenarioSet, gamma: np.ndarray,
                       w: np.ndarray, z_vals: np.ndarray) -> np.ndarray:
    """Feasible master point from an incumbent (z set to its exact profits)."""
    ids = state.ids
    big = compute_big_m(scenarios, offer, instance.base_fee)
    base_u = utilities(offer, scenarios, instance.base_fee)
    xvec = np.zeros(state.model.n_vars)
    xvec[ids.gamma] = gamma
    xvec[ids.w] = w
    xvec[ids.u] = base_u - big.m_link[None, :, :] * (1 - gamma[:, :, None])
    xvec[ids.U] = np.where(gamma[:, :, None].astype(bool), base_u, -np.inf).max(axis=0)
    # new cuts may bound z below the exact subproblem value, so clamp
    zv = z_vals.astype(float).copy()
    for cut in state.cut_pool:
        if cut.kind == "no_good" or cut.coeff_z == 0.0:
            continue
        for rh in range(len(zv)):
            lhs = sum(coef * w[i, n, rh] for (i, n), coef in cut.coeffs_w.items())
            zv[rh] = min(zv[rh], cut.rhs - lhs)
    xvec[ids.z] = zv
    xvec[ids.q] = zv.mean() if len(zv) else 0.0
    return xvec


def relaxed_phase(state: MasterState, instance: Instance, offer: OfferSet,
                  scenarios: ScenarioSet, eps: float = 1e-6,
                  oracle=DEFAULT_ORACLE, time_limit: float = math.inf,
                  max_iterations: int = 10_000,
                  log: ConvergenceLog | None = None) -> MasterState:
    """Classical Benders on LP-relaxed routing; every cut stays in the pool."""
    log = log if log is not None else ConvergenceLog()
    template = RelaxedRoutingTemplate(instance, offer)
    R = scenarios.R
    t0 = time.monotonic()
    ub = math.inf
    lb = -math.inf
    for it in range(1, max_iterations + 1):
        remaining = time_limit - (time.monotonic() - t0)
        if remaining <= 0:
            break
        msol = oracle.solve_milp(state.model, time_limit=remaining)
        if msol.status == "infeasible":
            raise kernel.KernelError("relaxed-phase master is infeasible")
        ub = min(ub, msol.objective)
        gamma, w, _ = decode_master(state, msol.x)
        lb_iter = 0.0
        feasible = True
        new_cuts = 0
        for r in range(R):
            sol, _ = template.solve(w[:, :, r])
            if sol.status == "optimal":
                lb_iter += template.income(w[:, :, r]) - sol.objective
                cut = template.optimality_cut(sol, origin=r)
            elif sol.status == "infeasible":
                feasible = False
                cut = template.feasibility_cut(sol, origin=r)
            else:
                raise kernel.KernelError("relaxed routing LP unbounded")
            new_cuts += instantiate_cut(state, cut)
        lb_iter = lb_iter / R if feasible else -math.inf
        lb = max(lb, lb_iter)
        gap = relative_gap(ub, lb)
        log.add(1, it, ub, lb, gap, new_cuts, time.monotonic() - t0)
        state.iteration = it
        if gap < eps or new_cuts == 0:
            break
    state.ub = ub
    state.lb = lb
    state.phase1_log = log
    return state


def relative_gap(ub: float, lb: float) -> float:
    if lb == -math.inf or ub == math.inf:
        return math.inf
    if abs(ub - lb) <= 1e-9:
        return 0.0
    return (ub - lb) / max(abs(ub), 1e-9)


def lbbd_solve(instance: Instance, offer: OfferSet, scenarios: ScenarioSet,
               eps: float = 1e-6, time_limit: float = math.inf,
               mode: str = "iterative", oracle=DEFAULT_ORACLE,
               subproblem_solver=None, use_no_good: bool = False,
               relaxed_first: bool = True, max_iterations: int = 10_000,
               force_full_slots: bool = False) -> LbbdResult:
    """Two-phase LBBD; ``mode`` picks the outer loop.

    ``iterative`` re-solves the master MILP each round; ``branch_and_benders``
    registers subproblem solving and cut generation as the kernel's lazy hook
    inside a single master tree.  ``subproblem_solver`` defaults to the exact
    routing solver; the nested column-generation solver plugs in behind the
    same contract (its results are flagged heuristic).
    """
    if mode not in ("iterative", "branch_and_benders"):
        raise ValueError(f"unknown mode {mode!r}")
    t0 = time.monotonic()
    C = instance.n_customers
    R = scenarios.R
    rho = option_revenues(offer, instance.base_fee, instance.revenue_mode)
    state = build_master(instance, offer, scenarios, force_full_slots)
    log = ConvergenceLog()
    cuts_by_kind: dict[str, int] = {}

    if relaxed_first and C > 0:
        relaxed_phase(state, instance, offer, scenarios, eps, oracle,
                      time_limit, max_iterations, log)
        for cut in state.cut_pool:
            cuts_by_kind[cut.kind] = cuts_by_kind.get(cut.kind, 0) + 1

    sub_cache: dict = {}

    def solve_sub(w_slice):
        key = omega_of(offer, w_slice)
        if key not in sub_cache:
            if subproblem_solver is None:
                sub_cache[key] = solve_subproblem(instance, offer, w_slice, oracle)
            else:
                sub_cache[key] = subproblem_solver(instance, offer, w_slice, oracle)
        res = sub_cache[key]
        income = float(sum(rho[i] * w_slice[i, n]
                           for i in range(offer.n_options) for n in range(C)
                           if w_slice[i, n]))
        return res, income

    heuristic_any = False
    incumbent = None        # (objective, gamma, w, pairs)

    def register_incumbent(gamma, w, results, incomes):
        nonlocal incumbent
        pairs = [(incomes[r], results[r].routing_cost) for r in range(R)]
        obj = sum(i - c for i, c in pairs) / R
        if incumbent is None or obj > incumbent[0] + 1e-12:
            incumbent = (obj, gamma.copy(), w.copy(), pairs)
        return obj

    if mode == "iterative":
        ub = state.ub          # phase-1 terminal bound, or +inf without it
        lb = -math.inf
        status = "gap_limit"
        it = 0
        while it < max_iterations:
            it += 1
            remaining = time_limit - (time.monotonic() - t0)
            if remaining <= 0:
                status = "time_limit"
                break
            if incumbent is not None:
                try:
                    kernel.warm_start(state.model, master_warm_vector(
                        state, instance, offer, scenarios, incumbent[1],
                        incumbent[2], np.array([i - c for i, c in incumbent[3]])))
                except kernel.WarmStartRejected:
                    state.model.warm_values = None
            msol = oracle.solve_milp(state.model, time_limit=remaining)
            if msol.status == "infeasible":
                raise kernel.KernelError("LBBD master is infeasible")
            ub = min(ub, msol.objective)
            gamma, w, zvals = decode_master(state, msol.x)
            results = []
            incomes = []
            new_cuts = 0
            all_ok = True
            for r in range(R):
                res, income = solve_sub(w[:, :, r])
                results.append(res)
                incomes.append(income)
                heuristic_any |= res.heuristic
                if res.status == "optimal":
                    cut = make_optimality_cut(res, offer, rho, C, origin=r)
                else:
                    all_ok = False
                    cut = make_feasibility_cut(res, offer, origin=r)
                added = instantiate_cut(state, cut)
                if added:
                    cuts_by_kind[cut.kind] = cuts_by_kind.get(cut.kind, 0) + 1
                new_cuts += added
                if use_no_good and res.status == "optimal":
                    ng = make_no_good_cut(gamma, income - res.routing_cost,
                                          float(np.max(rho) * C), origin=r)
                    if instantiate_cut(state, ng):
                        cuts_by_kind["no_good"] = cuts_by_kind.get("no_good", 0) + 1
            lb_iter = register_incumbent(gamma, w, results, incomes) if all_ok else -math.inf
            lb = max(lb, lb_iter)
            gap = relative_gap(ub, lb)
            log.add(2, it, ub, lb, gap, new_cuts, time.monotonic() - t0)
            state.iteration = it
            if gap < eps:
                status = "optimal"
                break
            if new_cuts == 0:
                # every cut of the current point already exists, so the master
                # value cannot move; report whatever gap remains
                status = "optimal" if gap < eps else "gap_limit"
                break
        bound = ub
    else:
        ids = state.ids

        def hook(xvec):
            nonlocal heuristic_any
            w = np.rint(xvec[ids.w]).astype(np.int8)
            zvals = xvec[ids.z].astype(float)
            rows = []
            for r in range(R):
                res, income = solve_sub(w[:, :, r])
                heuristic_any |= res.heuristic
                if res.status == "optimal":
                    cut = make_optimality_cut(res, offer, rho, C, origin=r)
                else:
                    cut = make_feasibility_cut(res, offer, origin=r)
                if cut.signature in state.signatures:
                    continue
                if cut_violated(cut, w, zvals):
                    state.signatures.add(cut.signature)
                    state.cut_pool.append(cut)
                    cuts_by_kind[cut.kind] = cuts_by_kind.get(cut.kind, 0) + 1
                    rows.extend(cut_rows(state, cut))
            return rows

        state.model.lazy_cut_hook = hook
        msol = oracle.solve_milp(state.model, time_limit=time_limit)
        if msol.status == "infeasible" or msol.x is None:
            raise kernel.KernelError(
                f"LBBD master ended {msol.status} without an incumbent")
        gamma, w, zvals = decode_master(state, msol.x)
        results = []
        incomes = []
        for r in range(R):
            res, income = solve_sub(w[:, :, r])
            results.append(res)
            incomes.append(income)
        register_incumbent(gamma, w, results, incomes)
        lb = incumbent[0]
        ub = msol.bound if msol.status == "time_limit" else max(msol.objective, lb)
        status = {"optimal": "optimal", "gap_limit": "gap_limit",
                  "time_limit": "time_limit"}[msol.status]
        log.add(2, msol.nodes, ub, lb, relative_gap(ub, lb),
                sum(cuts_by_kind.values()), time.monotonic() - t0)
        bound = ub

    if incumbent is None:
        raise kernel.KernelError("LBBD finished without a feasible incumbent")
    obj, gamma, w, pairs = incumbent
    profit = ProfitReport.from_per_scenario(pairs)
    return LbbdResult(status=status, objective=obj, bound=bound,
                      gap=relative_gap(bound, obj), assortment=gamma,
                      profit=profit, log=log, iterations=state.iteration,
                      cuts_by_kind=cuts_by_kind, heuristic=heuristic_any)
