"""Monolithic assortment + choice + routing MILP, and routing subproblems.

Builds the full scenario-expanded model (assortment rows, big-M choice block,
capacitated time-window routing per scenario) for the kernel, decodes typed
results, and exposes the exact per-scenario routing solver reused by the
decomposition methods and the experiment harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .choice import (Assortment, BigM, ChoiceOutcome, compute_big_m,
                     full_assortment, opt_out_only, option_revenues,
                     simulate_choices, utilities)
from .instance import Instance, OfferSet, ScenarioSet
from .kernel import DEFAULT_ORACLE, MilpModel, MilpSolution


@dataclass
class RoutePlan:
    x: np.ndarray                     # (V, V, K, R) arc indicators
    tau: np.ndarray                   # (V, R) service start times
    cost_per_scenario: np.ndarray     # (R,)
    routes: list                      # [r][k] -> ordered customer node list


@dataclass
class ProfitReport:
    expected_revenue: float
    expected_routing_cost: float
    expected_profit: float
    per_scenario: list[tuple[float, float]]     # (revenue_r, cost_r)
    infeasible_scenarios: list[int] = field(default_factory=list)

    @classmethod
    def from_per_scenario(cls, pairs, infeasible=()):
        pairs = list(pairs)
        R = len(pairs)
        ok = [p for i, p in enumerate(pairs) if i not in set(infeasible)]
        if len(ok) < R:
            return cls(math.nan, math.nan, -math.inf, pairs, list(infeasible))
        rev = sum(p[0] for p in pairs) / R
        cost = sum(p[1] for p in pairs) / R
        return cls(rev, cost, rev - cost, pairs, [])


@dataclass
class FullModelIds:
    gamma: np.ndarray     # (I, C)
    w: np.ndarray         # (I, C, R)
    u: np.ndarray         # (I, C, R)
    U: np.ndarray         # (C, R)
    x: np.ndarray         # (V, V, K, R)
    tau: np.ndarray       # (V, R)


@dataclass
class FullModel:
    model: MilpModel
    ids: FullModelIds
    block_counts: dict[str, int]
    big_m: BigM
    objective_scale: float


@dataclass
class SolveFullResult:
    assortment: Assortment
    outcome: ChoiceOutcome
    route_plan: RoutePlan
    profit: ProfitReport
    milp: MilpSolution


def slot_bounds_per_option(instance: Instance, offer: OfferSet):
    """(T_lower_i, T_upper_i) per option; the opt-out spans the full horizon
    so the window rows never constrain an unvisited customer's time."""
    lo = np.empty(offer.n_options)
    hi = np.empty(offer.n_options)
    for opt in offer.options:
        lo[opt.id], hi[opt.id] = instance.option_window(opt)
    return lo, hi


def build_full_model(instance: Instance, offer: OfferSet, scenarios: ScenarioSet,
                     force_full_slots: bool = False, objective_scale: float = 1.0,
                     strengthen: bool = True) -> FullModel:
    """Assemble the scenario-expanded MILP.

    ``force_full_slots`` turns the one-price-per-slot rows into equalities
    (every slot must be offered at exactly one rate) for the discount-only
    policy.  ``strengthen`` adds the redundant-but-tightening offer-link rows
    w <= gamma, which every integral solution satisfies anyway.
    """
    if scenarios.R < 1:
        raise ValueError("need at least one scenario")
    I, C, R = offer.n_options, instance.n_customers, scenarios.R
    if scenarios.n_options != I or scenarios.n_customers != C:
        raise ValueError("scenario dimensions disagree with offer/instance")
    V = instance.n_nodes
    K = instance.routing.vehicle_count
    Q = instance.routing.vehicle_capacity
    horizon = instance.horizon
    travel = instance.travel_time
    cost = instance.travel_cost
    service = instance.service_times()
    demands = instance.demands()
    rho = option_revenues(offer, instance.base_fee, instance.revenue_mode)
    big = compute_big_m(scenarios, offer, instance.base_fee)
    base_u = utilities(offer, scenarios, instance.base_fee)
    t_lo, t_hi = slot_bounds_per_option(instance, offer)

    m = MilpModel(name="cbtsm_full", sense="max")
    gamma = np.array([[m.add_binary(f"g[{i},{n}]") for n in range(C)]
                      for i in range(I)])
    w = np.array([[[m.add_binary(f"w[{i},{n},{r}]") for r in range(R)]
                   for n in range(C)] for i in range(I)])
    u = np.array([[[m.add_var(f"u[{i},{n},{r}]", -math.inf, math.inf)
                    for r in range(R)] for n in range(C)] for i in range(I)])
    U = np.array([[m.add_var(f"U[{n},{r}]", -math.inf, math.inf)
                   for r in range(R)] for n in range(C)])
    # Vehicle-symmetry reduction by bound fixing: customer n can only ride on
    # vehicles k <= n (any plan can be relabeled so groups are ordered by
    # their smallest customer), and customer self-arcs never exist.
    x = np.empty((V, V, K, R), dtype=np.int64)
    for a in range(V):
        for bnode in range(V):
            for k in range(K):
                for r in range(R):
                    fixed = (a == bnode and a != 0)
                    if strengthen and not fixed:
                        touches = min(a - 1 if a > 0 else V, bnode - 1 if bnode > 0 else V)
                        fixed = k > touches
                    if fixed:
                        x[a, bnode, k, r] = m.add_var(
                            f"x[{a},{bnode},{k},{r}]", 0.0, 0.0, kernel.BINARY)
                    else:
                        x[a, bnode, k, r] = m.add_binary(f"x[{a},{bnode},{k},{r}]")
    tau = np.empty((V, R), dtype=np.int64)
    for a in range(V):
        for r in range(R):
            hi = 0.0 if a == 0 else horizon
            tau[a, r] = m.add_var(f"tau[{a},{r}]", 0.0, hi)

    counts: dict[str, int] = {}

    def block(name, rows):
        counts[name] = counts.get(name, 0) + rows

    # assortment rows: opt-out always offered, service level, one price per slot
    for n in range(C):
        m.add_row({gamma[0, n]: 1.0}, "=", 1.0, f"optout[{n}]")
    block("opt_out", C)
    for n in range(C):
        m.add_row({gamma[i, n]: 1.0 for i in range(I)}, ">=",
                  float(instance.min_offer), f"min_offer[{n}]")
    block("min_offer", C)
    for t, ids in offer.slot_groups.items():
        for n in range(C):
            m.add_row({gamma[i, n]: 1.0 for i in ids},
                      "=" if force_full_slots else "<=", 1.0, f"one_price[{t},{n}]")
    block("one_price", len(offer.slot_groups) * C)

    # choice rows: utility definition with the offer penalty, one choice,
    # and the two big-M links tying U to the chosen maximal utility
    for i in range(I):
        for n in range(C):
            for r in range(R):
                p = float(big.m_link[n, r])
                m.add_row({u[i, n, r]: 1.0, gamma[i, n]: -p}, "=",
                          float(base_u[i, n, r]) - p, f"udef[{i},{n},{r}]")
    block("utility_def", I * C * R)
    for n in range(C):
        for r in range(R):
            m.add_row({w[i, n, r]: 1.0 for i in range(I)}, "=", 1.0,
                      f"choice[{n},{r}]")
    block("choice", C * R)
    for i in range(I):
        for n in range(C):
            for r in range(R):
                m.add_row({U[n, r]: 1.0, u[i, n, r]: -1.0}, ">=", 0.0,
                          f"umax[{i},{n},{r}]")
                mu = float(big.m_utility[n, r])
                m.add_row({U[n, r]: 1.0, u[i, n, r]: -1.0, w[i, n, r]: mu},
                          "<=", mu, f"upick[{i},{n},{r}]")
    block("utility_link", 2 * I * C * R)
    if strengthen:
        for i in range(1, I):
            for n in range(C):
                for r in range(R):
                    m.add_row({w[i, n, r]: 1.0, gamma[i, n]: -1.0}, "<=", 0.0,
                              f"wlink[{i},{n},{r}]")
        block("offer_link", (I - 1) * C * R)
        # dominance: an offered option with strictly higher utility forbids
        # choosing the worse one (every integral point already obeys this, so
        # these rows only tighten the relaxation; with them, integral gamma
        # forces an integral w)
        n_dom = 0
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
                            m.add_row({w[j, n, r]: 1.0, gamma[i, n]: 1.0}, "<=",
                                      1.0, f"dom[{i},{j},{n},{r}]")
                        n_dom += 1
        block("choice_dominance", n_dom)
        # fractional two-cycles between customers are the classic weakness of
        # arc-flow relaxations; integral solutions never use them (time chain)
        for r in range(R):
            for a in range(1, V):
                for bnode in range(a + 1, V):
                    coeffs = {}
                    for k in range(K):
                        coeffs[x[a, bnode, k, r]] = 1.0
                        coeffs[x[bnode, a, k, r]] = 1.0
                    m.add_row(coeffs, "<=", 1.0, f"two_cycle[{a},{bnode},{r}]")
        block("two_cycle", R * (V - 1) * (V - 2) // 2)

    # routing rows per scenario
    for r in range(R):
        for n in range(C):
            nd = n + 1
            coeffs = {}
            for a in range(V):
                if a != nd:
                    for k in range(K):
                        coeffs[x[a, nd, k, r]] = 1.0
            for i in range(1, I):
                coeffs[w[i, n, r]] = -1.0
            m.add_row(coeffs, "=", 0.0, f"visit[{n},{r}]")
    block("visit", C * R)
    for r in range(R):
        for a in range(V):
            for k in range(K):
                coeffs = {}
                for bnode in range(V):
                    if bnode != a:
                        coeffs[x[bnode, a, k, r]] = 1.0
                        coeffs[x[a, bnode, k, r]] = coeffs.get(x[a, bnode, k, r], 0.0) - 1.0
                m.add_row(coeffs, "=", 0.0, f"flow[{a},{k},{r}]")
    block("flow", V * K * R)
    for r in range(R):
        for k in range(K):
            m.add_row({x[0, bnode, k, r]: 1.0 for bnode in range(V)}, "=", 1.0,
                      f"depart[{k},{r}]")
    block("depot_departure", K * R)
    for r in range(R):
        for n in range(C):
            nd = n + 1
            m.add_row({**{w[i, n, r]: float(t_hi[i]) for i in range(I)},
                       tau[nd, r]: -1.0}, ">=", 0.0, f"win_hi[{n},{r}]")
            m.add_row({**{w[i, n, r]: float(t_lo[i]) for i in range(I)},
                       tau[nd, r]: -1.0}, "<=", 0.0, f"win_lo[{n},{r}]")
    block("window", 2 * C * R)
    for r in range(R):
        for a in range(V):
            for n in range(C):
                nd = n + 1
                if a == nd:
                    continue
                mt = horizon + float(service[a]) + float(travel[a, nd])
                coeffs = {tau[a, r]: 1.0, tau[nd, r]: -1.0}
                for k in range(K):
                    coeffs[x[a, nd, k, r]] = mt
                m.add_row(coeffs, "<=", mt - float(travel[a, nd]) - float(service[a]),
                          f"chain[{a},{n},{r}]")
    block("time_chain", (V - 1) * C * R)
    for r in range(R):
        for k in range(K):
            coeffs = {}
            for n in range(C):
                nd = n + 1
                for a in range(V):
                    vid = x[a, nd, k, r]
                    coeffs[vid] = coeffs.get(vid, 0.0) + float(demands[n])
            m.add_row(coeffs, "<=", float(Q), f"cap[{k},{r}]")
    block("capacity", K * R)
    mk = float(V)
    for r in range(R):
        for k in range(1, K):
            coeffs = {}
            for a in range(V):
                for bnode in range(V):
                    coeffs[x[a, bnode, k, r]] = 1.0
                    coeffs[x[a, bnode, k - 1, r]] = -mk
            m.add_row(coeffs, "<=", 0.0, f"fleet_order[{k},{r}]")
    block("fleet_order", (K - 1) * R)

    # objective: scenario-summed revenue minus routing cost (unscaled form);
    # reports divide by R so published numbers match the expectation reading
    obj = {}
    for i in range(I):
        if rho[i] == 0.0:
            continue
        for n in range(C):
            for r in range(R):
                obj[w[i, n, r]] = objective_scale * float(rho[i])
    for a in range(V):
        for bnode in range(V):
            if cost[a, bnode] == 0.0:
                continue
            for k in range(K):
                for r in range(R):
                    obj[x[a, bnode, k, r]] = -objective_scale * float(cost[a, bnode])
    m.set_objective(obj, "max")

    ids = FullModelIds(gamma=gamma, w=w, u=u, U=U, x=x, tau=tau)
    return FullModel(model=m, ids=ids, block_counts=counts, big_m=big,
                     objective_scale=objective_scale)


def decode_full(bundle: FullModel, instance: Instance, offer: OfferSet,
                scenarios: ScenarioSet, xvec: np.ndarray):
    ids = bundle.ids
    I, C, R = offer.n_options, instance.n_customers, scenarios.R
    V = instance.n_nodes
    K = instance.routing.vehicle_count
    gamma = np.rint(xvec[ids.gamma]).astype(np.int8)
    w = np.rint(xvec[ids.w]).astype(np.int8)
    arcs = np.rint(xvec[ids.x]).astype(np.int8)
    tau = xvec[ids.tau]

    base_u = utilities(offer, scenarios, instance.base_fee)
    chosen = np.einsum("inr,inr->nr", w.astype(float), base_u)
    outcome = ChoiceOutcome(w=w, utilities=base_u, chosen_utility=chosen,
                            probabilities=w.mean(axis=2, dtype=np.float64))

    cost = instance.travel_cost
    cost_r = np.array([
        float(sum(cost[a, bnode] * arcs[a, bnode, k, r]
                  for a in range(V) for bnode in range(V) for k in range(K)))
        for r in range(R)])
    routes = []
    for r in range(R):
        per_vehicle = []
        for k in range(K):
            succ = {}
            for a in range(V):
                for bnode in range(V):
                    if arcs[a, bnode, k, r] and not (a == 0 and bnode == 0):
                        succ[a] = bnode
            seq = []
            node = succ.get(0)
            while node is not None and node != 0:
                seq.append(node)
                node = succ.get(node)
            per_vehicle.append(seq)
        routes.append(per_vehicle)
    plan = RoutePlan(x=arcs, tau=tau, cost_per_scenario=cost_r, routes=routes)

    rho = option_revenues(offer, instance.base_fee, instance.revenue_mode)
    rev_r = [float(np.tensordot(rho, w[:, :, r].astype(float), axes=1).sum())
             for r in range(R)]
    profit = ProfitReport.from_per_scenario(zip(rev_r, cost_r))
    return Assortment(gamma), outcome, plan, profit


def assemble_full_vector(bundle: FullModel, instance: Instance, offer: OfferSet,
                         scenarios: ScenarioSet, assortment: Assortment,
                         oracle=DEFAULT_ORACLE) -> tuple[np.ndarray, float] | None:
    """Full variable assignment for a fixed assortment (simulate + route).

    Returns (vector, scenario-summed objective) or None when some scenario
    cannot be routed.  Used to seed branch and bound with an incumbent.
    """
    ids = bundle.ids
    I, C, R = offer.n_options, instance.n_customers, scenarios.R
    V = instance.n_nodes
    outcome = simulate_choices(assortment, scenarios, offer, instance.base_fee)
    xvec = np.zeros(bundle.model.n_vars)
    xvec[ids.gamma] = assortment.gamma
    xvec[ids.w] = outcome.w
    base_u = outcome.utilities
    penal = base_u - bundle.big_m.m_link[None, :, :] * (1 - assortment.gamma[:, :, None])
    xvec[ids.u] = penal
    offered_best = np.where(assortment.gamma[:, :, None].astype(bool), base_u,
                            -np.inf).max(axis=0)
    xvec[ids.U] = offered_best

    total = 0.0
    for r in range(R):
        served, windows, revenue = chosen_windows(offer, instance, outcome.w[:, :, r])
        res = solve_routing_exact(instance, served, windows, oracle)
        if res.status != "optimal":
            return None
        total += revenue - res.cost
        groups = sorted((seq for seq in res.routes if seq), key=min)
        used = set()
        for k, seq in enumerate(groups):
            prev = 0
            for n in seq:
                xvec[ids.x[prev, n + 1, k, r]] = 1.0
                xvec[ids.tau[n + 1, r]] = res.tau[n]
                prev = n + 1
            xvec[ids.x[prev, 0, k, r]] = 1.0
            used.add(k)
        for k in range(instance.routing.vehicle_count):
            if k not in used:
                xvec[ids.x[0, 0, k, r]] = 1.0
    return xvec, total * bundle.objective_scale


def warm_start_candidates(offer: OfferSet, n_customers: int):
    cands = [opt_out_only(offer, n_customers)]
    n_rates = len(offer.discounts())
    for d in range(n_rates):
        cands.append(full_assortment(offer, n_customers, discount_index=d))
    return cands


def solve_full(instance: Instance, offer: OfferSet, scenarios: ScenarioSet,
               time_limit: float = math.inf, gap_tol: float = 1e-6,
               oracle=DEFAULT_ORACLE, force_full_slots: bool = False,
               objective_scale: float = 1.0, warm: bool = True) -> SolveFullResult:
    """Solve the monolithic model and decode typed results.

    The optimizer works on the scenario-summed objective; the profit report
    carries the 1/R-scaled expectation (same argmax, reader-facing numbers).
    """
    bundle = build_full_model(instance, offer, scenarios,
                              force_full_slots=force_full_slots,
                              objective_scale=objective_scale)
    if warm:
        best = None
        for cand in warm_start_candidates(offer, instance.n_customers):
            if force_full_slots and cand.gamma[1:].sum() == 0:
                continue
            try:
                cand.validate(offer, instance.min_offer)
            except ValueError:
                continue
            got = assemble_full_vector(bundle, instance, offer, scenarios, cand,
                                       oracle)
            if got is not None and (best is None or got[1] > best[1]):
                best = got
        if best is not None:
            kernel.warm_start(bundle.model, best[0])
    sol = oracle.solve_milp(bundle.model, time_limit=time_limit, gap_tol=gap_tol)
    if sol.status == "infeasible":
        bad = diagnose_infeasible_scenarios(instance, offer, scenarios,
                                            force_full_slots, oracle)
        raise kernel.KernelError(
            "full model infeasible"
            + (f"; scenario indices {bad} are unroutable" if bad else ""))
    assortment, outcome, plan, profit = decode_full(bundle, instance, offer,
                                                    scenarios, sol.x)
    return SolveFullResult(assortment, outcome, plan, profit, sol)


def diagnose_infeasible_scenarios(instance, offer, scenarios, force_full_slots,
                                  oracle) -> list[int]:
    bad = []
    for r in range(scenarios.R):
        one = ScenarioSet(R=1, beta_time=scenarios.beta_time[:, :, r:r + 1],
                          beta_price=scenarios.beta_price[:, r:r + 1],
                          xi=scenarios.xi[:, :, r:r + 1], seed=scenarios.seed)
        sub = build_full_model(instance, offer, one,
                               force_full_slots=force_full_slots)
        if oracle.solve_milp(sub.model).status == "infeasible":
            bad.append(r)
    return bad


# ---------------------------------------------------------------------------
# Exact routing subproblem on the served-customer subgraph


@dataclass
class RoutingResult:
    status: str                   # optimal | infeasible
    cost: float
    routes: list[list[int]]       # per vehicle, ordered customer indices
    vehicle_of: dict[int, int]    # customer -> vehicle index
    tau: dict[int, float]


def solve_routing_exact(instance: Instance, served: list[int],
                        windows: dict[int, tuple[float, float]],
                        oracle=DEFAULT_ORACLE,
                        time_limit: float = math.inf) -> RoutingResult:
    """Exact CVRPTW over the depot + ``served`` customers (customer indices).

    ``windows`` maps each served customer to its promised [lower, upper]
    service-start window.  Cost-minimizing; revenue is constant given the
    choices so callers add it outside.
    """
    if not served:
        return RoutingResult("optimal", 0.0, [], {}, {})
    K = instance.routing.vehicle_count
    nodes = [0] + [n + 1 for n in served]
    S = len(nodes)
    travel = instance.travel_time
    cost = instance.travel_cost
    service = instance.service_times()
    demands = instance.demands()
    horizon = instance.horizon
    Q = instance.routing.vehicle_capacity

    m = MilpModel(name="routing_sub", sense="min")
    x = np.empty((S, S, K), dtype=np.int64)
    for a in range(S):
        for b in range(S):
            for k in range(K):
                if a == b and a != 0:
                    x[a, b, k] = m.add_var(f"x[{a},{b},{k}]", 0.0, 0.0, kernel.BINARY)
                else:
                    x[a, b, k] = m.add_binary(f"x[{a},{b},{k}]")
    tau = np.empty(S, dtype=np.int64)
    tau[0] = m.add_var("tau[0]", 0.0, 0.0)
    for s in range(1, S):
        lo, hi = windows[nodes[s] - 1]
        tau[s] = m.add_var(f"tau[{s}]", lo, hi)

    for s in range(1, S):
        m.add_row({x[a, s, k]: 1.0 for a in range(S) if a != s for k in range(K)},
                  "=", 1.0, f"visit[{s}]")
    for s in range(S):
        for k in range(K):
            coeffs = {}
            for a in range(S):
                if a != s:
                    coeffs[x[a, s, k]] = 1.0
                    coeffs[x[s, a, k]] = coeffs.get(x[s, a, k], 0.0) - 1.0
            m.add_row(coeffs, "=", 0.0, f"flow[{s},{k}]")
    for k in range(K):
        m.add_row({x[0, b, k]: 1.0 for b in range(S)}, "=", 1.0, f"depart[{k}]")
    for a in range(S):
        for s in range(1, S):
            if a == s:
                continue
            na, ns = nodes[a], nodes[s]
            step = float(travel[na, ns]) + float(service[na])
            mt = horizon + step
            coeffs = {tau[a]: 1.0, tau[s]: -1.0}
            for k in range(K):
                coeffs[x[a, s, k]] = mt
            m.add_row(coeffs, "<=", mt - step, f"chain[{a},{s}]")
    for k in range(K):
        coeffs = {}
        for s in range(1, S):
            for a in range(S):
                vid = x[a, s, k]
                coeffs[vid] = coeffs.get(vid, 0.0) + float(demands[nodes[s] - 1])
        m.add_row(coeffs, "<=", float(Q), f"cap[{k}]")
    for k in range(1, K):
        coeffs = {}
        for a in range(S):
            for b in range(S):
                coeffs[x[a, b, k]] = 1.0
                coeffs[x[a, b, k - 1]] = -float(S)
        m.add_row(coeffs, "<=", 0.0, f"fleet_order[{k}]")

    m.set_objective({int(x[a, b, k]): float(cost[nodes[a], nodes[b]])
                     for a in range(S) for b in range(S) for k in range(K)
                     if cost[nodes[a], nodes[b]] != 0.0}, "min")

    sol = oracle.solve_milp(m, time_limit=time_limit)
    if sol.status == "infeasible":
        return RoutingResult("infeasible", math.inf, [], {}, {})
    if sol.status not in ("optimal", "gap_limit"):
        raise kernel.KernelError(f"routing subproblem ended with {sol.status}")

    arcs = np.rint(sol.x[x]).astype(np.int8)
    routes: list[list[int]] = []
    vehicle_of: dict[int, int] = {}
    for k in range(K):
        succ = {}
        for a in range(S):
            for b in range(S):
                if arcs[a, b, k] and not (a == b == 0):
                    succ[a] = b
        seq = []
        node = succ.get(0)
        while node is not None and node != 0:
            seq.append(nodes[node] - 1)
            node = succ.get(node)
        routes.append(seq)
        for n in seq:
            vehicle_of[n] = k
    taus = {nodes[s] - 1: float(sol.x[tau[s]]) for s in range(1, S)}
    return RoutingResult("optimal", float(sol.objective), routes, vehicle_of, taus)


def chosen_windows(offer: OfferSet, instance: Instance, w_slice: np.ndarray):
    """Served customers and their promised windows from one scenario's choices.

    ``w_slice`` is (I, C) one-hot.  Returns (served list, windows dict,
    revenue of the scenario's choices).
    """
    rho = option_revenues(offer, instance.base_fee, instance.revenue_mode)
    served = []
    windows = {}
    revenue = 0.0
    C = w_slice.shape[1]
    for n in range(C):
        i = int(np.argmax(w_slice[:, n]))
        revenue += float(rho[i])
        opt = offer.options[i]
        if not opt.is_opt_out:
            served.append(n)
            windows[n] = instance.option_window(opt)
    return served, windows, revenue


def evaluate_fixed_assortment(instance: Instance, offer: OfferSet,
                              scenarios: ScenarioSet, assortment: Assortment,
                              oracle=DEFAULT_ORACLE, workers: int = 1) -> ProfitReport:
    """Simulate choices under a fixed assortment, then route each scenario
    exactly.  Infeasible scenarios are flagged and poison the profit with the
    negative-infinity sentinel rather than being silently dropped."""
    assortment.validate(offer, instance.min_offer)
    outcome = simulate_choices(assortment, scenarios, offer, instance.base_fee)
    return evaluate_choices(instance, offer, outcome.w, oracle, workers)


def evaluate_choices(instance: Instance, offer: OfferSet, w: np.ndarray,
                     oracle=DEFAULT_ORACLE, workers: int = 1) -> ProfitReport:
    R = w.shape[2]

    def one(r: int):
        served, windows, revenue = chosen_windows(offer, instance, w[:, :, r])
        res = solve_routing_exact(instance, served, windows, oracle)
        return revenue, res

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(R)))
    else:
        results = [one(r) for r in range(R)]

    pairs = []
    bad = []
    for r, (revenue, res) in enumerate(results):
        if res.status == "infeasible":
            bad.append(r)
            pairs.append((revenue, math.inf))
        else:
            pairs.append((revenue, res.cost))
    return ProfitReport.from_per_scenario(pairs, bad)
