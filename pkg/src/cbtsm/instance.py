"""Problem data: routing benchmarks, option sets, and behavioral scenarios.

The slot/discount option set couples a routing instance (Solomon-style
benchmark data) with a discrete-choice scenario block.  Everything here is a
pure function of its inputs plus a 64-bit seed; see :mod:`cbtsm.rng` for the
exact draw scheme.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from . import rng

FORMAT_VERSION = 1


class SolomonParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    demand: float = 0.0
    ready: float = 0.0
    due: float = 0.0
    service: float = 0.0


@dataclass(frozen=True)
class RoutingData:
    depot: Node
    customers: tuple[Node, ...]
    vehicle_count: int
    vehicle_capacity: float

    def __post_init__(self):
        ids = [c.id for c in self.customers]
        if self.depot.id in ids:
            raise ValueError("depot id collides with a customer id")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate customer ids")
        if self.vehicle_count < 1:
            raise ValueError("vehicle_count must be >= 1")
        for node in (self.depot, *self.customers):
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise ValueError(f"non-finite coordinates on node {node.id}")
            if node.demand < 0:
                raise ValueError(f"negative demand on node {node.id}")

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def horizon(self) -> float:
        return self.depot.due


@dataclass(frozen=True)
class Option:
    id: int
    slot: int | None      # None marks the opt-out
    discount: float

    @property
    def is_opt_out(self) -> bool:
        return self.slot is None


@dataclass(frozen=True)
class OfferSet:
    options: tuple[Option, ...]
    slot_groups: dict[int, tuple[int, ...]]

    @property
    def n_options(self) -> int:
        return len(self.options)

    @property
    def n_slots(self) -> int:
        return len(self.slot_groups)

    def discounts(self) -> tuple[float, ...]:
        seen = []
        for opt in self.options:
            if not opt.is_opt_out and opt.discount not in seen:
                seen.append(opt.discount)
        return tuple(seen)


@dataclass(frozen=True)
class Instance:
    routing: RoutingData
    travel_time: np.ndarray      # (|V|, |V|), node 0 is the depot
    travel_cost: np.ndarray
    slots: tuple[tuple[float, float], ...]
    discount_rates: tuple[float, ...]
    base_fee: float
    min_offer: int = 1
    cost_factor: float = 1.0
    revenue_mode: str = "discount"   # "discount" (objective as printed) or "paid_price"

    def __post_init__(self):
        if 0.0 not in self.discount_rates:
            raise ValueError("discount grid must contain the zero rate")
        for h in self.discount_rates:
            if not 0.0 <= h < 1.0:
                raise ValueError(f"discount rate out of [0, 1): {h}")
        if self.min_offer < 1:
            raise ValueError("min_offer must be >= 1")
        if self.min_offer < 2:
            warnings.warn(
                "min_offer < 2: the opt-out counts toward the minimum, so an "
                "assortment may contain no real time slot",
                stacklevel=2,
            )
        prev_hi = -math.inf
        for lo, hi in self.slots:
            if lo >= hi:
                raise ValueError(f"empty slot window ({lo}, {hi})")
            if lo < prev_hi:
                raise ValueError("slot windows must be ordered and non-overlapping")
            prev_hi = hi
        if self.revenue_mode not in ("discount", "paid_price"):
            raise ValueError(f"unknown revenue_mode {self.revenue_mode!r}")

    @property
    def n_customers(self) -> int:
        return self.routing.n_customers

    @property
    def n_nodes(self) -> int:
        return self.routing.n_customers + 1

    @property
    def horizon(self) -> float:
        return self.routing.horizon

    def offer_set(self) -> OfferSet:
        return build_offer_set(list(self.slots), list(self.discount_rates))

    def option_window(self, option: Option) -> tuple[float, float]:
        """Slot window of an option; the opt-out maps to the full horizon."""
        if option.is_opt_out:
            return (0.0, self.horizon)
        return self.slots[option.slot]

    def option_revenue(self, option: Option) -> float:
        """Per-choice revenue coefficient under the active revenue mode."""
        if option.is_opt_out:
            return 0.0
        if self.revenue_mode == "discount":
            return option.discount * self.base_fee
        return (1.0 - option.discount) * self.base_fee

    def service_times(self) -> np.ndarray:
        return np.array([0.0] + [c.service for c in self.routing.customers])

    def demands(self) -> np.ndarray:
        return np.array([c.demand for c in self.routing.customers])


@dataclass(frozen=True)
class BehaviorParams:
    """Distributional inputs for the taste draws plus pricing constants."""
    slot_time_means: tuple[float, ...] = (3.0066, 3.1213, 2.7334)
    slot_time_sds: tuple[float, ...] = (0.3273, 0.5486, 0.2168)
    price_mean: float = -0.0766
    # The price sensitivity is specified as N(-0.0766, 0.01); 0.01 is read as a
    # variance, hence sd 0.1.  Override here if the literal-sd reading is wanted.
    price_sd: float = 0.1
    fee: float = 10.0
    discounts: tuple[float, ...] = (0.0, 0.2)

    def __post_init__(self):
        if len(self.slot_time_means) != len(self.slot_time_sds):
            raise ValueError("slot mean/sd lists differ in length")
        if any(sd < 0 for sd in self.slot_time_sds) or self.price_sd < 0:
            raise ValueError("negative standard deviation")

    @property
    def n_slots(self) -> int:
        return len(self.slot_time_means)


@dataclass(frozen=True)
class ScenarioSet:
    """Dense draws over options x customers x scenarios.

    ``beta_time[i, n, r]`` is zero on the opt-out row, ``xi`` covers every
    option including the opt-out, and ``beta_price[n, r]`` is shared across
    options.  Bit-reproducible from (seed, shapes).
    """
    R: int
    beta_time: np.ndarray    # (I, C, R)
    beta_price: np.ndarray   # (C, R)
    xi: np.ndarray           # (I, C, R)
    seed: int

    @property
    def n_options(self) -> int:
        return self.beta_time.shape[0]

    @property
    def n_customers(self) -> int:
        return self.beta_time.shape[1]

    def zero_noise(self) -> "ScenarioSet":
        """Deterministic variant: the Gumbel error term removed (xi == 0)."""
        return replace(self, xi=np.zeros_like(self.xi))

    def fresh_xi(self, xi_seed: int) -> "ScenarioSet":
        """Same taste draws, new Gumbel realizations from ``xi_seed``."""
        new_xi = _draw_xi(self.n_options, self.n_customers, self.R, xi_seed)
        return replace(self, xi=new_xi, seed=xi_seed)


# ---------------------------------------------------------------------------
# Solomon-format parsing / writing


def parse_solomon(text: str) -> RoutingData:
    """Parse the classic Solomon layout.

    Title line, a VEHICLE block with NUMBER/CAPACITY, then a CUSTOMER table
    with seven numeric columns.  The row with the first id (0) is the depot.
    """
    lines = text.splitlines()
    vehicle_count = vehicle_capacity = None
    rows: list[tuple[int, list[float]]] = []
    section = None
    for idx, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        upper = stripped.upper()
        if upper.startswith("VEHICLE"):
            section = "vehicle"
            continue
        if upper.startswith("CUSTOMER"):
            section = "customer"
            continue
        if section == "vehicle":
            if upper.startswith("NUMBER"):
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise SolomonParseError(idx, f"expected NUMBER CAPACITY, got {stripped!r}")
            try:
                vehicle_count, vehicle_capacity = int(parts[0]), float(parts[1])
            except ValueError:
                raise SolomonParseError(idx, f"non-numeric vehicle fields in {stripped!r}")
            section = None
        elif section == "customer":
            if upper.startswith("CUST"):
                continue
            parts = stripped.split()
            if len(parts) != 7:
                raise SolomonParseError(idx, f"expected 7 customer fields, got {len(parts)}")
            try:
                values = [float(p) for p in parts]
                values[0] = int(parts[0])
            except ValueError:
                raise SolomonParseError(idx, f"non-numeric customer field in {stripped!r}")
            rows.append((idx, values))
    if vehicle_count is None:
        raise SolomonParseError(len(lines), "missing VEHICLE block")
    if not rows:
        raise SolomonParseError(len(lines), "missing CUSTOMER table")

    seen: set[int] = set()
    nodes = []
    for line_no, vals in rows:
        node_id = int(vals[0])
        if node_id in seen:
            raise SolomonParseError(line_no, f"duplicate node id {node_id}")
        seen.add(node_id)
        nodes.append(Node(node_id, vals[1], vals[2], vals[3], vals[4], vals[5], vals[6]))
    return RoutingData(
        depot=nodes[0],
        customers=tuple(nodes[1:]),
        vehicle_count=vehicle_count,
        vehicle_capacity=vehicle_capacity,
    )


def to_solomon_text(routing: RoutingData, title: str = "instance") -> str:
    def fmt(v: float) -> str:
        return f"{v:g}"

    out = [title, "", "VEHICLE", "NUMBER     CAPACITY",
           f"  {routing.vehicle_count}         {fmt(routing.vehicle_capacity)}", "",
           "CUSTOMER",
           "CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME",
           ""]
    for node in (routing.depot, *routing.customers):
        out.append("    ".join(
            [str(node.id), fmt(node.x), fmt(node.y), fmt(node.demand),
             fmt(node.ready), fmt(node.due), fmt(node.service)]))
    return "\n".join(out) + "\n"


def load_solomon(path) -> RoutingData:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_solomon(fh.read())


# ---------------------------------------------------------------------------
# Sampling and option-set construction

FLEET_PAIRING = {5: 3, 10: 4, 15: 5, 20: 6}


def default_fleet(n_customers: int) -> int:
    """Customer-count to fleet-size pairing used throughout the experiments."""
    if n_customers in FLEET_PAIRING:
        return FLEET_PAIRING[n_customers]
    return max(2, 2 + math.ceil(n_customers / 5))


def subsample(routing: RoutingData, n: int, vehicles: int, seed: int) -> RoutingData:
    if not 1 <= n <= routing.n_customers:
        raise ValueError(f"subsample size {n} out of range 1..{routing.n_customers}")
    order = rng.permutation(seed, "subsample", routing.n_customers)
    chosen = tuple(routing.customers[j] for j in order[:n])
    return RoutingData(routing.depot, chosen, vehicles, routing.vehicle_capacity)


def build_offer_set(slots, discounts) -> OfferSet:
    if len(slots) < 1:
        raise ValueError("need at least one time slot")
    if len(set(discounts)) != len(discounts):
        raise ValueError("duplicate discount rate")
    for h in discounts:
        if not 0.0 <= h < 1.0:
            raise ValueError(f"discount rate out of [0, 1): {h}")
    options = [Option(0, None, 0.0)]
    groups: dict[int, list[int]] = {}
    next_id = 1
    for t in range(len(slots)):
        groups[t] = []
        for h in discounts:
            options.append(Option(next_id, t, h))
            groups[t].append(next_id)
            next_id += 1
    return OfferSet(tuple(options), {t: tuple(ids) for t, ids in groups.items()})


def default_slot_windows(horizon: float, n_slots: int) -> tuple[tuple[float, float], ...]:
    """Partition [0, horizon] into equal-width delivery slots."""
    edges = np.linspace(0.0, horizon, n_slots + 1)
    return tuple((float(edges[t]), float(edges[t + 1])) for t in range(n_slots))


def travel_matrices(routing: RoutingData, cost_factor: float = 1.0,
                    decimals: int | None = None):
    """Euclidean travel times and the proportional cost matrix.

    Distances are kept at full double precision by default: rounding can break
    the triangle inequality at the rounding scale, which the routing-cost
    monotonicity arguments depend on.  Pass ``decimals`` to round anyway.
    """
    pts = np.array([(routing.depot.x, routing.depot.y)]
                   + [(c.x, c.y) for c in routing.customers])
    diff = pts[:, None, :] - pts[None, :, :]
    t = np.hypot(diff[..., 0], diff[..., 1])
    if decimals is not None:
        t = np.round(t, decimals)
    return t, t * cost_factor


def make_instance(routing: RoutingData, params: BehaviorParams,
                  min_offer: int = 1, cost_factor: float = 1.0,
                  revenue_mode: str = "discount",
                  slots: tuple[tuple[float, float], ...] | None = None) -> Instance:
    if slots is None:
        slots = default_slot_windows(routing.horizon, params.n_slots)
    if len(slots) != params.n_slots:
        raise ValueError("slot count disagrees with behavioral slot parameters")
    t, c = travel_matrices(routing, cost_factor)
    return Instance(
        routing=routing,
        travel_time=t,
        travel_cost=c,
        slots=tuple(slots),
        discount_rates=tuple(params.discounts),
        base_fee=params.fee,
        min_offer=min_offer,
        cost_factor=cost_factor,
        revenue_mode=revenue_mode,
    )


# ---------------------------------------------------------------------------
# Scenario generation


def _draw_xi(n_options: int, n_customers: int, R: int, seed: int) -> np.ndarray:
    u = rng.uniform_open(seed, "xi", n_options * n_customers * R)
    return rng.gumbel_inverse_cdf(u).reshape(n_options, n_customers, R)


def generate_scenarios(offer: OfferSet, n_customers: int, R: int,
                       params: BehaviorParams, seed: int) -> ScenarioSet:
    """Draw taste parameters and Gumbel errors for every (option, customer, scenario).

    beta_time is normal per the option's slot, beta_price is normal and shared
    across options, xi is EV(0,1) via the inverse CDF -log(-log(u)).  The
    opt-out keeps a zero beta_time row (its systematic utility is normalized
    to zero) but still receives its own xi draws.
    """
    if R < 1:
        raise ValueError("need at least one scenario")
    if offer.n_slots > params.n_slots:
        raise ValueError("offer set has more slots than behavioral parameters")
    I = offer.n_options

    beta_time = np.zeros((I, n_customers, R))
    u_time = rng.uniform_open(seed, "beta_time",
                              (I - 1) * n_customers * R).reshape(I - 1, n_customers, R)
    z_time = ndtri(u_time)
    for opt in offer.options[1:]:
        mean = params.slot_time_means[opt.slot]
        sd = params.slot_time_sds[opt.slot]
        beta_time[opt.id] = mean + sd * z_time[opt.id - 1]

    beta_price = rng.normal(seed, "beta_price", n_customers * R,
                            params.price_mean, params.price_sd).reshape(n_customers, R)
    xi = _draw_xi(I, n_customers, R, seed)
    return ScenarioSet(R=R, beta_time=beta_time, beta_price=beta_price, xi=xi, seed=seed)


# ---------------------------------------------------------------------------
# Instance bundle (JSON) and behavioral parameter files


def instance_to_dict(inst: Instance) -> dict:
    r = inst.routing

    def node_dict(n: Node) -> dict:
        return {"id": n.id, "x": n.x, "y": n.y, "demand": n.demand,
                "ready": n.ready, "due": n.due, "service": n.service}

    return {
        "format_version": FORMAT_VERSION,
        "routing": {
            "depot": node_dict(r.depot),
            "customers": [node_dict(c) for c in r.customers],
            "vehicle_count": r.vehicle_count,
            "vehicle_capacity": r.vehicle_capacity,
        },
        "slots": [list(s) for s in inst.slots],
        "discount_rates": list(inst.discount_rates),
        "base_fee": inst.base_fee,
        "min_offer": inst.min_offer,
        "cost_factor": inst.cost_factor,
        "revenue_mode": inst.revenue_mode,
    }


def instance_from_dict(data: dict) -> Instance:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported instance format_version {version!r}")
    rd = data["routing"]

    def node(d: dict) -> Node:
        return Node(d["id"], d["x"], d["y"], d["demand"], d["ready"], d["due"], d["service"])

    routing = RoutingData(
        depot=node(rd["depot"]),
        customers=tuple(node(c) for c in rd["customers"]),
        vehicle_count=rd["vehicle_count"],
        vehicle_capacity=rd["vehicle_capacity"],
    )
    t, c = travel_matrices(routing, data["cost_factor"])
    return Instance(
        routing=routing,
        travel_time=t,
        travel_cost=c,
        slots=tuple(tuple(s) for s in data["slots"]),
        discount_rates=tuple(data["discount_rates"]),
        base_fee=data["base_fee"],
        min_offer=data["min_offer"],
        cost_factor=data["cost_factor"],
        revenue_mode=data.get("revenue_mode", "discount"),
    )


def save_instance(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


def parse_behavior_params(text: str) -> BehaviorParams:
    """Plain-text key-value file: `key = value`, lists comma-separated."""
    values: dict[str, str] = {}
    for idx, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {idx}: expected 'key = value', got {stripped!r}")
        key, _, val = stripped.partition("=")
        values[key.strip()] = val.strip()

    def floats(key: str, default):
        if key not in values:
            return default
        return tuple(float(v) for v in values[key].split(","))

    def scalar(key: str, default):
        return float(values[key]) if key in values else default

    base = BehaviorParams()
    known = {"slot_time_means", "slot_time_sds", "price_mean", "price_sd",
             "fee", "discounts"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown behavioral parameter keys: {sorted(unknown)}")
    return BehaviorParams(
        slot_time_means=floats("slot_time_means", base.slot_time_means),
        slot_time_sds=floats("slot_time_sds", base.slot_time_sds),
        price_mean=scalar("price_mean", base.price_mean),
        price_sd=scalar("price_sd", base.price_sd),
        fee=scalar("fee", base.fee),
        discounts=floats("discounts", base.discounts),
    )


def load_behavior_params(path) -> BehaviorParams:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_behavior_params(fh.read())
