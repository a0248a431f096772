"""Scenario utilities, utility-maximizing choice simulation, and big-M constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import OfferSet, Option, ScenarioSet


@dataclass(frozen=True)
class Assortment:
    """Binary offer matrix gamma[i, n] over options x customers."""
    gamma: np.ndarray   # (I, C) int8

    def __post_init__(self):
        if self.gamma.ndim != 2:
            raise ValueError("gamma must be options x customers")

    @property
    def n_options(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_customers(self) -> int:
        return self.gamma.shape[1]

    def validate(self, offer: OfferSet, min_offer: int = 1) -> None:
        g = self.gamma
        if not np.all(g[0] == 1):
            raise ValueError("the opt-out must be offered to every customer")
        if not np.all(np.isin(g, (0, 1))):
            raise ValueError("gamma entries must be binary")
        if np.any(g.sum(axis=0) < min_offer):
            raise ValueError(f"some customer is offered fewer than {min_offer} options")
        for t, ids in offer.slot_groups.items():
            if np.any(g[list(ids)].sum(axis=0) > 1):
                raise ValueError(f"slot {t} offered at two prices to one customer")


@dataclass(frozen=True)
class ChoiceOutcome:
    w: np.ndarray              # (I, C, R) int8, one-hot over options
    utilities: np.ndarray      # (I, C, R) raw draws (no offer penalty applied)
    chosen_utility: np.ndarray     # (C, R)
    probabilities: np.ndarray      # (I, C) scenario-average choice shares


@dataclass(frozen=True)
class BigM:
    """Per-(customer, scenario) constants for the choice linearization.

    ``m_choice`` is the utility maximum max_i(V_inr + xi_inr).  ``m_link`` is
    the penalty constant the model applies to unoffered options: m_choice
    alone leaves an unoffered option tied with (or above) the opt-out whenever
    every offered utility is negative, so the penalty is enlarged by the
    opt-out draw, m_link = m_choice - xi_opt_out + 1, which pushes every
    unoffered option strictly below the opt-out.  ``m_utility`` bounds the gap
    between the chosen utility and any other (possibly penalized) utility.
    """
    m_choice: np.ndarray    # (C, R)
    m_utility: np.ndarray   # (C, R)
    m_link: np.ndarray      # (C, R)


def option_revenues(offer: OfferSet, fee: float, mode: str = "discount") -> np.ndarray:
    """Per-option revenue coefficients; the opt-out always contributes zero."""
    rho = np.zeros(offer.n_options)
    for opt in offer.options[1:]:
        rho[opt.id] = opt.discount * fee if mode == "discount" else (1.0 - opt.discount) * fee
    return rho


def utilities(offer: OfferSet, scenarios: ScenarioSet, fee: float) -> np.ndarray:
    """Raw scenario utilities: beta_time * 1 + beta_price * h * f + xi.

    The slot attribute enters as the indicator 1 of the option's own slot (the
    time taste is an alternative-specific random constant); the opt-out row
    reduces to its xi draws since its systematic part is normalized to zero.
    """
    h = np.array([0.0 if o.is_opt_out else o.discount for o in offer.options])
    u = scenarios.beta_time + scenarios.beta_price[None, :, :] * (h * fee)[:, None, None]
    return u + scenarios.xi


def systematic_utility(option: Option, customer: int, scenario_index: int,
                       scenarios: ScenarioSet, fee: float) -> float:
    if option.is_opt_out:
        return float(scenarios.xi[0, customer, scenario_index])
    return float(
        scenarios.beta_time[option.id, customer, scenario_index]
        + scenarios.beta_price[customer, scenario_index] * option.discount * fee
        + scenarios.xi[option.id, customer, scenario_index]
    )


def compute_big_m(scenarios: ScenarioSet, offer: OfferSet, fee: float) -> BigM:
    u = utilities(offer, scenarios, fee)
    m_choice = u.max(axis=0)
    m_link = m_choice - scenarios.xi[0] + 1.0
    span = m_choice - u.min(axis=0)
    m_utility = np.maximum(2.0 * m_choice + 1.0, span + m_link + 1.0)
    return BigM(m_choice=m_choice, m_utility=m_utility, m_link=m_link)


def simulate_choices(assortment: Assortment, scenarios: ScenarioSet,
                     offer: OfferSet, fee: float) -> ChoiceOutcome:
    """Argmax choice of each customer over offered options, per scenario.

    Ties break toward the lowest option id (the opt-out is id 0), which only
    matters on measure-zero draws but keeps runs reproducible.
    """
    u = utilities(offer, scenarios, fee)
    offered = assortment.gamma[:, :, None].astype(bool)
    masked = np.where(offered, u, -np.inf)
    choice = masked.argmax(axis=0)                      # (C, R), first max wins
    I, C, R = u.shape
    w = np.zeros((I, C, R), dtype=np.int8)
    n_idx, r_idx = np.meshgrid(np.arange(C), np.arange(R), indexing="ij")
    w[choice, n_idx, r_idx] = 1
    chosen_u = np.take_along_axis(masked, choice[None], axis=0)[0]
    probabilities = w.mean(axis=2, dtype=np.float64)
    return ChoiceOutcome(w=w, utilities=u, chosen_utility=chosen_u,
                         probabilities=probabilities)


def expected_revenue(outcome: ChoiceOutcome, offer: OfferSet, fee: float,
                     mode: str = "discount") -> float:
    rho = option_revenues(offer, fee, mode)
    R = outcome.w.shape[2]
    return float(np.tensordot(rho, outcome.w.sum(axis=(1, 2)), axes=1) / R)


def mnl_probabilities(gamma: np.ndarray, systematic: np.ndarray) -> np.ndarray:
    """Closed-form logit shares gamma*e^V / sum_j gamma*e^V per customer.

    ``systematic`` is (I, C) with the beta part only (no Gumbel draws); this
    is the degenerate-mixing case where all taste draws are point masses.
    """
    expv = np.where(gamma.astype(bool), np.exp(systematic), 0.0)
    return expv / expv.sum(axis=0, keepdims=True)


def full_assortment(offer: OfferSet, n_customers: int,
                    discount_index: int = 0) -> Assortment:
    """Every slot offered to everyone at one fixed discount (plus opt-out)."""
    gamma = np.zeros((offer.n_options, n_customers), dtype=np.int8)
    gamma[0] = 1
    for ids in offer.slot_groups.values():
        gamma[ids[discount_index]] = 1
    return Assortment(gamma)


def opt_out_only(offer: OfferSet, n_customers: int) -> Assortment:
    gamma = np.zeros((offer.n_options, n_customers), dtype=np.int8)
    gamma[0] = 1
    return Assortment(gamma)
