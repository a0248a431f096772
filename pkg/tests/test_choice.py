import math

import numpy as np
import pytest

from cbtsm.choice import (Assortment, compute_big_m, expected_revenue,
                          full_assortment, mnl_probabilities, opt_out_only,
                          simulate_choices, systematic_utility, utilities)
from cbtsm.instance import (BehaviorParams, ScenarioSet, build_offer_set,
                            default_slot_windows, generate_scenarios)

FEE = 10.0


def offer3():
    return build_offer_set(default_slot_windows(1236, 3), [0.0, 0.2])


def manual_scenarios(offer, beta_time_val, beta_price_val, xi_val, C=1, R=1):
    I = offer.n_options
    bt = np.full((I, C, R), beta_time_val)
    bt[0] = 0.0
    bp = np.full((C, R), beta_price_val)
    xi = np.full((I, C, R), xi_val)
    return ScenarioSet(R=R, beta_time=bt, beta_price=bp, xi=xi, seed=0)


def test_systematic_utility_examples():
    offer = offer3()
    s = manual_scenarios(offer, 3.0, -0.0766, 0.0)
    opt_out = offer.options[0]
    s_opt = manual_scenarios(offer, 3.0, -0.0766, 0.7)
    assert systematic_utility(opt_out, 0, 0, s_opt, FEE) == pytest.approx(0.7)

    zero_discount = next(o for o in offer.options[1:] if o.discount == 0.0)
    assert systematic_utility(zero_discount, 0, 0, s, FEE) == pytest.approx(3.0)

    discounted = next(o for o in offer.options[1:] if o.discount == 0.2)
    # 3.0 + (-0.0766 * 0.2 * 10), checked by hand: 3.0 - 0.1532
    assert systematic_utility(discounted, 0, 0, s, FEE) == pytest.approx(2.8468)


def test_big_m_is_utility_maximum():
    offer = build_offer_set([(0.0, 1.0)], [0.0, 0.2])   # 3 options
    I = offer.n_options
    bt = np.zeros((I, 1, 1))
    bp = np.zeros((1, 1))
    xi = np.array([0.5, 1.2, -0.3]).reshape(I, 1, 1)
    s = ScenarioSet(R=1, beta_time=bt, beta_price=bp, xi=xi, seed=0)
    big = compute_big_m(s, offer, FEE)
    assert big.m_choice[0, 0] == pytest.approx(1.2)


def test_big_m_single_option():
    offer = build_offer_set([(0.0, 1.0)], [0.0])
    s = manual_scenarios(offer, 2.5, 0.0, 0.0)
    big = compute_big_m(s, offer, FEE)
    assert big.m_choice[0, 0] == pytest.approx(2.5)


def test_big_m_margin_property_on_random_sets():
    offer = offer3()
    for seed in range(100):
        s = generate_scenarios(offer, 3, 2, BehaviorParams(), seed=seed)
        big = compute_big_m(s, offer, FEE)
        assert np.all(big.m_utility >= 2 * big.m_choice)
        assert np.all(big.m_link >= 1.0)
        # the linkage penalty pushes every unoffered utility below the opt-out
        u = utilities(offer, s, FEE)
        assert np.all(u.max(axis=0) - big.m_link <= s.xi[0] - 1 + 1e-12)


def test_simulate_picks_max_offered():
    offer = build_offer_set([(0.0, 1.0)], [0.0])
    s = manual_scenarios(offer, 1.5, 0.0, 0.0)
    out = simulate_choices(full_assortment(offer, 1), s, offer, FEE)
    assert out.w[1, 0, 0] == 1
    assert out.chosen_utility[0, 0] == pytest.approx(1.5)


def test_opt_out_only_forces_opt_out():
    offer = offer3()
    s = generate_scenarios(offer, 4, 20, BehaviorParams(), seed=3)
    out = simulate_choices(opt_out_only(offer, 4), s, offer, FEE)
    assert np.all(out.w[0] == 1)
    assert np.all(out.probabilities[0] == 1.0)


def test_choices_stay_inside_assortment_and_simplex():
    offer = offer3()
    rng = np.random.default_rng(5)
    for seed in range(25):
        s = generate_scenarios(offer, 3, 7, BehaviorParams(), seed=seed)
        gamma = np.zeros((offer.n_options, 3), dtype=np.int8)
        gamma[0] = 1
        for t, ids in offer.slot_groups.items():
            for n in range(3):
                pick = rng.integers(0, len(ids) + 1)
                if pick < len(ids):
                    gamma[ids[pick], n] = 1
        out = simulate_choices(Assortment(gamma), s, offer, FEE)
        assert np.all(out.w.sum(axis=0) == 1)
        chosen = out.w.max(axis=2)
        assert np.all(chosen <= gamma)
        assert np.allclose(out.probabilities.sum(axis=0), 1.0)
        assert np.all((out.probabilities >= 0) & (out.probabilities <= 1))


def test_argmax_invariant_to_constant_shift():
    offer = offer3()
    s = generate_scenarios(offer, 2, 5, BehaviorParams(), seed=9)
    gamma = full_assortment(offer, 2)
    base = simulate_choices(gamma, s, offer, FEE)
    shifted = ScenarioSet(R=s.R, beta_time=s.beta_time, beta_price=s.beta_price,
                          xi=s.xi + 17.5, seed=s.seed)
    out = simulate_choices(gamma, shifted, offer, FEE)
    assert np.array_equal(base.w, out.w)


def test_expected_revenue_cases():
    offer = offer3()
    s = manual_scenarios(offer, 3.0, 0.0, 0.0)
    out = simulate_choices(opt_out_only(offer, 1), s, offer, FEE)
    assert expected_revenue(out, offer, FEE) == 0.0

    out2 = simulate_choices(full_assortment(offer, 1, discount_index=1), s, offer, FEE)
    assert out2.w[0].sum() == 0
    # one customer, one scenario, 20% of a fee of 10
    assert expected_revenue(out2, offer, FEE) == pytest.approx(2.0)


def test_revenue_monotone_in_discounted_flip():
    offer = offer3()
    s = generate_scenarios(offer, 2, 3, BehaviorParams(), seed=21)
    out = simulate_choices(full_assortment(offer, 2, 1), s, offer, FEE)
    base = expected_revenue(out, offer, FEE)
    w = out.w.copy()
    moved = np.where(w[0, 0] == 1)[0]
    if len(moved):
        r = moved[0]
        w[0, 0, r] = 0
        w[offer.slot_groups[0][1], 0, r] = 1
        bumped = type(out)(w=w, utilities=out.utilities,
                           chosen_utility=out.chosen_utility,
                           probabilities=out.probabilities)
        assert expected_revenue(bumped, offer, FEE) >= base


@pytest.mark.parametrize("R", [100, 1000, 10000])
def test_point_mass_simulation_matches_closed_form_logit(R):
    offer = offer3()
    params = BehaviorParams(slot_time_sds=(0.0, 0.0, 0.0), price_sd=0.0)
    C = 4
    s = generate_scenarios(offer, C, R, params, seed=31)
    gamma = full_assortment(offer, C, discount_index=1)
    out = simulate_choices(gamma, s, offer, FEE)

    systematic = np.zeros((offer.n_options, C))
    for opt in offer.options[1:]:
        systematic[opt.id] = (params.slot_time_means[opt.slot]
                              + params.price_mean * opt.discount * FEE)
    probs = mnl_probabilities(gamma.gamma, systematic)
    assert np.max(np.abs(out.probabilities - probs)) < 3.0 / math.sqrt(R)
