import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coherent_link.bell import BellDiagonal, bell_diagonal_decompose
from coherent_link.core import DomainError, binary_entropy
from coherent_link.protocols import (
    PROTOCOLS,
    RATE_FUNCTIONS,
    LinkConfig,
    baseline_curves,
    cow_dr_outcomes,
    cow_dr_rate,
    cow_usd_outcomes,
    cow_usd_rate,
    ctw_no_click_state,
    ctw_outcome_probabilities_cat_norm,
    ctw_outcomes,
    ctw_rate,
    db_from_eta,
    dephased_pair_hashing,
    dolinar_error,
    dolinar_table,
    eta_from_db,
    repeaterless_bound_direct,
    repeaterless_bound_midpoint,
)

alphas = st.floats(0.0, 5.0)
etas = st.floats(1e-6, 1.0)


def test_ctw_deterministic_limit_value():
    assert ctw_rate(2.0, 1.0).rate == pytest.approx(1 - math.exp(-8), rel=1e-15)


def test_zero_amplitude_gives_zero_rate():
    for name in ("ctw", "cow-usd"):
        assert RATE_FUNCTIONS[name](0.0, 0.5).rate == 0.0


def test_ctw_rate_formula():
    a, eta = 0.7, 0.3
    t = math.exp(-4 * (1 - math.sqrt(eta)) * a * a)
    expected = (1 - math.exp(-2 * math.sqrt(eta) * a * a)) * (1 - binary_entropy((1 + t) / 2))
    assert ctw_rate(a, eta).rate == pytest.approx(expected, rel=1e-13)


def test_cow_usd_rate_formula():
    a, eta = 0.9, 0.6
    t = math.exp(-2 * (1 - eta) * a * a)
    expected = (1 - math.exp(-2 * eta * a * a)) * (1 - binary_entropy((1 + t) / 2))
    assert cow_usd_rate(a, eta).rate == pytest.approx(expected, rel=1e-13)


def test_cow_dr_hashing_formula():
    a, eta = 0.9, 0.7
    tp = math.exp(-2 * (1 - eta) * a * a)
    s = math.sqrt(1 - math.exp(-4 * eta * a * a))
    total = 1.0
    for j in (0, 1):
        for k in (0, 1):
            p = (1 + (-1) ** j * tp) / 2 * (1 + (-1) ** k * s) / 2
            total += p * math.log2(p)
    assert cow_dr_rate(a, eta).hashing_per_success == pytest.approx(total, abs=1e-14)
    assert cow_dr_rate(a, eta).p_success == 1.0


def test_dolinar_error_forms_agree():
    for a in (0.0, 0.1, 0.5, 1.0):
        naive = (1 - math.sqrt(1 - math.exp(-4 * a * a))) / 2
        assert dolinar_error(a) == pytest.approx(naive, abs=1e-15)
    # far tail: the rationalized form stays positive where the naive one underflows to 0
    assert dolinar_error(3.0) == pytest.approx(math.exp(-36) / 4, rel=1e-12)


def test_dolinar_table_joint_sums_to_one():
    tab = dolinar_table(0.8, 0.4)
    assert tab.joint.sum() == pytest.approx(1.0)
    assert tab.joint[0, 0] == pytest.approx((1 - tab.p_phase) * (1 - tab.p_e))


@given(alphas, etas)
def test_rates_in_unit_interval(a, eta):
    for name in PROTOCOLS:
        r = RATE_FUNCTIONS[name](a, eta)
        assert 0.0 <= r.rate <= 1.0
        assert 0.0 <= r.p_success <= 1.0


@given(alphas, st.floats(1e-6, 0.999999))
def test_rates_below_repeaterless_bounds(a, eta):
    assert ctw_rate(a, eta).rate <= repeaterless_bound_midpoint(eta)
    assert cow_usd_rate(a, eta).rate <= repeaterless_bound_direct(eta)
    assert cow_dr_rate(a, eta).rate <= repeaterless_bound_direct(eta)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), etas)
def test_success_increases_with_amplitude(a, b, eta):
    lo, hi = sorted((a, b))
    assert ctw_rate(lo, eta).p_success <= ctw_rate(hi, eta).p_success
    assert cow_usd_rate(lo, eta).p_success <= cow_usd_rate(hi, eta).p_success


def test_ctw_outcome_classes():
    a, eta = 0.8, 0.5
    outs = ctw_outcomes(a, eta)
    assert math.fsum(o.probability for o in outs) == pytest.approx(1.0, abs=1e-15)
    succ = [o for o in outs if o.success]
    assert math.fsum(o.probability for o in succ) == pytest.approx(ctw_rate(a, eta).p_success, rel=1e-14)
    for o in succ:
        o.state.validate()
        assert o.hashing() == pytest.approx(ctw_rate(a, eta).hashing_per_success, abs=1e-13)


def test_ctw_odd_counts_flip_phase():
    outs = {o.label: o for o in ctw_outcomes(0.8, 0.5)}
    even = outs["d1_even"].bell()[0]
    odd = outs["d1_odd"].bell()[0]
    assert even.p_phi_plus > even.p_phi_minus
    assert odd.p_phi_minus > odd.p_phi_plus
    assert outs["d2_even"].bell()[0].p_psi_plus > 0.5


def test_cat_norm_form_shares_totals_not_split():
    a, eta = 0.8, 0.5
    cat = ctw_outcome_probabilities_cat_norm(a, eta)
    exact = {o.label: o.probability for o in ctw_outcomes(a, eta)}
    tot = lambda d: d["d1_even"] + d["d1_odd"] + d["d2_even"] + d["d2_odd"]  # noqa: E731
    assert tot(cat) == pytest.approx(tot(exact), rel=1e-14)
    assert abs(cat["d1_even"] - exact["d1_even"]) > 1e-3


def test_no_click_state_limits():
    rho = ctw_no_click_state(0.0, 0.5).matrix
    assert np.allclose(rho, np.full((4, 4), 0.25))
    outs = {o.label: o for o in ctw_outcomes(4.0, 1.0)}
    assert outs["no_click"].probability < 1e-12


def test_cow_usd_outcomes():
    outs = cow_usd_outcomes(0.9, 0.6)
    assert math.fsum(o.probability for o in outs) == pytest.approx(1.0)
    assert outs[0].bell()[0].p_phi_plus > 0.5
    assert outs[1].bell()[0].p_psi_plus > 0.5


def test_cow_dr_outcomes_match_rate():
    outs = cow_dr_outcomes(0.9, 0.7)
    for o in outs:
        assert o.probability == 0.5
        assert o.hashing() == pytest.approx(cow_dr_rate(0.9, 0.7).hashing_per_success, abs=1e-13)


def test_bell_diagonal_roundtrip():
    bd = BellDiagonal(0.4, 0.3, 0.2, 0.1)
    back, residual = bell_diagonal_decompose(bd.to_matrix())
    assert residual < 1e-15
    assert np.allclose(back.as_array(), bd.as_array())


def test_dephased_pair_hashing_small_exponent():
    assert dephased_pair_hashing(0.0) == 1.0
    x = 1e-10
    assert dephased_pair_hashing(x) == pytest.approx(1 - binary_entropy(x / 2), abs=1e-15)


def test_db_conversions():
    assert eta_from_db(10.0) == pytest.approx(0.1)
    assert db_from_eta(1.0) == 0.0
    assert math.copysign(1.0, db_from_eta(1.0)) == 1.0
    assert db_from_eta(eta_from_db(3.7)) == pytest.approx(3.7)
    link = LinkConfig.from_loss_db(20.0)
    assert link.arm_transmissivity == pytest.approx(0.1)
    assert LinkConfig(0.25, "one-way").arm_transmissivity == 0.25


def test_bounds_and_baselines():
    assert repeaterless_bound_direct(1.0) == math.inf
    assert repeaterless_bound_midpoint(0.25) == pytest.approx(1.0)
    assert repeaterless_bound_direct(0.5) == pytest.approx(1.0)
    base = baseline_curves(1.0)
    assert base["dual_rail_ref"] == 0.5 and base["cap"] == 0.5
    assert baseline_curves(1e-4)["single_rail_ref"] == pytest.approx(0.0011)


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.01, float("nan")])
def test_eta_domain(bad):
    with pytest.raises(DomainError):
        ctw_rate(0.5, bad)


def test_alpha_domain():
    with pytest.raises(DomainError):
        cow_usd_rate(-0.1, 0.5)
