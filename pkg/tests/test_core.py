import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coherent_link.core import (
    DomainError,
    TruncationError,
    as_probability,
    binary_entropy,
    cat_norms,
    coherent_overlap,
    hashing_bell_diagonal,
    pnr_parity_probabilities,
)

amp = st.floats(-3, 3, allow_nan=False)


@given(amp, amp, amp, amp)
def test_overlap_modulus(ar, ai, br, bi):
    a, b = complex(ar, ai), complex(br, bi)
    assert abs(coherent_overlap(a, b)) ** 2 == pytest.approx(math.exp(-abs(a - b) ** 2), rel=1e-12, abs=1e-300)


@given(amp, amp, amp, amp)
def test_overlap_conjugate_symmetry(ar, ai, br, bi):
    a, b = complex(ar, ai), complex(br, bi)
    assert coherent_overlap(a, b) == pytest.approx(coherent_overlap(b, a).conjugate(), rel=1e-12, abs=1e-300)


def test_overlap_self_and_errors():
    assert coherent_overlap(1 + 2j, 1 + 2j) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        coherent_overlap(float("nan"), 0)


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.11) == pytest.approx(binary_entropy(0.89))
    with pytest.raises(DomainError):
        binary_entropy(1.5)


def test_hashing_extremes():
    assert hashing_bell_diagonal([1, 0, 0, 0]) == 1.0
    assert hashing_bell_diagonal([0.25] * 4) == pytest.approx(-1.0)
    assert hashing_bell_diagonal([0.5, 0.5, 0, 0]) == pytest.approx(0.0)


def test_hashing_rejects_bad_weights():
    with pytest.raises(DomainError):
        hashing_bell_diagonal([0.5, 0.5, 0.5, 0])
    with pytest.raises(DomainError):
        hashing_bell_diagonal([1.0, 0.0, 0.0])


def test_as_probability_clamps_drift():
    assert as_probability(1 + 1e-14) == 1.0
    assert as_probability(-1e-14) == 0.0
    with pytest.raises(DomainError):
        as_probability(-1e-6)


@given(st.floats(0, 6))
def test_cat_norm_sum(a):
    n = cat_norms(a)
    assert n.n_even**2 + n.n_odd**2 == pytest.approx(4.0)


def test_cat_norm_small_amplitude():
    # |a> - |-a> has norm^2 = 2(1 - e^{-2a^2}) ~ 4a^2
    assert cat_norms(1e-9).n_odd ** 2 == pytest.approx(4e-18, rel=1e-8)


@given(st.floats(0, 50))
def test_parity_split_sums_to_one(mu):
    assert math.fsum(pnr_parity_probabilities(mu)) == pytest.approx(1.0, abs=1e-15)


def test_parity_split_against_poisson_sum():
    mu = 1.7
    pmf = [math.exp(-mu) * mu**n / math.factorial(n) for n in range(80)]
    zero, odd, even = pnr_parity_probabilities(mu)
    assert zero == pytest.approx(pmf[0], rel=1e-14)
    assert odd == pytest.approx(math.fsum(pmf[1::2]), rel=1e-14)
    assert even == pytest.approx(math.fsum(pmf[2::2]), rel=1e-14)


def test_truncation_error_names_required_cutoff():
    err = TruncationError("too small", required_cutoff=25)
    assert err.required_cutoff == 25
    assert "required cutoff >= 25" in str(err)
