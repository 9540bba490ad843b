"""Closed-form rates and heralded states of the coherent-state protocols under pure loss.

Protocols:

* ``ctw``: both memories reflect a local pulse, pulses meet at a midpoint 50:50
  beamsplitter with photon-number-resolving detectors. Each arm has
  transmissivity sqrt(eta).
* ``cow-usd``: one pulse visits Alice's then Bob's memory over the full channel
  eta, then interferes with a local oscillator of amplitude alpha*sqrt(eta) ahead
  of two on-off detectors.
* ``cow-dr``: as ``cow-usd`` but the pulse phase is read out with a minimum-error
  (Helstrom) receiver, so every run heralds a state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bell import BellDiagonal, DensityOperator, HeraldOutcome, dephased_plus
from .core import DomainError, as_probability, binary_entropy, pnr_parity_probabilities

PROTOCOLS = ("ctw", "cow-usd", "cow-dr")
TOPOLOGY = {"ctw": "midpoint", "cow-usd": "one-way", "cow-dr": "one-way"}
SINGLE_PHOTON_CAP = 0.5


def eta_from_db(loss_db: float) -> float:
    return 10.0 ** (-float(loss_db) / 10.0)


def db_from_eta(eta: float) -> float:
    return 0.0 - 10.0 * math.log10(eta)  # no -0.0 at eta = 1


@dataclass(frozen=True)
class LinkConfig:
    """End-to-end link; ``midpoint`` splits eta into two arms of sqrt(eta)."""

    eta: float
    topology: str = "midpoint"

    def __post_init__(self):
        check_eta(self.eta)
        if self.topology not in ("midpoint", "one-way"):
            raise DomainError(f"unknown topology {self.topology!r}")

    @classmethod
    def from_loss_db(cls, loss_db: float, topology: str = "midpoint") -> "LinkConfig":
        return cls(eta_from_db(loss_db), topology)

    @property
    def loss_db(self) -> float:
        return db_from_eta(self.eta)

    @property
    def arm_transmissivity(self) -> float:
        return math.sqrt(self.eta) if self.topology == "midpoint" else self.eta


@dataclass(frozen=True)
class RatePoint:
    eta: float
    alpha: float
    p_success: float
    hashing_per_success: float
    rate: float

    @classmethod
    def build(cls, eta: float, alpha: float, p_success: float, hashing: float) -> "RatePoint":
        p = as_probability(p_success, "success probability")
        return cls(eta, alpha, p, hashing, p * max(0.0, hashing))


@dataclass(frozen=True)
class DolinarErrorTable:
    """Bit-flip (discrimination error) and phase-flip (loss) weights of COW-DR."""

    p_e: float
    p_phase: float

    @property
    def joint(self) -> np.ndarray:
        """P[j, k] with j the phase-flip and k the bit-flip index."""
        phase = np.array([1.0 - self.p_phase, self.p_phase])
        bit = np.array([1.0 - self.p_e, self.p_e])
        return np.outer(phase, bit)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0:
        raise DomainError(f"alpha must be a finite real >= 0, got {alpha!r}")
    return alpha


def check_eta(eta: float) -> float:
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0, 1], got {eta!r}")
    return eta


def one_minus_sqrt(eta: float) -> float:
    """1 - sqrt(eta) without cancellation near eta = 1."""
    return (1.0 - eta) / (1.0 + math.sqrt(eta))


def ctw_dephasing(alpha: float, eta: float) -> float:
    """T = exp(-4 (1 - sqrt(eta)) alpha^2) of the CTW heralded states."""
    return math.exp(-4.0 * one_minus_sqrt(eta) * alpha * alpha)


def cow_dephasing(alpha: float, eta: float) -> float:
    """T' = exp(-2 (1 - eta) alpha^2) of the COW heralded states."""
    return math.exp(-2.0 * (1.0 - eta) * alpha * alpha)


def dephased_pair_hashing(exponent: float) -> float:
    """1 - h2((1 + e^-x)/2), evaluated through (1 - e^-x)/2 to stay accurate as x -> 0."""
    return 1.0 - binary_entropy(-math.expm1(-exponent) / 2.0)


def ctw_rate(alpha: float, eta: float) -> RatePoint:
    alpha, eta = check_alpha(alpha), check_eta(eta)
    p = -math.expm1(-2.0 * math.sqrt(eta) * alpha * alpha)
    hashing = dephased_pair_hashing(4.0 * one_minus_sqrt(eta) * alpha * alpha)
    return RatePoint.build(eta, alpha, p, hashing)


def _pair_state(pair: str, t: float) -> DensityOperator:
    bd = BellDiagonal.pair(pair, (1.0 + t) / 2.0, (1.0 - t) / 2.0)
    return DensityOperator(bd.to_matrix(), (2, 2))


def ctw_no_click_state(alpha: float, eta: float) -> DensityOperator:
    """Memory state after CTW with no photon at either detector.

    Each memory keeps |+> with its coherence damped by the overlap of its own
    environment branches, exp(-2 (1 - sqrt(eta)) alpha^2).
    """
    t = math.exp(-2.0 * one_minus_sqrt(eta) * alpha * alpha)
    return DensityOperator(np.kron(dephased_plus(t), dephased_plus(t)), (2, 2))


def ctw_outcomes(alpha: float, eta: float) -> list[HeraldOutcome]:
    """The five CTW outcome classes with exact Poisson-parity probabilities."""
    alpha, eta = check_alpha(alpha), check_eta(eta)
    p_zero, p_odd, p_even = pnr_parity_probabilities(2.0 * math.sqrt(eta) * alpha * alpha)
    t = ctw_dephasing(alpha, eta)
    even_phi, odd_phi = _pair_state("phi", t), _pair_state("phi", -t)
    even_psi, odd_psi = _pair_state("psi", t), _pair_state("psi", -t)
    return [
        HeraldOutcome("d1_even", p_even / 2.0, even_phi),
        HeraldOutcome("d1_odd", p_odd / 2.0, odd_phi),
        HeraldOutcome("d2_even", p_even / 2.0, even_psi),
        HeraldOutcome("d2_odd", p_odd / 2.0, odd_psi),
        HeraldOutcome("no_click", p_zero, ctw_no_click_state(alpha, eta), success=False),
    ]


def ctw_outcome_probabilities_cat_norm(alpha: float, eta: float) -> dict[str, float]:
    """Per-class probabilities written as (1 - e^-mu) |N_e(o)|^2 / 8 with mu = 2 sqrt(eta) alpha^2.

    Kept for side-by-side reporting; the totals agree with the Poisson split but the
    even/odd shares do not.
    """
    mu = 2.0 * math.sqrt(eta) * alpha * alpha
    succ = -math.expm1(-mu)
    n_e2 = 2.0 * (1.0 + math.exp(-2.0 * mu))
    n_o2 = -2.0 * math.expm1(-2.0 * mu)
    return {
        "d1_even": succ * n_e2 / 8.0,
        "d1_odd": succ * n_o2 / 8.0,
        "d2_even": succ * n_e2 / 8.0,
        "d2_odd": succ * n_o2 / 8.0,
        "no_click": math.exp(-mu),
    }


def cow_usd_rate(alpha: float, eta: float) -> RatePoint:
    alpha, eta = check_alpha(alpha), check_eta(eta)
    p = -math.expm1(-2.0 * eta * alpha * alpha)
    hashing = dephased_pair_hashing(2.0 * (1.0 - eta) * alpha * alpha)
    return RatePoint.build(eta, alpha, p, hashing)


def cow_no_click_state(alpha: float, eta: float) -> DensityOperator:
    """COW memory state when neither detector clicks: only Alice's memory is dephased."""
    t = cow_dephasing(alpha, eta)
    return DensityOperator(np.kron(dephased_plus(t), dephased_plus(1.0)), (2, 2))


def cow_usd_outcomes(alpha: float, eta: float) -> list[HeraldOutcome]:
    alpha, eta = check_alpha(alpha), check_eta(eta)
    p = -math.expm1(-2.0 * eta * alpha * alpha)
    t = cow_dephasing(alpha, eta)
    return [
        HeraldOutcome("d1", p / 2.0, _pair_state("phi", t)),
        HeraldOutcome("d2", p / 2.0, _pair_state("psi", t)),
        HeraldOutcome("no_click", 1.0 - p, cow_no_click_state(alpha, eta), success=False),
    ]


def dolinar_error(alpha_eff: float) -> float:
    """Helstrom error (1 - sqrt(1 - e^{-4|a|^2}))/2 for |a> vs |-a>, equal priors."""
    a = check_alpha(alpha_eff)
    y = math.exp(-4.0 * a * a)
    # rationalized form avoids cancellation when y is tiny
    return y / (2.0 * (1.0 + math.sqrt(1.0 - y)))


def dolinar_table(alpha: float, eta: float) -> DolinarErrorTable:
    alpha, eta = check_alpha(alpha), check_eta(eta)
    p_phase = -math.expm1(-2.0 * (1.0 - eta) * alpha * alpha) / 2.0
    return DolinarErrorTable(dolinar_error(alpha * math.sqrt(eta)), p_phase)


def cow_dr_rate(alpha: float, eta: float) -> RatePoint:
    table = dolinar_table(alpha, eta)
    hashing = 1.0 + math.fsum(p * math.log2(p) for p in table.joint.ravel() if p > 0.0)
    return RatePoint.build(float(eta), float(alpha), 1.0, hashing)


def cow_dr_outcomes(alpha: float, eta: float) -> list[HeraldOutcome]:
    """The two receiver outcomes: each mixes the two USD Bell pairs by the error P_e."""
    table = dolinar_table(alpha, eta)
    (a, b), (c, d) = table.joint.T
    plus = BellDiagonal(a, b, c, d)
    minus = BellDiagonal(c, d, a, b)
    return [
        HeraldOutcome("plus", 0.5, DensityOperator(plus.to_matrix(), (2, 2))),
        HeraldOutcome("minus", 0.5, DensityOperator(minus.to_matrix(), (2, 2))),
    ]


RATE_FUNCTIONS = {"ctw": ctw_rate, "cow-usd": cow_usd_rate, "cow-dr": cow_dr_rate}
OUTCOME_FUNCTIONS = {"ctw": ctw_outcomes, "cow-usd": cow_usd_outcomes, "cow-dr": cow_dr_outcomes}


def repeaterless_bound_midpoint(eta: float) -> float:
    """-log2(1 - sqrt(eta)); infinite at eta = 1."""
    eta = check_eta(eta)
    if eta == 1.0:
        return math.inf
    return -math.log2(one_minus_sqrt(eta))


def repeaterless_bound_direct(eta: float) -> float:
    """-log2(1 - eta); infinite at eta = 1."""
    eta = check_eta(eta)
    if eta == 1.0:
        return math.inf
    return -math.log1p(-eta) / math.log(2.0)


def baseline_curves(eta: float) -> dict[str, float]:
    """Single-photon reference curves (asymptotes, not protocol models)."""
    eta = check_eta(eta)
    return {
        "single_rail_ref": min(0.11 * math.sqrt(eta), SINGLE_PHOTON_CAP),
        "dual_rail_ref": min(eta / 2.0, SINGLE_PHOTON_CAP),
        "cap": SINGLE_PHOTON_CAP,
    }
