"""Rates and heralded states with power mismatch, dark counts and imperfect mode overlap.

All effects are expressed through the mean photon numbers reaching the two
interferometer ports. For a memory parity that should light port "bright", with
per-pulse received intensity s = alpha^2 * a^2 (a^2 = sqrt(eta) for CTW, eta for COW):

    mu_bright = s * (1 + eps^2 + (1 - eps^2) sqrt(V))
    mu_dark   = s * (1 + eps^2 - (1 - eps^2) sqrt(V))

Events with light in the dark port are discarded, so success requires the dark
port to stay empty. Dark counts are then mixed into the resulting click
distribution (Bernoulli, at most one extra count per detector per round).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bell import BellDiagonal, DensityOperator, HeraldOutcome, bell_diagonal_decompose, dephased_plus
from .core import DomainError, UnsupportedConfigurationError, pnr_parity_probabilities
from .protocols import (
    RATE_FUNCTIONS,
    RatePoint,
    check_alpha,
    check_eta,
    ctw_no_click_state,
    dephased_pair_hashing,
    one_minus_sqrt,
)

# Heralded states here are mixtures that may include the no-click state.
MixedHerald = HeraldOutcome


@dataclass(frozen=True)
class NoiseConfig:
    epsilon: float = 0.0
    p_dark: float = 0.0
    visibility: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "p_dark", "visibility"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if not 0.0 <= self.epsilon < 0.5:
            raise DomainError(f"epsilon must lie in [0, 0.5), got {self.epsilon!r}")
        if not 0.0 <= self.p_dark <= 0.1:
            raise DomainError(f"p_dark must lie in [0, 0.1], got {self.p_dark!r}")
        if not 0.0 < self.visibility <= 1.0:
            raise DomainError(f"visibility must lie in (0, 1], got {self.visibility!r}")

    @property
    def is_neutral(self) -> bool:
        return self.epsilon == 0.0 and self.p_dark == 0.0 and self.visibility == 1.0


def port_means(alpha: float, arm: float, epsilon: float = 0.0, visibility: float = 1.0) -> tuple[float, float]:
    """(mu_bright, mu_dark) for received intensity alpha^2 * arm."""
    s = arm * alpha * alpha
    e2 = epsilon * epsilon
    v = math.sqrt(visibility)
    return s * (1.0 + e2 + (1.0 - e2) * v), s * (1.0 + e2 - (1.0 - e2) * v)


def _success(mu_b: float, mu_d: float) -> float:
    return -math.expm1(-mu_b) * math.exp(-mu_d)


def _ctw_hashing_exponent(alpha: float, eta: float, epsilon: float) -> float:
    # -ln(t_A t_B) with t_X = exp(-2 (1 - sqrt(eta)) alpha_X^2), alpha_{A,B} = alpha (1 +- eps)
    return 4.0 * one_minus_sqrt(eta) * alpha * alpha * (1.0 + epsilon * epsilon)


def _cow_hashing_exponent(alpha: float, eta: float) -> float:
    return 2.0 * (1.0 - eta) * alpha * alpha


def _pair(pair: str, t: float) -> DensityOperator:
    bd = BellDiagonal.pair(pair, (1.0 + t) / 2.0, (1.0 - t) / 2.0)
    return DensityOperator(bd.to_matrix(), (2, 2))


def ctw_rate_power_mismatch(alpha: float, eta: float, epsilon: float) -> RatePoint:
    return rate_composed("ctw", alpha, eta, NoiseConfig(epsilon=epsilon))


def cow_usd_rate_power_mismatch(alpha: float, eta: float, epsilon: float) -> RatePoint:
    return rate_composed("cow-usd", alpha, eta, NoiseConfig(epsilon=epsilon))


def ctw_rate_mode_mismatch(alpha: float, eta: float, visibility: float) -> RatePoint:
    return rate_composed("ctw", alpha, eta, NoiseConfig(visibility=visibility))


def cow_usd_rate_mode_mismatch(alpha: float, eta: float, visibility: float) -> RatePoint:
    return rate_composed("cow-usd", alpha, eta, NoiseConfig(visibility=visibility))


def herald_state_no_click(alpha: float, eta: float, epsilon: float = 0.0) -> DensityOperator:
    """CTW memories after a round with no photon anywhere, environments traced out."""
    alpha, eta = check_alpha(alpha), check_eta(eta)
    if epsilon == 0.0:
        return ctw_no_click_state(alpha, eta)
    c = one_minus_sqrt(eta)
    t_a = math.exp(-2.0 * c * (alpha * (1.0 + epsilon)) ** 2)
    t_b = math.exp(-2.0 * c * (alpha * (1.0 - epsilon)) ** 2)
    return DensityOperator(np.kron(dephased_plus(t_a), dephased_plus(t_b)), (2, 2))


def cow_herald_state_no_click(alpha: float, eta: float) -> DensityOperator:
    t = math.exp(-_cow_hashing_exponent(alpha, eta))
    return DensityOperator(np.kron(dephased_plus(t), dephased_plus(1.0)), (2, 2))


def ctw_clean_outcomes(alpha: float, eta: float, noise: NoiseConfig | None = None) -> list[HeraldOutcome]:
    """CTW outcome classes after mismatch and visibility, before dark counts."""
    noise = noise or NoiseConfig()
    alpha, eta = check_alpha(alpha), check_eta(eta)
    mu_b, mu_d = port_means(alpha, math.sqrt(eta), noise.epsilon, noise.visibility)
    p_zero, p_odd, p_even = pnr_parity_probabilities(mu_b)
    keep = math.exp(-mu_d)
    t = math.exp(-_ctw_hashing_exponent(alpha, eta, noise.epsilon))
    return [
        HeraldOutcome("d1_even", p_even * keep / 2.0, _pair("phi", t)),
        HeraldOutcome("d1_odd", p_odd * keep / 2.0, _pair("phi", -t)),
        HeraldOutcome("d2_even", p_even * keep / 2.0, _pair("psi", t)),
        HeraldOutcome("d2_odd", p_odd * keep / 2.0, _pair("psi", -t)),
        HeraldOutcome(
            "no_click", p_zero * keep, herald_state_no_click(alpha, eta, noise.epsilon), success=False
        ),
    ]


def cow_clean_outcomes(alpha: float, eta: float, noise: NoiseConfig | None = None) -> list[HeraldOutcome]:
    noise = noise or NoiseConfig()
    alpha, eta = check_alpha(alpha), check_eta(eta)
    mu_b, mu_d = port_means(alpha, eta, noise.epsilon, noise.visibility)
    p = _success(mu_b, mu_d)
    t = math.exp(-_cow_hashing_exponent(alpha, eta))
    return [
        HeraldOutcome("d1", p / 2.0, _pair("phi", t)),
        HeraldOutcome("d2", p / 2.0, _pair("psi", t)),
        HeraldOutcome("no_click", math.exp(-mu_b - mu_d), cow_herald_state_no_click(alpha, eta), success=False),
    ]


def _mix(label: str, parts: list[tuple[float, DensityOperator]]) -> MixedHerald:
    total = math.fsum(w for w, _ in parts)
    if total <= 0.0:
        return MixedHerald(label, 0.0, None)
    m = sum(w * s.matrix for w, s in parts) / total
    return MixedHerald(label, total, DensityOperator(m, (2, 2)))


def ctw_dark_mixtures(clean: list[HeraldOutcome], p_dark: float) -> list[MixedHerald]:
    """Observed CTW classes when each detector adds one spurious count with prob. p_dark.

    A spurious count flips the observed parity of a lit detector and turns a
    no-click round into an odd click. Any round where both detectors fire is
    discarded.
    """
    c = {o.label: o for o in clean}
    keep, flip = (1.0 - p_dark) ** 2, p_dark * (1.0 - p_dark)
    out = []
    for det in ("d1", "d2"):
        even, odd = c[f"{det}_even"], c[f"{det}_odd"]
        nc = c["no_click"]
        out.append(_mix(f"{det}_even", [(keep * even.probability, even.state), (flip * odd.probability, odd.state)]))
        out.append(
            _mix(
                f"{det}_odd",
                [
                    (keep * odd.probability, odd.state),
                    (flip * even.probability, even.state),
                    (flip * nc.probability, nc.state),
                ],
            )
        )
    return out


def cow_dark_mixtures(clean: list[HeraldOutcome], p_dark: float) -> list[MixedHerald]:
    """Observed COW single clicks with on-off detectors and dark-count probability p_dark.

    A real click only needs the other detector to stay quiet, weight (1 - p_d); a
    dark count on an otherwise empty round needs exactly one detector to fire,
    weight p_d (1 - p_d).
    """
    c = {o.label: o for o in clean}
    nc = c["no_click"]
    return [
        _mix(det, [((1.0 - p_dark) * c[det].probability, c[det].state), (p_dark * (1.0 - p_dark) * nc.probability, nc.state)])
        for det in ("d1", "d2")
    ]


def mixture_rate(eta: float, alpha: float, heralds: list[MixedHerald]) -> RatePoint:
    """Success probability and average hashing over heralded mixtures.

    Each mixture is hashed through its Bell-basis diagonal.
    """
    succ = [h for h in heralds if h.success and h.probability > 0.0]
    p = math.fsum(h.probability for h in succ)
    if p == 0.0:
        return RatePoint.build(eta, alpha, 0.0, 0.0)
    info = math.fsum(h.probability * bell_diagonal_decompose(h.state)[0].hashing() for h in succ) / p
    return RatePoint.build(eta, alpha, p, info)


def ctw_rate_dark(alpha: float, eta: float, p_dark: float) -> tuple[RatePoint, list[MixedHerald]]:
    return composed_outcomes("ctw", alpha, eta, NoiseConfig(p_dark=p_dark))


def cow_usd_rate_dark(alpha: float, eta: float, p_dark: float) -> tuple[RatePoint, list[MixedHerald]]:
    return composed_outcomes("cow-usd", alpha, eta, NoiseConfig(p_dark=p_dark))


def _check_protocol(protocol: str, noise: NoiseConfig) -> None:
    if protocol == "cow-dr":
        if not noise.is_neutral:
            raise UnsupportedConfigurationError("cow-dr has no non-ideality model; use zero noise")
    elif protocol not in ("ctw", "cow-usd"):
        raise DomainError(f"unknown protocol {protocol!r}")


def composed_outcomes(
    protocol: str, alpha: float, eta: float, noise: NoiseConfig | None = None
) -> tuple[RatePoint, list[MixedHerald]]:
    """Rate and observed heralded classes with mismatch, visibility, then dark counts."""
    noise = noise or NoiseConfig()
    _check_protocol(protocol, noise)
    if protocol == "cow-dr":
        from .protocols import cow_dr_outcomes

        return RATE_FUNCTIONS[protocol](alpha, eta), cow_dr_outcomes(alpha, eta)
    if protocol == "ctw":
        clean = ctw_clean_outcomes(alpha, eta, noise)
        mixer = ctw_dark_mixtures
    else:
        clean = cow_clean_outcomes(alpha, eta, noise)
        mixer = cow_dark_mixtures
    if noise.p_dark == 0.0:
        return rate_composed(protocol, alpha, eta, noise), [o for o in clean if o.success]
    heralds = mixer(clean, noise.p_dark)
    return mixture_rate(float(eta), float(alpha), heralds), heralds


def rate_composed(protocol: str, alpha: float, eta: float, noise: NoiseConfig | None = None) -> RatePoint:
    """Rate with all configured non-idealities; neutral noise gives the ideal rate exactly."""
    noise = noise or NoiseConfig()
    _check_protocol(protocol, noise)
    if noise.is_neutral:
        return RATE_FUNCTIONS[protocol](alpha, eta)
    if noise.p_dark > 0.0:
        return composed_outcomes(protocol, alpha, eta, noise)[0]
    alpha, eta = check_alpha(alpha), check_eta(eta)
    if protocol == "ctw":
        mu_b, mu_d = port_means(alpha, math.sqrt(eta), noise.epsilon, noise.visibility)
        hashing = dephased_pair_hashing(_ctw_hashing_exponent(alpha, eta, noise.epsilon))
    else:
        mu_b, mu_d = port_means(alpha, eta, noise.epsilon, noise.visibility)
        hashing = dephased_pair_hashing(_cow_hashing_exponent(alpha, eta))
    return RatePoint.build(eta, alpha, _success(mu_b, mu_d), hashing)


def rate_point(protocol: str, alpha: float, eta: float, noise: NoiseConfig | None = None) -> RatePoint:
    if noise is None or noise.is_neutral:
        if protocol not in RATE_FUNCTIONS:
            raise DomainError(f"unknown protocol {protocol!r}")
        return RATE_FUNCTIONS[protocol](alpha, eta)
    return rate_composed(protocol, alpha, eta, noise)
