"""Protocol pipelines on the Fock-space simulator.

These runs do not use any closed-form rate expression: they prepare truncated
coherent states, apply memory-controlled phase flips, purified loss, beamsplitters
and detector POVMs, and read the heralded memory states off the final state vector.
They serve as the reference for every analytic formula in the package.

Qubit 0 is Alice's memory, qubit 1 is Bob's; both start in |+>.
"""

from __future__ import annotations

import math

import numpy as np

from .bell import DensityOperator, HeraldOutcome, bell_twirl
from .core import DomainError
from .fock import (
    TAIL_TOL,
    HybridState,
    apply_beamsplitter,
    apply_controlled_pi,
    apply_dark_counts,
    apply_loss,
    auto_cutoff,
    count_resolved_states,
    helstrom_measurement,
    prepare_coherent,
)
from .protocols import check_alpha, check_eta

PLUS = np.array([1.0, 1.0]) / math.sqrt(2.0)
CTW_LABELS = ("d1_even", "d1_odd", "d2_even", "d2_odd", "no_click", "double_click")
COW_LABELS = ("d1", "d2", "no_click", "double_click")
# memory Z-parity subspace a click pattern is supposed to herald
_PARITY_DIAG = {"d1": (0, 3), "d2": (1, 2)}


def _vacuum(cutoff: int) -> np.ndarray:
    return prepare_coherent(0.0, cutoff)


def _check_noise(epsilon: float, visibility: float = 1.0) -> None:
    if not 0.0 <= epsilon < 0.5:
        raise DomainError(f"epsilon must lie in [0, 0.5), got {epsilon!r}")
    if not 0.0 < visibility <= 1.0:
        raise DomainError(f"visibility must lie in (0, 1], got {visibility!r}")


def ctw_count_states(
    alpha: float, eta: float, cutoff: int | None = None, epsilon: float = 0.0
) -> tuple[np.ndarray, int]:
    """Count-resolved memory states of CTW; pulses alpha(1 + eps) and alpha(1 - eps).

    Modes: 0/1 Alice/Bob pulse, 2/3 their loss environments. Returns the array from
    ``count_resolved_states`` over the two detectors and the cutoff used.
    """
    alpha, eta = check_alpha(alpha), check_eta(eta)
    _check_noise(epsilon)
    a_amp, b_amp = alpha * (1.0 + epsilon), alpha * (1.0 - epsilon)
    arm = math.sqrt(eta)
    if cutoff is None:
        cutoff = auto_cutoff(max(a_amp**2, b_amp**2, arm * (a_amp**2 + b_amp**2)))
    state = HybridState.product(
        [PLUS, PLUS],
        [prepare_coherent(a_amp, cutoff), prepare_coherent(b_amp, cutoff), _vacuum(cutoff), _vacuum(cutoff)],
    )
    state = apply_controlled_pi(state, 0, 0)
    state = apply_controlled_pi(state, 1, 1)
    state = apply_loss(state, 0, arm, 2)
    state = apply_loss(state, 1, arm, 3)
    state = apply_beamsplitter(state, 0, 1, 0.5)
    return count_resolved_states(state, [(0,), (1,)]), cutoff


def cow_count_states(
    alpha: float, eta: float, cutoff: int | None = None, epsilon: float = 0.0
) -> tuple[np.ndarray, int]:
    """Count-resolved memory states of COW with the USD interferometer.

    Modes: 0 travelling pulse, 1 channel environment, 2 local oscillator. The pulse
    leaves Alice with alpha(1 + eps); the oscillator has alpha sqrt(eta) (1 - eps).
    """
    alpha, eta = check_alpha(alpha), check_eta(eta)
    _check_noise(epsilon)
    p_amp = alpha * (1.0 + epsilon)
    lo_amp = alpha * math.sqrt(eta) * (1.0 - epsilon)
    if cutoff is None:
        cutoff = auto_cutoff(max(p_amp**2, eta * p_amp**2 + lo_amp**2))
    state = HybridState.product(
        [PLUS, PLUS],
        [prepare_coherent(p_amp, cutoff), _vacuum(cutoff), prepare_coherent(lo_amp, cutoff)],
    )
    state = apply_controlled_pi(state, 0, 0)
    state = apply_loss(state, 0, eta, 1)
    state = apply_controlled_pi(state, 1, 0)
    state = apply_beamsplitter(state, 0, 2, 0.5)
    return count_resolved_states(state, [(0,), (2,)]), cutoff


def mode_mismatch_count_states(
    protocol: str,
    alpha: float,
    eta: float,
    visibility: float,
    epsilon: float = 0.0,
    cutoff: int | None = None,
) -> tuple[np.ndarray, int]:
    """Interference with partially distinguishable pulses, two temporal modes per pulse.

    The second pulse is split into the part matching the first pulse's mode (amplitude
    fraction sqrt(V)) and an orthogonal remainder by a Gram-Schmidt beamsplitter; each
    detector counts photons in both modes. Loss is folded into the prepared amplitudes
    and no environment is kept, so only the click statistics are meaningful here; the
    memory coherences lack the loss-induced dephasing.
    """
    alpha, eta = check_alpha(alpha), check_eta(eta)
    _check_noise(epsilon, visibility)
    if protocol == "ctw":
        arm = math.sqrt(math.sqrt(eta))
        first, second = alpha * (1.0 + epsilon) * arm, alpha * (1.0 - epsilon) * arm
    elif protocol == "cow-usd":
        first = alpha * (1.0 + epsilon) * math.sqrt(eta)
        second = alpha * math.sqrt(eta) * (1.0 - epsilon)
    else:
        raise DomainError(f"no mode-mismatch pipeline for {protocol!r}")
    if cutoff is None:
        cutoff = auto_cutoff(first**2 + second**2)
    # modes: 0/1 first pulse (matched/orthogonal), 2/3 second pulse (matched/orthogonal)
    state = HybridState.product(
        [PLUS, PLUS],
        [prepare_coherent(first, cutoff), _vacuum(cutoff), prepare_coherent(second, cutoff), _vacuum(cutoff)],
    )
    if protocol == "ctw":
        state = apply_controlled_pi(state, 0, 0)
        state = apply_controlled_pi(state, 1, 2)
    else:
        state = apply_controlled_pi(state, 0, 0)
        state = apply_controlled_pi(state, 1, 0)
    state = apply_beamsplitter(state, 2, 3, visibility)
    state = apply_beamsplitter(state, 0, 2, 0.5)
    state = apply_beamsplitter(state, 1, 3, 0.5)
    return count_resolved_states(state, [(0, 1), (2, 3)]), cutoff


def counts_to_dict(counts: np.ndarray) -> dict:
    return {
        (j, k): counts[j, k]
        for j in range(counts.shape[0])
        for k in range(counts.shape[1])
        if np.real(np.trace(counts[j, k])) > 0.0
    }


def _ctw_label(j: int, k: int) -> str:
    if j and k:
        return "double_click"
    if j:
        return "d1_even" if j % 2 == 0 else "d1_odd"
    if k:
        return "d2_even" if k % 2 == 0 else "d2_odd"
    return "no_click"


def _cow_label(j: int, k: int) -> str:
    if j and k:
        return "double_click"
    if j:
        return "d1"
    if k:
        return "d2"
    return "no_click"


def group_outcomes(dist: dict, protocol: str) -> list[HeraldOutcome]:
    """Sum count-resolved memory states into labelled outcome classes.

    CTW classes resolve the count parity; COW detectors are on-off.
    """
    labels, label_of = (CTW_LABELS, _ctw_label) if protocol == "ctw" else (COW_LABELS, _cow_label)
    sums = {lab: np.zeros((4, 4), dtype=complex) for lab in labels}
    for (j, k), rho in dist.items():
        sums[label_of(j, k)] += rho
    out = []
    for lab in labels:
        p = float(np.real(np.trace(sums[lab])))
        state = DensityOperator(sums[lab] / p, (2, 2)) if p > 0.0 else None
        success = lab not in ("no_click", "double_click")
        out.append(HeraldOutcome(lab, p, state, success))
    return out


def parity_consistent_success(outcomes: list[HeraldOutcome]) -> float:
    """Probability that a click heralds the memory parity it is meant to herald.

    D1 patterns herald even Z-parity (|00>, |11>) and D2 patterns odd parity.  With
    imperfect interference a photon can leak into the wrong detector; those events
    are excluded here.
    """
    total = 0.0
    for o in outcomes:
        if not o.success or o.state is None:
            continue
        i, j = _PARITY_DIAG[o.label[:2]]
        total += o.probability * float(np.real(o.state.matrix[i, i] + o.state.matrix[j, j]))
    return total


def run_ctw_oracle(
    alpha: float,
    eta: float,
    cutoff: int | None = None,
    epsilon: float = 0.0,
    p_dark: float = 0.0,
) -> list[HeraldOutcome]:
    counts, _ = ctw_count_states(alpha, eta, cutoff, epsilon)
    return group_outcomes(apply_dark_counts(counts_to_dict(counts), p_dark), "ctw")


def run_cow_usd_oracle(
    alpha: float,
    eta: float,
    cutoff: int | None = None,
    epsilon: float = 0.0,
    p_dark: float = 0.0,
) -> list[HeraldOutcome]:
    counts, _ = cow_count_states(alpha, eta, cutoff, epsilon)
    return group_outcomes(apply_dark_counts(counts_to_dict(counts), p_dark), "cow-usd")


def run_mode_mismatch_oracle(
    protocol: str,
    alpha: float,
    eta: float,
    visibility: float,
    epsilon: float = 0.0,
    p_dark: float = 0.0,
    cutoff: int | None = None,
) -> list[HeraldOutcome]:
    counts, _ = mode_mismatch_count_states(protocol, alpha, eta, visibility, epsilon, cutoff)
    return group_outcomes(apply_dark_counts(counts_to_dict(counts), p_dark), protocol)


def run_cow_dr_oracle(
    alpha: float, eta: float, cutoff: int | None = None, tail_tolerance: float = TAIL_TOL
) -> list[HeraldOutcome]:
    """COW with the received pulse read out by the Helstrom measurement for +-alpha sqrt(eta).

    Modes: 0 travelling pulse, 1 channel environment.

    The projective readout acts coherently on the two pulse branches, so the raw
    heralded state has coherences between the Phi and Psi pairs. Each outcome's
    ``state`` is its bilateral Pauli twirl (the Bell-diagonal mixture a hashing
    protocol works on); the untwirled state is kept in ``raw_state``.
    """
    alpha, eta = check_alpha(alpha), check_eta(eta)
    if cutoff is None:
        cutoff = auto_cutoff(alpha * alpha)
    state = HybridState.product([PLUS, PLUS], [prepare_coherent(alpha, cutoff), _vacuum(cutoff)])
    state = apply_controlled_pi(state, 0, 0)
    state = apply_loss(state, 0, eta, 1)
    state = apply_controlled_pi(state, 1, 0)

    received = alpha * math.sqrt(eta)
    povm = helstrom_measurement(
        prepare_coherent(received, cutoff, tail_tolerance),
        prepare_coherent(-received, cutoff, tail_tolerance),
    )
    psi = state.amplitudes.reshape(4, cutoff + 1, cutoff + 1)
    out = []
    for label, proj in zip(("plus", "minus"), povm):
        rho = np.einsum("pq,aqe,bpe->ab", proj, psi, psi.conj())
        p = float(np.real(np.trace(rho)))
        if p <= 0.0:
            out.append(HeraldOutcome(label, p, None))
            continue
        raw = DensityOperator(rho / p, (2, 2))
        out.append(HeraldOutcome(label, p, DensityOperator(bell_twirl(raw.matrix), (2, 2)), raw_state=raw))
    return out


def run_oracle(protocol: str, alpha: float, eta: float, cutoff: int | None = None) -> list[HeraldOutcome]:
    if protocol == "ctw":
        return run_ctw_oracle(alpha, eta, cutoff)
    if protocol == "cow-usd":
        return run_cow_usd_oracle(alpha, eta, cutoff)
    if protocol == "cow-dr":
        return run_cow_dr_oracle(alpha, eta, cutoff)
    raise DomainError(f"unknown protocol {protocol!r}")


def outcome_map(outcomes: list[HeraldOutcome]) -> dict[str, HeraldOutcome]:
    return {o.label: o for o in outcomes}


def total_success(outcomes: list[HeraldOutcome]) -> float:
    return math.fsum(o.probability for o in outcomes if o.success)
