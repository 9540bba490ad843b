"""Brute-force state-vector simulation of memory qubits and truncated bosonic modes.

Subsystems are indexed with qubits first, then modes: in a layout with two
qubits and three modes, subsystem 2 is mode 0.  Every qubit has dimension 2 and
mode ``m`` has dimension ``mode_cutoffs[m] + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .bell import DensityOperator
from .core import DomainError, TruncationError

TAIL_TOL = 1e-12
MAX_AMPLITUDES = 20_000_000


def auto_cutoff(mu: float) -> int:
    """Per-mode cutoff for a mode carrying at most ``mu`` mean photons."""
    mu = max(float(mu), 0.0)
    return int(math.ceil(mu + 10.0 * math.sqrt(mu) + 10.0))


def required_cutoff(mu: float, tail_tolerance: float = TAIL_TOL) -> int:
    n = 0
    while poisson.sf(n, mu) > tail_tolerance:
        n += 1
    return n


@dataclass(frozen=True)
class SystemLayout:
    n_qubits: int
    mode_cutoffs: tuple[int, ...]
    max_amplitudes: int = MAX_AMPLITUDES

    def __post_init__(self):
        object.__setattr__(self, "mode_cutoffs", tuple(int(c) for c in self.mode_cutoffs))
        if self.n_qubits < 0 or any(c < 0 for c in self.mode_cutoffs):
            raise DomainError("qubit count and cutoffs must be non-negative")
        if self.size > self.max_amplitudes:
            raise DomainError(
                f"state dimension {self.size} exceeds the cap of {self.max_amplitudes} amplitudes"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return (2,) * self.n_qubits + tuple(c + 1 for c in self.mode_cutoffs)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def n_modes(self) -> int:
        return len(self.mode_cutoffs)

    def qubit_axis(self, qubit: int) -> int:
        if not 0 <= qubit < self.n_qubits:
            raise IndexError(f"qubit index {qubit} out of range")
        return qubit

    def mode_axis(self, mode: int) -> int:
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode index {mode} out of range")
        return self.n_qubits + mode


@dataclass
class HybridState:
    layout: SystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(self.layout.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes.ravel()))

    def copy(self) -> "HybridState":
        return HybridState(self.layout, self.amplitudes.copy())

    @classmethod
    def product(cls, qubit_states: Sequence, mode_states: Sequence) -> "HybridState":
        """Tensor product of single-qubit vectors and single-mode Fock vectors."""
        factors = [np.asarray(q, dtype=complex) for q in qubit_states]
        modes = [np.asarray(m, dtype=complex) for m in mode_states]
        if any(f.shape != (2,) for f in factors):
            raise DomainError("qubit states must be length-2 vectors")
        layout = SystemLayout(len(factors), tuple(len(m) - 1 for m in modes))
        amps = np.ones((), dtype=complex)
        for f in factors + modes:
            amps = np.multiply.outer(amps, f)
        return cls(layout, amps)


def prepare_coherent(alpha: complex, cutoff: int, tail_tolerance: float = TAIL_TOL) -> np.ndarray:
    """Fock amplitudes e^{-|a|^2/2} a^n / sqrt(n!) for n = 0..cutoff."""
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise DomainError(f"amplitude must be finite, got {alpha!r}")
    mu = abs(alpha) ** 2
    if poisson.sf(cutoff, mu) > tail_tolerance:
        raise TruncationError(
            f"cutoff {cutoff} leaves Poisson tail above {tail_tolerance:g} for |alpha|^2={mu:.6g}",
            required_cutoff(mu, tail_tolerance),
        )
    vec = np.zeros(cutoff + 1, dtype=complex)
    vec[0] = math.exp(-mu / 2)
    # recurrence avoids overflowing n! for large cutoffs
    for n in range(1, cutoff + 1):
        vec[n] = vec[n - 1] * alpha / math.sqrt(n)
    return vec


def fock_vector(n: int, cutoff: int) -> np.ndarray:
    vec = np.zeros(cutoff + 1, dtype=complex)
    vec[n] = 1.0
    return vec


def apply_controlled_pi(state: HybridState, qubit: int, mode: int) -> HybridState:
    """Multiply amplitudes with the qubit in |1> by (-1)^n of the mode occupation."""
    layout = state.layout
    q_ax, m_ax = layout.qubit_axis(qubit), layout.mode_axis(mode)
    amps = state.amplitudes.copy()
    parity = (-1.0) ** np.arange(layout.mode_cutoffs[mode] + 1)
    shape = [1] * amps.ndim
    shape[m_ax] = -1
    idx = [slice(None)] * amps.ndim
    idx[q_ax] = 1
    amps[tuple(idx)] *= parity.reshape(shape[:q_ax] + shape[q_ax + 1 :])
    return HybridState(layout, amps)


@lru_cache(maxsize=4096)
def _beamsplitter_block(n: int, transmissivity: float) -> np.ndarray:
    """Beamsplitter unitary on the n-photon block, basis |k, n-k>, k = 0..n."""
    gen = np.zeros((n + 1, n + 1))
    for k in range(n):
        # a^dag b |k, n-k> = sqrt((k+1)(n-k)) |k+1, n-k-1>
        gen[k + 1, k] = math.sqrt((k + 1) * (n - k))
        gen[k, k + 1] = -gen[k + 1, k]
    theta = math.acos(math.sqrt(transmissivity))
    return expm(theta * gen)


def apply_beamsplitter(
    state: HybridState,
    mode_a: int,
    mode_b: int,
    transmissivity: float,
    tail_tolerance: float = TAIL_TOL,
) -> HybridState:
    """Two-mode beamsplitter.

    Coherent inputs (a, b) leave as (a sqrt(T) + b sqrt(1-T), -a sqrt(1-T) + b sqrt(T)).
    Blocks with more photons than the cutoff cannot be represented; their weight must
    be below ``tail_tolerance`` and they are left untouched.
    """
    layout = state.layout
    if mode_a == mode_b:
        raise DomainError("beamsplitter modes must be distinct")
    ax_a, ax_b = layout.mode_axis(mode_a), layout.mode_axis(mode_b)
    cutoff = layout.mode_cutoffs[mode_a]
    if layout.mode_cutoffs[mode_b] != cutoff:
        raise DomainError("beamsplitter requires equal cutoffs on both modes")
    t = float(transmissivity)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {t!r}")

    psi = np.moveaxis(state.amplitudes, (ax_a, ax_b), (-2, -1))
    rest_shape = psi.shape[:-2]
    psi = psi.reshape(-1, cutoff + 1, cutoff + 1).copy()

    occ = np.add.outer(np.arange(cutoff + 1), np.arange(cutoff + 1))
    overflow = float(np.sum(np.abs(psi[:, occ > cutoff]) ** 2))
    if overflow > tail_tolerance:
        raise TruncationError(
            f"beamsplitter input has weight {overflow:.3g} above the representable photon number"
        )

    for n in range(cutoff + 1):
        ka = np.arange(n + 1)
        kb = n - ka
        psi[:, ka, kb] = psi[:, ka, kb] @ _beamsplitter_block(n, t).T

    psi = np.moveaxis(psi.reshape(rest_shape + (cutoff + 1, cutoff + 1)), (-2, -1), (ax_a, ax_b))
    return HybridState(layout, psi)


def apply_loss(state: HybridState, mode: int, transmissivity: float, env_mode: int) -> HybridState:
    """Purified pure-loss channel: couple ``mode`` to a vacuum ``env_mode``.

    A coherent amplitude a becomes a sqrt(eta) in the mode and a sqrt(1 - eta) in the
    environment, which is kept for later tracing.
    """
    layout = state.layout
    env_ax = layout.mode_axis(env_mode)
    excited = np.take(state.amplitudes, np.arange(1, layout.mode_cutoffs[env_mode] + 1), axis=env_ax)
    if np.sum(np.abs(excited) ** 2) > 1e-15:
        raise DomainError("environment mode must start in vacuum")
    return apply_beamsplitter(state, env_mode, mode, transmissivity)


def trace_out(state: HybridState, subsystems: Sequence[int] = ()) -> DensityOperator:
    """Partial trace over the given subsystem indices (qubits first, then modes)."""
    amps = state.amplitudes
    traced = sorted(set(int(s) for s in subsystems))
    if any(not 0 <= s < amps.ndim for s in traced):
        raise IndexError(f"subsystem indices {traced} out of range")
    kept = [ax for ax in range(amps.ndim) if ax not in traced]
    dims = tuple(amps.shape[ax] for ax in kept)
    mat = np.transpose(amps, kept + traced).reshape(int(np.prod(dims, dtype=np.int64)), -1)
    return DensityOperator(mat @ mat.conj().T, dims)


def measure_pnr(state: HybridState, mode: int) -> list[tuple[int, float, HybridState | None]]:
    """Photon-number measurement of one mode: (count, probability, renormalized post-state)."""
    layout = state.layout
    ax = layout.mode_axis(mode)
    results = []
    for n in range(layout.mode_cutoffs[mode] + 1):
        post = np.zeros_like(state.amplitudes)
        idx = [slice(None)] * post.ndim
        idx[ax] = n
        post[tuple(idx)] = state.amplitudes[tuple(idx)]
        p = float(np.sum(np.abs(post) ** 2))
        results.append((n, p, HybridState(layout, post / math.sqrt(p)) if p > 0 else None))
    return results


def helstrom_measurement(
    state_plus: np.ndarray, state_minus: np.ndarray, tie_tol: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-error measurement for two equiprobable pure states.

    Returns (Pi_plus, Pi_minus): the projectors onto the positive and negative
    eigenspaces of |+><+| - |-><-|, with the null space (eigenvalues within
    ``tie_tol`` of zero, relative) shared equally. Outside the null space the
    elements are projective; when the inputs coincide both are I/2.
    """
    plus = np.asarray(state_plus, dtype=complex)
    minus = np.asarray(state_minus, dtype=complex)
    if plus.shape != minus.shape:
        raise DomainError("Helstrom inputs must share a cutoff")
    gamma = np.outer(plus, plus.conj()) - np.outer(minus, minus.conj())
    evals, evecs = np.linalg.eigh(gamma)
    scale = float(np.max(np.abs(evals)))
    cut = tie_tol * scale
    weight_plus = np.where(evals > cut, 1.0, np.where(evals < -cut, 0.0, 0.5))
    if scale == 0.0:
        weight_plus[:] = 0.5
    pi_plus = (evecs * weight_plus) @ evecs.conj().T
    pi_minus = np.eye(len(plus), dtype=complex) - pi_plus
    return pi_plus, pi_minus


def helstrom_error(state_plus: np.ndarray, state_minus: np.ndarray) -> float:
    """Average error of the Helstrom measurement for equiprobable inputs."""
    pi_plus, pi_minus = helstrom_measurement(state_plus, state_minus)
    err = np.vdot(state_minus, pi_plus @ state_minus) + np.vdot(state_plus, pi_minus @ state_plus)
    return float(np.real(err)) / 2


def apply_loss_kraus(rho: np.ndarray, transmissivity: float) -> np.ndarray:
    """Pure-loss channel on a single-mode density matrix via its Kraus operators."""
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    eta = float(transmissivity)
    out = np.zeros_like(rho)
    for k in range(dim):
        kraus = np.zeros((dim, dim))
        for n in range(k, dim):
            kraus[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
        out += kraus @ rho @ kraus.T
    return out


def count_resolved_states(
    state: HybridState, detectors: Sequence[Sequence[int]]
) -> np.ndarray:
    """Joint photon-count distribution with the unnormalized qubit state for each count.

    ``detectors`` lists the modes summed by each detector.  Returns an array of shape
    (C_1+1, ..., C_k+1, Q, Q): entry [c_1, ..., c_k] is Tr_rest[Pi_c |psi><psi|] on the
    qubits, so its trace is the probability of that count pattern.
    """
    layout = state.layout
    det_modes = [m for group in detectors for m in group]
    if len(set(det_modes)) != len(det_modes):
        raise DomainError("a mode may feed only one detector")
    q_axes = list(range(layout.n_qubits))
    d_axes = [layout.mode_axis(m) for m in det_modes]
    rest = [ax for ax in range(state.amplitudes.ndim) if ax not in q_axes + d_axes]
    psi = np.transpose(state.amplitudes, q_axes + d_axes + rest)
    q_dim = 2**layout.n_qubits
    d_shape = psi.shape[len(q_axes) : len(q_axes) + len(d_axes)]
    psi = psi.reshape((q_dim,) + d_shape + (-1,))

    letters = "cdefghijklmnopqrstuvw"[: len(d_axes)]
    joint = np.einsum(f"a{letters}z,b{letters}z->{letters}ab", psi, psi.conj())

    count_max = [sum(layout.mode_cutoffs[m] for m in group) for group in detectors]
    out = np.zeros(tuple(c + 1 for c in count_max) + (q_dim, q_dim), dtype=complex)
    occ = np.indices(d_shape).reshape(len(d_axes), -1)
    counts, start = [], 0
    for group in detectors:
        counts.append(occ[start : start + len(group)].sum(axis=0))
        start += len(group)
    np.add.at(out, tuple(counts), joint.reshape((-1, q_dim, q_dim)))
    return out


def apply_dark_counts(counts: dict, p_d: float) -> dict:
    """Add at most one dark count per detector, independently with probability ``p_d``.

    ``counts`` maps (c_1, c_2) to a weight, which may be a probability or an
    unnormalized density matrix.
    """
    p = float(p_d)
    if not 0.0 <= p < 0.5:
        raise DomainError(f"dark-count probability must lie in [0, 0.5), got {p!r}")
    if p == 0.0:
        return dict(counts)
    out: dict = {}
    q = 1.0 - p
    for (c1, c2), w in counts.items():
        for d1, w1 in ((0, q), (1, p)):
            for d2, w2 in ((0, q), (1, p)):
                key = (c1 + d1, c2 + d2)
                out[key] = out.get(key, 0) + (w1 * w2) * w
    return out
