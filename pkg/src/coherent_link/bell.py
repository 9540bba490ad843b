"""Two-qubit states in the Bell basis and heralded-outcome records."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import NORMALIZATION_TOL, DomainError, as_probability, hashing_bell_diagonal

BELL_LABELS = ("phi_plus", "phi_minus", "psi_plus", "psi_minus")

_S = 1.0 / math.sqrt(2.0)
# Columns are |Phi+>, |Phi->, |Psi+>, |Psi-> in the |q_A q_B> computational basis.
BELL_BASIS = np.array(
    [
        [_S, _S, 0.0, 0.0],
        [0.0, 0.0, _S, _S],
        [0.0, 0.0, _S, -_S],
        [_S, -_S, 0.0, 0.0],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class BellDiagonal:
    p_phi_plus: float
    p_phi_minus: float
    p_psi_plus: float
    p_psi_minus: float

    def __post_init__(self):
        vals = [as_probability(v, "Bell weight") for v in self]
        for name, v in zip(("p_phi_plus", "p_phi_minus", "p_psi_plus", "p_psi_minus"), vals):
            object.__setattr__(self, name, v)
        total = math.fsum(vals)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"Bell weights sum to {total!r}, not 1")

    def __iter__(self) -> Iterator[float]:
        yield self.p_phi_plus
        yield self.p_phi_minus
        yield self.p_psi_plus
        yield self.p_psi_minus

    @classmethod
    def pair(cls, pair: str, x_plus: float, x_minus: float) -> "BellDiagonal":
        """Weights ``x_plus``/``x_minus`` on the '+'/'-' member of the 'phi' or 'psi' pair."""
        if pair == "phi":
            return cls(x_plus, x_minus, 0.0, 0.0)
        if pair == "psi":
            return cls(0.0, 0.0, x_plus, x_minus)
        raise ValueError(f"unknown Bell pair {pair!r}")

    def as_array(self) -> np.ndarray:
        return np.array(list(self))

    def hashing(self) -> float:
        return hashing_bell_diagonal(self)

    def to_matrix(self) -> np.ndarray:
        return (BELL_BASIS * self.as_array()) @ BELL_BASIS.conj().T


@dataclass
class DensityOperator:
    """Density matrix together with the local dimensions of its factors."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        self.dims = tuple(int(d) for d in self.dims)
        d = int(np.prod(self.dims)) if self.dims else 1
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dims {self.dims}")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def validate(self, tol: float = 1e-10) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise DomainError("density operator is not Hermitian")
        if abs(self.trace() - 1.0) > tol:
            raise DomainError(f"density operator has trace {self.trace()!r}")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -tol:
            raise DomainError("density operator has a negative eigenvalue")


def bell_diagonal_decompose(rho) -> tuple[BellDiagonal, float]:
    """Bell-basis diagonal of a two-qubit state and the Frobenius norm of the rest."""
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise DomainError(f"expected a 4x4 density matrix, got shape {m.shape}")
    b = BELL_BASIS.conj().T @ m @ BELL_BASIS
    diag = np.real(np.diag(b))
    residual = float(np.linalg.norm(b - np.diag(np.diag(b))))
    return BellDiagonal(*(diag / diag.sum())), residual


_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def bell_twirl(rho: np.ndarray) -> np.ndarray:
    """Average over the bilateral Paulis {II, XX, YY, ZZ}; keeps only the Bell diagonal."""
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for p in _PAULIS:
        u = np.kron(p, p)
        out += u @ rho @ u.conj().T
    return out / 4


def dephased_plus(t: float) -> np.ndarray:
    """Single-qubit |+> state whose coherence is scaled by ``t``."""
    return 0.5 * np.array([[1.0, t], [t, 1.0]], dtype=complex)


@dataclass
class HeraldOutcome:
    """A measurement-outcome class, its probability and the memory state it heralds.

    ``state`` is None when the outcome has zero probability.
    """

    label: str
    probability: float
    state: DensityOperator | None
    success: bool = True
    raw_state: DensityOperator | None = None  # pre-twirl state, when the two differ

    def bell(self) -> tuple[BellDiagonal, float]:
        if self.state is None:
            raise ValueError(f"outcome {self.label!r} has no heralded state")
        return bell_diagonal_decompose(self.state)

    def hashing(self) -> float:
        return self.bell()[0].hashing()
