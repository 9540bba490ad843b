"""Scalar primitives: coherent-state overlaps, entropies, cat norms, parity splits."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable

PROB_TOL = 1e-12
NORMALIZATION_TOL = 1e-9


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a primitive."""


class TruncationError(ValueError):
    """A Fock cutoff is too small for the requested tail tolerance."""

    def __init__(self, message: str, required_cutoff: int | None = None):
        if required_cutoff is not None:
            message = f"{message} (required cutoff >= {required_cutoff})"
        super().__init__(message)
        self.required_cutoff = required_cutoff


class UnsupportedConfigurationError(ValueError):
    """The requested protocol/noise combination has no model."""


def as_probability(x: float, name: str = "probability") -> float:
    """Validate ``x`` as a probability, clamping float drift within ``PROB_TOL``."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    if x < -PROB_TOL or x > 1.0 + PROB_TOL:
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return min(1.0, max(0.0, x))


def _finite_complex(z: complex, name: str) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"{name} must be finite, got {z!r}")
    return z


def coherent_overlap(a: complex, b: complex) -> complex:
    """Inner product <a|b> of two coherent states.

    The first argument is conjugated: exp(conj(a) b - (|a|^2 + |b|^2) / 2).
    """
    a = _finite_complex(a, "a")
    b = _finite_complex(b, "b")
    return cmath.exp(a.conjugate() * b - (abs(a) ** 2 + abs(b) ** 2) / 2)


def binary_entropy(x: float) -> float:
    """Binary entropy in bits with h2(0) = h2(1) = 0."""
    x = as_probability(x, "x")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _xlog2x(p: float) -> float:
    return p * math.log2(p) if p > 0.0 else 0.0


def hashing_bell_diagonal(p: Iterable[float]) -> float:
    """Hashing yield 1 + sum p log2 p of a Bell-diagonal state, in ebits.

    Negative values are returned as-is; rate reporting clamps them.
    """
    probs = [as_probability(v, "Bell weight") for v in p]
    if len(probs) != 4:
        raise DomainError(f"expected 4 Bell weights, got {len(probs)}")
    total = math.fsum(probs)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise DomainError(f"Bell weights sum to {total!r}, not 1")
    return 1.0 + math.fsum(_xlog2x(v) for v in probs)


@dataclass(frozen=True)
class CatNorms:
    """Norms of the even/odd cat combinations |a> +- |-a>."""

    n_even: float
    n_odd: float


def cat_norms(a: float) -> CatNorms:
    a = float(a)
    if not math.isfinite(a) or a < 0:
        raise DomainError(f"cat amplitude must be finite and >= 0, got {a!r}")
    e = math.exp(-2.0 * a * a)
    # 1 - e via expm1 keeps the odd norm accurate for tiny amplitudes
    return CatNorms(math.sqrt(2.0 * (1.0 + e)), math.sqrt(-2.0 * math.expm1(-2.0 * a * a)))


def pnr_parity_probabilities(mu: float) -> tuple[float, float, float]:
    """Split a Poisson(mu) count into (zero, odd, even-and-positive) probabilities."""
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0:
        raise DomainError(f"mean photon number must be finite and >= 0, got {mu!r}")
    p_zero = math.exp(-mu)
    # e^-mu sinh(mu) = (1 - e^-2mu)/2 and e^-mu (cosh(mu) - 1) = (1 - e^-mu)^2 / 2
    p_odd = -math.expm1(-2.0 * mu) / 2.0
    p_even_pos = math.expm1(-mu) ** 2 / 2.0
    return p_zero, p_odd, p_even_pos
