"""Amplitude optimization, loss sweeps, crossover search and GHZ chaining costs."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .core import DomainError
from .nonideal import NoiseConfig, _check_protocol, rate_point
from .protocols import (
    PROTOCOLS,
    SINGLE_PHOTON_CAP,
    RatePoint,
    baseline_curves,
    check_eta,
    db_from_eta,
    eta_from_db,
    repeaterless_bound_direct,
    repeaterless_bound_midpoint,
)

WORKERS_ENV = "COHERENT_LINK_WORKERS"
ALPHA_BOUNDS = (1e-3, 5.0)
SCAN_POINTS = 200
SPACINGS = ("linear-db", "log-eta")
POLICIES = ("retry-link", "restart-chain")
# reference curves accepted wherever a protocol name is expected in crossover_loss
PSEUDO_PROTOCOLS = ("cap", "single-rail-ref", "dual-rail-ref")


@dataclass(frozen=True)
class OptimizeResult:
    alpha: float
    point: RatePoint
    flags: tuple[str, ...] = ()
    scan_best: float = 0.0  # best rate seen in the coarse scan


def _rate(protocol, noise, eta, alpha) -> float:
    return rate_point(protocol, alpha, eta, noise).rate


def _local_maxima(r: np.ndarray, floor: float) -> list[int]:
    """Peaks above ``floor``; a flat run counts once, by its middle (or last point at the edge)."""
    runs = []  # (start, stop) of runs of equal values
    start = 0
    for i in range(1, len(r) + 1):
        if i == len(r) or r[i] != r[start]:
            runs.append((start, i))
            start = i
    idx = []
    for k, (a, b) in enumerate(runs):
        left = r[runs[k - 1][0]] if k > 0 else -np.inf
        right = r[runs[k + 1][0]] if k + 1 < len(runs) else -np.inf
        if r[a] > floor and r[a] > left and r[a] > right:
            idx.append(b - 1 if b == len(r) else (a + b - 1) // 2)
    return idx


def optimize_alpha(
    protocol: str,
    eta: float,
    noise: NoiseConfig | None = None,
    bounds: tuple[float, float] = ALPHA_BOUNDS,
    tol: float = 1e-6,
    scan_points: int = SCAN_POINTS,
) -> OptimizeResult:
    """Maximize the rate over alpha: log-spaced scan, then golden-section around each peak.

    Flags: ``boundary`` when the best alpha is the upper bound, ``multimodal`` when
    the scan shows more than one peak, ``zero`` when no alpha gives a positive rate.
    """
    eta = check_eta(eta)
    lo, hi = float(bounds[0]), float(bounds[1])
    if not 0.0 < lo < hi:
        raise DomainError(f"alpha bounds must satisfy 0 < min < max, got {bounds!r}")
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol!r}")
    _check_protocol(protocol, noise or NoiseConfig())

    grid = np.geomspace(lo, hi, scan_points)
    rates = np.array([_rate(protocol, noise, eta, a) for a in grid])
    best_i = int(np.argmax(rates))
    scan_best = float(rates[best_i])
    flags = []
    if scan_best <= 0.0:
        return OptimizeResult(float(grid[0]), rate_point(protocol, grid[0], eta, noise), ("zero",), 0.0)

    # 1 - h2(x) near x = 1/2 leaves ~1e-16 ripples where the true rate is zero
    peaks = _local_maxima(rates, 1e-9 * scan_best)
    if len(peaks) > 1:
        flags.append("multimodal")
    candidates = [(scan_best, float(grid[best_i]))]
    for i in peaks:
        if i == len(grid) - 1:
            candidates.append((float(rates[i]), float(grid[i])))
            continue
        neg = lambda a: -_rate(protocol, noise, eta, a)  # noqa: E731
        try:
            res = minimize_scalar(
                neg, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", options={"xtol": tol}
            )
        except ValueError:
            # flat-topped peak: the three points do not form a strict bracket
            res = minimize_scalar(
                neg, bounds=(grid[i - 1], grid[i + 1]), method="bounded", options={"xatol": tol * grid[i]}
            )
        a = float(min(max(res.x, lo), hi))
        candidates.append((_rate(protocol, noise, eta, a), a))
    best_rate, alpha = max(candidates)
    if alpha == hi:
        flags.append("boundary")
    return OptimizeResult(alpha, rate_point(protocol, alpha, eta, noise), tuple(flags), scan_best)


@dataclass(frozen=True)
class SweepSpec:
    protocols: tuple[str, ...] = PROTOCOLS
    loss_db_min: float = 0.01
    loss_db_max: float = 40.0
    points: int = 50
    spacing: str = "linear-db"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    alpha_bounds: tuple[float, float] = ALPHA_BOUNDS
    optimize: bool = True
    alpha: float | None = None  # fixed amplitude when optimize is off

    def __post_init__(self):
        protos = tuple(sorted(set(self.protocols)))
        if not protos:
            raise DomainError("at least one protocol is required")
        for p in protos:
            if p not in PROTOCOLS:
                raise DomainError(f"unknown protocol {p!r}")
        object.__setattr__(self, "protocols", protos)
        if not self.loss_db_min < self.loss_db_max:
            raise DomainError("loss_db_min must be below loss_db_max")
        if self.loss_db_min < 0:
            raise DomainError("loss must be nonnegative")
        if int(self.points) != self.points or self.points < 2:
            raise DomainError(f"points must be an integer >= 2, got {self.points!r}")
        if self.spacing not in SPACINGS:
            raise DomainError(f"spacing must be one of {SPACINGS}, got {self.spacing!r}")
        if not 0.0 < self.alpha_bounds[0] < self.alpha_bounds[1]:
            raise DomainError(f"alpha bounds must satisfy 0 < min < max, got {self.alpha_bounds!r}")
        if not self.optimize and self.alpha is None:
            raise DomainError("a fixed alpha is required when optimization is off")

    def loss_grid(self) -> np.ndarray:
        if self.spacing == "linear-db":
            return np.linspace(self.loss_db_min, self.loss_db_max, int(self.points))
        etas = np.geomspace(eta_from_db(self.loss_db_min), eta_from_db(self.loss_db_max), int(self.points))
        return np.array([db_from_eta(e) for e in etas])


@dataclass(frozen=True)
class SweepRow:
    protocol: str
    loss_db: float
    eta: float
    alpha: float
    p_success: float
    hashing: float
    rate: float
    bound_midpoint: float
    bound_direct: float
    single_rail_ref: float
    dual_rail_ref: float
    flags: tuple[str, ...] = ()


def _row(task) -> SweepRow:
    protocol, loss_db, spec = task
    eta = eta_from_db(loss_db)
    if spec.optimize:
        res = optimize_alpha(protocol, eta, spec.noise, spec.alpha_bounds)
        point, flags = res.point, res.flags
    else:
        point, flags = rate_point(protocol, spec.alpha, eta, spec.noise), ()
    base = baseline_curves(eta)
    return SweepRow(
        protocol,
        float(loss_db),
        eta,
        point.alpha,
        point.p_success,
        point.hashing_per_success,
        point.rate,
        repeaterless_bound_midpoint(eta),
        repeaterless_bound_direct(eta),
        base["single_rail_ref"],
        base["dual_rail_ref"],
        flags,
    )


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def sweep_loss(spec: SweepSpec, workers: int | None = None) -> list[SweepRow]:
    """One row per (protocol, loss point), sorted by protocol then loss."""
    for p in spec.protocols:
        _check_protocol(p, spec.noise)
    tasks = [(p, float(db), spec) for p in spec.protocols for db in spec.loss_grid()]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            rows = list(pool.map(_row, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        rows = [_row(t) for t in tasks]
    return sorted(rows, key=lambda r: (r.protocol, r.loss_db))


def optimized_rate(name: str, loss_db: float, noise: NoiseConfig | None = None) -> float:
    """Optimized protocol rate, or the value of a reference curve, at ``loss_db``."""
    eta = eta_from_db(loss_db)
    if name == "cap":
        return SINGLE_PHOTON_CAP
    if name == "single-rail-ref":
        return baseline_curves(eta)["single_rail_ref"]
    if name == "dual-rail-ref":
        return baseline_curves(eta)["dual_rail_ref"]
    return optimize_alpha(name, eta, noise).point.rate


@dataclass(frozen=True)
class Crossover:
    loss_db: float | None
    bracket: tuple[float, float] | None = None

    @property
    def found(self) -> bool:
        return self.loss_db is not None


def crossover_loss(
    protocol_a: str,
    protocol_b: str,
    noise: NoiseConfig | None = None,
    bracket_db: tuple[float, float] = (0.01, 40.0),
    scan_points: int = 40,
    resolution_db: float = 0.01,
) -> Crossover:
    """Lowest loss at which rate_a - rate_b changes sign, bisected to ``resolution_db``.

    The bracket is scanned on a log-dB grid first; no strict sign change means no
    crossover, which is reported rather than raised.
    """
    for name in (protocol_a, protocol_b):
        if name not in PROTOCOLS and name not in PSEUDO_PROTOCOLS:
            raise DomainError(f"unknown protocol {name!r}")
    lo, hi = map(float, bracket_db)
    if not 0.0 < lo < hi:
        raise DomainError(f"bracket must satisfy 0 < low < high dB, got {bracket_db!r}")

    def diff(db):
        return optimized_rate(protocol_a, db, noise) - optimized_rate(protocol_b, db, noise)

    grid = np.geomspace(lo, hi, scan_points)
    vals = [diff(db) for db in grid]
    for i in range(len(grid) - 1):
        if vals[i] * vals[i + 1] < 0.0:
            a, b, fa = float(grid[i]), float(grid[i + 1]), vals[i]
            break
    else:
        return Crossover(None)
    while b - a > resolution_db:
        m = 0.5 * (a + b)
        fm = diff(m)
        if fm == 0.0:
            a = b = m
            break
        if (fm < 0.0) == (fa < 0.0):
            a, fa = m, fm
        else:
            b = m
    return Crossover(0.5 * (a + b), (a, b))


@dataclass(frozen=True)
class GhzSpec:
    n_memories: int
    per_link_success: float
    policy: str = "retry-link"

    def __post_init__(self):
        if int(self.n_memories) != self.n_memories or self.n_memories < 2:
            raise DomainError(f"n_memories must be an integer >= 2, got {self.n_memories!r}")
        p = float(self.per_link_success)
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"per-link success must lie in [0, 1], got {p!r}")
        if self.policy not in POLICIES:
            raise DomainError(f"policy must be one of {POLICIES}, got {self.policy!r}")


def ghz_expected_rounds(spec: GhzSpec) -> float:
    """Expected link attempts to chain N memories into a GHZ state.

    retry-link: a failed link is retried alone, (N - 1)/p.
    restart-chain: any failure discards the chain, sum_{k=1}^{N-1} p^-k.
    """
    p, links = float(spec.per_link_success), int(spec.n_memories) - 1
    if p == 0.0:
        raise DomainError("per-link success 0: the chain never completes")
    if spec.policy == "retry-link":
        return links / p
    if p == 1.0:
        return float(links)
    if links <= 10_000:
        # direct sum: exact for p = 1/2 and free of the cancellation near p = 1
        return math.fsum(p ** (-k) for k in range(1, links + 1))
    return math.expm1(-links * math.log(p)) / (1.0 - p)


def ghz_monte_carlo(spec: GhzSpec, trials: int = 1_000_000, seed: int = 0) -> float:
    """Sample mean of the link-attempt count under ``spec.policy``."""
    p, links = float(spec.per_link_success), int(spec.n_memories) - 1
    if p == 0.0:
        raise DomainError("per-link success 0: the chain never completes")
    rng = np.random.default_rng(seed)
    if spec.policy == "retry-link":
        return float(rng.geometric(p, size=(trials, links)).sum(axis=1).mean())
    built = np.zeros(trials, dtype=np.int64)
    attempts = np.zeros(trials, dtype=np.int64)
    active = np.arange(trials)
    while active.size:
        attempts[active] += 1
        ok = rng.random(active.size) < p
        built[active] = np.where(ok, built[active] + 1, 0)
        active = active[built[active] < links]
    return float(attempts.mean())


def ghz_throughput_compare(n: int, eta: float, noise: NoiseConfig | None = None, baseline_p: float = 0.5) -> dict:
    """Coherent CTW chaining (retry-link) against a capped single-photon chain (restart-chain)."""
    opt = optimize_alpha("ctw", eta, noise)
    coherent = GhzSpec(n, opt.point.p_success, "retry-link")
    baseline = GhzSpec(n, baseline_p, "restart-chain")
    c_rounds, b_rounds = ghz_expected_rounds(coherent), ghz_expected_rounds(baseline)
    return {
        "n": int(n),
        "eta": float(eta),
        "coherent": {
            "protocol": "ctw",
            "alpha": opt.alpha,
            "per_link_success": coherent.per_link_success,
            "policy": coherent.policy,
            "expected_rounds": c_rounds,
        },
        "baseline": {
            "per_link_success": baseline.per_link_success,
            "policy": baseline.policy,
            "expected_rounds": b_rounds,
        },
        "ratio": b_rounds / c_rounds,
    }
