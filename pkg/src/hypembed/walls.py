"""Walls in the Poincaré disk and the measure of walls separating two points.

A wall is the geodesic with ideal endpoints ``e^{iθ₁}``, ``e^{iθ₂}``. The
isometry-invariant measure on ordered endpoint pairs has density
``1 / sin²((θ₁ - θ₂)/2)``; the measure of walls separating ``z`` from ``w``
is proportional to the hyperbolic distance. The constant is measured, and a
deterministic quadrature is provided as an independent check of the Monte
Carlo route.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .cocycle import loglog_slope

#: Samples per independent Monte Carlo block; results do not depend on workers.
BLOCK_SIZE = 1 << 15
#: Smallest angular gap ever sampled.
MIN_GAP = 1e-6


def _check_point(z: complex) -> complex:
    z = complex(z)
    if not abs(z) < 1:
        raise ValueError(f"{z} is not inside the unit disk")
    return z


def hyp_distance(z: complex, w: complex) -> float:
    """Poincaré-disk distance, ``2 artanh(|z - w| / |1 - z̄w|)``."""
    z, w = _check_point(z), _check_point(w)
    return 2.0 * math.atanh(abs(z - w) / abs(1 - z.conjugate() * w))


def point_at_distance(d: float, angle: float = 0.0) -> complex:
    """The point at hyperbolic distance ``d`` from 0 in direction ``angle``."""
    return math.tanh(d / 2) * complex(math.cos(angle), math.sin(angle))


def mobius(z: complex, a: complex, phase: float = 0.0):
    """Disk automorphism ``x ↦ e^{iφ}(x - a)/(1 - āx)``."""
    return np.exp(1j * phase) * (z - a) / (1 - np.conj(a) * z)


@dataclass(frozen=True)
class Wall:
    theta1: float
    theta2: float

    def __post_init__(self):
        t1 = self.theta1 % (2 * math.pi)
        t2 = self.theta2 % (2 * math.pi)
        if abs(t1 - t2) < 1e-15:
            raise ValueError("wall endpoints must differ")
        lo, hi = sorted((t1, t2))
        object.__setattr__(self, "theta1", lo)
        object.__setattr__(self, "theta2", hi)

    def side(self, z) -> np.ndarray:
        return side_value(self.theta1, self.theta2, z)

    def separates(self, z: complex, w: complex) -> bool:
        return bool(np.sign(self.side(z)) * np.sign(self.side(w)) < 0)


def side_value(theta1, theta2, z):
    """Signed side of ``z`` relative to the wall ``(θ₁, θ₂)``.

    With ``φ = (θ₁+θ₂)/2`` and ``β = (θ₂-θ₁)/2`` the wall is the circle
    ``2 Re(z e^{-iφ}) = cos β (1 + |z|²)``; this is the pairing of ``z``
    with the wall's unit normal in the hyperboloid model, up to a positive
    factor, so it stays well conditioned as the wall approaches the rim.
    """
    phi = 0.5 * (theta1 + theta2)
    beta = 0.5 * (theta2 - theta1)
    z = np.asarray(z)
    return 2 * (z.real * np.cos(phi) + z.imag * np.sin(phi)) - np.cos(beta) * (1 + np.abs(z) ** 2)


def density(theta1, theta2):
    """Unnormalized invariant density on ordered endpoint pairs."""
    return 1.0 / np.sin(0.5 * (theta1 - theta2)) ** 2


def gap_cutoff(z: complex, w: complex) -> float:
    """Angular gap below which no wall can separate ``z`` from ``w``.

    A wall with gap ``Δ`` stays at Euclidean distance ``tan(π/4 - Δ/4)``
    from the origin, so both points lie on the origin's side when their
    moduli are below that. The cutoff is exact, not an approximation.
    """
    rho = max(abs(z), abs(w))
    return max(math.pi - 4.0 * math.atan(rho), MIN_GAP)


@dataclass(frozen=True)
class MCConfig:
    samples: int = 1_000_000
    seed: int = 0
    workers: int = 1
    stderr_tol: float = math.inf


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    samples: int
    flagged: bool = False


def _block(args) -> tuple[int, int]:
    z, w, eps, n, seed = args
    rng = np.random.default_rng(seed)
    # stratified first endpoint, inverse-CDF gap
    theta1 = 2 * math.pi * (np.arange(n) + rng.random(n)) / n
    u = rng.random(n)
    gap = 2.0 * np.arctan2(1.0, (1.0 / math.tan(eps / 2)) * (1.0 - 2.0 * u))
    theta2 = theta1 + gap
    sz = side_value(theta1, theta2, z)
    sw = side_value(theta1, theta2, w)
    hits = int(np.count_nonzero(np.sign(sz) * np.sign(sw) < 0))
    return hits, n


def separating_measure(z: complex, w: complex, mc: MCConfig = MCConfig()) -> MCEstimate:
    """Monte Carlo estimate of the invariant measure of ordered wall pairs
    separating ``z`` from ``w``.

    The gap ``Δ = θ₂ - θ₁`` is drawn from the density restricted to
    ``(ε, 2π - ε)`` by inverse CDF, so each sample has weight
    ``Z = 2π · 4 cot(ε/2)`` and the estimate is ``Z`` times the hit rate.
    Samples are drawn in fixed blocks with spawned seeds, so the result does
    not depend on the worker count. The standard error is binomial.
    """
    z, w = _check_point(z), _check_point(w)
    if z == w:
        return MCEstimate(0.0, 0.0, 0)
    eps = gap_cutoff(z, w)
    Z = 2 * math.pi * 4.0 / math.tan(eps / 2)
    sizes = [BLOCK_SIZE] * (mc.samples // BLOCK_SIZE)
    if mc.samples % BLOCK_SIZE:
        sizes.append(mc.samples % BLOCK_SIZE)
    seeds = np.random.SeedSequence(mc.seed).spawn(len(sizes))
    jobs = [(z, w, eps, n, s) for n, s in zip(sizes, seeds)]
    if mc.workers > 1:
        with ProcessPoolExecutor(mc.workers) as ex:
            results = list(ex.map(_block, jobs))
    else:
        results = [_block(j) for j in jobs]
    N = sum(n for _, n in results)
    mean = sum(h for h, _ in results) / N
    # binomial variance; stratifying the first endpoint can only lower it
    var = mean * (1 - mean) / N
    est = float(Z * mean)
    se = float(Z * math.sqrt(var))
    return MCEstimate(est, se, int(N), flagged=se > mc.stderr_tol)


def _other_endpoint(theta: float, z: complex) -> float:
    """Angle of the far endpoint of the geodesic from ``e^{iθ}`` through ``z``."""
    u = (complex(math.cos(theta), math.sin(theta)) - z) / (1 - z.conjugate() * complex(math.cos(theta), math.sin(theta)))
    other = (z - u) / (1 - z.conjugate() * u)
    return math.atan2(other.imag, other.real)


def separating_measure_quadrature(z: complex, w: complex) -> float:
    """Deterministic evaluation of the same measure.

    For fixed ``θ₁`` the separating ``θ₂`` form the arc between the far
    endpoints of the geodesics from ``e^{iθ₁}`` through ``z`` and through
    ``w``; the density integrates to ``2 cot(Δ/2)`` differences over it.
    """
    z, w = _check_point(z), _check_point(w)
    if z == w:
        return 0.0

    def inner(t1):
        ends = []
        for x in (z, w):
            gap = (_other_endpoint(t1, x) - t1) % (2 * math.pi)
            ends.append(gap)
        lo, hi = sorted(ends)
        return 2.0 * (1.0 / math.tan(lo / 2) - 1.0 / math.tan(hi / 2))

    val, _ = integrate.quad(inner, 0.0, 2 * math.pi, limit=400, epsabs=1e-12, epsrel=1e-10)
    return val


@dataclass(frozen=True)
class WallNorm:
    norm: float
    stderr: float
    measure: MCEstimate


def wall_cocycle_norm(z: complex, p: float, mc: MCConfig = MCConfig()) -> WallNorm:
    """``‖b(z)‖_p = μ(walls separating 0 and z)^{1/p}`` with propagated error."""
    if p < 1:
        raise ValueError("p must be at least 1")
    m = separating_measure(0j, z, mc)
    if m.estimate == 0:
        return WallNorm(0.0, 0.0, m)
    norm = m.estimate ** (1 / p)
    return WallNorm(norm, norm * m.stderr / (p * m.estimate), m)


@dataclass(frozen=True)
class CroftonReport:
    distances: tuple[float, ...]
    estimates: tuple[MCEstimate, ...]
    ratios: tuple[float, ...]
    ratio_stderr: tuple[float, ...]
    inverse_k: float
    inverse_k_stderr: float
    max_z: float

    @property
    def constant_within(self) -> float:
        return self.max_z


def crofton_ratios(distances: Sequence[float], mc: MCConfig = MCConfig()) -> CroftonReport:
    """Ratios ``μ̂ / d`` along a ray from 0, their inverse-variance mean
    (the measured ``1/k``) and the largest deviation in units of σ."""
    ests, ratios, ses = [], [], []
    for i, d in enumerate(distances):
        cfg = MCConfig(mc.samples, mc.seed + i, mc.workers, mc.stderr_tol)
        e = separating_measure(0j, point_at_distance(d), cfg)
        ests.append(e)
        ratios.append(e.estimate / d)
        ses.append(e.stderr / d)
    r = np.array(ratios)
    s = np.array(ses)
    wts = 1 / s**2
    mean = float(np.sum(wts * r) / np.sum(wts))
    mean_se = float(1 / math.sqrt(np.sum(wts)))
    max_z = float(np.max(np.abs(r - mean) / s))
    return CroftonReport(tuple(distances), tuple(ests), tuple(ratios), tuple(ses), mean, mean_se, max_z)


def norm_slope(distances: Sequence[float], p: float, mc: MCConfig = MCConfig()) -> tuple[float, float, list[WallNorm]]:
    """Log-log slope of ``‖b‖_p`` against distance along a ray."""
    norms = []
    for i, d in enumerate(distances):
        cfg = MCConfig(mc.samples, mc.seed + i, mc.workers, mc.stderr_tol)
        norms.append(wall_cocycle_norm(point_at_distance(d), p, cfg))
    slope, r2 = loglog_slope(distances, [n.norm for n in norms])
    return slope, r2, norms


@dataclass(frozen=True)
class CNDResult:
    min_eigenvalue: float
    passed: bool


def cnd_check(
    points: Sequence[complex],
    tol: float = 1e-8,
    kernel: Callable[[complex, complex], float] = hyp_distance,
) -> CNDResult:
    """Conditional negative definiteness of ``kernel`` on ``points``.

    Projects ``-M`` onto the complement of the constants and checks that
    its smallest eigenvalue is at least ``-tol``.
    """
    pts = [_check_point(z) for z in points]
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two points")
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            M[i, j] = M[j, i] = kernel(pts[i], pts[j])
    P = np.eye(n) - np.full((n, n), 1.0 / n)
    G = P @ (-M) @ P
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    smallest = float(ev.min())
    return CNDResult(smallest, smallest >= -tol)


def random_disk_points(n: int, seed: int, radius: float = 0.9) -> list[complex]:
    """Points uniform in the Euclidean disk of the given radius."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(n))
    t = 2 * math.pi * rng.random(n)
    return list(r * np.exp(1j * t))


def squared_distance(z: complex, w: complex) -> float:
    return hyp_distance(z, w) ** 2


def negative_control_points(R: float = 5.0) -> list[complex]:
    """The origin and three points at distance ``R`` spaced by 120°, where
    the squared distance fails to be conditionally negative definite."""
    return [0j] + [point_at_distance(R, 2 * math.pi * j / 3) for j in range(3)]
