"""Embeddings of rooted trees into ℓ_p with a prescribed compression function.

Vertex ``x`` is sent to the vector with coordinate ``w_{d(x,v)+1}`` at every
ancestor ``v`` of ``x`` (``x`` itself included, the root excluded) and zero
elsewhere. With ``w_i^p = ρ(i)^p - ρ(i-1)^p`` the coordinates along a branch
telescope to ``ρ(depth)^p``, which gives the lower bound; the Lipschitz
constant is controlled by ``Σ |w_{i+1} - w_i|^p``, finite exactly when the
integral criterion holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .cocycle import loglog_slope


@dataclass(frozen=True)
class CompressionSpec:
    """Compression function ``ρ`` on ``[1, ∞)`` and exponent ``p``.

    ``kind`` is ``"power"`` (``ρ = t^α``), ``"log"`` (``ρ = t / log^β(e+t)``)
    or ``"custom"``; the built-ins carry analytic convergence tests.
    """

    rho: Callable[[float], float]
    p: float
    kind: str = "custom"
    param: float = math.nan
    name: str = ""

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")

    @classmethod
    def power(cls, alpha: float, p: float) -> "CompressionSpec":
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        return cls(lambda t: t**alpha, p, "power", alpha, f"t^{alpha:g}")

    @classmethod
    def log_damped(cls, beta: float, p: float) -> "CompressionSpec":
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        return cls(lambda t: t / math.log(math.e + t) ** beta, p, "log", beta, f"t/log^{beta:g}(e+t)")

    def check(self, grid: Sequence[float] = tuple(range(1, 1025))) -> None:
        vals = [self.rho(t) for t in grid]
        if vals[0] <= 0:
            raise ValueError("rho(1) must be positive")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("rho must be nondecreasing")


@dataclass(frozen=True)
class CriterionResult:
    status: str  # "converges" | "diverges" | "inconclusive"
    value: float
    method: str

    @property
    def converges(self) -> bool:
        return self.status == "converges"


_S_MAX = 700.0  # exp(s) stays finite in double precision


def quadrature_integral(spec: CompressionSpec, q: float, s_max: float = _S_MAX) -> tuple[float, float]:
    # substitute t = e^s: ∫_1^∞ (ρ(t)/t)^q dt/t = ∫_0^∞ (ρ(e^s) e^{-s})^q ds
    def f(s):
        t = math.exp(s)
        return (spec.rho(t) / t) ** q

    breaks = [0.0, 1.0, 10.0, 100.0, s_max]
    total, err = 0.0, 0.0
    for lo, hi in zip(breaks, breaks[1:]):
        v, e = integrate.quad(f, lo, hi, limit=500, epsabs=1e-14, epsrel=1e-12)
        total += v
        err += e
    return total, err


def _log_tail(beta_q: float, s0: float) -> float:
    # ∫_{s0}^∞ log(e + e^s)^{-βq} ds with log(e + e^s) = s + O(e^{1-s})
    return s0 ** (1.0 - beta_q) / (beta_q - 1.0)


def integral_criterion(spec: CompressionSpec, q: float) -> CriterionResult:
    """Decide ``∫_1^∞ (ρ(t)/t)^q dt/t < ∞`` and report its value.

    Built-ins are decided analytically (with closed forms where they exist);
    custom functions fall back to quadrature and are labelled inconclusive
    unless the integrand visibly decays and the error estimate is small.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    if spec.kind == "power":
        alpha = spec.param
        if alpha >= 1:
            return CriterionResult("diverges", math.inf, "analytic")
        return CriterionResult("converges", 1.0 / (q * (1.0 - alpha)), "closed-form")
    if spec.kind == "log":
        # (ρ(t)/t)^q = log^{-βq}(e+t): integrable against dt/t iff βq > 1
        if spec.param * q <= 1:
            return CriterionResult("diverges", math.inf, "analytic")
        val, _ = quadrature_integral(spec, q)
        return CriterionResult("converges", val + _log_tail(spec.param * q, _S_MAX), "analytic+quadrature")
    val, err = quadrature_integral(spec, q)
    far = (spec.rho(math.exp(_S_MAX)) / math.exp(_S_MAX)) ** q
    if math.isfinite(val) and err < 1e-6 * max(1.0, abs(val)) and far < 1e-8:
        return CriterionResult("converges", val, "quadrature")
    return CriterionResult("inconclusive", math.nan, "quadrature")


def obstruction(spec: CompressionSpec) -> CriterionResult:
    """The necessary condition with exponent ``max(2, p)``; a divergent
    result certifies that no embedding with compression ``ρ`` exists."""
    return integral_criterion(spec, max(2.0, spec.p))


@dataclass(frozen=True)
class RootedTree:
    """Rooted tree given by a parent array (``parent[root] = -1``)."""

    parent: tuple[int, ...]

    def __post_init__(self):
        roots = [v for v, u in enumerate(self.parent) if u < 0]
        if len(roots) != 1:
            raise ValueError("exactly one root required")
        for v, u in enumerate(self.parent):
            if u >= len(self.parent):
                raise ValueError("parent index out of range")

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return self.parent.index(-1)

    def depths(self) -> np.ndarray:
        d = np.full(self.n, -1, dtype=np.int64)
        for v in range(self.n):
            path = []
            u = v
            while d[u] < 0 and self.parent[u] >= 0:
                path.append(u)
                u = self.parent[u]
            base = d[u] if d[u] >= 0 else 0
            d[u] = base
            for w in reversed(path):
                base += 1
                d[w] = base
        return d

    def ancestors(self, v: int) -> list[int]:
        """``v`` and its ancestors, excluding the root, deepest first."""
        out = []
        while self.parent[v] >= 0:
            out.append(v)
            v = self.parent[v]
        return out

    def meet(self, x: int, y: int) -> int:
        ax = set(self.ancestors(x)) | {self.root}
        while y not in ax:
            y = self.parent[y]
        return y

    def distance(self, x: int, y: int, depth: np.ndarray | None = None) -> int:
        d = self.depths() if depth is None else depth
        m = self.meet(x, y)
        return int(d[x] + d[y] - 2 * d[m])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for v, u in enumerate(self.parent) if u >= 0]


def binary_tree(depth: int) -> RootedTree:
    """Complete binary tree in heap order: children of ``v`` are ``2v+1, 2v+2``."""
    n = 2 ** (depth + 1) - 1
    return RootedTree(tuple([-1] + [(v - 1) // 2 for v in range(1, n)]))


def weight_schedule(spec: CompressionSpec, length: int) -> np.ndarray:
    """``w_1..w_length`` with ``w_i = (ρ(i)^p - ρ(i-1)^p)^{1/p}``, ``ρ(0) = 0``."""
    p = spec.p
    r = np.array([0.0] + [spec.rho(i) for i in range(1, length + 1)])
    inc = np.diff(r**p)
    if np.any(inc < 0):
        raise ValueError("rho must be nondecreasing")
    return inc ** (1.0 / p)


def step_bound(w: np.ndarray, p: float) -> float:
    """Sup over depths of ``‖F(x) - F(parent(x))‖_p``:
    ``(w_1^p + Σ_{i<depth} |w_{i+1} - w_i|^p)^{1/p}`` is increasing in depth."""
    diffs = np.abs(np.diff(w)) ** p
    return float((w[0] ** p + diffs.sum()) ** (1.0 / p))


class LipschitzCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class AncestorEmbedding:
    tree: RootedTree
    spec: CompressionSpec
    weights: np.ndarray
    lipschitz: float
    depth: np.ndarray

    def image(self, x: int) -> dict[int, float]:
        """Sparse coordinates of ``F(x)``."""
        d = int(self.depth[x])
        return {v: float(self.weights[d - int(self.depth[v])]) for v in self.tree.ancestors(x)}

    def distance(self, x: int, y: int) -> float:
        """``‖F(x) - F(y)‖_p`` by sparse subtraction."""
        p = self.spec.p
        fx, fy = self.image(x), self.image(y)
        keys = fx.keys() | fy.keys()
        s = math.fsum(abs(fx.get(v, 0.0) - fy.get(v, 0.0)) ** p for v in keys)
        return s ** (1.0 / p)

    def distance_formula(self, x: int, y: int) -> float:
        """Same distance from the path decomposition at the meet ``m``."""
        p = self.spec.p
        w = self.weights
        d = self.depth
        m = self.tree.meet(x, y)
        dx, dy, dm = int(d[x]), int(d[y]), int(d[m])
        terms = [w[i] ** p for i in range(dx - dm)]
        terms += [w[i] ** p for i in range(dy - dm)]
        # shared ancestors of depth 1..dm
        terms += [abs(w[dx - j] - w[dy - j]) ** p for j in range(1, dm + 1)]
        return math.fsum(terms) ** (1.0 / p)


def build_embedding(
    tree: RootedTree, spec: CompressionSpec, lipschitz_cap: float = math.inf
) -> AncestorEmbedding:
    """Ancestor-coordinate embedding of ``tree`` realizing ``ρ``.

    Requires the integral criterion with exponent ``p`` to converge; the
    step bound over the materialized depth is recorded as the Lipschitz
    certificate.
    """
    crit = integral_criterion(spec, spec.p)
    if not crit.converges:
        raise ValueError(f"integral criterion {crit.status} for {spec.name or 'rho'} at p={spec.p:g}")
    spec.check()
    depth = tree.depths()
    w = weight_schedule(spec, max(int(depth.max()), 1))
    L = step_bound(w, spec.p)
    if L > lipschitz_cap:
        raise LipschitzCapExceeded(f"step bound {L:.6g} exceeds cap {lipschitz_cap:.6g}")
    return AncestorEmbedding(tree, spec, w, L, depth)


@dataclass(frozen=True)
class EmbeddingReport:
    lipschitz: float
    max_ratio: float
    lower_envelope: tuple[tuple[int, float], ...]
    fitted_exponent: float
    violations: int
    slack: float
    pairs: int


def sample_pairs(tree: RootedTree, count: int, seed: int, leaves_only: bool = False) -> list[tuple[int, int]]:
    rng = np.random.default_rng(seed)
    if leaves_only:
        depth = tree.depths()
        pool = np.flatnonzero(depth == depth.max())
    else:
        pool = np.arange(tree.n)
    xs = rng.choice(pool, size=count)
    ys = rng.choice(pool, size=count)
    return list(zip(xs.tolist(), ys.tolist()))


def measure_embedding(
    emb: AncestorEmbedding, pairs: Sequence[tuple[int, int]]
) -> EmbeddingReport:
    """Exact distances on ``pairs``; checks the Lipschitz certificate and
    ``‖F(x) - F(y)‖_p ≥ ρ(d/2) / 2^{1/p} - w_1``, and fits the exponent of
    the lower envelope (minimum over pairs at each distance ``d ≥ 1``)."""
    p = emb.spec.p
    rho = emb.spec.rho
    slack = float(emb.weights[0])
    env: dict[int, float] = {}
    violations = 0
    max_ratio = 0.0
    for x, y in pairs:
        d = emb.tree.distance(x, y, emb.depth)
        f = emb.distance(x, y)
        if d == 0:
            env[0] = min(env.get(0, math.inf), f)
            continue
        max_ratio = max(max_ratio, f / d)
        if f > emb.lipschitz * d * (1 + 1e-12):
            violations += 1
        if f < rho(d / 2) / 2 ** (1 / p) - slack - 1e-12:
            violations += 1
        env[d] = min(env.get(d, math.inf), f)
    lower = tuple(sorted(env.items()))
    pts = [(d, v) for d, v in lower if d >= 1 and v > 0]
    exponent = loglog_slope([d for d, _ in pts], [v for _, v in pts])[0] if len(pts) >= 2 else math.nan
    return EmbeddingReport(emb.lipschitz, max_ratio, lower, exponent, violations, slack, len(pairs))
