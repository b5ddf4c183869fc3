"""Boundary cocycles on ℓ_p(F_k) and their certified norms.

For a Lipschitz observable ``u`` on the boundary put ``f_u(γ) = u(ξ_γ)`` and
``c(g)(γ) = f_u(γg) - f_u(γ)``: the cocycle of the right-translation action
``ρ(g)f(γ) = f(γg)`` with respect to the counting measure.

Support structure used throughout. Write ``γ = γ₀·s`` where ``s`` is the
longest suffix cancelled by ``g`` (so ``s = (g[:t])⁻¹`` and
``γg = γ₀·g[t:]``). Both ``ξ_γ`` and ``ξ_{γg}`` start with ``γ₀``, so
``c(g)(γ) = 0`` unless ``γ₀`` is a prefix of the anchor of ``u``, and in any
case ``|c(g)(γ)| ≤ a^{-|γ₀|} ≤ a^{|g|-|γ|}``. The nonzero part of ``c(g)``
therefore lives on the words ``anchor[:j]·(g[:t])⁻¹``, which are enumerated
directly instead of scanning whole spheres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .boundary import BoundaryPoint, VisualMetric, common_prefix, ray_prefix_agreement, ray_to
from .group import FreeGroup, Word, inverse_word, reduce_concat

#: Target relative interval width for norms that feed exponent fits.
MAX_RELATIVE_WIDTH = 0.05


@dataclass(frozen=True)
class Observable:
    """``u(ξ) = d_a(anchor, ξ)``, a 1-Lipschitz function on the boundary."""

    anchor: BoundaryPoint
    vm: VisualMetric

    def __call__(self, xi: BoundaryPoint) -> float:
        return self.vm.distance(self.anchor, xi)

    def at_ray(self, g: Word, known: int = 0) -> float:
        """``u(ξ_g)``; ``known`` letters of ``g`` are promised to match the anchor."""
        return self.vm.from_depth(ray_prefix_agreement(self.anchor, g, known))


@dataclass(frozen=True)
class ObservableFamily:
    observables: tuple[Observable, ...]
    cover_radius: float
    depth: int

    def __len__(self):
        return len(self.observables)

    def __iter__(self) -> Iterator[Observable]:
        return iter(self.observables)

    @property
    def vm(self) -> VisualMetric:
        return self.observables[0].vm


def observable_cover(cover_radius: float, vm: VisualMetric, group: FreeGroup) -> ObservableFamily:
    """Observables anchored at ``ξ_w`` for every ``w`` of length
    ``m = ⌈-ln C̄ / ln a⌉``; their ``C̄``-balls cover the boundary."""
    if not 0 < cover_radius <= vm.diameter:
        raise ValueError("cover radius must lie in (0, diam]")
    m = vm.closed_ball_depth(cover_radius)
    obs = tuple(Observable(ray_to(w), vm) for w in group.sphere(m))
    return ObservableFamily(obs, cover_radius, m)


def cocycle_eval(g: Word, u: Observable, gamma: Word) -> float:
    """``c(g)(γ) = u(ξ_{γg}) - u(ξ_γ)``."""
    return u(ray_to(reduce_concat(gamma, g))) - u(ray_to(gamma))


def sparse_support(g: Word, anchor: BoundaryPoint, T: int) -> Iterator[tuple[Word, Word, int]]:
    """Words ``γ`` with ``|γ| ≤ T`` where ``c(g)(γ)`` can be nonzero.

    Yields ``(γ, γg, j)`` with ``j`` the length of the shared anchor prefix;
    each γ appears once.
    """
    m = len(g)
    ginv = inverse_word(g)
    prefix = anchor.prefix(T)
    for j in range(T + 1):
        g0 = prefix[:j]
        last = g0[-1] if j else None
        for t in range(min(m, T - j) + 1):
            if t and last is not None and last == g[t - 1]:
                continue  # γ₀·s would not be reduced
            if t < m and last is not None and last == g[t] ^ 1:
                continue  # cancellation would continue past s
            s = ginv[m - t:]
            yield g0 + s, g0 + g[t:], j


def _sparse_terms(g: Word, u: Observable, T: int) -> Iterator[tuple[int, float]]:
    for gamma, gamma_g, j in sparse_support(g, u.anchor, T):
        v = u.at_ray(gamma_g, j) - u.at_ray(gamma, j)
        if v:
            yield len(gamma), v


def _dense_terms(g: Word, u: Observable, T: int, group: FreeGroup) -> Iterator[tuple[int, float]]:
    for r in range(T + 1):
        for gamma in group.sphere(r):
            v = cocycle_eval(g, u, gamma)
            if v:
                yield r, v


@dataclass(frozen=True)
class NormEstimate:
    """Certified interval ``[lower, upper]`` for ``‖c(g)‖_p``.

    ``lower`` is the truncated sum over ``|γ| ≤ T``; ``upper`` adds the
    certified tail. The coarse hyperbolic-group constants (``C_tilde``, the growth ratio
    ``n a^{-p/A}`` and the resulting bound on ``‖c(g)‖_p^p``) are kept for
    reports alongside the tree certificate actually used.
    """

    p: float
    lower: float
    upper: float
    converged: bool
    T: int
    ratio: float
    tail: float
    C_tilde: float = math.nan
    coarse_ratio: float = math.nan
    coarse_bound: float = math.nan
    sphere_max: tuple[float, ...] = field(default=(), repr=False)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def relative_width(self) -> float:
        if self.upper == math.inf:
            return math.inf
        mid = self.midpoint
        return 0.0 if mid == 0 else (self.upper - self.lower) / mid


def growth_ratio(group: FreeGroup, a: float, p: float) -> float:
    """``(2k-1) a^{-p}``, the ratio of the sphere-wise tail series."""
    return group.growth_base * a ** (-p)


def _converges(group: FreeGroup, a: float, p: float) -> bool:
    if group.growth_base <= 1:
        return True
    return p * math.log(a) - math.log(group.growth_base) > 1e-12


def sphere_bound(r: int, glen: int, a: float) -> float:
    """Uniform bound on ``|c(g)(γ)|`` over the sphere of radius ``r``:
    ``min(1, 2 a^{1.5|g| - r})``."""
    return min(1.0, 2.0 * a ** (1.5 * glen - r))


def tail_bound(group: FreeGroup, glen: int, a: float, p: float, T: int) -> float:
    """Certified bound on ``Σ_{|γ|>T} |c(g)(γ)|^p`` from sphere sizes times
    the uniform per-sphere bound; ``inf`` when the series diverges."""
    if glen == 0:
        return 0.0
    if not _converges(group, a, p):
        return math.inf
    b = group.growth_base
    k2 = 2 * group.rank
    # spheres where the uniform bound is capped at 1
    r1 = max(T + 1, math.floor(1.5 * glen + math.log(2) / math.log(a)) + 1)
    total = math.fsum(float(group.sphere_size(r)) for r in range(T + 1, r1))
    # geometric part: Σ_{r≥r1} 2k b^{r-1} 2^p a^{p(1.5|g|-r)}
    q = b * a ** (-p)
    log_first = (
        math.log(k2) + (r1 - 1) * math.log(b) + p * math.log(2) + p * (1.5 * glen - r1) * math.log(a)
    )
    total += math.exp(log_first) / (1.0 - q)
    return total


def _finish(
    g: Word,
    p: float,
    T: int,
    group: FreeGroup,
    vm: VisualMetric,
    terms: Iterable[tuple[int, float]],
) -> NormEstimate:
    powers: list[float] = []
    sphere_max = [0.0] * (T + 1)
    for r, v in terms:
        av = abs(v)
        powers.append(av**p)
        if av > sphere_max[r]:
            sphere_max[r] = av
    lower_p = math.fsum(powers)
    converged = _converges(group, vm.a, p)
    tail = tail_bound(group, len(g), vm.a, p, T)
    lower = math.nextafter(lower_p ** (1 / p), 0.0) if lower_p > 0 else 0.0
    if tail == math.inf:
        upper = math.inf
    elif lower_p + tail == 0:
        upper = 0.0
    else:
        upper = math.nextafter((lower_p + tail) ** (1 / p), math.inf)

    n = group.translate_cover_count()
    C_tilde = vm.C * vm.a ** (1.5 * len(g))
    coarse_ratio = n * vm.a ** (-p)
    mu_K = group.ball_size(1)
    coarse_bound = C_tilde**p * mu_K / (1 - coarse_ratio) if coarse_ratio < 1 else math.inf
    return NormEstimate(
        p=p,
        lower=lower,
        upper=upper,
        converged=converged,
        T=T,
        ratio=growth_ratio(group, vm.a, p),
        tail=tail,
        C_tilde=C_tilde,
        coarse_ratio=coarse_ratio,
        coarse_bound=coarse_bound,
        sphere_max=tuple(sphere_max),
    )


def lp_norm(
    g: Word,
    u: Observable,
    p: float,
    T: int,
    group: FreeGroup,
    method: str = "sparse",
) -> NormEstimate:
    """Certified interval for ``‖c(g)‖_p`` truncated at ``|γ| ≤ T``.

    ``method="dense"`` scans every sphere up to ``T`` and is kept as an
    independent check of the sparse enumeration. ``p`` below 1 is accepted
    (the ``ℓ_p`` quasi-norm) so that thresholds under 1 can be probed.
    Divergence of the tail series is reported through ``converged`` and an
    infinite ``upper``.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    if T < len(g):
        raise ValueError("truncation radius must be at least |g|")
    if not g:
        return _finish(g, p, T, group, u.vm, ())
    if method == "sparse":
        terms = _sparse_terms(g, u, T)
    elif method == "dense":
        terms = _dense_terms(g, u, T, group)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _finish(g, p, T, group, u.vm, terms)


def combine(estimates: Sequence[NormEstimate]) -> NormEstimate:
    """ℓ_p direct sum of per-observable estimates."""
    p = estimates[0].p

    def psum(xs):
        if any(x == math.inf for x in xs):
            return math.inf
        return math.fsum(x**p for x in xs) ** (1 / p)

    first = estimates[0]
    return NormEstimate(
        p=p,
        lower=math.nextafter(psum([e.lower for e in estimates]), 0.0) if any(e.lower for e in estimates) else 0.0,
        upper=psum([e.upper for e in estimates]),
        converged=all(e.converged for e in estimates),
        T=first.T,
        ratio=first.ratio,
        tail=math.fsum(e.tail for e in estimates),
        C_tilde=first.C_tilde,
        coarse_ratio=first.coarse_ratio,
        coarse_bound=len(estimates) * first.coarse_bound,
        sphere_max=tuple(max(col) for col in zip(*(e.sphere_max for e in estimates))),
    )


def family_norm(
    g: Word, fam: ObservableFamily, p: float, T: int, group: FreeGroup, method: str = "sparse"
) -> NormEstimate:
    """Norm of ``(c₁, …, c_s)(g)`` in the ℓ_p direct sum."""
    return combine([lp_norm(g, u, p, T, group, method) for u in fam])


def auto_truncation(glen: int, p: float, group: FreeGroup, a: float, rel_tail: float = 1e-4) -> int:
    """Smallest ``T ≥ |g| + 20`` whose tail bound is below ``rel_tail`` times
    a crude lower estimate (``(|g|/3)·(1 - 1/a)^p``) of ``‖c(g)‖_p^p``."""
    T = glen + 20
    if glen == 0 or not _converges(group, a, p):
        return T
    target = rel_tail * max(glen / 3.0, 1.0) * (1 - 1 / a) ** p
    while tail_bound(group, glen, a, p, T) > target:
        T += 5
    return T


def summability_threshold(group: FreeGroup, vm: VisualMetric, mode: str = "exact-growth", A: float = 1.0) -> float:
    """Critical exponent above which the sphere-wise tail series converges.

    ``"remark"`` gives ``A ln(n) / ln(a)`` with ``n`` the translate-cover
    count of ``K²``; ``"exact-growth"`` gives ``ln(2k-1) / ln(a)``, which is
    also the Hausdorff dimension of ``(∂F_k, d_a)``.
    """
    if mode == "remark":
        n = group.translate_cover_count()
        return A * math.log(n) / math.log(vm.a)
    if mode == "exact-growth":
        b = group.growth_base
        return math.log(b) / math.log(vm.a) if b > 1 else 0.0
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class ProperBound:
    bound: float
    count: int
    steps: int
    k0: int
    formula_bound: float
    opposite: tuple[bool, ...]
    separated: tuple[bool, ...]


def properness_lower(
    g: Word,
    fam: ObservableFamily,
    p: float,
    opposite_radius: int = 0,
) -> ProperBound:
    """Lower bound for ``‖(c₁, …, c_s)(g)‖_p`` from the prefixes
    ``γ_i = (g[:3i])⁻¹``.

    Each ``γ_i`` at which some observable separates ``ξ_{γ_i g}`` from
    ``ξ_{γ_i}`` by at least ``C̄`` contributes ``C̄^p``; the bound is
    ``count^{1/p} · C̄``. Also recorded: which pairs are diametrically
    opposite (branch point of the two rays within ``opposite_radius`` of the
    base point), the measured offset ``k₀`` and the bound in the form
    ``((|g|-2)/3 - 2k₀)^{1/p} C̄``.
    """
    m = len(g)
    if m < 3:
        raise ValueError("properness bound needs |g| ≥ 3")
    cbar = fam.cover_radius
    steps = m // 3
    opposite = []
    separated = []
    for i in range(1, steps + 1):
        gamma = inverse_word(g[: 3 * i])
        xi_a = ray_to(g[3 * i:])  # γ_i g
        xi_b = ray_to(gamma)
        opposite.append(common_prefix(xi_a, xi_b) <= opposite_radius)
        # tiny slack absorbs rounding in powers of a that equal C̄ exactly
        separated.append(any(abs(u(xi_a) - u(xi_b)) >= cbar * (1 - 1e-12) for u in fam))
    count = sum(separated)
    k0 = 0
    while k0 < steps and not all(separated[i - 1] for i in range(max(k0, 1), steps - k0 + 1)):
        k0 += 1
    base = (m - 2) / 3 - 2 * k0
    formula_bound = base ** (1 / p) * cbar if base > 0 else 0.0
    return ProperBound(
        bound=count ** (1 / p) * cbar,
        count=count,
        steps=steps,
        k0=k0,
        formula_bound=formula_bound,
        opposite=tuple(opposite),
        separated=tuple(separated),
    )


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and its ``R²``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


class IntervalTooWide(ValueError):
    """A norm interval is too wide to enter an exponent fit."""


@dataclass(frozen=True)
class CompressionFit:
    exponent: float
    fit_quality: float
    envelope_exponent: float
    envelope_quality: float
    lengths: tuple[int, ...]
    envelope: tuple[float, ...]
    samples: tuple[tuple[int, str, float, float], ...]


NormFn = Callable[[Word], NormEstimate]


def compression_fit(
    fam: ObservableFamily,
    p: float,
    lengths: Sequence[int],
    samples: int,
    seed: int,
    group: FreeGroup,
    T: int | None = None,
    norm_fn: NormFn | None = None,
) -> CompressionFit:
    """Fit the growth exponent of ``‖(c₁, …, c_s)(g)‖_p`` in ``|g|``.

    ``samples`` random reduced words per length are drawn from ``seed``.
    The fit uses interval midpoints; since compression is an infimum the
    per-length minima (the lower envelope) are fitted too. ``norm_fn``
    replaces the norm computation (used for degenerate fixtures).
    """
    from .group import format_word

    rng = np.random.default_rng(seed)
    if norm_fn is None:

        def norm_fn(g: Word) -> NormEstimate:
            t = T if T is not None else auto_truncation(len(g), p, group, fam.vm.a)
            return family_norm(g, fam, p, max(t, len(g)), group)

    xs, ys, rows = [], [], []
    envelope = []
    for L in lengths:
        mids = []
        for _ in range(samples):
            g = group.random_word(L, rng)
            est = norm_fn(g)
            if not est.converged or est.relative_width >= MAX_RELATIVE_WIDTH:
                raise IntervalTooWide(
                    f"norm interval for |g|={L} has relative width {est.relative_width:.3g}; increase T"
                )
            mids.append(est.midpoint)
            rows.append((L, format_word(g), est.lower, est.upper))
        xs.extend([L] * len(mids))
        ys.extend(mids)
        envelope.append(min(mids))
    slope, quality = loglog_slope(xs, ys)
    env_slope, env_quality = loglog_slope(lengths, envelope)
    return CompressionFit(
        exponent=slope,
        fit_quality=quality,
        envelope_exponent=env_slope,
        envelope_quality=env_quality,
        lengths=tuple(lengths),
        envelope=tuple(envelope),
        samples=tuple(rows),
    )
