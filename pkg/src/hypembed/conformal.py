"""Regularity of the boundary measure, the separated translate cover, and
the experiment comparing ``p`` with the Ahlfors-regular dimension ``Q``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .boundary import VisualMetric, ray_to, shadow_depth
from .cocycle import NormEstimate, Observable, family_norm, observable_cover, sparse_support
from .group import FreeGroup, ResourceCapError, Word, common_prefix_length, shortlex_key, word_distance


@dataclass(frozen=True)
class CylinderMeasure:
    """Probability measure on ``∂F_k`` given by cylinder masses.

    By default the mass splits evenly, giving a depth-``m`` cylinder mass
    ``(1/2k)(2k-1)^{-(m-1)}``. ``favoured_share(m)``, when given, is the
    fraction a cylinder of depth ``m ≥ 1`` passes to its lexicographically
    first child, the rest being split evenly; this breaks homogeneity.
    """

    rank: int
    favoured_share: Callable[[int], float] | None = None

    @property
    def homogeneous(self) -> bool:
        return self.favoured_share is None

    def mass(self, prefix: Word) -> float:
        k2 = 2 * self.rank
        if not prefix:
            return 1.0
        m = 1.0 / k2
        if self.favoured_share is None:
            return m * (k2 - 1) ** -(len(prefix) - 1)
        for depth in range(1, len(prefix)):
            first = 0 if prefix[depth - 1] != 1 else 1
            share = self.favoured_share(depth)
            if prefix[depth] == first:
                m *= share
            else:
                m *= (1 - share) / (k2 - 2)
        return m

    def children(self, prefix: Word) -> list[Word]:
        letters = range(2 * self.rank)
        if not prefix:
            return [(x,) for x in letters]
        return [prefix + (x,) for x in letters if x != prefix[-1] ^ 1]


def factorial_skew(depth: int) -> float:
    """Share ``1 - 1/(depth+1)`` for the first child, so that the mass of the
    branch avoiding it decays like ``1/depth!``."""
    return 1.0 - 1.0 / (depth + 1)


def hausdorff_dimension(k: int, a: float) -> float:
    """``ln(2k-1) / ln a``."""
    if k < 1 or a <= 1:
        raise ValueError("need k ≥ 1 and a > 1")
    return math.log(2 * k - 1) / math.log(a)


@dataclass(frozen=True)
class BoxCounting:
    depths: tuple[int, ...]
    counts: tuple[int, ...]
    estimates: tuple[float, ...]
    slope: float


def box_counting(k: int, a: float, depths: Sequence[int], group: FreeGroup | None = None) -> BoxCounting:
    """Covering numbers ``N(a^{-m})``: count the depth-``m`` cylinders,
    which are exactly the closed balls of radius ``a^{-m}``."""
    g = group or FreeGroup(k)
    counts = []
    for m in depths:
        counts.append(sum(1 for _ in g.sphere(m)) if g.sphere_size(m) <= 10**6 else g.sphere_size(m))
    est = tuple(math.log(n) / (m * math.log(a)) for m, n in zip(depths, counts))
    slope = float(np.polyfit([m * math.log(a) for m in depths], [math.log(n) for n in counts], 1)[0])
    return BoxCounting(tuple(depths), tuple(counts), est, slope)


@dataclass(frozen=True)
class RegularityReport:
    Q: float
    C_AR: float
    depths: tuple[int, ...]
    per_depth: tuple[tuple[int, float, float], ...]  # (m, min ratio, max ratio)
    witness: Word
    stable: bool
    balls: int


def _cylinders(group: FreeGroup, m: int, root: Word = ()) -> list[Word]:
    if m < len(root):
        raise ValueError("depth below the root cylinder")
    out = [root]
    for _ in range(m - len(root)):
        nxt = []
        for w in out:
            for x in group.letters:
                if not w or x != w[-1] ^ 1:
                    nxt.append(w + (x,))
        out = nxt
        if len(out) > group.cap:
            raise ResourceCapError("ball enumeration", len(out), group.cap)
    return out


def ahlfors_check(
    k: int,
    a: float,
    depths: Sequence[int],
    measure: CylinderMeasure | None = None,
    root: Word = (),
    cap: int = 10**6,
) -> RegularityReport:
    """Ratios ``ν(B(ξ, a^{-m})) / a^{-mQ}`` over every ball at each depth.

    Closed balls of radius ``a^{-m}`` are the depth-``m`` cylinders. For the
    homogeneous measure one cylinder per depth represents all of them;
    otherwise every cylinder below ``root`` is enumerated. ``C_AR`` is the
    smallest ``C`` with ``C⁻¹ ≤ ratio ≤ C``; the result is stable when the
    second half of the depth range does not raise it.
    """
    nu = measure or CylinderMeasure(k)
    Q = hausdorff_dimension(k, a)
    group = FreeGroup(k, cap)
    per_depth = []
    worst, witness = 1.0, root
    for m in depths:
        if nu.homogeneous:
            reps = [tuple([0] * max(m, len(root)))] if not root else [root + tuple([root[-1]] * (m - len(root)))]
        else:
            reps = _cylinders(group, m, root)
        ratios = [(nu.mass(c) / a ** (-m * Q), c) for c in reps]
        lo = min(r for r, _ in ratios)
        hi = max(r for r, _ in ratios)
        per_depth.append((m, lo, hi))
        for r, c in ratios:
            dev = max(r, 1 / r)
            if dev > worst * (1 + 1e-12):
                worst, witness = dev, c
    half = len(per_depth) // 2
    first = max(max(h, 1 / l) for _, l, h in per_depth[: max(half, 1)])
    stable = worst <= first * (1 + 1e-9)
    return RegularityReport(Q, worst, tuple(depths), tuple(per_depth), witness, stable, sum(
        1 if nu.homogeneous else group.sphere_size(m) for m in depths))


def doubling_check(k: int, a: float, depths: Sequence[int], cap: int = 10**6) -> int:
    """Largest number of radius-``r/2`` balls needed to cover a radius-``r``
    ball, over ``r = a^{-m}``; counted by enumerating sub-cylinders."""
    vm = VisualMetric(a)
    group = FreeGroup(k, cap)
    worst = 0
    for m in depths:
        r = a ** (-m)
        m2 = vm.closed_ball_depth(r / 2)
        root = tuple([0] * m)
        worst = max(worst, len(_cylinders(group, m2, root)))
    return worst


@dataclass(frozen=True)
class SeparatedCover:
    picks: tuple[Word, ...]
    v: int
    region: int
    R: float
    slack: tuple[float, ...]
    separated: bool
    covers: bool
    shells_disjoint: bool
    shell_mass: tuple[tuple[int, float], ...]

    @property
    def certified(self) -> bool:
        return self.separated and self.covers and self.shells_disjoint


def shadow_measure(g: Word, R: float, nu: CylinderMeasure) -> float:
    """``ν(Sh(g, 2R))``."""
    return nu.mass(g[: shadow_depth(g, 2 * R)])


def default_v(R: float) -> int:
    """Smallest even ``v`` for which picks more than ``v`` apart in the same
    sphere have disjoint ``2R``-shadows."""
    return 2 * math.floor(2 * R + 1e-9)


def greedy_separated_cover(
    group: FreeGroup,
    region: int,
    R: float,
    v: int | None = None,
    measure: CylinderMeasure | None = None,
) -> SeparatedCover:
    """Greedy cover of ``ball(region)`` by translates ``γ_i · ball(v)``.

    Each step takes a remaining element maximizing ``ν(Sh(γ, 2R))`` (ties to
    the shortlex-least word, so the slack ``2^{-i}`` is never used) and
    removes ``γ · ball(v)``. Separation ``d_V(γ_i, γ_j) ≥ 2``, i.e.
    ``d(γ_i, γ_j) > v``, coverage, and disjointness of shadows of picks in
    the same sphere are checked exhaustively.
    """
    if R <= 1:
        raise ValueError("R must exceed 1")
    v = default_v(R) if v is None else v
    if v < 1:
        raise ValueError("V must have radius at least 1")
    nu = measure or CylinderMeasure(group.rank)
    remaining = set(group.ball(region)) if region >= 0 else set()
    order = sorted(remaining, key=lambda g: (-shadow_measure(g, R, nu), shortlex_key(g)))
    picks: list[Word] = []
    for g in order:
        if g not in remaining:
            continue
        picks.append(g)
        remaining -= {h for h in remaining if word_distance(g, h) <= v}
    slack = tuple(2.0 ** -(i + 1) for i in range(len(picks)))

    separated = all(
        word_distance(picks[i], picks[j]) > v for i in range(len(picks)) for j in range(i + 1, len(picks))
    )
    covers = all(any(word_distance(g, h) <= v for g in picks) for h in group.ball(region)) if region >= 0 else True
    by_shell: dict[int, list[Word]] = {}
    for g in picks:
        by_shell.setdefault(len(g), []).append(g)
    disjoint = True
    masses = []
    for n, ws in sorted(by_shell.items()):
        prefixes = [g[: shadow_depth(g, 2 * R)] for g in ws]
        for i in range(len(prefixes)):
            for j in range(i + 1, len(prefixes)):
                pi, pj = prefixes[i], prefixes[j]
                if common_prefix_length(pi, pj) >= min(len(pi), len(pj)):
                    disjoint = False
        masses.append((n, math.fsum(nu.mass(pf) for pf in prefixes)))
    return SeparatedCover(tuple(picks), v, region, R, slack, separated, covers, disjoint, tuple(masses))


@dataclass(frozen=True)
class ChainCheck:
    lhs: float
    rhs: float
    C2: float
    mu_V: int
    shadow_sum: float
    shell_max: float
    holds: bool


def chain_inequality(
    letter: int,
    p: float,
    a: float,
    cover: SeparatedCover,
    group: FreeGroup,
    anchor_word: Word = (),
) -> ChainCheck:
    """``Σ_{|γ|≤N} |c(ℓ)(γ)|^p ≤ C₂ μ(V) Σ_i ν(Sh(γ_i, 2R))^{p/Q}`` for a
    single letter ``ℓ`` over the cover's region ``ball(N)``.

    Uses ``|c(ℓ)(γ)| ≤ min(1, a^{1-|γ|})`` and
    ``C₂ = (a^{v+1-⌊2R⌋} (2k/(2k-1))^{1/Q})^p``.
    """
    k = group.rank
    Q = hausdorff_dimension(k, a)
    vm = VisualMetric(a)
    u = Observable(ray_to(anchor_word), vm)
    g = (letter,)
    lhs = math.fsum(
        abs(u.at_ray(gg, j) - u.at_ray(gamma, j)) ** p for gamma, gg, j in sparse_support(g, u.anchor, cover.region)
    )
    s2R = math.floor(2 * cover.R + 1e-9)
    C2 = (a ** (cover.v + 1 - s2R) * (2 * k / (2 * k - 1)) ** (1 / Q)) ** p
    mu_V = group.ball_size(cover.v)
    nu = CylinderMeasure(k)
    shadow_sum = math.fsum(shadow_measure(g, cover.R, nu) ** (p / Q) for g in cover.picks)
    rhs = C2 * mu_V * shadow_sum
    shell_max = max((m for _, m in cover.shell_mass), default=0.0)
    return ChainCheck(lhs, rhs, C2, mu_V, shadow_sum, shell_max, lhs <= rhs and shell_max <= 1 + 1e-12)


@dataclass(frozen=True)
class ThresholdRow:
    p: float
    converged: bool
    lower: float
    upper: float
    ratio: float


@dataclass(frozen=True)
class ThresholdResult:
    k: int
    a: float
    Q: float
    rows: tuple[ThresholdRow, ...]
    frontier: float
    empirical_frontier: float
    decay_base: float

    @property
    def distance_to_Q(self) -> float:
        return abs(self.frontier - self.Q)


def conformal_threshold_experiment(
    k: int,
    a: float,
    p_grid: Sequence[float],
    T: int,
    cover_radius: float | None = None,
) -> ThresholdResult:
    """Norms of ``c(ℓ)`` for single letters ``ℓ`` across ``p_grid``.

    Each row holds the largest family norm over letters. The frontier is
    the midpoint between the last diverged and the first converged ``p``;
    the empirical frontier replaces ``a`` by the decay base fitted to the
    per-sphere maxima of ``|c(ℓ)|``.
    """
    group = FreeGroup(k)
    vm = VisualMetric(a)
    fam = observable_cover(cover_radius if cover_radius is not None else 1 / a, vm, group)
    rows = []
    maxima = np.zeros(T + 1)
    for p in sorted(p_grid):
        ests: list[NormEstimate] = [family_norm((x,), fam, p, T, group) for x in group.letters]
        worst = max(ests, key=lambda e: (e.upper, e.lower))
        for e in ests:
            maxima = np.maximum(maxima, e.sphere_max)
        rows.append(ThresholdRow(p, all(e.converged for e in ests), worst.lower, worst.upper, worst.ratio))
    diverged = [r.p for r in rows if not r.converged]
    converged = [r.p for r in rows if r.converged]
    last_div = max(diverged) if diverged else None
    first_conv = min((p for p in converged if last_div is None or p > last_div), default=None)
    if last_div is not None and first_conv is not None:
        frontier = 0.5 * (last_div + first_conv)
    else:
        frontier = math.nan
    rs = [r for r in range(2, T + 1) if maxima[r] > 0]
    if len(rs) >= 2 and k >= 2:
        slope = np.polyfit(rs, np.log(maxima[rs]), 1)[0]
        base = math.exp(-slope)
        emp = math.log(2 * k - 1) / math.log(base)
    else:
        base, emp = math.nan, math.nan
    return ThresholdResult(k, a, hausdorff_dimension(k, a), tuple(rows), frontier, emp, base)
