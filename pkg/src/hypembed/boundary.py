"""Visual boundary of the free-group Cayley tree.

Boundary points are eventually periodic reduced infinite words
``stem · period · period · …``. The visual metric based at the identity is
``d_a(ξ, η) = a^{-(ξ|η)}`` with ``(ξ|η)`` the common-prefix length, which is
an ultrametric; balls are therefore cylinders and every inclusion question
below reduces to prefix arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .group import IDENTITY, Word, common_prefix_length, format_word, is_reduced

_LOG_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """The infinite reduced word ``stem · period^∞``.

    Equality and hashing use the canonical form (shortest stem, primitive
    period), so ``BoundaryPoint((0, 0), (0,)) == BoundaryPoint((), (0,))``
    while the stored fields keep whatever was passed in.
    """

    stem: Word
    period: Word

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be nonempty")
        if not is_reduced(self.stem) or not is_reduced(self.period):
            raise ValueError("stem and period must be reduced")
        if self.period[-1] == self.period[0] ^ 1:
            raise ValueError("period cancels against itself")
        if self.stem and self.stem[-1] == self.period[0] ^ 1:
            raise ValueError("stem cancels against period")

    @cached_property
    def canonical(self) -> tuple[Word, Word]:
        period = self.period
        n = len(period)
        for d in range(1, n + 1):
            if n % d == 0 and period[:d] * (n // d) == period:
                period = period[:d]
                break
        stem = self.stem
        while stem and stem[-1] == period[-1]:
            stem = stem[:-1]
            period = period[-1:] + period[:-1]
        return stem, period

    def __eq__(self, other):
        if not isinstance(other, BoundaryPoint):
            return NotImplemented
        return self.canonical == other.canonical

    def __hash__(self):
        return hash(self.canonical)

    def __repr__(self):
        return f"BoundaryPoint({format_word(self.stem)}·({format_word(self.period)})^∞)"

    def letter(self, i: int) -> int:
        s = len(self.stem)
        if i < s:
            return self.stem[i]
        return self.period[(i - s) % len(self.period)]

    def prefix(self, n: int) -> Word:
        s = len(self.stem)
        if n <= s:
            return self.stem[:n]
        reps = -(-(n - s) // len(self.period))
        return (self.stem + self.period * reps)[:n]

    def agreement_bound(self, other: "BoundaryPoint") -> int:
        """Length past which agreement implies equality."""
        return max(len(self.stem), len(other.stem)) + math.lcm(len(self.period), len(other.period))


def common_prefix(xi: BoundaryPoint, eta: BoundaryPoint) -> float:
    """Gromov product ``(ξ|η)`` at the identity; ``inf`` when equal."""
    n = xi.agreement_bound(eta)
    lcp = common_prefix_length(xi.prefix(n), eta.prefix(n))
    return math.inf if lcp == n else lcp


def ray_letter(g: Word) -> int:
    """Least letter that does not cancel the last letter of ``g``.

    Letter 0 only cancels letter 1, so this is 0 unless ``g`` ends in 1.
    """
    return 1 if g and g[-1] == 1 else 0


def ray_to(g: Word) -> BoundaryPoint:
    """Deterministic boundary point ``ξ_g`` on a geodesic ray through ``g``."""
    return BoundaryPoint(g, (ray_letter(g),))


def ray_prefix_agreement(xi: BoundaryPoint, g: Word, start: int = 0) -> float:
    """Common-prefix length of ``xi`` and ``ray_to(g)``.

    The caller may promise that the first ``start`` letters already agree.
    """
    n = len(g)
    i = start
    while i < n and xi.letter(i) == g[i]:
        i += 1
    if i < n:
        return i
    x = ray_letter(g)
    # past the stem of xi, agreement with x^∞ for a full period is forever
    limit = max(len(xi.stem), n) + len(xi.period)
    while i < limit and xi.letter(i) == x:
        i += 1
    if i == limit:
        return math.inf
    return i


@dataclass(frozen=True)
class VisualMetric:
    """``d_a(ξ, η) = a^{-(ξ|η)}`` based at the identity vertex.

    ``C`` is the constant of the two-sided visual-metric bound; on trees the
    bound holds with ``C = 1``.
    """

    a: float
    C: float = 1.0

    def __post_init__(self):
        if not self.a > 1:
            raise ValueError("visual parameter a must exceed 1")
        if not self.C >= 1:
            raise ValueError("C must be at least 1")

    @property
    def diameter(self) -> float:
        return 1.0

    def from_depth(self, depth: float) -> float:
        return 0.0 if depth == math.inf else self.a ** (-depth)

    def distance(self, xi: BoundaryPoint, eta: BoundaryPoint) -> float:
        return self.from_depth(common_prefix(xi, eta))

    def log_a(self, x: float) -> float:
        return math.log(x) / math.log(self.a)

    def open_ball_depth(self, r: float) -> int:
        """Smallest ``L ≥ 0`` with ``a^{-L} < r``: the open ball of radius
        ``r`` about ξ is the cylinder of ξ's length-``L`` prefix."""
        return _depth_strict(-self.log_a(r))

    def closed_ball_depth(self, r: float) -> int:
        """Smallest ``L ≥ 0`` with ``a^{-L} ≤ r``."""
        x = -self.log_a(r)
        n = round(x)
        if abs(x - n) < _LOG_TOL:
            return max(n, 0)
        return max(math.ceil(x), 0)


def _depth_strict(x: float) -> int:
    """Smallest integer ``L ≥ 0`` with ``L > x``, snapping near-integers."""
    n = round(x)
    if abs(x - n) < _LOG_TOL:
        return max(n + 1, 0)
    return max(math.floor(x) + 1, 0)


@dataclass(frozen=True)
class Cylinder:
    """Boundary points whose infinite word starts with ``prefix``."""

    prefix: Word

    def contains(self, xi: BoundaryPoint) -> bool:
        return xi.prefix(len(self.prefix)) == self.prefix

    def issubset(self, other: "Cylinder") -> bool:
        return self.prefix[: len(other.prefix)] == other.prefix

    def isdisjoint(self, other: "Cylinder") -> bool:
        return not (self.issubset(other) or other.issubset(self))

    def radius(self, vm: VisualMetric) -> float:
        return vm.from_depth(len(self.prefix))

    def translate(self, h: Word) -> "Cylinder":
        """Left translate by ``h``; requires ``h·prefix`` to be reduced and
        the prefix to be nonempty."""
        if not self.prefix:
            raise ValueError("the full boundary is not a cylinder after translation")
        if h and h[-1] == self.prefix[0] ^ 1:
            raise ValueError("translation cancels")
        return Cylinder(h + self.prefix)

    def __repr__(self):
        return f"Cyl({format_word(self.prefix)})"


WHOLE_BOUNDARY = Cylinder(IDENTITY)


def ball(center: BoundaryPoint, r: float, vm: VisualMetric) -> Cylinder:
    """The open ball ``B(center, r)``."""
    return Cylinder(center.prefix(vm.open_ball_depth(r)))


@dataclass(frozen=True)
class ShadowConfig:
    """Shadow radius ``R`` and hyperbolicity constant ``δ`` (0 on trees)."""

    R: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.R > max(1.0, 20 * self.delta):
            raise ValueError("shadow radius must exceed max(1, 20δ)")


def shadow_depth(g: Word, R: float) -> int:
    return max(len(g) - math.floor(R + _LOG_TOL), 0)


def shadow(g: Word, R: float | ShadowConfig) -> frozenset[Cylinder]:
    """Exact cylinder decomposition of ``Sh(g·x₀, R)`` in the tree.

    The ray of ξ passes within ``R`` of ``g`` iff ξ agrees with ``g`` on
    the first ``|g| - ⌊R⌋`` letters; the decomposition is a single cylinder.
    """
    if isinstance(R, ShadowConfig):
        R = R.R
    return frozenset([Cylinder(g[: shadow_depth(g, R)])])


def _single(cyls: frozenset[Cylinder]) -> Cylinder:
    (c,) = cyls
    return c


@dataclass(frozen=True)
class SandwichResult:
    xi: BoundaryPoint
    r: float
    D: float
    inner: Cylinder
    shadow: Cylinder
    outer: Cylinder
    inner_ok: bool
    outer_ok: bool

    @property
    def ok(self) -> bool:
        return self.inner_ok and self.outer_ok


def shadow_ball_sandwich(g: Word, cfg: ShadowConfig, vm: VisualMetric) -> SandwichResult:
    """Check ``B(ξ, r) ⊂ Sh(g·x₀, 2R) ⊂ B(ξ, D r)`` for ``ξ = ξ_g``.

    ``r = 1 / (C a^{|g| + R + 20δ})`` and ``D = C² a^{5R + 20δ}``. A failed
    inclusion is reported in the flags, not raised.
    """
    xi = ray_to(g)
    R, delta, a, C = cfg.R, cfg.delta, vm.a, vm.C
    if not _single(shadow(g, R)).contains(xi):
        raise AssertionError("ray_to(g) is not in the shadow of g")
    log_r = -(vm.log_a(C) + len(g) + R + 20 * delta)
    log_D = 2 * vm.log_a(C) + 5 * R + 20 * delta
    r = a**log_r
    D = a**log_D
    inner = Cylinder(xi.prefix(_depth_strict(-log_r)))
    outer = Cylinder(xi.prefix(_depth_strict(-(log_r + log_D))))
    sh = _single(shadow(g, 2 * R))
    return SandwichResult(xi, r, D, inner, sh, outer, inner.issubset(sh), sh.issubset(outer))


@dataclass(frozen=True)
class ShadowInBall:
    x: Word
    threshold: float
    ok: bool


def shadow_in_ball(
    c: BoundaryPoint,
    center: BoundaryPoint,
    r: float,
    cfg: ShadowConfig,
    vm: VisualMetric,
) -> ShadowInBall:
    """Shortest prefix ``x`` of ``c`` with ``|x| > log_a(C a^{3R} / r)``,
    together with an exact check that ``Sh(x, 2R)`` lies in ``B(center, r)``."""
    target = ball(center, r, vm)
    if not target.contains(c):
        raise ValueError("c must lie in the open ball")
    threshold = vm.log_a(vm.C) + 3 * cfg.R - vm.log_a(r)
    x = c.prefix(_depth_strict(threshold))
    ok = _single(shadow(x, 2 * cfg.R)).issubset(target)
    return ShadowInBall(x, threshold, ok)
