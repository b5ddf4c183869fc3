"""Free-group word arithmetic, spheres, covering constants and δ-estimates.

Letters are small integers. For a free group of rank ``k`` the letters are
``0 .. 2k-1`` and letter ``x`` is inverse to ``x ^ 1``, so ``0``/``1`` are
``a``/``a⁻¹``, ``2``/``3`` are ``b``/``b⁻¹`` and so on. A word is a plain
tuple of letters; a *reduced* word contains no adjacent inverse pair.
"""

from __future__ import annotations

import itertools
import string
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

Word = tuple[int, ...]

IDENTITY: Word = ()

DEFAULT_CAP = 10**7


class ResourceCapError(RuntimeError):
    """Raised when an enumeration would exceed a configured size cap."""

    def __init__(self, cap_name: str, requested: int, cap: int):
        self.cap_name = cap_name
        self.requested = requested
        self.cap = cap
        super().__init__(f"{cap_name}: requested {requested} exceeds cap {cap}")


def inverse_letter(x: int) -> int:
    return x ^ 1


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[i + 1] != w[i] ^ 1 for i in range(len(w) - 1))


def reduce_word(letters: Sequence[int]) -> Word:
    out: list[int] = []
    for x in letters:
        if out and out[-1] == x ^ 1:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def reduce_concat(u: Word, v: Word) -> Word:
    """Reduced form of the product ``uv`` of two reduced words."""
    i = 0
    n = min(len(u), len(v))
    while i < n and u[len(u) - 1 - i] == v[i] ^ 1:
        i += 1
    return u[: len(u) - i] + v[i:]


def inverse_word(w: Word) -> Word:
    return tuple(x ^ 1 for x in reversed(w))


def common_prefix_length(u: Sequence[int], v: Sequence[int]) -> int:
    n = min(len(u), len(v))
    i = 0
    while i < n and u[i] == v[i]:
        i += 1
    return i


def word_distance(u: Word, v: Word) -> int:
    """Left-invariant word metric ``|u⁻¹v|``."""
    return len(reduce_concat(inverse_word(u), v))


def gromov_product(u: Word, v: Word) -> int:
    """``(u|v) = (|u| + |v| - d(u, v)) / 2`` based at the identity.

    In the Cayley tree this is always the common-prefix length, hence an
    integer.
    """
    twice = len(u) + len(v) - word_distance(u, v)
    return twice // 2


def shortlex_key(w: Word) -> tuple[int, Word]:
    return (len(w), w)


def parse_word(text: str) -> Word:
    """Parse ``"abA"``-style notation: lowercase letters are generators and
    uppercase letters their inverses. ``""``, ``"e"`` and ``"1"`` give the
    identity."""
    text = text.strip()
    if text in ("", "e", "1", "ε"):
        return IDENTITY
    letters = []
    for ch in text:
        if ch in string.ascii_lowercase:
            letters.append(2 * string.ascii_lowercase.index(ch))
        elif ch in string.ascii_uppercase:
            letters.append(2 * string.ascii_uppercase.index(ch) + 1)
        else:
            raise ValueError(f"invalid letter {ch!r} in word {text!r}")
    return reduce_word(letters)


def format_word(w: Sequence[int]) -> str:
    if not w:
        return "e"
    return "".join(
        string.ascii_uppercase[x >> 1] if x & 1 else string.ascii_lowercase[x >> 1]
        for x in w
    )


@dataclass(frozen=True)
class FreeGroup:
    """The free group of a given rank with its standard generating set.

    ``K`` is the ball of radius one (letters plus identity). Rank 1 models
    ℤ and rank 0 the trivial group; both are accepted for the covering
    constant but only rank ≥ 2 has a Cantor boundary.
    """

    rank: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.rank < 0:
            raise ValueError("rank must be nonnegative")

    @property
    def letters(self) -> range:
        return range(2 * self.rank)

    @property
    def growth_base(self) -> int:
        """Branching number of the Cayley tree, ``2k - 1``."""
        return max(2 * self.rank - 1, 0)

    def sphere_size(self, r: int) -> int:
        if r < 0:
            raise ValueError("radius must be nonnegative")
        if r == 0:
            return 1
        if self.rank == 0:
            return 0
        return 2 * self.rank * (2 * self.rank - 1) ** (r - 1)

    def ball_size(self, r: int) -> int:
        return sum(self.sphere_size(i) for i in range(r + 1))

    def _check_cap(self, count: int, what: str) -> None:
        if count > self.cap:
            raise ResourceCapError(what, count, self.cap)

    def sphere(self, r: int) -> Iterator[Word]:
        """All reduced words of length ``r``, lazily, in lexicographic order."""
        self._check_cap(self.sphere_size(r), f"sphere({r}) size")
        return self._sphere_iter(r)

    def _sphere_iter(self, r: int) -> Iterator[Word]:
        if r == 0:
            yield IDENTITY
            return
        letters = list(self.letters)
        stack: list[Word] = [(x,) for x in reversed(letters)]
        while stack:
            w = stack.pop()
            if len(w) == r:
                yield w
                continue
            last_inv = w[-1] ^ 1
            for x in reversed(letters):
                if x != last_inv:
                    stack.append(w + (x,))

    def ball(self, r: int) -> list[Word]:
        """Reduced words of length ≤ r in shortlex order."""
        self._check_cap(self.ball_size(r), f"ball({r}) size")
        out: list[Word] = []
        for i in range(r + 1):
            out.extend(self._sphere_iter(i))
        return out

    def random_word(self, length: int, rng: np.random.Generator) -> Word:
        if length == 0:
            return IDENTITY
        if self.rank == 0:
            raise ValueError("the trivial group has no nonempty words")
        m = 2 * self.rank
        w = [int(rng.integers(m))]
        while len(w) < length:
            # uniform over the 2k-1 letters that do not cancel
            x = int(rng.integers(m - 1))
            if x >= (w[-1] ^ 1):
                x += 1
            w.append(x)
        return tuple(w)

    def translate_cover(self, max_nodes: int = 1_000_000) -> tuple[Word, ...]:
        """Right translates ``Kγ`` (γ ∈ K²) covering ``K²``.

        A smallest cover is found by exhaustive branch-and-bound search; if
        that exceeds ``max_nodes`` search nodes the greedy cover (ties broken
        by the shortlex-least γ) is returned instead.
        """
        return _translate_cover(self.rank, max_nodes)

    def translate_cover_count(self) -> int:
        """``n`` such that ``K²`` is covered by ``n`` right translates of ``K``."""
        return len(self.translate_cover())


@lru_cache(maxsize=None)
def _translate_cover(rank: int, max_nodes: int) -> tuple[Word, ...]:
    group = FreeGroup(rank)
    K = group.ball(1)
    K2 = group.ball(2)
    index = {w: i for i, w in enumerate(K2)}
    full = (1 << len(K2)) - 1
    masks = []
    for g in K2:
        m = 0
        for k in K:
            kg = reduce_concat(k, g)
            if kg in index:
                m |= 1 << index[kg]
        masks.append(m)

    cover = _exact_cover(masks, full, max_nodes)
    if cover is None:
        cover = _greedy_cover(masks, full)
    return tuple(K2[i] for i in cover)


def _exact_cover(masks: list[int], full: int, max_nodes: int) -> tuple[int, ...] | None:
    """Minimum set cover by branch and bound, or ``None`` past ``max_nodes``.

    Branches on the candidates covering the lowest uncovered element; the
    greedy cover seeds the incumbent.
    """
    best = list(_greedy_cover(masks, full))
    widest = max(bin(m).count("1") for m in masks)
    nodes = 0

    def search(covered: int, chosen: list[int]) -> bool:
        nonlocal best, nodes
        nodes += 1
        if nodes > max_nodes:
            return False
        if covered == full:
            if len(chosen) < len(best):
                best = sorted(chosen)
            return True
        uncovered = full & ~covered
        if len(chosen) + -(-bin(uncovered).count("1") // widest) >= len(best):
            return True
        low = uncovered & -uncovered
        for i, m in enumerate(masks):
            if m & low:
                chosen.append(i)
                ok = search(covered | m, chosen)
                chosen.pop()
                if not ok:
                    return False
        return True

    if not search(0, []):
        return None
    return tuple(best)


def _greedy_cover(masks: list[int], full: int) -> tuple[int, ...]:
    covered = 0
    chosen: list[int] = []
    while covered != full:
        best = max(range(len(masks)), key=lambda i: (bin(masks[i] & ~covered).count("1"), -i))
        chosen.append(best)
        covered |= masks[best]
    return tuple(sorted(chosen))


def covers(group: FreeGroup, gammas: Sequence[Word]) -> bool:
    """Exhaustive check that ``K² ⊆ ∪ Kγ``."""
    K = group.ball(1)
    translates = {reduce_concat(k, g) for g in gammas for k in K}
    return all(w in translates for w in group.ball(2))


class FiniteGraph:
    """A connected undirected graph standing in for a geodesic space."""

    def __init__(self, adjacency: Sequence[Sequence[int]]):
        self.adjacency = [tuple(sorted(set(nbrs))) for nbrs in adjacency]
        n = len(self.adjacency)
        for v, nbrs in enumerate(self.adjacency):
            for u in nbrs:
                if not 0 <= u < n:
                    raise ValueError(f"vertex {u} out of range")
                if v not in self.adjacency[u]:
                    raise ValueError(f"adjacency not symmetric at ({v}, {u})")
        self._dist: np.ndarray | None = None
        if n and np.isinf(self.distances()[0]).any():
            raise ValueError("graph is not connected")

    @property
    def n(self) -> int:
        return len(self.adjacency)

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]]) -> "FiniteGraph":
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        return cls(adj)

    def distances(self) -> np.ndarray:
        """All-pairs shortest-path distances by breadth-first search."""
        if self._dist is None:
            n = self.n
            dist = np.full((n, n), np.inf)
            for s in range(n):
                dist[s, s] = 0
                queue = deque([s])
                while queue:
                    v = queue.popleft()
                    for u in self.adjacency[v]:
                        if dist[s, u] == np.inf:
                            dist[s, u] = dist[s, v] + 1
                            queue.append(u)
            self._dist = dist
        return self._dist


def cycle_graph(n: int) -> FiniteGraph:
    return FiniteGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> FiniteGraph:
    return FiniteGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def random_tree(n: int, seed: int) -> FiniteGraph:
    rng = np.random.default_rng(seed)
    return FiniteGraph.from_edges(n, [(i, int(rng.integers(i))) for i in range(1, n)])


def cayley_ball_graph(group: FreeGroup, radius: int) -> FiniteGraph:
    """The ball of the given radius in the Cayley tree, as a finite graph."""
    verts = group.ball(radius)
    index = {w: i for i, w in enumerate(verts)}
    edges = [(index[w[:-1]], index[w]) for w in verts if w]
    return FiniteGraph.from_edges(len(verts), edges)


def four_point_defect(D: np.ndarray, x, y, z, w) -> np.ndarray:
    """``(S_max - S_mid) / 2`` for the three pair sums of each quadruple."""
    s = np.stack([D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z]])
    s.sort(axis=0)
    return (s[2] - s[1]) / 2


def delta_estimate(graph: FiniteGraph, sample: int = 100_000, seed: int = 0) -> float:
    """Four-point hyperbolicity constant of a finite graph.

    Exhaustive over all quadruples when there are at most ``sample`` of
    them, otherwise the maximum over ``sample`` uniformly drawn quadruples
    (a lower bound on the true constant).
    """
    D = graph.distances()
    n = graph.n
    if n ** 4 <= sample:
        idx = np.indices((n, n, n, n)).reshape(4, -1)
        return float(four_point_defect(D, *idx).max())
    rng = np.random.default_rng(seed)
    best = 0.0
    remaining = sample
    while remaining > 0:
        m = min(remaining, 1 << 18)
        idx = rng.integers(n, size=(4, m))
        best = max(best, float(four_point_defect(D, *idx).max()))
        remaining -= m
    return best
