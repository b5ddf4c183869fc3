import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypembed.boundary import BoundaryPoint, VisualMetric, common_prefix, ray_to
from hypembed.cocycle import (
    IntervalTooWide,
    NormEstimate,
    Observable,
    auto_truncation,
    cocycle_eval,
    compression_fit,
    family_norm,
    lp_norm,
    observable_cover,
    properness_lower,
    sparse_support,
    sphere_bound,
    summability_threshold,
    tail_bound,
)
from hypembed.group import FreeGroup, inverse_word, parse_word, reduce_concat

from conftest import words

w = parse_word
A_INF = BoundaryPoint((), (0,))


@pytest.fixture(scope="module")
def fam4():
    return observable_cover(0.25, VisualMetric(4), FreeGroup(2))


@pytest.mark.parametrize("a, cbar, s, depth", [(2, 0.5, 4, 1), (2, 1.0, 1, 0), (2, 0.25, 12, 2), (3, 0.2, 12, 2)])
def test_observable_cover_sizes(F2, a, cbar, s, depth):
    fam = observable_cover(cbar, VisualMetric(a), F2)
    assert len(fam) == s and fam.depth == depth


def test_observable_cover_covers_and_separates(F2):
    vm = VisualMetric(2)
    fam = observable_cover(0.25, vm, F2)
    rng = np.random.default_rng(0)
    pts = [ray_to(F2.random_word(int(rng.integers(0, 8)), rng)) for _ in range(200)]
    for xi in pts:
        assert min(u(xi) for u in fam) <= fam.cover_radius
    for xi, eta in zip(pts, pts[1:]):
        if vm.distance(xi, eta) >= 3 * fam.cover_radius:
            assert max(abs(u(xi) - u(eta)) for u in fam) >= fam.cover_radius


def test_observable_cover_rejects_bad_radius(F2):
    with pytest.raises(ValueError):
        observable_cover(0.0, VisualMetric(2), F2)
    with pytest.raises(ValueError):
        observable_cover(1.5, VisualMetric(2), F2)


def test_cocycle_eval_examples():
    u = Observable(A_INF, VisualMetric(2))
    assert cocycle_eval((), u, w("abA")) == 0
    assert cocycle_eval(w("b"), u, ()) == 1.0
    assert cocycle_eval(w("a"), u, w("A")) == -1.0


@given(words(2, 8), words(2, 8), words(2, 8))
@settings(max_examples=300)
def test_cocycle_identity(g, h, gamma):
    u = Observable(ray_to(w("ab")), VisualMetric(3))
    lhs = cocycle_eval(reduce_concat(g, h), u, gamma)
    rhs = cocycle_eval(g, u, gamma) + cocycle_eval(h, u, reduce_concat(gamma, g))
    assert abs(lhs - rhs) <= 1e-12


@given(words(2, 8), words(2, 14))
def test_value_bounded_by_shared_prefix(g, gamma):
    vm = VisualMetric(2.5)
    u = Observable(ray_to(w("bA")), vm)
    shared = common_prefix(ray_to(gamma), ray_to(reduce_concat(gamma, g)))
    v = abs(cocycle_eval(g, u, gamma))
    assert v <= 1.0
    if shared != math.inf:
        assert v <= 2 * vm.a ** (-shared) + 1e-15
    assert v <= vm.a ** (len(g) - len(gamma)) + 1e-15
    assert v <= sphere_bound(len(gamma), len(g), vm.a)


@given(words(2, 5), words(2, 4))
@settings(max_examples=100, deadline=None)
def test_sparse_support_contains_all_nonzeros(g, anchor_word):
    u = Observable(ray_to(anchor_word), VisualMetric(3))
    T = len(g) + 4
    support = {gamma for gamma, _, _ in sparse_support(g, u.anchor, T)}
    for gamma in FreeGroup(2).ball(T):
        if cocycle_eval(g, u, gamma) != 0:
            assert gamma in support
    assert len(support) == sum(1 for _ in sparse_support(g, u.anchor, T))


@pytest.mark.parametrize("g", ["a", "B", "ab", "abA", "bbab", "aBBa"])
@pytest.mark.parametrize("anchor", ["e", "b", "Ab"])
@pytest.mark.parametrize("p", [0.7, 1.0, 2.0, 3.5])
def test_sparse_matches_dense(F2, g, anchor, p):
    u = Observable(ray_to(w(anchor)), VisualMetric(3))
    T = len(w(g)) + 5
    s = lp_norm(w(g), u, p, T, F2)
    d = lp_norm(w(g), u, p, T, F2, method="dense")
    assert s.lower == pytest.approx(d.lower, rel=1e-13, abs=1e-300)
    assert s.upper == d.upper or s.upper == pytest.approx(d.upper, rel=1e-13)
    assert s.sphere_max == d.sphere_max


def test_lp_norm_identity(F2):
    e = lp_norm((), Observable(A_INF, VisualMetric(3)), 2.0, 10, F2)
    assert e.lower == e.upper == 0.0


def test_lp_norm_ratio_examples(F2):
    u3 = Observable(A_INF, VisualMetric(3))
    e = lp_norm(w("ab"), u3, 2.0, 20, F2)
    assert e.converged and math.isfinite(e.upper)
    assert e.ratio == pytest.approx(1 / 3)
    u2 = Observable(A_INF, VisualMetric(2))
    e = lp_norm(w("ab"), u2, 1.0, 20, F2)
    assert not e.converged and e.upper == math.inf
    assert e.ratio == pytest.approx(1.5)


def test_lp_norm_at_critical_exponent(F2):
    e = lp_norm(w("a"), Observable(A_INF, VisualMetric(3)), 1.0, 20, F2)
    assert not e.converged


def test_lp_norm_validation(F2):
    u = Observable(A_INF, VisualMetric(3))
    with pytest.raises(ValueError):
        lp_norm(w("ab"), u, 0.0, 10, F2)
    with pytest.raises(ValueError):
        lp_norm(w("abab"), u, 2.0, 3, F2)
    with pytest.raises(ValueError):
        lp_norm(w("ab"), u, 2.0, 5, F2, method="magic")


def test_coarse_constants_recorded(F2):
    e = lp_norm(w("ab"), Observable(A_INF, VisualMetric(3)), 2.0, 12, F2)
    assert e.C_tilde == pytest.approx(3.0**3)
    assert e.coarse_ratio == pytest.approx(4 / 9)
    assert e.coarse_bound == pytest.approx(27.0**2 * 5 / (1 - 4 / 9))


@given(words(2, 6).filter(bool), st.sampled_from([1.5, 2.0, 3.0]), st.sampled_from(["e", "b", "aB"]))
@settings(max_examples=40, deadline=None)
def test_intervals_nest_in_T(g, p, anchor):
    u = Observable(ray_to(w(anchor)), VisualMetric(4))
    G = FreeGroup(2)
    prev = None
    for T in range(len(g), len(g) + 12, 2):
        e = lp_norm(g, u, p, T, G)
        assert e.lower <= e.upper
        if prev is not None:
            assert e.lower >= prev.lower
            assert e.upper <= prev.upper
        prev = e


@given(words(2, 6).filter(bool), st.sampled_from([1.0, 2.0, 3.0]))
@settings(max_examples=40, deadline=None)
def test_tail_bound_dominates_actual_tail(g, p):
    G = FreeGroup(2)
    u = Observable(ray_to(w("b")), VisualMetric(4))
    T1 = len(g) + 1
    e1 = lp_norm(g, u, p, T1, G)
    e2 = lp_norm(g, u, p, T1 + 15, G)
    assert e2.lower**p - e1.lower**p <= e1.tail * (1 + 1e-12) + 1e-15


def test_tail_bound_shape(F2):
    assert tail_bound(F2, 0, 3.0, 2.0, 5) == 0.0
    assert tail_bound(F2, 2, 3.0, 1.0, 5) == math.inf
    t = [tail_bound(F2, 3, 4.0, 2.0, T) for T in range(5, 40, 5)]
    assert all(b < a for a, b in zip(t, t[1:]))


@pytest.mark.parametrize("a, mode, expected", [(3, "exact-growth", 1.0), (9, "exact-growth", 0.5), (2, "remark", 2.0)])
def test_summability_threshold(F2, a, mode, expected):
    assert summability_threshold(F2, VisualMetric(a), mode) == pytest.approx(expected)


def test_summability_threshold_degenerate():
    assert summability_threshold(FreeGroup(1), VisualMetric(3)) == 0.0


def test_remark_threshold_is_only_sufficient(F2):
    """Between the two thresholds the certificate already converges."""
    vm = VisualMetric(3)
    lo = summability_threshold(F2, vm, "exact-growth")
    hi = summability_threshold(F2, vm, "remark")
    assert lo < hi
    p = 0.5 * (lo + hi)
    e = lp_norm(w("ab"), Observable(A_INF, vm), p, 30, F2)
    assert e.converged and e.coarse_ratio > 1


@pytest.mark.parametrize("m", [3, 6, 9, 12, 21, 30])
def test_properness_on_powers(F2, fam4, m):
    g = (0,) * m
    pb = properness_lower(g, fam4, 2.0)
    assert pb.count == pb.steps == m // 3
    assert all(pb.opposite)
    assert pb.k0 == 0
    if m >= 9:
        # the offset-one form is weaker than what is measured
        assert pb.bound >= ((m - 2) / 3 - 2) ** 0.5 * fam4.cover_radius
    assert pb.bound <= family_norm(g, fam4, 2.0, m + 20, F2).lower


def test_properness_short_word(F2, fam4):
    pb = properness_lower(w("abA"), fam4, 2.0)
    assert pb.bound >= 0
    with pytest.raises(ValueError):
        properness_lower(w("ab"), fam4, 2.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_properness_sound_on_samples(F2, fam4, p):
    rng = np.random.default_rng(int(p * 10))
    for _ in range(40):
        L = int(rng.integers(3, 31))
        g = F2.random_word(L, rng)
        pb = properness_lower(g, fam4, p)
        assert pb.bound <= family_norm(g, fam4, p, L + 20, F2).upper


def test_family_norm_is_direct_sum(F2, fam4):
    g = w("abbA")
    parts = [lp_norm(g, u, 2.0, 14, F2) for u in fam4]
    total = family_norm(g, fam4, 2.0, 14, F2)
    assert total.lower == pytest.approx(math.sqrt(sum(e.lower**2 for e in parts)))
    assert total.upper == pytest.approx(math.sqrt(sum(e.upper**2 for e in parts)))


def _dense_values(g, u, T, G):
    return {gamma: cocycle_eval(g, u, gamma) for gamma in G.ball(T)}


@pytest.mark.parametrize("g, h", [("ab", "a"), ("abA", "bb"), ("B", "aB")])
def test_affine_action_is_isometric(F2, g, h):
    """‖c(g) - c(h)‖ over ball(T) equals ‖c(h⁻¹g)‖ over the h-translate."""
    u = Observable(ray_to(w("b")), VisualMetric(3))
    g, h = w(g), w(h)
    T = 7
    p = 2.0
    lhs = sum(abs(cocycle_eval(g, u, x) - cocycle_eval(h, u, x)) ** p for x in F2.ball(T))
    k = reduce_concat(inverse_word(h), g)
    rhs = sum(abs(cocycle_eval(k, u, reduce_concat(x, h))) ** p for x in F2.ball(T))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_continuity_surrogate(F2, p):
    """‖c(g) - c(h)‖ ≤ ‖c(h⁻¹g)‖ ≤ |h⁻¹g| · max over letters of ‖c(ℓ)‖."""
    vm = VisualMetric(4)
    u = Observable(ray_to(w("b")), vm)
    T = 24
    letter_max = max(lp_norm((x,), u, p, T, F2).upper for x in F2.letters)
    rng = np.random.default_rng(1)
    for _ in range(20):
        g = F2.random_word(int(rng.integers(1, 6)), rng)
        h = F2.random_word(int(rng.integers(1, 6)), rng)
        k = reduce_concat(inverse_word(h), g)
        if not k:
            continue
        # certified lower end against certified upper ends of the letters
        assert lp_norm(k, u, p, T, F2).lower <= len(k) * letter_max * (1 + 1e-12)


def test_auto_truncation_meets_width(F2, fam4):
    g = (0, 2) * 8
    T = auto_truncation(len(g), 2.0, F2, 4.0)
    e = family_norm(g, fam4, 2.0, T, F2)
    assert e.relative_width < 1e-3


def test_compression_fit_envelope(F2, fam4):
    fit = compression_fit(fam4, 2.0, [8, 16, 32], 10, 0, F2)
    assert fit.envelope_exponent >= 0.45
    assert len(fit.samples) == 30
    again = compression_fit(fam4, 2.0, [8, 16, 32], 10, 0, F2)
    assert again == fit


def _fixed(value):
    return NormEstimate(2.0, value, value, True, 0, 0.0, 0.0)


def test_compression_fit_constant_fixture(F2, fam4):
    fit = compression_fit(fam4, 2.0, [8, 16, 32], 3, 0, F2, norm_fn=lambda g: _fixed(5.0))
    assert abs(fit.exponent) < 1e-12 and abs(fit.envelope_exponent) < 1e-12


def test_compression_fit_scale_invariant(F2, fam4):
    base = compression_fit(fam4, 2.0, [8, 16, 32], 5, 3, F2)

    def doubled(g):
        e = family_norm(g, fam4, 2.0, auto_truncation(len(g), 2.0, F2, 4.0), F2)
        return NormEstimate(2.0, 2 * e.lower, 2 * e.upper, True, e.T, e.ratio, e.tail)

    scaled = compression_fit(fam4, 2.0, [8, 16, 32], 5, 3, F2, norm_fn=doubled)
    assert scaled.exponent == pytest.approx(base.exponent, abs=1e-9)
    assert scaled.envelope_exponent == pytest.approx(base.envelope_exponent, abs=1e-9)


def test_compression_fit_refuses_wide_intervals(F2, fam4):
    with pytest.raises(IntervalTooWide):
        compression_fit(fam4, 2.0, [8, 16], 2, 0, F2, T=10)
