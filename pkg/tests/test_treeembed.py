import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hypembed.treeembed import (
    CompressionSpec,
    LipschitzCapExceeded,
    RootedTree,
    binary_tree,
    build_embedding,
    integral_criterion,
    measure_embedding,
    obstruction,
    quadrature_integral,
    sample_pairs,
    step_bound,
    weight_schedule,
)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("q", [1.0, 2.0, 3.0])
def test_power_closed_form_matches_quadrature(alpha, q):
    spec = CompressionSpec.power(alpha, 2.0)
    res = integral_criterion(spec, q)
    assert res.converges and res.method == "closed-form"
    assert res.value == pytest.approx(1 / (q * (1 - alpha)), rel=1e-14)
    quad, _ = quadrature_integral(spec, q)
    assert abs(quad - res.value) <= 1e-6


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 10.0])
def test_linear_rho_rejected(p):
    spec = CompressionSpec.power(1.0, p)
    assert integral_criterion(spec, p).status == "diverges"
    assert obstruction(spec).status == "diverges"
    with pytest.raises(ValueError):
        build_embedding(binary_tree(3), spec)


def test_log_damped_converges():
    spec = CompressionSpec.log_damped(2.0, 1.0)
    res = integral_criterion(spec, 1.0)
    assert res.converges
    # independent route in the original variable with an explicit tail
    f = lambda t: 1.0 / (t * math.log(math.e + t) ** 2)
    head = sum(integrate.quad(f, 10.0**i, 10.0 ** (i + 1), limit=200)[0] for i in range(0, 12))
    tail_t = 1e12
    tail = 1.0 / math.log(tail_t)  # ∫_X^∞ dt/(t log² t), within 1e-13 of the damped version
    assert res.value == pytest.approx(head + tail, rel=1e-6)
    assert 0 < res.value < 2


@pytest.mark.parametrize("beta, q, status", [(1.0, 1.0, "diverges"), (0.4, 2.0, "diverges"), (0.6, 2.0, "converges")])
def test_log_damped_threshold(beta, q, status):
    assert integral_criterion(CompressionSpec.log_damped(beta, 1.0), q).status == status


def test_obstruction_uses_max_two_p():
    spec = CompressionSpec.log_damped(0.6, 1.0)
    assert integral_criterion(spec, 1.0).status == "diverges"
    assert obstruction(spec).status == "converges"


def test_custom_rho_quadrature():
    res = integral_criterion(CompressionSpec(lambda t: t**0.5, 2.0), 2.0)
    assert res.status == "converges" and res.value == pytest.approx(1.0, abs=1e-8)
    res = integral_criterion(CompressionSpec(lambda t: t / math.log(math.e + t) ** 0.2, 1.0), 1.0)
    assert res.status == "inconclusive"


def test_spec_validation():
    with pytest.raises(ValueError):
        CompressionSpec.power(1.5, 2)
    with pytest.raises(ValueError):
        CompressionSpec.power(0.5, 0.5)
    with pytest.raises(ValueError):
        CompressionSpec(lambda t: 5 - t, 2.0).check()


@pytest.mark.parametrize("alpha, p", [(0.5, 2.0), (0.9, 2.0), (0.3, 3.0), (0.7, 1.0)])
def test_weights_telescope(alpha, p):
    spec = CompressionSpec.power(alpha, p)
    w = weight_schedule(spec, 50)
    partial = np.cumsum(w**p)
    assert np.allclose(partial, np.arange(1, 51) ** (alpha * p), rtol=1e-12)


def test_half_power_example_step_bound():
    tree = binary_tree(10)
    spec = CompressionSpec.power(0.5, 2.0)
    emb = build_embedding(tree, spec)
    w1 = emb.weights[0]
    assert emb.lipschitz <= math.sqrt(2) * w1
    for u, v in tree.edges():
        assert emb.distance(u, v) <= emb.lipschitz * (1 + 1e-12)


@pytest.mark.parametrize("alpha, p", [(0.5, 2.0), (0.9, 2.0), (0.8, 3.0)])
def test_step_bound_is_attained(alpha, p):
    tree = binary_tree(7)
    emb = build_embedding(tree, CompressionSpec.power(alpha, p))
    worst = max(emb.distance(u, v) for u, v in tree.edges())
    assert worst == pytest.approx(emb.lipschitz, rel=1e-12)


def test_lipschitz_cap():
    with pytest.raises(LipschitzCapExceeded):
        build_embedding(binary_tree(5), CompressionSpec.power(0.9, 2.0), lipschitz_cap=1.0)


def test_decomposition_all_pairs_depth6():
    tree = binary_tree(6)
    emb = build_embedding(tree, CompressionSpec.power(0.7, 3.0))
    for x in range(tree.n):
        for y in range(tree.n):
            assert emb.distance(x, y) == pytest.approx(emb.distance_formula(x, y), rel=1e-12, abs=1e-15)


def test_support_size_is_depth():
    tree = binary_tree(5)
    emb = build_embedding(tree, CompressionSpec.power(0.5, 2.0))
    depth = tree.depths()
    for x in range(tree.n):
        assert len(emb.image(x)) == depth[x]


def test_identical_pair_zero():
    tree = binary_tree(4)
    emb = build_embedding(tree, CompressionSpec.power(0.5, 2.0))
    assert emb.distance(9, 9) == 0
    rep = measure_embedding(emb, [(9, 9), (3, 3)])
    assert rep.lower_envelope == ((0, 0.0),)


@pytest.mark.parametrize("alpha, p", [(0.5, 2.0), (0.9, 3.0)])
def test_sibling_leaves(alpha, p):
    tree = binary_tree(6)
    emb = build_embedding(tree, CompressionSpec.power(alpha, p))
    x = tree.n - 2
    y = tree.n - 1
    assert tree.parent[x] == tree.parent[y]
    assert emb.distance(x, y) ** p == pytest.approx(2 * emb.weights[0] ** p)


@pytest.mark.parametrize("alpha, p", [(0.5, 2.0), (0.9, 2.0), (0.6, 1.0), (0.75, 3.0)])
def test_lipschitz_and_compression_exhaustive(alpha, p):
    tree = binary_tree(6)
    spec = CompressionSpec.power(alpha, p)
    emb = build_embedding(tree, spec)
    rep = measure_embedding(emb, list(itertools.product(range(tree.n), repeat=2)))
    assert rep.violations == 0
    assert rep.max_ratio <= rep.lipschitz * (1 + 1e-12)


def test_fitted_exponent_on_leaves():
    tree = binary_tree(12)
    emb = build_embedding(tree, CompressionSpec.power(0.9, 2.0))
    rep = measure_embedding(emb, sample_pairs(tree, 10_000, 0, leaves_only=True))
    assert rep.fitted_exponent >= 0.85


def _pairs_by_depth(tree, same):
    d = tree.depths()
    return [(x, y) for x in range(tree.n) for y in range(tree.n) if (d[x] == d[y]) == same]


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_monotone_in_rho_equal_depth(p):
    tree = binary_tree(6)
    weak = build_embedding(tree, CompressionSpec.power(0.5, p))
    strong = build_embedding(tree, CompressionSpec.power(0.7, p))
    for x, y in _pairs_by_depth(tree, True):
        assert strong.distance(x, y) >= weak.distance(x, y) - 1e-12


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_monotone_in_rho_all_pairs(p):
    tree = binary_tree(6)
    weak = build_embedding(tree, CompressionSpec.power(0.5, p))
    strong = build_embedding(tree, CompressionSpec.power(0.7, p))
    for x in range(tree.n):
        for y in range(tree.n):
            assert strong.distance(x, y) >= weak.distance(x, y) - 1e-12


def test_monotonicity_fails_for_p1_mixed_depth():
    # parent/child pair: w1 + |w2 - w1| shrinks when rho grows
    tree = binary_tree(3)
    weak = build_embedding(tree, CompressionSpec.power(0.5, 1.0))
    strong = build_embedding(tree, CompressionSpec.power(0.7, 1.0))
    assert strong.distance(1, 3) < weak.distance(1, 3)


@given(st.integers(2, 40), st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_random_tree_embeddings(n, seed):
    rng = np.random.default_rng(seed)
    parent = (-1,) + tuple(int(rng.integers(i)) for i in range(1, n))
    tree = RootedTree(parent)
    emb = build_embedding(tree, CompressionSpec.power(0.6, 2.0))
    for x, y in sample_pairs(tree, 50, seed):
        d = tree.distance(x, y)
        f = emb.distance(x, y)
        assert f == pytest.approx(emb.distance_formula(x, y), rel=1e-12, abs=1e-14)
        assert f <= emb.lipschitz * d + 1e-12


def test_rooted_tree_validation():
    with pytest.raises(ValueError):
        RootedTree((-1, -1))
    with pytest.raises(ValueError):
        RootedTree((-1, 5))


def test_step_bound_formula():
    w = np.array([1.0, 0.5, 0.25])
    assert step_bound(w, 2.0) == pytest.approx(math.sqrt(1 + 0.25 + 0.0625))
