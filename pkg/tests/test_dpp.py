import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dppl import dpp
from dppl.dpp import KernelEnsemble
from dppl.numerics import SymmetryError

from conftest import gershgorin_kernel, random_psd, tv_distance


def K(a):
    return KernelEnsemble(np.asarray(a, dtype=float))


# -- construction and probabilities -----------------------------------------

def test_build_kernel_identity():
    np.testing.assert_array_equal(dpp.build_kernel([1.0, 1.0], np.eye(2)).L, np.eye(2))


def test_build_kernel_elementwise():
    k = dpp.build_kernel([2.0, 3.0], [[1.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(k.L, [[4.0, 3.0], [3.0, 9.0]])
    np.testing.assert_array_equal(k.g, [2.0, 3.0])


def test_build_kernel_rank_one():
    k = dpp.build_kernel(np.ones(3), np.ones((3, 3)))
    assert np.linalg.matrix_rank(k.L) == 1
    assert dpp.logdet_sub(k.L, (0, 1, 2)) == -math.inf


def test_build_kernel_rejects_nonpositive_quality():
    with pytest.raises(ValueError):
        dpp.build_kernel([1.0, 0.0], np.eye(2))


def test_build_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        dpp.build_kernel([1.0, 1.0], np.eye(3))


def test_kernel_is_immutable():
    k = K(np.eye(2))
    with pytest.raises(ValueError):
        k.L[0, 0] = 5.0


def test_as_subset_validation():
    assert dpp.as_subset([2, 0]) == (0, 2)
    with pytest.raises(ValueError):
        dpp.as_subset([0, 0])
    with pytest.raises(ValueError):
        dpp.as_subset([3], n=3)


def test_subset_log_prob_identity():
    assert dpp.subset_log_prob(K(np.eye(2)), (0,)) == pytest.approx(math.log(0.25))


def test_subset_log_prob_full_set():
    assert dpp.subset_log_prob(K([[2, 1], [1, 2]]), (0, 1)) == pytest.approx(math.log(3 / 8))


def test_subset_log_prob_empty_set():
    assert dpp.subset_log_prob(K([[2, 1], [1, 2]]), ()) == pytest.approx(-math.log(8))


def test_zero_probability_subset_is_minus_inf():
    assert dpp.subset_log_prob(K(np.ones((2, 2))), (0, 1)) == -math.inf


@given(st.integers(1, 10), st.integers(0, 2**31), st.booleans())
def test_normalization(n, seed, asymmetric):
    rng = np.random.default_rng(seed)
    L = gershgorin_kernel(rng, n) if asymmetric else random_psd(rng, n, scale=2.0)
    total = sum(dpp.enumerate_probs(K(L)).values())
    assert total == pytest.approx(1.0, abs=1e-8)


def test_marginal_kernel_identity():
    np.testing.assert_allclose(dpp.marginal_kernel(K(np.eye(3))), np.eye(3) / 2)


def test_marginal_kernel_zero():
    np.testing.assert_array_equal(dpp.marginal_kernel(K(np.zeros((3, 3)))), 0.0)


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_marginal_kernel_matches_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    k = K(random_psd(rng, n))
    km = dpp.marginal_kernel(k)
    probs = dpp.enumerate_probs(k)
    assert np.all((np.diag(km) >= -1e-12) & (np.diag(km) <= 1 + 1e-12))
    a = tuple(sorted(rng.choice(n, size=rng.integers(1, n + 1), replace=False)))
    lhs = np.linalg.det(km[np.ix_(a, a)])
    rhs = sum(p for y, p in probs.items() if set(a) <= set(y))
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_scale_covariance_of_logdet(rng):
    g = rng.uniform(0.5, 2.0, 5)
    s = random_psd(rng, 5) + 0.1 * np.eye(5)
    c = 3.7
    base, scaled = dpp.build_kernel(g, s), dpp.build_kernel(g, c * s)
    for y in dpp.all_subsets(5):
        assert dpp.logdet_sub(scaled.L, y) == pytest.approx(
            dpp.logdet_sub(base.L, y) + len(y) * math.log(c), abs=1e-10)


# -- samplers ---------------------------------------------------------------

def test_spectral_zero_kernel_is_empty(rng):
    assert not dpp.draw_spectral(K(np.zeros((3, 3))), rng, 100).any()


def test_spectral_dominant_eigenvalue(rng):
    draws = dpp.draw_spectral(K(np.diag([1e12, 0.0])), rng, 1000)
    assert np.all(draws[:, 0]) and not draws[:, 1].any()


def test_spectral_rejects_asymmetric(rng):
    with pytest.raises(SymmetryError):
        dpp.sample_spectral(K([[1.0, 0.5], [0.0, 1.0]]), rng)


def test_spectral_rejects_negative_eigenvalue(rng):
    with pytest.raises(dpp.NumericFailure):
        dpp.sample_spectral(K([[1.0, 2.0], [2.0, 1.0]]), rng)


def test_spectral_tiny_negative_eigenvalue_is_clamped(rng):
    L = np.ones((2, 2)) - 1e-12 * np.eye(2)
    assert dpp.sample_spectral(K(L), rng) in {(), (0,), (1,)}


def test_spectral_matches_enumeration_2x2():
    k = K([[2.0, 1.0], [1.0, 2.0]])
    draws = dpp.draw_spectral(k, np.random.default_rng(0), 200_000)
    assert tv_distance(draws, dpp.enumerate_probs(k)) <= 0.01


def test_sequential_zero_kernel_is_empty(rng):
    assert not dpp.draw_sequential(K(np.zeros((3, 3))), rng, 100).any()


def test_sequential_gershgorin_3x3_matches_enumeration():
    off = np.array([[0, 1, 2], [3, 0, 1], [2, 2, 0]], dtype=float)
    L = off + 4.0 * np.eye(3)
    k = K(0.5 * L)
    draws = dpp.draw_sequential(k, np.random.default_rng(1), 200_000)
    assert tv_distance(draws, dpp.enumerate_probs(k)) <= 0.01


def test_samplers_agree_on_symmetric_kernel():
    rng = np.random.default_rng(3)
    k = K(random_psd(rng, 4, scale=1.5))
    probs = dpp.enumerate_probs(k)
    a = dpp.draw_spectral(k, np.random.default_rng(4), 200_000)
    b = dpp.draw_sequential(k, np.random.default_rng(5), 200_000)
    assert tv_distance(a, probs) <= 0.01
    assert tv_distance(b, probs) <= 0.01


def test_sequential_detects_non_p0(rng):
    with pytest.raises(dpp.NumericFailure):
        dpp.draw_sequential(K([[1.0, 3.0], [3.0, 1.0]]), rng, 10)


def test_sample_routes_by_symmetry(rng):
    sym = K(np.eye(3))
    asym = K(gershgorin_kernel(rng, 3))
    assert sym.symmetric and not asym.symmetric
    assert set(dpp.sample(asym, rng)) <= {0, 1, 2}


def test_sampler_is_seed_deterministic():
    k = K(random_psd(np.random.default_rng(0), 6))
    a = dpp.draw_spectral(k, np.random.default_rng(9), 50)
    b = dpp.draw_spectral(k, np.random.default_rng(9), 50)
    np.testing.assert_array_equal(a, b)


@given(st.integers(1, 7), st.integers(0, 7), st.integers(0, 2**31))
def test_elementary_sample_size_equals_rank(n, r, seed):
    r = min(r, n)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    for _ in range(5):
        assert len(dpp.sample_elementary(q[:, :r], rng)) == r


# -- multilinear relaxation and MAP -----------------------------------------

def test_multilinear_at_zero():
    assert dpp.multilinear_value(K([[2, 1], [1, 2]]), [0.0, 0.0]) == 0.0


def test_multilinear_at_one():
    assert dpp.multilinear_value(K([[2, 1], [1, 2]]), [1.0, 1.0]) == pytest.approx(math.log(3))


def test_multilinear_indicator():
    assert dpp.multilinear_value(K([[2, 1], [1, 2]]), [1.0, 0.0]) == pytest.approx(math.log(2))


@given(st.integers(1, 8), st.integers(0, 2**31))
def test_multilinear_equals_logdet_at_integral_points(n, seed):
    rng = np.random.default_rng(seed)
    k = K(random_psd(rng, n) + 0.05 * np.eye(n))
    mask = rng.random(n) < 0.5
    y = dpp.subset_from_mask(mask)
    assert dpp.multilinear_value(k, mask.astype(float)) == pytest.approx(
        dpp.logdet_sub(k.L, y), abs=1e-10)


def test_multilinear_gradient_identity_kernel_is_zero():
    np.testing.assert_array_equal(dpp.multilinear_gradient(K(np.eye(3)), np.full(3, 0.3)), 0.0)


def test_multilinear_gradient_at_zero():
    L = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 0.2]])
    np.testing.assert_allclose(dpp.multilinear_gradient(K(L), np.zeros(3)), np.diag(L) - 1)


@given(st.integers(1, 10), st.integers(0, 2**31))
def test_multilinear_gradient_finite_differences(n, seed):
    rng = np.random.default_rng(seed)
    k = K(random_psd(rng, n, scale=2.0) + 0.1 * np.eye(n))
    x = rng.uniform(0.1, 0.9, n)
    grad = dpp.multilinear_gradient(k, x)
    h = 1e-6
    fd = np.array([(dpp.multilinear_value(k, x + h * e) - dpp.multilinear_value(k, x - h * e)) / (2 * h)
                   for e in np.eye(n)])
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-7)


def test_local_opt_diagonal():
    k = K(np.diag([3.0, 3.0]))
    x = dpp.local_opt(k)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-5)
    assert dpp.multilinear_value(k, x) == pytest.approx(math.log(9), abs=1e-5)


def test_local_opt_identity_is_feasible():
    k = K(np.eye(3))
    x = dpp.local_opt(k)
    assert np.all((x >= 0) & (x <= 1))
    assert dpp.multilinear_value(k, x) == pytest.approx(0.0, abs=1e-12)


def test_local_opt_degenerate_box():
    np.testing.assert_array_equal(dpp.local_opt(K(np.diag([5.0, 5.0])), np.zeros(2)), 0.0)


@given(st.integers(1, 8), st.integers(0, 2**31))
def test_local_opt_improves_on_origin(n, seed):
    rng = np.random.default_rng(seed)
    k = K(random_psd(rng, n, scale=3.0))
    upper = rng.uniform(0.0, 1.0, n)
    x = dpp.local_opt(k, upper)
    assert np.all(x >= 0) and np.all(x <= upper + 1e-12)
    assert dpp.multilinear_value(k, x) >= 0.0


def test_map_diagonal():
    assert dpp.map_infer(K(np.diag([10.0, 0.1]))) == (0,)


def test_map_zero_kernel():
    assert dpp.map_infer(K(np.zeros((3, 3)))) == ()


def test_map_rejects_bad_delta():
    with pytest.raises(ValueError):
        dpp.map_infer(K(np.eye(2)), delta=1.0)


def test_map_near_optimal_on_small_kernels():
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(40):
        n = int(rng.integers(2, 9))
        k = K(random_psd(rng, n) * rng.uniform(0.5, 3.0))
        exact = dpp.logdet_sub(k.L, dpp.enumerate_map(k))
        hits += dpp.logdet_sub(k.L, dpp.map_infer(k)) >= exact - 0.05
    assert hits >= 36


def test_enumerate_map_examples():
    assert dpp.enumerate_map(K(np.eye(3))) == ()
    assert dpp.enumerate_map(K(np.diag([3.0, 0.5]))) == (0,)
    assert dpp.enumerate_map(K([[2.0, 1.0], [1.0, 2.0]])) == (0, 1)


def test_enumerate_map_guard():
    with pytest.raises(ValueError):
        dpp.enumerate_map(K(np.eye(21)))


# -- P0 checks --------------------------------------------------------------

def test_gershgorin_example_minors():
    off = np.array([[0, 1, 2], [3, 0, 1], [2, 2, 0]], dtype=float)
    a = off + 4.0 * np.eye(3)
    assert dpp.row_dominance_certificate(a)
    assert dpp.principal_minors_ok(a)
    assert dpp.p0_status(a) == "exhaustive"


def test_p0_status_paths(rng):
    assert dpp.p0_status([[1.0, 3.0], [3.0, 1.0]]) == "failed"
    assert dpp.p0_status(gershgorin_kernel(rng, 12)) == "certificate"
    assert dpp.p0_status(random_psd(rng, 12)) == "spectral"
    a = rng.uniform(0, 1, (12, 12))
    assert dpp.p0_status(a) == "unverified"


@given(st.integers(1, 8), st.integers(0, 2**31))
def test_certificate_implies_p0(n, seed):
    a = gershgorin_kernel(np.random.default_rng(seed), n)
    assert dpp.row_dominance_certificate(a)
    assert dpp.principal_minors_ok(a)
