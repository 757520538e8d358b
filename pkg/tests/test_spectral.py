import numpy as np
import pytest

from sabsim.errors import ConvergenceError
from sabsim.graph import complete_digraph, cycle_digraph, random_nearest_neighbor_digraph
from sabsim.spectral import (
    a_infinity,
    b_infinity,
    contraction_factor_a,
    contraction_factor_b,
    matrix_norm_c,
    matrix_norm_r,
    perron_left,
    perron_right,
    spectral_profile,
    weighted_norm_c,
    weighted_norm_r,
)
from sabsim.weights import uniform_weights


def _three_cycle_pair():
    return uniform_weights(cycle_digraph(3))


def test_perron_left_doubly_stochastic():
    a = np.full((4, 4), 0.25)
    np.testing.assert_allclose(perron_left(a), np.full(4, 0.25), atol=1e-13)


def test_perron_left_two_by_two_hand_solved():
    # pi A = pi with row-stochastic A below has the solution (2/3, 1/3).
    a = np.array([[0.75, 0.25], [0.5, 0.5]])
    np.testing.assert_allclose(perron_left(a), [2.0 / 3.0, 1.0 / 3.0], atol=1e-13)


def test_perron_left_cycle_uniform():
    pair = _three_cycle_pair()
    np.testing.assert_allclose(perron_left(pair.a), np.full(3, 1.0 / 3.0), atol=1e-13)


def test_perron_right_uniform_and_transpose_relation():
    b = np.full((5, 5), 0.2)
    np.testing.assert_allclose(perron_right(b), np.full(5, 0.2), atol=1e-13)
    a = uniform_weights(random_nearest_neighbor_digraph(8, 2, seed=1)).a
    np.testing.assert_allclose(perron_right(a.T), perron_left(a), atol=1e-12)


def test_perron_fixed_point_residuals():
    g = random_nearest_neighbor_digraph(17, 3, seed=9)
    pair = uniform_weights(g)
    pi_r = perron_left(pair.a)
    pi_c = perron_right(pair.b)
    assert np.max(np.abs(pi_r @ pair.a - pi_r)) <= 1e-10
    assert np.max(np.abs(pair.b @ pi_c - pi_c)) <= 1e-10
    assert np.all(pi_r > 0) and np.all(pi_c > 0)


def test_perron_rejects_periodic_matrix():
    # A permutation cycle is stochastic but not primitive.
    p = np.roll(np.eye(4), 1, axis=0)
    with pytest.raises(ConvergenceError):
        perron_left(p)


def test_weighted_norm_r_examples():
    pi = np.array([0.3, 0.45, 0.25])
    assert weighted_norm_r(np.ones(3), pi) == pytest.approx(1.0, abs=1e-15)
    x = np.array([1.0, -2.0, 0.5])
    uniform = np.full(3, 1.0 / 3.0)
    assert weighted_norm_r(x, uniform) == pytest.approx(np.linalg.norm(x) / np.sqrt(3), abs=1e-14)
    assert weighted_norm_r(np.array([1.0, 2.0]), np.array([2 / 3, 1 / 3])) == pytest.approx(
        np.sqrt(2.0), abs=1e-14
    )


def test_weighted_norm_c_examples():
    x = np.array([1.0, -2.0, 0.5])
    uniform = np.full(3, 1.0 / 3.0)
    assert weighted_norm_c(x, uniform) == pytest.approx(np.sqrt(3) * np.linalg.norm(x), abs=1e-13)
    pi = np.array([0.5, 0.2, 0.3])
    assert weighted_norm_c(pi, pi) == pytest.approx(1.0, abs=1e-14)
    assert weighted_norm_c(np.ones(2), np.array([0.5, 0.5])) == pytest.approx(2.0, abs=1e-14)


def test_weighted_norms_reject_bad_weights():
    with pytest.raises(ValueError):
        weighted_norm_r(np.ones(2), np.array([0.5, 0.0]))
    with pytest.raises(ValueError):
        weighted_norm_c(np.ones(2), np.array([0.5, -0.1]))


def test_weighted_norm_zero_iff_zero():
    pi = np.array([0.4, 0.6])
    assert weighted_norm_r(np.zeros(2), pi) == 0.0
    assert weighted_norm_r(np.array([0.0, 1e-8]), pi) > 0.0


def test_contraction_factor_rank_one_is_zero():
    n = 6
    flat = np.full((n, n), 1.0 / n)
    pi = np.full(n, 1.0 / n)
    assert contraction_factor_a(flat, pi) == 0.0
    assert contraction_factor_b(flat, pi) == 0.0


def test_contraction_factor_three_cycle_is_half():
    # Circulant (I + P)/2 has singular values |1 + exp(2 pi i k/3)| / 2,
    # so the second largest is exactly 1/2.
    pair = _three_cycle_pair()
    pi = np.full(3, 1.0 / 3.0)
    assert contraction_factor_a(pair.a, pi) == pytest.approx(0.5, abs=1e-12)
    assert contraction_factor_b(pair.b, pi) == pytest.approx(0.5, abs=1e-12)


def test_contraction_factor_matches_dense_svd_on_random_graph():
    g = random_nearest_neighbor_digraph(20, 3, seed=2)
    pair = uniform_weights(g)
    profile = spectral_profile(pair)
    d = np.sqrt(profile.pi_r)
    ref = np.linalg.svd(np.diag(d) @ pair.a @ np.diag(1.0 / d), compute_uv=False)[1]
    assert 0.0 < profile.sigma_a < 1.0
    assert profile.sigma_a == pytest.approx(ref, abs=1e-12)


def test_matrix_norm_identities():
    g = random_nearest_neighbor_digraph(12, 3, seed=4)
    pair = uniform_weights(g)
    profile = spectral_profile(pair)
    ainf = a_infinity(profile.pi_r)
    binf = b_infinity(profile.pi_c)
    for m in (pair.a, ainf, np.eye(12) - ainf):
        assert matrix_norm_r(m, profile.pi_r) == pytest.approx(1.0, abs=1e-8)
    for m in (pair.b, binf, np.eye(12) - binf):
        assert matrix_norm_c(m, profile.pi_c) == pytest.approx(1.0, abs=1e-8)
    assert matrix_norm_r(np.eye(12), profile.pi_r) == pytest.approx(1.0, abs=1e-12)


def test_matrix_norm_of_deviation_equals_contraction_factor():
    g = random_nearest_neighbor_digraph(10, 2, seed=6)
    pair = uniform_weights(g)
    profile = spectral_profile(pair)
    assert matrix_norm_r(pair.a - a_infinity(profile.pi_r), profile.pi_r) == pytest.approx(
        profile.sigma_a, abs=1e-10
    )
    assert matrix_norm_c(pair.b - b_infinity(profile.pi_c), profile.pi_c) == pytest.approx(
        profile.sigma_b, abs=1e-10
    )


def test_contraction_property_on_random_vectors():
    rng = np.random.default_rng(3)
    g = random_nearest_neighbor_digraph(14, 3, seed=8)
    pair = uniform_weights(g)
    profile = spectral_profile(pair)
    ainf = a_infinity(profile.pi_r)
    binf = b_infinity(profile.pi_c)
    for _ in range(200):
        x = rng.standard_normal(14)
        lhs = weighted_norm_r(pair.a @ x - ainf @ x, profile.pi_r)
        rhs = profile.sigma_a * weighted_norm_r(x - ainf @ x, profile.pi_r)
        assert lhs <= rhs + 1e-10
        lhs_b = weighted_norm_c(pair.b @ x - binf @ x, profile.pi_c)
        rhs_b = profile.sigma_b * weighted_norm_c(x - binf @ x, profile.pi_c)
        assert lhs_b <= rhs_b + 1e-10


def test_norm_equivalence_bounds():
    rng = np.random.default_rng(5)
    g = random_nearest_neighbor_digraph(9, 2, seed=12)
    profile = spectral_profile(uniform_weights(g))
    for _ in range(100):
        x = rng.standard_normal(9)
        two = np.linalg.norm(x)
        wr = weighted_norm_r(x, profile.pi_r)
        wc = weighted_norm_c(x, profile.pi_c)
        assert wr <= np.sqrt(profile.pi_r.max()) * two + 1e-12
        assert two <= wr / np.sqrt(profile.pi_r.min()) + 1e-12
        assert wc <= two / np.sqrt(profile.pi_c.min()) + 1e-12
        assert two <= np.sqrt(profile.pi_c.max()) * wc + 1e-12


def test_profile_invariants():
    g = random_nearest_neighbor_digraph(11, 4, seed=13)
    profile = spectral_profile(uniform_weights(g))
    assert profile.n == 11
    assert profile.h_r >= 1.0 and profile.h_c >= 1.0
    assert 0.0 < profile.pi_r_dot_pi_c <= 1.0
    assert 0.0 <= profile.sigma_a < 1.0 and 0.0 <= profile.sigma_b < 1.0
    assert profile.pi_r.sum() == pytest.approx(1.0, abs=1e-12)
    assert profile.pi_c.sum() == pytest.approx(1.0, abs=1e-12)


def test_matrix_norms_for_stacked_columns():
    # The weighted vector norms extend to (n, p) stacks by summing squared
    # row norms; cross-check against explicit column-wise evaluation.
    rng = np.random.default_rng(8)
    pi = np.abs(rng.standard_normal(6)) + 0.1
    x = rng.standard_normal((6, 3))
    by_columns = np.sqrt(sum(weighted_norm_r(x[:, j], pi) ** 2 for j in range(3)))
    assert weighted_norm_r(x, pi) == pytest.approx(by_columns, rel=1e-12)
    by_columns_c = np.sqrt(sum(weighted_norm_c(x[:, j], pi) ** 2 for j in range(3)))
    assert weighted_norm_c(x, pi) == pytest.approx(by_columns_c, rel=1e-12)
