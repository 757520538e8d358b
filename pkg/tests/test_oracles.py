import numpy as np
import pytest

from sabsim.errors import ConfigError
from sabsim.oracles import (
    classification_accuracy,
    load_labeled_csv,
    logistic_oracle,
    logistic_oracle_from_csv,
    partition_batches,
    quadratic_oracle,
    random_quadratic,
    two_class_gaussian_data,
)


def _simple_quadratic(sigma_sq=0.0):
    mats = np.stack([np.diag([1.0, 2.0]), np.diag([3.0, 4.0])])
    centers = np.array([[1.0, -1.0], [0.5, 2.0]])
    return quadratic_oracle(mats, centers, sigma_sq)


def _small_logistic(lam=1.0):
    feats, labels = two_class_gaussian_data(40, 3, separation=1.5, seed=2)
    f, l = partition_batches(feats, labels, 4)
    return logistic_oracle(f, l, lam=lam)


def test_quadratic_gradient_zero_at_center():
    oracle = _simple_quadratic()
    np.testing.assert_allclose(oracle.exact_gradient(0, oracle.centers[0]), np.zeros(2), atol=0)


def test_quadratic_identity_gradient():
    oracle = quadratic_oracle(np.eye(2)[None], np.zeros((1, 2)))
    np.testing.assert_array_equal(oracle.exact_gradient(0, np.array([3.0, -1.0])), [3.0, -1.0])


def test_quadratic_rows_match_per_agent():
    oracle = _simple_quadratic()
    x = np.array([[0.3, 1.2], [-0.5, 0.25]])
    rows = oracle.exact_gradient_rows(x)
    for i in range(2):
        np.testing.assert_array_equal(rows[i], oracle.exact_gradient(i, x[i]))


def test_logistic_single_point_at_origin():
    # At the origin the sigmoid factor is exactly 1/2, so the gradient of a
    # single-sample batch is -y/2 times the augmented feature.
    feats = np.array([[[2.0, -1.0]]])
    labels = np.array([[1.0]])
    oracle = logistic_oracle(feats, labels, lam=1.0)
    expected = -0.5 * np.array([2.0, -1.0, 1.0])
    np.testing.assert_allclose(oracle.exact_gradient(0, np.zeros(3)), expected, atol=1e-15)


def test_logistic_rows_match_per_agent():
    oracle = _small_logistic()
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, oracle.p))
    rows = oracle.exact_gradient_rows(x)
    for i in range(4):
        np.testing.assert_array_equal(rows[i], oracle.exact_gradient(i, x[i]))


def test_sample_zero_variance_is_exact():
    oracle = _simple_quadratic(sigma_sq=0.0)
    rng = np.random.default_rng(1)
    x = np.array([0.7, -0.3])
    s = oracle.sample_gradient(0, x, rng)
    np.testing.assert_array_equal(s.value, s.noise_free)


def test_sample_mean_matches_exact_gradient():
    # CLT band: the empirical mean of many draws stays within three
    # standard errors of the exact gradient per coordinate.
    sigma_sq = 0.8
    oracle = _simple_quadratic(sigma_sq=sigma_sq)
    rng = np.random.default_rng(7)
    x = np.array([0.2, 0.9])
    draws = 100_000
    total = np.zeros(2)
    for _ in range(draws):
        total += oracle.sample_gradient(1, x, rng).value
    band = 3.0 * np.sqrt(sigma_sq / draws)
    np.testing.assert_allclose(total / draws, oracle.exact_gradient(1, x), atol=band)


def test_sample_variance_within_reported_bound():
    sigma_sq = 0.5
    oracle = _simple_quadratic(sigma_sq=sigma_sq)
    rng = np.random.default_rng(8)
    x = np.array([1.0, 1.0])
    exact = oracle.exact_gradient(0, x)
    sq = [np.sum((oracle.sample_gradient(0, x, rng).value - exact) ** 2) for _ in range(20_000)]
    assert np.mean(sq) <= sigma_sq * 1.1


def test_logistic_batch_of_one_sample_is_exact():
    feats = np.array([[[0.5, 1.5]], [[-1.0, 0.2]]])
    labels = np.array([[1.0], [-1.0]])
    oracle = logistic_oracle(feats, labels, lam=2.0)
    rng = np.random.default_rng(3)
    x = np.array([0.4, -0.2, 0.1])
    s = oracle.sample_gradient(1, x, rng)
    np.testing.assert_allclose(s.value, oracle.exact_gradient(1, x), atol=1e-15)


def test_logistic_sample_unbiased():
    oracle = _small_logistic()
    rng = np.random.default_rng(5)
    x = rng.standard_normal(oracle.p)
    exact = oracle.exact_gradient(2, x)
    draws = 40_000
    total = np.zeros(oracle.p)
    for _ in range(draws):
        total += oracle.sample_gradient(2, x, rng).value
    spread = np.sqrt(oracle.sigma_sq / draws)
    np.testing.assert_allclose(total / draws, exact, atol=5 * spread)


def test_logistic_variance_bound_at_probe_origin():
    oracle = _small_logistic()
    rng = np.random.default_rng(6)
    x = np.zeros(oracle.p)
    exact = oracle.exact_gradient(0, x)
    sq = [np.sum((oracle.sample_gradient(0, x, rng).value - exact) ** 2) for _ in range(4000)]
    assert np.mean(sq) <= oracle.sigma_sq * 1.1


def test_global_minimizer_identity_matrices_mean_center():
    centers = np.array([[1.0, 0.0], [3.0, 2.0], [-1.0, 4.0]])
    oracle = quadratic_oracle(np.stack([np.eye(2)] * 3), centers)
    np.testing.assert_allclose(oracle.global_minimizer(), centers.mean(axis=0), atol=1e-14)


def test_global_minimizer_single_agent():
    oracle = quadratic_oracle(np.diag([2.0, 5.0])[None], np.array([[0.3, -0.7]]))
    np.testing.assert_allclose(oracle.global_minimizer(), [0.3, -0.7], atol=1e-14)


def test_global_minimizer_stationarity_random_quadratic():
    oracle = random_quadratic(5, 3, seed=17, eig_min=0.5, eig_max=6.0, center_scale=2.0)
    x_star = oracle.global_minimizer()
    grad = oracle.exact_gradient_rows(np.tile(x_star, (5, 1))).mean(axis=0)
    assert np.linalg.norm(grad) <= 1e-12


def test_balanced_centers_put_minimizer_at_origin():
    oracle = random_quadratic(6, 2, seed=23, balanced_centers=True)
    np.testing.assert_allclose(oracle.global_minimizer(), np.zeros(2), atol=1e-12)


def test_logistic_global_minimizer_stationarity():
    oracle = _small_logistic()
    x_star = oracle.global_minimizer()
    grad = oracle.exact_gradient_rows(np.tile(x_star, (oracle.n, 1))).mean(axis=0)
    assert np.linalg.norm(grad) <= 1e-11


def test_effective_constants_quadratic():
    oracle = _simple_quadratic(sigma_sq=0.5)
    mu, ell, sigma_sq = oracle.effective_constants()
    assert (mu, ell, sigma_sq) == (1.0, 4.0, 0.5)


def test_effective_constants_empty_batches_pure_regularizer():
    # With no data the cost is the regularizer alone: both moduli equal
    # lam / n and the sampling variance is zero.
    oracle = logistic_oracle(np.zeros((10, 0, 3)), np.zeros((10, 0)), lam=1.0)
    mu, ell, sigma_sq = oracle.effective_constants()
    assert mu == pytest.approx(0.1) and ell == pytest.approx(0.1) and sigma_sq == 0.0
    with pytest.raises(ValueError):
        oracle.sample_gradient(0, np.zeros(3), np.random.default_rng(0))


def test_strong_convexity_and_smoothness_inequalities():
    rng = np.random.default_rng(11)
    for oracle in (_simple_quadratic(), _small_logistic()):
        mu, ell, _ = oracle.effective_constants()
        for _ in range(50):
            i = int(rng.integers(oracle.n))
            x = rng.standard_normal(oracle.p)
            y = rng.standard_normal(oracle.p)
            fx, fy = oracle.local_loss(i, x), oracle.local_loss(i, y)
            gx = oracle.exact_gradient(i, x)
            gap = fy - fx - gx @ (y - x)
            assert gap >= 0.5 * mu * np.sum((x - y) ** 2) - 1e-9
            assert np.linalg.norm(gx - oracle.exact_gradient(i, y)) <= ell * np.linalg.norm(x - y) * (1 + 1e-12)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(12)
    for oracle in (_simple_quadratic(), _small_logistic()):
        for t in range(20):
            i = t % oracle.n
            x = rng.standard_normal(oracle.p)
            exact = oracle.exact_gradient(i, x)
            h = 1e-6
            fd = np.zeros_like(x)
            for j in range(x.size):
                e = np.zeros_like(x)
                e[j] = h
                fd[j] = (oracle.local_loss(i, x + e) - oracle.local_loss(i, x - e)) / (2 * h)
            assert np.linalg.norm(fd - exact) <= 1e-6 * max(np.linalg.norm(exact), 1e-9)


def test_quadratic_factory_rejects_bad_inputs():
    with pytest.raises(ValueError):
        quadratic_oracle(np.stack([np.diag([1.0, -0.5])]), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        quadratic_oracle(np.stack([np.array([[1.0, 0.5], [0.0, 1.0]])]), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        quadratic_oracle(np.eye(2)[None], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        quadratic_oracle(np.eye(2)[None], np.zeros((1, 2)), sigma_sq=-1.0)


def test_logistic_factory_rejects_bad_inputs():
    feats = np.zeros((2, 3, 2))
    labels = np.ones((2, 3))
    with pytest.raises(ValueError):
        logistic_oracle(feats, labels, lam=0.0)
    bad_labels = labels.copy()
    bad_labels[0, 0] = 0.5
    with pytest.raises(ValueError):
        logistic_oracle(feats, bad_labels, lam=1.0)
    with pytest.raises(ValueError):
        logistic_oracle(feats, np.ones((2, 4)), lam=1.0)


def test_labeled_csv_round_trip(tmp_path):
    feats, labels = two_class_gaussian_data(12, 3, separation=1.0, seed=4)
    lines = [",".join([f"{labels[i]:.0f}"] + [f"{v:.17g}" for v in feats[i]]) for i in range(12)]
    path = tmp_path / "data.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    oracle = logistic_oracle_from_csv(path, n=3, lam=1.0)
    assert oracle.n == 3 and oracle.m == 4 and oracle.p == 4
    loaded_feats, loaded_labels = load_labeled_csv(path)
    np.testing.assert_allclose(loaded_feats, feats, rtol=1e-15)
    np.testing.assert_array_equal(loaded_labels, labels)


def test_partition_requires_equal_batches():
    feats, labels = two_class_gaussian_data(10, 2, separation=1.0, seed=5)
    with pytest.raises(ConfigError):
        partition_batches(feats, labels, 3)


def test_labeled_csv_rejects_bad_labels(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("2,0.5,0.5\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_labeled_csv(path)


def test_classification_accuracy_perfect_separator():
    feats = np.array([[1.0, 0.0], [-1.0, 0.0]])
    labels = np.array([1.0, -1.0])
    x = np.array([1.0, 0.0, 0.0])  # weight on first feature, zero bias
    assert classification_accuracy(x, feats, labels) == 1.0
    assert classification_accuracy(-x, feats, labels) == 0.0


def test_two_class_data_shapes_and_balance():
    feats, labels = two_class_gaussian_data(100, 5, separation=2.0, seed=9)
    assert feats.shape == (100, 5)
    assert np.sum(labels == 1.0) == 50 and np.sum(labels == -1.0) == 50
    again, _ = two_class_gaussian_data(100, 5, separation=2.0, seed=9)
    np.testing.assert_array_equal(feats, again)
