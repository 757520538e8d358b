"""Local cost functions and stochastic first-order oracles.

Two oracle kinds are provided:

* quadratic-gaussian -- per-agent quadratics ``f_i(x) = 0.5 (x - c_i)' Q_i
  (x - c_i)`` with additive Gaussian gradient noise.  Strong-convexity and
  smoothness moduli, the noise variance, and the global minimizer are all
  exact, which makes this the oracle for sharp theory checks.
* logistic-minibatch -- per-agent batches of labeled feature vectors with
  an L2-regularized logistic loss; the stochastic gradient draws one local
  sample uniformly.  The noise-variance bound is estimated, not certified.

Both expose the same surface: exact gradients, stochastic gradients that
are unbiased for them, the exact global minimizer, and the effective
``(mu, ell, sigma_sq)`` constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConvergenceError

__all__ = [
    "GradientSample",
    "QuadraticOracle",
    "LogisticOracle",
    "quadratic_oracle",
    "random_quadratic",
    "logistic_oracle",
    "logistic_oracle_from_csv",
    "load_labeled_csv",
    "partition_batches",
    "two_class_gaussian_data",
    "classification_accuracy",
]


def _sigmoid(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True, eq=False)
class GradientSample:
    """One stochastic gradient draw; ``noise_free`` is exposed for testing."""

    value: np.ndarray
    agent: int
    noise_free: np.ndarray


@dataclass(frozen=True, eq=False)
class QuadraticOracle:
    """Per-agent quadratics with additive Gaussian gradient noise.

    ``matrices`` has shape (n, p, p) with each slice symmetric positive
    definite; ``centers`` has shape (n, p).  The sampled gradient adds a
    Gaussian vector with per-coordinate variance ``sigma_sq / p`` so the
    total squared-norm variance equals ``sigma_sq`` exactly.
    """

    kind = "quadratic-gaussian"

    matrices: np.ndarray
    centers: np.ndarray
    sigma_sq: float
    mu: float
    ell: float

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def p(self) -> int:
        return self.matrices.shape[1]

    def exact_gradient(self, agent: int, x: np.ndarray) -> np.ndarray:
        # einsum keeps the accumulation order identical to the stacked
        # path, so per-agent and batched gradients agree bitwise.
        return np.einsum("pq,q->p", self.matrices[agent], np.asarray(x, dtype=float) - self.centers[agent])

    def exact_gradient_rows(self, x_rows: np.ndarray) -> np.ndarray:
        """Stacked exact gradients, row i evaluated at ``x_rows[i]``."""
        return np.einsum("ipq,iq->ip", self.matrices, x_rows - self.centers)

    def sample_gradient(self, agent: int, x: np.ndarray, rng: np.random.Generator) -> GradientSample:
        noise_free = self.exact_gradient(agent, x)
        if self.sigma_sq == 0.0:
            return GradientSample(noise_free.copy(), agent, noise_free)
        noise = rng.standard_normal(self.p) * np.sqrt(self.sigma_sq / self.p)
        return GradientSample(noise_free + noise, agent, noise_free)

    def sample_gradient_rows(self, x_rows: np.ndarray, rngs) -> np.ndarray:
        """Stacked stochastic gradients; row i consumes ``rngs[i]`` only."""
        g = self.exact_gradient_rows(x_rows)
        if self.sigma_sq == 0.0:
            return g
        scale = np.sqrt(self.sigma_sq / self.p)
        noise = np.stack([rng.standard_normal(self.p) for rng in rngs])
        return g + scale * noise

    def local_loss(self, agent: int, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - self.centers[agent]
        return float(0.5 * d @ (self.matrices[agent] @ d))

    def global_loss(self, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float)[None, :] - self.centers
        return float(0.5 * np.einsum("ip,ipq,iq->", d, self.matrices, d) / self.n)

    def global_minimizer(self) -> np.ndarray:
        lhs = self.matrices.sum(axis=0)
        rhs = np.einsum("ipq,iq->p", self.matrices, self.centers)
        return np.linalg.solve(lhs, rhs)

    def effective_constants(self):
        return self.mu, self.ell, self.sigma_sq


def quadratic_oracle(matrices: np.ndarray, centers: np.ndarray, sigma_sq: float = 0.0) -> QuadraticOracle:
    """Build a quadratic-gaussian oracle, computing exact ``mu`` and ``ell``
    as the extremal eigenvalues across agents."""
    matrices = np.array(matrices, dtype=float)
    centers = np.array(centers, dtype=float)
    if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
        raise ValueError(f"matrices must have shape (n, p, p), got {matrices.shape}")
    if centers.shape != matrices.shape[:2]:
        raise ValueError(f"centers shape {centers.shape} does not match matrices {matrices.shape}")
    if sigma_sq < 0.0:
        raise ValueError("sigma_sq must be nonnegative")
    if np.max(np.abs(matrices - matrices.transpose(0, 2, 1))) > 1e-12:
        raise ValueError("each agent matrix must be symmetric")
    eigs = np.linalg.eigvalsh(matrices)
    mu = float(eigs[:, 0].min())
    ell = float(eigs[:, -1].max())
    if mu <= 0.0:
        raise ValueError(f"agent matrices must be positive definite, smallest eigenvalue {mu:.17g}")
    matrices.flags.writeable = False
    centers.flags.writeable = False
    return QuadraticOracle(matrices, centers, float(sigma_sq), mu, ell)


def random_quadratic(
    n: int,
    p: int,
    seed: int,
    eig_min: float = 1.0,
    eig_max: float = 4.0,
    center_scale: float = 1.0,
    sigma_sq: float = 0.0,
    balanced_centers: bool = False,
) -> QuadraticOracle:
    """Random ensemble of agent quadratics with eigenvalues in
    ``[eig_min, eig_max]``.

    With ``balanced_centers`` the last center is chosen so the global
    minimizer is exactly the origin, which removes the initial transient
    from steady-state measurements.
    """
    if not 0 < eig_min <= eig_max:
        raise ValueError("need 0 < eig_min <= eig_max")
    rng = np.random.default_rng(seed)
    mats = np.empty((n, p, p))
    for i in range(n):
        q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        lam = rng.uniform(eig_min, eig_max, size=p)
        mats[i] = (q * lam) @ q.T
        mats[i] = 0.5 * (mats[i] + mats[i].T)
    centers = center_scale * rng.standard_normal((n, p))
    if balanced_centers:
        if n < 2:
            raise ValueError("balanced centers need at least two agents")
        weighted = np.einsum("ipq,iq->p", mats[:-1], centers[:-1])
        centers[-1] = np.linalg.solve(mats[-1], -weighted)
    return quadratic_oracle(mats, centers, sigma_sq)


@dataclass(frozen=True, eq=False)
class LogisticOracle:
    """Per-agent logistic regression batches with an L2 regularizer.

    The decision vector stacks the separating weights and the bias as its
    last coordinate; ``features`` is stored bias-augmented with shape
    (n, m, p).  The regularizer ``lam/(2n) * ||w||^2`` applies to the
    weight part only.  The stochastic gradient draws one local sample
    uniformly and scales its loss gradient by the batch size ``m``, which
    keeps it unbiased for the exact local gradient.
    """

    kind = "logistic-minibatch"

    features: np.ndarray
    labels: np.ndarray
    lam: float
    mu: float
    ell: float
    sigma_sq: float

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def p(self) -> int:
        return self.features.shape[2]

    def _w_part(self, x: np.ndarray) -> np.ndarray:
        w = np.array(x, dtype=float)
        w[..., -1] = 0.0
        return w

    def exact_gradient(self, agent: int, x: np.ndarray) -> np.ndarray:
        # einsum mirrors the stacked path for bitwise agreement.
        x = np.asarray(x, dtype=float)
        feats = self.features[agent]
        y = self.labels[agent]
        coef = -y * _sigmoid(-y * np.einsum("mp,p->m", feats, x))
        return np.einsum("m,mp->p", coef, feats) + (self.lam / self.n) * self._w_part(x)

    def exact_gradient_rows(self, x_rows: np.ndarray) -> np.ndarray:
        z = self.labels * np.einsum("imp,ip->im", self.features, x_rows)
        coef = -self.labels * _sigmoid(-z)
        return np.einsum("im,imp->ip", coef, self.features) + (self.lam / self.n) * self._w_part(x_rows)

    def sample_gradient(self, agent: int, x: np.ndarray, rng: np.random.Generator) -> GradientSample:
        if self.m == 0:
            raise ValueError(f"agent {agent} has an empty local batch")
        x = np.asarray(x, dtype=float)
        j = int(rng.integers(self.m))
        c = self.features[agent, j]
        y = self.labels[agent, j]
        z = y * np.einsum("p,p->", c, x)
        value = (-y * _sigmoid(-z) * self.m) * c + (self.lam / self.n) * self._w_part(x)
        return GradientSample(value, agent, self.exact_gradient(agent, x))

    def sample_gradient_rows(self, x_rows: np.ndarray, rngs) -> np.ndarray:
        if self.m == 0:
            raise ValueError("empty local batches")
        idx = np.array([int(rng.integers(self.m)) for rng in rngs])
        rows = np.arange(self.n)
        c = self.features[rows, idx]
        y = self.labels[rows, idx]
        z = y * np.einsum("ip,ip->i", c, x_rows)
        coef = -y * _sigmoid(-z) * self.m
        return coef[:, None] * c + (self.lam / self.n) * self._w_part(x_rows)

    def local_loss(self, agent: int, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        z = self.labels[agent] * (self.features[agent] @ x)
        reg = 0.5 * self.lam / self.n * float(x[:-1] @ x[:-1])
        return float(np.sum(np.logaddexp(0.0, -z))) + reg

    def global_loss(self, x: np.ndarray) -> float:
        return sum(self.local_loss(i, x) for i in range(self.n)) / self.n

    def _global_gradient(self, x: np.ndarray, flat_feats: np.ndarray, flat_labels: np.ndarray) -> np.ndarray:
        coef = -flat_labels * _sigmoid(-flat_labels * (flat_feats @ x))
        return (coef @ flat_feats + self.lam * self._w_part(x)) / self.n

    def global_minimizer(self, grad_tol: float = 1e-12, max_iter: int = 2_000_000) -> np.ndarray:
        """Centralized gradient descent on the global cost down to
        ``||grad|| <= grad_tol``."""
        flat_feats = self.features.reshape(-1, self.p)
        flat_labels = self.labels.reshape(-1)
        x = np.zeros(self.p)
        step = 1.0 / self.ell
        for _ in range(max_iter):
            g = self._global_gradient(x, flat_feats, flat_labels)
            if float(np.linalg.norm(g)) <= grad_tol:
                return x
            x = x - step * g
        raise ConvergenceError(
            f"centralized solve stalled at gradient norm "
            f"{float(np.linalg.norm(self._global_gradient(x, flat_feats, flat_labels))):.3e}"
        )

    def effective_constants(self):
        return self.mu, self.ell, self.sigma_sq


def _estimate_logistic_variance(features: np.ndarray, probe_seed: int, probe_count: int) -> float:
    """Largest exact single-draw gradient variance over a probe grid.

    For a finite batch the variance of the uniformly drawn, batch-scaled
    sample is computable in closed form at any point; the regularizer
    cancels.  The probe grid is the origin plus seeded standard-normal
    points, so the estimate is deterministic.
    """
    n, m, p = features.shape
    if m == 0:
        return 0.0
    rng = np.random.default_rng(probe_seed)
    grid = [np.zeros(p)] + [rng.standard_normal(p) for _ in range(probe_count)]
    worst = 0.0
    for x in grid:
        # labels enter only through the sign of z; probe both label values.
        for sign in (-1.0, 1.0):
            z = sign * (features @ x)
            coef = -sign * _sigmoid(-z)
            g = coef[:, :, None] * features
            total = g.sum(axis=1, keepdims=True)
            dev = m * g - total
            var = np.einsum("imp,imp->i", dev, dev) / m
            worst = max(worst, float(var.max()))
    return worst


def logistic_oracle(
    features: np.ndarray,
    labels: np.ndarray,
    lam: float,
    probe_seed: int = 0,
    probe_count: int = 8,
) -> LogisticOracle:
    """Build a logistic-minibatch oracle from raw per-agent batches.

    ``features`` has shape (n, m, d) and is augmented here with a ones
    column for the bias; ``labels`` has shape (n, m) with entries in
    {-1, +1}.  ``mu`` is the regularizer modulus ``lam/n``; ``ell`` adds
    the worst-case curvature of a local batch; ``sigma_sq`` is estimated
    from a probe grid (see module docstring for the caveat).
    """
    features = np.array(features, dtype=float)
    labels = np.array(labels, dtype=float)
    if features.ndim != 3:
        raise ValueError(f"features must have shape (n, m, d), got {features.shape}")
    if labels.shape != features.shape[:2]:
        raise ValueError(f"labels shape {labels.shape} does not match features {features.shape}")
    if labels.size and not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if lam <= 0.0:
        raise ValueError("regularizer lam must be positive")
    n, m, _ = features.shape
    aug = np.concatenate([features, np.ones((n, m, 1))], axis=2)
    mu = lam / n
    if m:
        sq = np.einsum("imp,imp->im", aug, aug)
        ell = mu + m * float(sq.max()) / 4.0
    else:
        ell = mu
    sigma_sq = _estimate_logistic_variance(aug, probe_seed, probe_count)
    aug.flags.writeable = False
    labels.flags.writeable = False
    return LogisticOracle(aug, labels, float(lam), mu, ell, sigma_sq)


def load_labeled_csv(path):
    """Rows of ``label,f1,...,fk`` into a feature matrix and label vector."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read labeled CSV {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise ConfigError(f"labeled CSV needs a label plus at least one feature, got {raw.shape[1]} columns")
    labels = raw[:, 0]
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ConfigError("labels in CSV must be -1 or +1")
    return raw[:, 1:], labels


def partition_batches(features: np.ndarray, labels: np.ndarray, n: int):
    """Contiguous split into ``n`` equal local batches; order preserved."""
    total = features.shape[0]
    if n < 1:
        raise ConfigError("agent count must be positive")
    if total == 0 or total % n != 0:
        raise ConfigError(f"{total} rows cannot be split into {n} equal batches")
    m = total // n
    return features.reshape(n, m, -1), labels.reshape(n, m)


def logistic_oracle_from_csv(path, n: int, lam: float, probe_seed: int = 0) -> LogisticOracle:
    feats, labels = load_labeled_csv(path)
    per_agent_feats, per_agent_labels = partition_batches(feats, labels, n)
    return logistic_oracle(per_agent_feats, per_agent_labels, lam, probe_seed=probe_seed)


def two_class_gaussian_data(samples: int, dim: int, separation: float, seed: int):
    """Balanced two-class Gaussian data, shuffled with the given seed.

    Class ``y = +-1`` draws features from ``N(y * offset, I)`` where the
    offset direction is seeded and has norm ``separation``.
    """
    if samples % 2 != 0:
        raise ValueError("sample count must be even for balanced classes")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dim)
    direction *= separation / np.linalg.norm(direction)
    half = samples // 2
    feats = np.vstack(
        [
            rng.standard_normal((half, dim)) + direction,
            rng.standard_normal((half, dim)) - direction,
        ]
    )
    labels = np.concatenate([np.ones(half), -np.ones(half)])
    order = rng.permutation(samples)
    return feats[order], labels[order]


def classification_accuracy(x: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of samples whose sign matches; ``features`` raw (no bias
    column), with the bias read from the last coordinate of ``x``."""
    x = np.asarray(x, dtype=float)
    scores = features @ x[:-1] + x[-1]
    return float(np.mean(np.sign(scores) * labels > 0))
