"""Perron vectors, weighted norms, and contraction factors.

A primitive row-stochastic matrix ``A`` has a positive left Perron vector
``pi_r`` at eigenvalue 1 (normalized to sum 1), and a primitive
column-stochastic matrix ``B`` has a positive right Perron vector ``pi_c``.
These induce the weighted Euclidean norms

    |x|_r = || diag(sqrt(pi_r)) x ||_2
    |x|_c = || diag(sqrt(pi_c))^{-1} x ||_2

under which ``A`` and ``B`` contract disagreement.  The contraction
factors are the second-largest singular values of the similarity-scaled
matrices

    sigma_a = s2( diag(sqrt(pi_r)) A diag(sqrt(pi_r))^{-1} )
    sigma_b = s2( diag(sqrt(pi_c))^{-1} B diag(sqrt(pi_c)) )

and both are strictly below 1 for primitive stochastic matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvariantViolationError
from .weights import WeightPair

__all__ = [
    "SpectralProfile",
    "perron_left",
    "perron_right",
    "weighted_norm_r",
    "weighted_norm_c",
    "matrix_norm_r",
    "matrix_norm_c",
    "contraction_factor_a",
    "contraction_factor_b",
    "a_infinity",
    "b_infinity",
    "spectral_profile",
]

_SUCCESSIVE_TOL = 1e-14
_RESIDUAL_TOL = 1e-12
_ZERO_SNAP = 1e-12


def _iteration_cap(n: int) -> int:
    # Primitivity gives geometric convergence; the cap catches bad inputs.
    return int(100 * n * math.log(max(n, 2))) + 1000


def _check_weights(pi: np.ndarray, name: str) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {pi.shape}")
    if np.any(pi <= 0.0):
        raise ValueError(f"{name} must have strictly positive entries")
    return pi


def _power_start(n: int) -> np.ndarray:
    # A non-uniform positive start: the uniform vector is an exact fixed
    # point of doubly-stochastic but periodic matrices (e.g. permutation
    # cycles), which would mask non-primitivity.
    v = np.arange(1.0, n + 1.0)
    return v / v.sum()


def perron_left(a: np.ndarray, tol: float = _SUCCESSIVE_TOL) -> np.ndarray:
    """Left Perron vector of a primitive row-stochastic matrix.

    Power iteration on the transpose with L1 renormalization each step.
    Returns ``pi`` with ``pi @ a == pi``, ``pi.sum() == 1`` and all entries
    positive; the fixed-point residual is at most 1e-12 in the max norm.

    Raises
    ------
    ConvergenceError
        If the iteration cap is hit, which signals a non-primitive input
        (e.g. a periodic or reducible matrix).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    v = _power_start(n)
    for _ in range(_iteration_cap(n)):
        w = a.T @ v
        w /= w.sum()
        if np.max(np.abs(w - v)) <= tol:
            v = w
            break
        v = w
    else:
        raise ConvergenceError("left Perron iteration did not converge; matrix is likely not primitive")
    if np.max(np.abs(a.T @ v - v)) > _RESIDUAL_TOL:
        raise ConvergenceError("left Perron residual above tolerance; matrix is likely not primitive")
    if np.any(v <= 0.0):
        raise ConvergenceError("left Perron vector has nonpositive entries; matrix is likely not primitive")
    return v


def perron_right(b: np.ndarray, tol: float = _SUCCESSIVE_TOL) -> np.ndarray:
    """Right Perron vector of a primitive column-stochastic matrix.

    Same scheme as :func:`perron_left`, iterating ``v <- b v``.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    v = _power_start(n)
    for _ in range(_iteration_cap(n)):
        w = b @ v
        w /= w.sum()
        if np.max(np.abs(w - v)) <= tol:
            v = w
            break
        v = w
    else:
        raise ConvergenceError("right Perron iteration did not converge; matrix is likely not primitive")
    if np.max(np.abs(b @ v - v)) > _RESIDUAL_TOL:
        raise ConvergenceError("right Perron residual above tolerance; matrix is likely not primitive")
    if np.any(v <= 0.0):
        raise ConvergenceError("right Perron vector has nonpositive entries; matrix is likely not primitive")
    return v


def weighted_norm_r(x: np.ndarray, pi_r: np.ndarray) -> float:
    """``sqrt(sum_i pi_r[i] * x_i^2)``.

    Accepts a length-n vector or an (n, p) matrix of stacked per-agent
    rows, in which case each row contributes its squared Euclidean norm.
    """
    pi = _check_weights(pi_r, "pi_r")
    x = np.asarray(x, dtype=float)
    sq = x * x
    if sq.ndim == 2:
        sq = sq.sum(axis=1)
    return float(np.sqrt(pi @ sq))


def weighted_norm_c(x: np.ndarray, pi_c: np.ndarray) -> float:
    """``sqrt(sum_i x_i^2 / pi_c[i])``; the inverse-weighted mirror of
    :func:`weighted_norm_r`, with the same vector/matrix convention."""
    pi = _check_weights(pi_c, "pi_c")
    x = np.asarray(x, dtype=float)
    sq = x * x
    if sq.ndim == 2:
        sq = sq.sum(axis=1)
    return float(np.sqrt(np.sum(sq / pi)))


def matrix_norm_r(x: np.ndarray, pi_r: np.ndarray) -> float:
    """Matrix norm induced by the pi_r-weighted vector norm.

    Equals the spectral norm of ``diag(sqrt(pi_r)) X diag(sqrt(pi_r))^{-1}``.
    """
    pi = _check_weights(pi_r, "pi_r")
    d = np.sqrt(pi)
    scaled = (d[:, None] * np.asarray(x, dtype=float)) / d[None, :]
    return float(np.linalg.svd(scaled, compute_uv=False)[0])


def matrix_norm_c(x: np.ndarray, pi_c: np.ndarray) -> float:
    """Matrix norm induced by the pi_c-weighted vector norm.

    Equals the spectral norm of ``diag(sqrt(pi_c))^{-1} X diag(sqrt(pi_c))``.
    """
    pi = _check_weights(pi_c, "pi_c")
    d = np.sqrt(pi)
    scaled = (np.asarray(x, dtype=float) * d[None, :]) / d[:, None]
    return float(np.linalg.svd(scaled, compute_uv=False)[0])


def _second_singular_value(scaled: np.ndarray, what: str) -> float:
    s = np.linalg.svd(scaled, compute_uv=False)
    sigma = float(s[1]) if s.shape[0] >= 2 else 0.0
    if sigma <= _ZERO_SNAP:
        # Complete-graph case computes to within roundoff of 0; report exactly 0
        # to avoid spurious negative-tolerance failures downstream.
        return 0.0
    if sigma >= 1.0 - 1e-12:
        raise InvariantViolationError(
            f"{what} = {sigma:.17g} is not strictly below 1; "
            "broken primitivity or a wrong Perron vector"
        )
    return sigma


def contraction_factor_a(a: np.ndarray, pi_r: np.ndarray) -> float:
    """Contraction factor of the estimate-mixing matrix.

    Second-largest singular value of
    ``diag(sqrt(pi_r)) A diag(sqrt(pi_r))^{-1}``, computed by full dense
    SVD (desk scale).  Strictly below 1 for primitive row-stochastic
    inputs with the matching left Perron vector.
    """
    pi = _check_weights(pi_r, "pi_r")
    d = np.sqrt(pi)
    scaled = (d[:, None] * np.asarray(a, dtype=float)) / d[None, :]
    return _second_singular_value(scaled, "sigma_a")


def contraction_factor_b(b: np.ndarray, pi_c: np.ndarray) -> float:
    """Contraction factor of the tracker-mixing matrix.

    Second-largest singular value of
    ``diag(sqrt(pi_c))^{-1} B diag(sqrt(pi_c))``.
    """
    pi = _check_weights(pi_c, "pi_c")
    d = np.sqrt(pi)
    scaled = (np.asarray(b, dtype=float) * d[None, :]) / d[:, None]
    return _second_singular_value(scaled, "sigma_b")


def a_infinity(pi_r: np.ndarray) -> np.ndarray:
    """Limit of ``A^k``: the rank-one matrix ``ones @ pi_r^T``."""
    pi = _check_weights(pi_r, "pi_r")
    return np.outer(np.ones(pi.shape[0]), pi)


def b_infinity(pi_c: np.ndarray) -> np.ndarray:
    """Limit of ``B^k``: the rank-one matrix ``pi_c @ ones^T``."""
    pi = _check_weights(pi_c, "pi_c")
    return np.outer(pi, np.ones(pi.shape[0]))


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Perron vectors, contraction factors, and the derived scalars that the
    convergence theory consumes."""

    pi_r: np.ndarray
    pi_c: np.ndarray
    sigma_a: float
    sigma_b: float
    pi_r_dot_pi_c: float
    h_r: float
    h_c: float

    @property
    def n(self) -> int:
        return self.pi_r.shape[0]


def spectral_profile(pair: WeightPair) -> SpectralProfile:
    """Full spectral profile of a weight pair.

    Computes both Perron vectors, both contraction factors, and the
    derived scalars; checks the fixed-point residuals (1e-10 in max norm),
    strict positivity, and ``0 <= sigma < 1`` before returning.
    """
    pi_r = perron_left(pair.a)
    pi_c = perron_right(pair.b)
    sigma_a = contraction_factor_a(pair.a, pi_r)
    sigma_b = contraction_factor_b(pair.b, pi_c)
    if np.max(np.abs(pi_r @ pair.a - pi_r)) > 1e-10:
        raise InvariantViolationError("pi_r is not a fixed point of a within 1e-10")
    if np.max(np.abs(pair.b @ pi_c - pi_c)) > 1e-10:
        raise InvariantViolationError("pi_c is not a fixed point of b within 1e-10")
    pi_r = pi_r.copy()
    pi_c = pi_c.copy()
    pi_r.flags.writeable = False
    pi_c.flags.writeable = False
    return SpectralProfile(
        pi_r=pi_r,
        pi_c=pi_c,
        sigma_a=sigma_a,
        sigma_b=sigma_b,
        pi_r_dot_pi_c=float(pi_r @ pi_c),
        h_r=float(pi_r.max() / pi_r.min()),
        h_c=float(pi_c.max() / pi_c.min()),
    )
