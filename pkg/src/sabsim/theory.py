"""Convergence theory: the 3x3 error system and its guarantees.

The expected vector of (consensus error, optimality gap, tracking error)
obeys a componentwise linear recursion

    t[k+1] <= G(alpha) t[k] + b(alpha)

whose entries are explicit in the network's spectral profile and the cost
moduli.  For any step size below :func:`alpha_max` the matrix ``G`` has
spectral radius below 1 -- certified constructively by a positive witness
vector ``delta`` with ``G delta < delta`` -- and the errors converge
geometrically into the ball ``(I - G)^{-1} b``, which is zero when the
gradient noise is zero.

All constants are implemented exactly as the theory states them, even
where conservative; this module verifies the guarantee, it does not
tighten it.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ConvergenceError, GateError
from .spectral import SpectralProfile

__all__ = [
    "SystemConstants",
    "TheoryBundle",
    "WitnessResult",
    "system_constants",
    "alpha_max",
    "build_system",
    "spectral_radius_3x3",
    "positive_witness",
    "steady_state_bound",
    "theory_bundle",
]


@dataclass(frozen=True)
class SystemConstants:
    """The fifteen scalars of the error recursion plus the contraction
    factors they were derived under."""

    sigma_a: float
    sigma_b: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    a7: float
    a8: float
    a9: float
    a10: float
    b1: float
    b2: float
    b3: float
    b4: float
    b5: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class WitnessResult:
    """Outcome of the positive-witness check ``G delta < delta``."""

    delta: np.ndarray
    satisfied: bool
    violated_component: object  # int index or None


@dataclass(frozen=True, eq=False)
class TheoryBundle:
    alpha_max: float
    g_alpha: np.ndarray
    b_alpha: np.ndarray
    rho: float
    steady_state: object  # np.ndarray, or None when rho >= 1
    constants: SystemConstants


def _validate(profile: SpectralProfile, mu: float, ell: float, sigma_sq: float = 0.0) -> None:
    if not 0.0 < mu <= ell:
        raise ValueError(f"need 0 < mu <= ell, got mu={mu}, ell={ell}")
    if sigma_sq < 0.0:
        raise ValueError("sigma_sq must be nonnegative")
    if not (0.0 <= profile.sigma_a < 1.0 and 0.0 <= profile.sigma_b < 1.0):
        raise GateError(
            f"contraction factors must lie in [0, 1), got "
            f"sigma_a={profile.sigma_a}, sigma_b={profile.sigma_b}"
        )


def system_constants(profile: SpectralProfile, mu: float, ell: float, sigma_sq: float) -> SystemConstants:
    """Evaluate the recursion constants from the spectral profile and the
    cost moduli, verbatim from the theory's table."""
    _validate(profile, mu, ell, sigma_sq)
    n = profile.n
    pr_max = float(profile.pi_r.max())
    pr_min = float(profile.pi_r.min())
    pc_max = float(profile.pi_c.max())
    pc_min = float(profile.pi_c.min())
    pc_sq = float(profile.pi_c @ profile.pi_c)
    pr_sq = float(profile.pi_r @ profile.pi_r)
    prc = profile.pi_r_dot_pi_c
    sa2 = 1.0 - profile.sigma_a**2
    sb2 = 1.0 - profile.sigma_b**2
    l2 = ell * ell
    return SystemConstants(
        sigma_a=profile.sigma_a,
        sigma_b=profile.sigma_b,
        a1=8.0 * pr_max * n * pc_sq * l2 / (pr_min * sa2),
        a2=8.0 * pr_max * n * n * pc_sq * l2 / sa2,
        a3=8.0 * pr_max * pc_max / sa2,
        a4=3.0 * prc * l2 / (mu * pr_min),
        a5=mu * n * prc / 2.0,
        a6=3.0 * pr_sq * pc_max / (mu * n * prc),
        a7=16.0 * l2 / (pc_min * pr_min * sb2),
        a8=16.0 * n * l2 * l2 * pc_sq / (pr_min * pc_min * sb2),
        a9=16.0 * n * n * l2 * l2 * pc_sq / (pc_min * sb2),
        a10=16.0 * pc_max * l2 / (pc_min * sb2),
        b1=8.0 * pr_max * n * pc_sq * sigma_sq / sa2,
        b2=3.0 * prc * prc * n * sigma_sq / 2.0,
        b3=4.0 * n * sigma_sq / pc_min,
        b4=2.0 * n * ell * sigma_sq / pc_min,
        b5=16.0 * n * l2 * pc_sq * sigma_sq / (pr_min * pc_min * sb2),
    )


def _witness_vector(constants: SystemConstants) -> np.ndarray:
    c = constants
    sb2 = 1.0 - c.sigma_b**2
    return np.array(
        [
            1.0,
            (2.0 / c.a5) * (c.a4 + 4.0 * c.a6 * c.a7 / sb2),
            4.0 * c.a7 / sb2,
        ]
    )


def alpha_max(profile: SpectralProfile, mu: float, ell: float) -> float:
    """Largest certified step size.

    The minimum of the three closed-form expressions in the network's
    spectral quantities and the condition number ``kappa = ell / mu``,
    intersected with the exact thresholds under which the explicit
    witness vector satisfies ``G delta < delta``.  For well-mixed
    networks the closed forms are the binding ones; for contraction
    factors close to 1 they overestimate the certified range (their
    derivation majorizes a ``1/(1 - sigma_b^2)^2`` term by a
    ``1/(1 - sigma_b^2)`` one), so the exact thresholds take over there.
    Always positive for a valid profile; the guarantee applies strictly
    below the returned value.
    """
    _validate(profile, mu, ell)
    n = profile.n
    prc = profile.pi_r_dot_pi_c
    pr_norm = float(np.linalg.norm(profile.pi_r))
    pc_norm = float(np.linalg.norm(profile.pi_c))
    kappa = ell / mu
    sa2 = 1.0 - profile.sigma_a**2
    sb2 = 1.0 - profile.sigma_b**2
    n_pc2 = n * pc_norm * pc_norm
    first = 1.0 / (ell * n * prc)
    second = (
        sa2
        * np.sqrt(sb2)
        * prc
        / (ell * kappa * pr_norm * pc_norm * np.sqrt(384.0 * profile.h_r * profile.h_c * (n_pc2 + 64.0)))
    )
    third = sb2 * prc / (
        ell * kappa * pr_norm * pc_norm * np.sqrt(24.0 * (n_pc2 + 48.0 * profile.h_c))
    )
    c = system_constants(profile, mu, ell, sigma_sq=0.0)
    delta = _witness_vector(c)
    consensus_exact = np.sqrt(0.5 * sa2 / (c.a1 * delta[0] + c.a2 * delta[1] + c.a3 * delta[2]))
    tracking_exact = np.sqrt(c.a7 / (c.a8 * delta[0] + c.a9 * delta[1] + c.a10 * delta[2]))
    return float(min(first, second, third, consensus_exact, tracking_exact))


def build_system(constants: SystemConstants, alpha: float):
    """Assemble ``G(alpha)`` and ``b(alpha)``; ``alpha = 0`` is allowed so
    the limiting entries can be inspected directly."""
    if alpha < 0.0:
        raise ValueError(f"step size must be nonnegative, got {alpha}")
    c = constants
    a2_sq = alpha * alpha
    g = np.array(
        [
            [(1.0 + c.sigma_a**2) / 2.0 + c.a1 * a2_sq, c.a2 * a2_sq, c.a3 * a2_sq],
            [c.a4 * alpha, 1.0 - c.a5 * alpha, c.a6 * alpha],
            [c.a7 + c.a8 * a2_sq, c.a9 * a2_sq, (1.0 + c.sigma_b**2) / 2.0 + c.a10 * a2_sq],
        ]
    )
    b = np.array([c.b1 * a2_sq, c.b2 * a2_sq, c.b3 + c.b4 * alpha + c.b5 * a2_sq])
    return g, b


def _char_poly_max_root(g: np.ndarray) -> float:
    # Characteristic cubic assembled directly from the entries (trace,
    # sum of principal 2x2 minors, determinant), not from an eigensolve.
    tr = g[0, 0] + g[1, 1] + g[2, 2]
    m2 = (
        g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        + g[0, 0] * g[2, 2] - g[0, 2] * g[2, 0]
        + g[1, 1] * g[2, 2] - g[1, 2] * g[2, 1]
    )
    det = (
        g[0, 0] * (g[1, 1] * g[2, 2] - g[1, 2] * g[2, 1])
        - g[0, 1] * (g[1, 0] * g[2, 2] - g[1, 2] * g[2, 0])
        + g[0, 2] * (g[1, 0] * g[2, 1] - g[1, 1] * g[2, 0])
    )
    roots = np.roots([1.0, -tr, m2, -det])
    return float(np.max(np.abs(roots)))


def spectral_radius_3x3(g: np.ndarray, tol: float = 1e-13, max_iter: int = 20000) -> float:
    """Spectral radius of a nonnegative 3x3 matrix.

    Power iteration with a positive start vector; for a nonnegative
    matrix the Perron root dominates, so the Rayleigh estimates converge.
    The result is cross-checked against the largest root modulus of the
    characteristic cubic; if the iteration stalls (degenerate or
    non-primitive matrix) the polynomial root is returned instead.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("matrix entries must be finite")
    poly_root = _char_poly_max_root(g)
    v = np.full(3, 1.0 / 3.0)
    lam_prev = 0.0
    for _ in range(max_iter):
        w = g @ v
        norm = float(np.max(np.abs(w)))
        if norm == 0.0:
            return 0.0
        lam = float(v @ w) / float(v @ v)
        v = w / norm
        if abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            # Cross-check against the polynomial root.  The tolerance is
            # loose because a repeated root is conditioned like eps^(1/3);
            # a genuine mismatch means the iteration latched onto a
            # non-dominant direction.
            if abs(abs(lam) - poly_root) > 1e-4 * max(1.0, poly_root):
                return poly_root
            return abs(lam)
        lam_prev = lam
    return poly_root


def positive_witness(g: np.ndarray, alpha: float, constants: SystemConstants) -> WitnessResult:
    """Construct the explicit witness vector and verify ``G delta < delta``.

    The witness is ``delta = (1, (2/a5)(a4 + 4 a6 a7 / (1 - sigma_b^2)),
    4 a7 / (1 - sigma_b^2))``; success certifies spectral radius below 1.
    Failure names the violated component, which flags either a step size
    beyond the certified range or a broken constants table.
    """
    if not alpha > 0.0:
        raise ValueError("step size must be positive")
    delta = _witness_vector(constants)
    image = np.asarray(g, dtype=float) @ delta
    bad = np.nonzero(~(image < delta))[0]
    if bad.size:
        return WitnessResult(delta=delta, satisfied=False, violated_component=int(bad[0]))
    return WitnessResult(delta=delta, satisfied=True, violated_component=None)


def steady_state_bound(g_alpha: np.ndarray, b_alpha: np.ndarray) -> np.ndarray:
    """Solve ``(I - G) s = b`` for the limiting error ball.

    Requires spectral radius below 1; then the solution equals the
    convergent Neumann series and is componentwise nonnegative (tiny
    negative roundoff is clipped).
    """
    g_alpha = np.asarray(g_alpha, dtype=float)
    b_alpha = np.asarray(b_alpha, dtype=float)
    rho = spectral_radius_3x3(g_alpha)
    if rho >= 1.0:
        raise GateError(f"error system is not contractive: spectral radius {rho:.17g} >= 1")
    s = np.linalg.solve(np.eye(3) - g_alpha, b_alpha)
    if np.any(s < -1e-10 * max(1.0, float(np.max(np.abs(b_alpha))))):
        raise ConvergenceError(f"steady-state solve produced negative components: {s}")
    return np.maximum(s, 0.0)


def theory_bundle(
    profile: SpectralProfile,
    mu: float,
    ell: float,
    sigma_sq: float,
    alpha: float,
) -> TheoryBundle:
    """Everything the theory says about a configured run.

    ``steady_state`` is None when the error system is not contractive at
    this step size (possible only above ``alpha_max``; the bound below it
    is a guarantee)."""
    constants = system_constants(profile, mu, ell, sigma_sq)
    bound = alpha_max(profile, mu, ell)
    g, b = build_system(constants, alpha)
    rho = spectral_radius_3x3(g)
    steady = steady_state_bound(g, b) if rho < 1.0 else None
    return TheoryBundle(
        alpha_max=bound,
        g_alpha=g,
        b_alpha=b,
        rho=rho,
        steady_state=steady,
        constants=constants,
    )
