"""Iteration engine: the two-matrix gradient-tracking update, its
deterministic full-gradient variant, and centralized baselines.

One distributed iteration is

    x[k+1] = A x[k] - alpha * y[k]
    y[k+1] = B y[k] + g(x[k+1]) - g(x[k])

applied column-by-column for p > 1, with ``y[0] = g(x[0])``.  The column
sums of ``y`` then equal the column sums of the latest sampled gradients
at every iteration; the engine checks this identity each step and refuses
to continue when it breaks, since that can only mean a broken engine or
non-finite arithmetic.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DivergenceError, InvariantViolationError
from .spectral import SpectralProfile
from .weights import WeightPair

__all__ = [
    "ALGORITHMS",
    "RunConfig",
    "NetworkState",
    "TraceRecord",
    "MonteCarloTrace",
    "agent_streams",
    "init_state",
    "step",
    "iterate_states",
    "iterate_centralized",
    "run",
    "monte_carlo_t",
    "tracking_deviation",
    "tracking_tolerance",
    "write_trace",
]

ALGORITHMS = ("s-ab", "ab", "centralized-gd", "centralized-sgd")
X0_RULES = ("zeros", "gaussian")


@dataclass(frozen=True)
class RunConfig:
    """Step size, horizon, seeding, and initialization for one run."""

    alpha: float
    iterations: int
    seed: object = 0  # int or np.random.SeedSequence
    x0: str = "zeros"
    x0_scale: float = 1.0
    algorithm: str = "s-ab"
    record_every: int = 1

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError(f"step size must be positive, got {self.alpha}")
        if self.iterations < 1:
            raise ValueError(f"iteration count must be at least 1, got {self.iterations}")
        if self.x0 not in X0_RULES:
            raise ValueError(f"unknown x0 rule {self.x0!r}, expected one of {X0_RULES}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Stacked per-agent estimates, trackers, and last sampled gradients."""

    x: np.ndarray
    y: np.ndarray
    g_prev: np.ndarray
    k: int


@dataclass(frozen=True)
class TraceRecord:
    k: int
    consensus_err: float
    opt_gap: float
    tracking_err: float
    residual: float
    global_loss: float


@dataclass(frozen=True, eq=False)
class MonteCarloTrace:
    """Recorded iterations and the across-run average of the three error
    components (consensus, optimality gap, tracking)."""

    ks: np.ndarray
    t: np.ndarray  # shape (len(ks), 3)


def agent_streams(seed, n: int):
    """One initialization stream plus one independent stream per agent.

    A single master seed spawns child streams so that runs are
    reproducible and agents' noises are mutually independent.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(n + 1)
    return np.random.default_rng(children[0]), [np.random.default_rng(c) for c in children[1:]]


def tracking_deviation(state: NetworkState) -> float:
    """Max-norm gap between column sums of the trackers and of the last
    sampled gradients; zero in exact arithmetic."""
    return float(np.max(np.abs(state.y.sum(axis=0) - state.g_prev.sum(axis=0))))


def tracking_tolerance(g: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(g))))


def _initial_x(oracle, cfg: RunConfig, init_rng: np.random.Generator, shape) -> np.ndarray:
    if cfg.x0 == "zeros":
        return np.zeros(shape)
    return cfg.x0_scale * init_rng.standard_normal(shape)


def _gradients(oracle, cfg: RunConfig, x_rows: np.ndarray, rngs) -> np.ndarray:
    if cfg.algorithm == "ab":
        return oracle.exact_gradient_rows(x_rows)
    return oracle.sample_gradient_rows(x_rows, rngs)


def init_state(oracle, pair: WeightPair, cfg: RunConfig, init_rng=None, agent_rngs=None) -> NetworkState:
    """State at k = 0: configured x, sampled gradients, trackers equal to
    those gradients (which makes the tracking identity hold by
    construction)."""
    if pair.n != oracle.n:
        raise ValueError(f"weight pair is {pair.n}x{pair.n} but oracle has {oracle.n} agents")
    if init_rng is None or agent_rngs is None:
        init_rng, agent_rngs = agent_streams(cfg.seed, oracle.n)
    x = _initial_x(oracle, cfg, init_rng, (oracle.n, oracle.p))
    g = _gradients(oracle, cfg, x, agent_rngs)
    return NetworkState(x=x, y=g.copy(), g_prev=g, k=0)


def step(state: NetworkState, oracle, pair: WeightPair, cfg: RunConfig, rngs) -> NetworkState:
    """One iteration of the distributed update; raises on divergence or a
    broken tracking identity."""
    # Overflow to inf is expected above the stability threshold and is
    # caught by the finiteness checks rather than warned about.
    with np.errstate(over="ignore", invalid="ignore"):
        x_next = pair.a @ state.x - cfg.alpha * state.y
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(state.k + 1)
        g_next = _gradients(oracle, cfg, x_next, rngs)
        # Grouping (B y - g_prev) + g_next keeps the n = 1 reduction to
        # plain SGD bitwise exact, since then B y == g_prev.
        y_next = (pair.b @ state.y - state.g_prev) + g_next
    if not np.all(np.isfinite(y_next)):
        raise DivergenceError(state.k + 1)
    nxt = NetworkState(x=x_next, y=y_next, g_prev=g_next, k=state.k + 1)
    if tracking_deviation(nxt) > tracking_tolerance(g_next):
        raise InvariantViolationError(
            f"tracking identity violated at iteration {nxt.k}: "
            f"deviation {tracking_deviation(nxt):.3e}"
        )
    return nxt


def iterate_states(oracle, pair: WeightPair, cfg: RunConfig):
    """Yield the network state at k = 0, 1, ..., iterations for the
    distributed algorithms; the harness uses this to evaluate at epoch
    boundaries."""
    init_rng, rngs = agent_streams(cfg.seed, oracle.n)
    state = init_state(oracle, pair, cfg, init_rng, rngs)
    yield state
    while state.k < cfg.iterations:
        state = step(state, oracle, pair, cfg, rngs)
        yield state


def iterate_centralized(oracle, cfg: RunConfig):
    """Yield ``(k, x)`` for the centralized baselines.

    Full-gradient descent averages the exact local gradients; the
    stochastic baseline draws a uniformly random agent and one sample from
    it, which is unbiased for the global gradient.  The agent-choice
    stream is separate from the agents' oracle streams.
    """
    init_rng, rngs = agent_streams(cfg.seed, oracle.n)
    x = _initial_x(oracle, cfg, init_rng, (oracle.p,))
    yield 0, x
    for k in range(1, cfg.iterations + 1):
        if cfg.algorithm == "centralized-gd":
            rows = np.broadcast_to(x, (oracle.n, oracle.p))
            g = oracle.exact_gradient_rows(rows).mean(axis=0)
        else:
            agent = int(init_rng.integers(oracle.n))
            g = oracle.sample_gradient(agent, x, rngs[agent]).value
        with np.errstate(over="ignore", invalid="ignore"):
            x = x - cfg.alpha * g
        if not np.all(np.isfinite(x)):
            raise DivergenceError(k)
        yield k, x


def _distributed_record(state, oracle, profile: SpectralProfile, x_star) -> TraceRecord:
    pi_r = profile.pi_r
    pi_c = profile.pi_c
    x_hat = pi_r @ state.x
    dx = state.x - x_hat[None, :]
    consensus = float(pi_r @ np.einsum("ip,ip->i", dx, dx))
    gap = x_hat - x_star
    opt_gap = float(gap @ gap)
    dy = state.y - pi_c[:, None] * state.y.sum(axis=0)[None, :]
    tracking = float(np.sum(np.einsum("ip,ip->i", dy, dy) / pi_c))
    dr = state.x - x_star[None, :]
    residual = float(np.mean(np.einsum("ip,ip->i", dr, dr)))
    return TraceRecord(state.k, consensus, opt_gap, tracking, residual, oracle.global_loss(x_hat))


def _check_gradient_dispersion(state, oracle, profile: SpectralProfile) -> None:
    # The mean of local gradients can differ from the gradient at the
    # weighted average by at most (ell / sqrt(n)) times the consensus
    # spread, both in plain 2-norms; violation means a broken oracle.
    x_hat = profile.pi_r @ state.x
    h = oracle.exact_gradient_rows(state.x).mean(axis=0)
    rows = np.broadcast_to(x_hat, (oracle.n, oracle.p))
    grad_at_hat = oracle.exact_gradient_rows(rows).mean(axis=0)
    lhs = float(np.linalg.norm(h - grad_at_hat))
    rhs = oracle.ell / np.sqrt(oracle.n) * float(np.linalg.norm(state.x - x_hat[None, :]))
    if lhs > rhs * (1.0 + 1e-9) + 1e-10:
        raise InvariantViolationError(
            f"gradient dispersion bound violated at iteration {state.k}: {lhs:.3e} > {rhs:.3e}"
        )


def _run_distributed(oracle, pair, profile, cfg, x_star, check_dispersion: bool):
    records = []
    for state in iterate_states(oracle, pair, cfg):
        if state.k % cfg.record_every == 0 or state.k == cfg.iterations:
            records.append(_distributed_record(state, oracle, profile, x_star))
            if check_dispersion:
                _check_gradient_dispersion(state, oracle, profile)
    return records


def _centralized_record(k, x, oracle, x_star) -> TraceRecord:
    # Squared metrics can overflow to inf on a run that is about to abort
    # as divergent; stable runs are nowhere near the float range.
    with np.errstate(over="ignore", invalid="ignore"):
        gap = x - x_star
        opt_gap = float(gap @ gap)
        return TraceRecord(k, 0.0, opt_gap, 0.0, opt_gap, oracle.global_loss(x))


def _run_centralized(oracle, cfg, x_star):
    records = []
    for k, x in iterate_centralized(oracle, cfg):
        if k % cfg.record_every == 0 or k == cfg.iterations:
            records.append(_centralized_record(k, x, oracle, x_star))
    return records


def run(oracle, pair: WeightPair, profile: SpectralProfile, cfg: RunConfig, x_star=None, check_dispersion: bool = True):
    """Execute a full run and return one trace record per recorded
    iteration (k = 0, every ``record_every`` steps, and the final step).

    Deterministic per seed.  ``x_star`` may be passed to avoid re-solving
    for the minimizer on repeated runs.
    """
    if x_star is None:
        x_star = oracle.global_minimizer()
    x_star = np.asarray(x_star, dtype=float)
    if cfg.algorithm in ("centralized-gd", "centralized-sgd"):
        return _run_centralized(oracle, cfg, x_star)
    return _run_distributed(oracle, pair, profile, cfg, x_star, check_dispersion)


def monte_carlo_t(oracle, pair: WeightPair, profile: SpectralProfile, cfg: RunConfig, runs: int) -> MonteCarloTrace:
    """Average the three error components over independent seeded runs.

    Run r uses the r-th spawned child of the master seed, so the ensemble
    is reproducible and runs are mutually independent (and could execute
    concurrently; they share no mutable state).
    """
    if runs < 1:
        raise ValueError("need at least one run")
    ss = cfg.seed if isinstance(cfg.seed, np.random.SeedSequence) else np.random.SeedSequence(cfg.seed)
    children = ss.spawn(runs)
    x_star = oracle.global_minimizer()
    total = None
    ks = None
    for child in children:
        records = run(oracle, pair, profile, dataclasses.replace(cfg, seed=child), x_star=x_star)
        t = np.array([[r.consensus_err, r.opt_gap, r.tracking_err] for r in records])
        if total is None:
            total = t
            ks = np.array([r.k for r in records])
        else:
            total += t
    return MonteCarloTrace(ks=ks, t=total / runs)


def write_trace(records, path) -> None:
    """Trace CSV with floats at 17 significant digits for exact
    round-tripping."""
    lines = ["k,consensus_err,opt_gap,tracking_err,residual,global_loss"]
    for r in records:
        lines.append(
            f"{r.k},{r.consensus_err:.17g},{r.opt_gap:.17g},"
            f"{r.tracking_err:.17g},{r.residual:.17g},{r.global_loss:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
