"""Acceptance suite: executable checks of the package's core guarantees.

Each criterion is a standalone function returning ``(passed, detail)``;
:func:`run_criteria` drives them and prints one pass/fail line apiece.
The same functions back ``sabsim verify`` and the pytest acceptance
module.  Criteria with a stated runtime budget include the elapsed time
in their pass condition.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import engine, theory
from .graph import complete_digraph, random_nearest_neighbor_digraph
from .oracles import (
    classification_accuracy,
    logistic_oracle,
    partition_batches,
    random_quadratic,
    two_class_gaussian_data,
)
from .spectral import a_infinity, spectral_profile, matrix_norm_c, matrix_norm_r, weighted_norm_c, weighted_norm_r
from .weights import uniform_weights

__all__ = ["CriterionResult", "CRITERIA", "run_criteria"]


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} criterion {self.index} ({self.name}): {self.detail} [{self.seconds:.1f}s]"


def _graph_ensemble(count: int, seed: int):
    """Random strongly-connected digraphs with n in {3..30}."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(3, 31))
        k = int(rng.integers(1, n))
        g = random_nearest_neighbor_digraph(n, k, int(rng.integers(0, 2**31)))
        pair = uniform_weights(g)
        out.append((g, pair, spectral_profile(pair)))
    return out


def _quadratic_fixture(sigma_sq: float, balanced: bool = False):
    g = complete_digraph(10)
    pair = uniform_weights(g)
    profile = spectral_profile(pair)
    oracle = random_quadratic(
        10, 2, seed=42, eig_min=1.0, eig_max=1.3, center_scale=1.0,
        sigma_sq=sigma_sq, balanced_centers=balanced,
    )
    mu, ell, _ = oracle.effective_constants()
    alpha = theory.alpha_max(profile, mu, ell) / 2.0
    return pair, profile, oracle, alpha


def _logistic_fixture():
    feats, labels = two_class_gaussian_data(600, 10, separation=2.0, seed=11)
    batches = partition_batches(feats, labels, 10)
    oracle = logistic_oracle(batches[0], batches[1], lam=1.0)
    g = random_nearest_neighbor_digraph(10, 3, seed=5)
    pair = uniform_weights(g)
    return feats, labels, oracle, pair, spectral_profile(pair)


def criterion_contraction_suite():
    """Mixing contracts disagreement at the computed factors on 50 random
    graphs x 200 random vectors, within 1e-10 slack; runtime under 10 s."""
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    violations = 0
    worst = -np.inf
    for _, pair, profile in _graph_ensemble(50, seed=7):
        n = pair.n
        xs = rng.standard_normal((n, 200))
        ax = pair.a @ xs
        ainf_x = np.outer(np.ones(n), profile.pi_r @ xs)
        lhs = np.sqrt(profile.pi_r @ (ax - ainf_x) ** 2)
        rhs = profile.sigma_a * np.sqrt(profile.pi_r @ (xs - ainf_x) ** 2) + 1e-10
        violations += int(np.sum(lhs > rhs))
        worst = max(worst, float(np.max(lhs - rhs)))
        bx = pair.b @ xs
        binf_x = np.outer(profile.pi_c, xs.sum(axis=0))
        lhs_b = np.sqrt(np.sum((bx - binf_x) ** 2 / profile.pi_c[:, None], axis=0))
        rhs_b = (
            profile.sigma_b * np.sqrt(np.sum((xs - binf_x) ** 2 / profile.pi_c[:, None], axis=0))
            + 1e-10
        )
        violations += int(np.sum(lhs_b > rhs_b))
        worst = max(worst, float(np.max(lhs_b - rhs_b)))
    elapsed = time.perf_counter() - start
    passed = violations == 0 and elapsed < 10.0
    return passed, f"{violations} violations over 50 graphs x 200 vectors, worst slack {worst:.2e}"


def criterion_norm_identities():
    """The induced matrix norms of A, its limit, and the complement all
    equal 1 within 1e-8 on the graph ensemble; same for B."""
    worst = 0.0
    for _, pair, profile in _graph_ensemble(50, seed=7):
        n = pair.n
        ainf = a_infinity(profile.pi_r)
        binf = np.outer(profile.pi_c, np.ones(n))
        for m in (pair.a, ainf, np.eye(n) - ainf):
            worst = max(worst, abs(matrix_norm_r(m, profile.pi_r) - 1.0))
        for m in (pair.b, binf, np.eye(n) - binf):
            worst = max(worst, abs(matrix_norm_c(m, profile.pi_c) - 1.0))
    return worst <= 1e-8, f"worst |induced norm - 1| = {worst:.2e}"


def _max_tracking_ratio(oracle, pair, cfg):
    init_rng, rngs = engine.agent_streams(cfg.seed, oracle.n)
    state = engine.init_state(oracle, pair, cfg, init_rng, rngs)
    worst = engine.tracking_deviation(state) / engine.tracking_tolerance(state.g_prev)
    for _ in range(cfg.iterations):
        state = engine.step(state, oracle, pair, cfg, rngs)
        worst = max(worst, engine.tracking_deviation(state) / engine.tracking_tolerance(state.g_prev))
    return worst


def criterion_tracking_identity():
    """Column sums of the trackers equal column sums of the sampled
    gradients at every iteration of every run, within float accumulation."""
    pair, profile, oracle0, alpha = _quadratic_fixture(sigma_sq=0.0)
    ratios = [
        _max_tracking_ratio(
            oracle0, pair, engine.RunConfig(alpha=alpha, iterations=2000, seed=1, algorithm="ab")
        )
    ]
    _, _, oracle1, _ = _quadratic_fixture(sigma_sq=1.0)
    ratios.append(
        _max_tracking_ratio(
            oracle1, pair, engine.RunConfig(alpha=alpha, iterations=5000, seed=2, algorithm="s-ab")
        )
    )
    _, _, log_oracle, log_pair, _ = _logistic_fixture()
    ratios.append(
        _max_tracking_ratio(
            log_oracle, log_pair,
            engine.RunConfig(alpha=3e-4, iterations=2000, seed=3, algorithm="s-ab"),
        )
    )
    worst = max(ratios)
    return worst <= 1.0, f"worst deviation at {worst:.3f} of tolerance over 3 runs (9000 iterations)"


def _fit_final_decade(records, target=1e-10, decade=10.0):
    """Log-linear fit of the optimality gap over its last factor-of-ten of
    descent into ``target``; returns (reached, r_squared, monotone)."""
    ks = np.array([r.k for r in records], dtype=float)
    gaps = np.array([r.opt_gap for r in records], dtype=float)
    crossed = np.nonzero(gaps <= target)[0]
    if crossed.size == 0:
        return False, 0.0, False
    end = crossed[0]
    window = np.nonzero((gaps[: end + 1] <= decade * target) & (gaps[: end + 1] >= target))[0]
    if window.size < 3:
        return True, 0.0, False
    kw = ks[window]
    lw = np.log(gaps[window])
    slope, intercept = np.polyfit(kw, lw, 1)
    fitted = slope * kw + intercept
    ss_res = float(np.sum((lw - fitted) ** 2))
    ss_tot = float(np.sum((lw - lw.mean()) ** 2))
    r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    monotone = bool(np.all(np.diff(gaps[window]) <= 0))
    return True, r_sq, monotone


def criterion_linear_convergence():
    """Zero-noise recovery: the deterministic variant at half the certified
    step size reaches an optimality gap of 1e-10 within 20000 iterations
    with a cleanly geometric tail; runtime under 30 s."""
    start = time.perf_counter()
    pair, profile, oracle, alpha = _quadratic_fixture(sigma_sq=0.0)
    cfg = engine.RunConfig(alpha=alpha, iterations=20000, seed=4, algorithm="ab", record_every=10)
    records = engine.run(oracle, pair, profile, cfg)
    reached, r_sq, monotone = _fit_final_decade(records)
    # With zero noise the stochastic variant must coincide with the
    # deterministic one.
    short = engine.RunConfig(alpha=alpha, iterations=200, seed=4, algorithm="s-ab", record_every=10)
    sab = engine.run(oracle, pair, profile, short)
    ab = engine.run(oracle, pair, profile,
                    engine.RunConfig(alpha=alpha, iterations=200, seed=4, algorithm="ab", record_every=10))
    recovery = all(a == b for a, b in zip(sab, ab))
    elapsed = time.perf_counter() - start
    passed = reached and r_sq >= 0.99 and monotone and recovery and elapsed < 30.0
    return passed, (
        f"gap <= 1e-10 reached: {reached}, final-decade R^2 = {r_sq:.6f}, "
        f"monotone: {monotone}, zero-noise recovery: {recovery}"
    )


def criterion_theory_gate():
    """For 100 random (graph, quadratic) pairs and a step size drawn below
    the certified maximum: contractive error system, witness satisfied,
    nonnegative steady state -- every time."""
    rng = np.random.default_rng(55)
    failures = []
    worst_rho = 0.0
    for trial in range(100):
        n = int(rng.integers(3, 16))
        g = random_nearest_neighbor_digraph(n, int(rng.integers(1, n)), int(rng.integers(0, 2**31)))
        pair = uniform_weights(g)
        profile = spectral_profile(pair)
        oracle = random_quadratic(
            n, 2, seed=int(rng.integers(0, 2**31)),
            eig_min=1.0, eig_max=float(rng.uniform(1.5, 8.0)),
            sigma_sq=float(rng.choice([0.0, 0.25, 1.0])),
        )
        mu, ell, sigma_sq = oracle.effective_constants()
        alpha = float(rng.uniform(0.02, 0.98)) * theory.alpha_max(profile, mu, ell)
        bundle = theory.theory_bundle(profile, mu, ell, sigma_sq, alpha)
        witness = theory.positive_witness(bundle.g_alpha, alpha, bundle.constants)
        worst_rho = max(worst_rho, bundle.rho)
        ok = (
            bundle.rho < 1.0
            and witness.satisfied
            and bundle.steady_state is not None
            and bool(np.all(bundle.steady_state >= 0.0))
        )
        if not ok:
            failures.append(trial)
    return not failures, f"{len(failures)} failures out of 100 trials, largest rho = {worst_rho:.10f}"


def criterion_steady_state_domination():
    """Empirical steady-state error components (50 Monte-Carlo runs, unit
    noise) sit below the theoretical ball with 5% slack; runtime under
    5 min."""
    start = time.perf_counter()
    pair, profile, oracle, alpha = _quadratic_fixture(sigma_sq=1.0)
    mu, ell, sigma_sq = oracle.effective_constants()
    bundle = theory.theory_bundle(profile, mu, ell, sigma_sq, alpha)
    cfg = engine.RunConfig(alpha=alpha, iterations=50000, seed=6, algorithm="s-ab", record_every=25)
    mc = engine.monte_carlo_t(oracle, pair, profile, cfg, runs=50)
    window = mc.ks >= int(0.8 * cfg.iterations)
    empirical = mc.t[window].mean(axis=0)
    bound = bundle.steady_state
    dominated = bool(np.all(empirical <= 1.05 * bound))
    elapsed = time.perf_counter() - start
    ratios = ", ".join(f"{e / b:.2e}" for e, b in zip(empirical, bound))
    return dominated and elapsed < 300.0, f"empirical/bound ratios = ({ratios})"


def _steady_opt_gap(oracle, pair, profile, alpha, seed, runs=50):
    prc = profile.pi_r_dot_pi_c
    mu = oracle.mu
    alpha_eff = alpha * oracle.n * prc
    tau = 1.0 / (2.0 * mu * alpha_eff)
    iterations = max(2000, int(20.0 * tau))
    cfg = engine.RunConfig(
        alpha=alpha, iterations=iterations, seed=seed, algorithm="s-ab", record_every=10
    )
    mc = engine.monte_carlo_t(oracle, pair, profile, cfg, runs=runs)
    window = mc.ks >= int(0.8 * iterations)
    return float(mc.t[window, 1].mean())


def criterion_noise_step_scaling():
    """Halving the step size (noise fixed) and halving the noise variance
    (step fixed) each strictly shrink the empirical steady-state
    optimality gap across a 4-point grid, 50 runs per point."""
    g = complete_digraph(10)
    pair = uniform_weights(g)
    profile = spectral_profile(pair)

    def oracle_with(sigma_sq):
        # Balanced centers put the minimizer at the origin so every grid
        # point starts inside its stationary ball.
        return random_quadratic(
            10, 2, seed=42, eig_min=1.0, eig_max=1.3,
            sigma_sq=sigma_sq, balanced_centers=True,
        )

    base = oracle_with(1.0)
    mu, ell, _ = base.effective_constants()
    alpha0 = theory.alpha_max(profile, mu, ell) / 2.0

    alpha_gaps = [
        _steady_opt_gap(base, pair, profile, alpha0 / 2**j, seed=777) for j in range(4)
    ]
    sigma_gaps = [
        _steady_opt_gap(oracle_with(1.0 / 2**j), pair, profile, alpha0, seed=778)
        for j in range(4)
    ]
    alpha_monotone = all(b < a for a, b in zip(alpha_gaps, alpha_gaps[1:]))
    sigma_monotone = all(b < a for a, b in zip(sigma_gaps, sigma_gaps[1:]))
    detail = (
        "opt_gap over halved alpha: ["
        + ", ".join(f"{v:.3e}" for v in alpha_gaps)
        + "], over halved sigma_sq: ["
        + ", ".join(f"{v:.3e}" for v in sigma_gaps)
        + "]"
    )
    return alpha_monotone and sigma_monotone, detail


def criterion_single_agent_equivalence():
    """With one agent the distributed iteration is plain SGD, bitwise,
    over 1000 iterations on a shared RNG stream."""
    oracle = random_quadratic(1, 3, seed=9, eig_min=1.0, eig_max=2.0, sigma_sq=0.5)
    g = complete_digraph(1)
    pair = uniform_weights(g)
    alpha = 0.05
    cfg = engine.RunConfig(alpha=alpha, iterations=1000, seed=12, algorithm="s-ab")
    engine_xs = np.array([state.x[0] for state in engine.iterate_states(oracle, pair, cfg)])

    _, (rng,) = engine.agent_streams(cfg.seed, 1)
    x = np.zeros(3)
    gs = oracle.sample_gradient(0, x, rng).value
    ref_xs = [x.copy()]
    for _ in range(1000):
        x = x - alpha * gs
        ref_xs.append(x.copy())
        gs = oracle.sample_gradient(0, x, rng).value
    identical = np.array_equal(engine_xs, np.array(ref_xs))
    return identical, f"bitwise identical over 1000 iterations: {identical}"


def criterion_logistic_benchmark():
    """Desk-scale logistic benchmark: 10 agents, two-class Gaussian data,
    single-sample stochastic runs land within 2 accuracy points of the
    regularized optimum within 100 epochs and full-batch runs within 0.5;
    runtime under 2 min."""
    start = time.perf_counter()
    feats, labels, oracle, pair, profile = _logistic_fixture()
    x_star = oracle.global_minimizer()
    acc_star = classification_accuracy(x_star, feats, labels)

    def best_accuracy(algorithm, alpha, iters_per_epoch, epochs=100):
        cfg = engine.RunConfig(
            alpha=alpha, iterations=epochs * iters_per_epoch, seed=3, algorithm=algorithm
        )
        best = 0.0
        for state in engine.iterate_states(oracle, pair, cfg):
            if state.k % iters_per_epoch == 0 and state.k > 0:
                best = max(best, classification_accuracy(profile.pi_r @ state.x, feats, labels))
        return best

    acc_sab = best_accuracy("s-ab", alpha=3e-4, iters_per_epoch=oracle.m)
    acc_ab = best_accuracy("ab", alpha=3e-3, iters_per_epoch=1)
    elapsed = time.perf_counter() - start
    passed = acc_sab >= acc_star - 0.02 and acc_ab >= acc_star - 0.005 and elapsed < 120.0
    return passed, (
        f"optimum accuracy {acc_star:.4f}, stochastic best {acc_sab:.4f}, "
        f"full-batch best {acc_ab:.4f}"
    )


def _central_difference(loss, x, h=1e-6):
    fd = np.zeros_like(x)
    for idx in range(x.size):
        e = np.zeros_like(x)
        e[idx] = h
        fd[idx] = (loss(x + e) - loss(x - e)) / (2.0 * h)
    return fd


def criterion_finite_differences():
    """Exact gradients match central differences (h = 1e-6) to relative
    error 1e-6 at 20 random points for both oracle kinds."""
    rng = np.random.default_rng(31)
    quad = random_quadratic(5, 4, seed=21, eig_min=0.5, eig_max=3.0, center_scale=2.0)
    feats, labels = two_class_gaussian_data(60, 4, separation=1.5, seed=13)
    batches = partition_batches(feats, labels, 3)
    logi = logistic_oracle(batches[0], batches[1], lam=0.5)
    worst = 0.0
    for kind, oracle in (("quadratic", quad), ("logistic", logi)):
        for t in range(20):
            agent = t % oracle.n
            x = rng.standard_normal(oracle.p)
            exact = oracle.exact_gradient(agent, x)
            fd = _central_difference(lambda z: oracle.local_loss(agent, z), x)
            rel = float(np.linalg.norm(fd - exact) / max(np.linalg.norm(exact), 1e-9))
            worst = max(worst, rel)
    return worst <= 1e-6, f"worst relative error {worst:.2e} over 40 points"


CRITERIA = (
    (1, "contraction-suite", criterion_contraction_suite),
    (2, "norm-identities", criterion_norm_identities),
    (3, "tracking-identity", criterion_tracking_identity),
    (4, "exact-gradient-linear-convergence", criterion_linear_convergence),
    (5, "theory-gate", criterion_theory_gate),
    (6, "steady-state-domination", criterion_steady_state_domination),
    (7, "noise-step-scaling", criterion_noise_step_scaling),
    (8, "single-agent-equivalence", criterion_single_agent_equivalence),
    (9, "logistic-benchmark", criterion_logistic_benchmark),
    (10, "finite-difference-gradients", criterion_finite_differences),
)


def run_criteria(indices=None, echo=True):
    """Run the requested criteria (all by default), printing one pass/fail
    line per criterion; returns the list of results."""
    wanted = set(indices) if indices else {idx for idx, _, _ in CRITERIA}
    results = []
    for idx, name, func in CRITERIA:
        if idx not in wanted:
            continue
        start = time.perf_counter()
        passed, detail = func()
        result = CriterionResult(idx, name, passed, detail, time.perf_counter() - start)
        results.append(result)
        if echo:
            print(result.line())
    return results
