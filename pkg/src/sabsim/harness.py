"""Experiment orchestration: config parsing, runs, comparisons, summaries.

Configuration files are flat ``key = value`` text; ``#`` starts a comment
and blank lines are ignored.  See the README for the full schema and
worked examples.  All outputs are CSV or the same key-value format, with
floats printed at 17 significant digits so reruns with an identical
config are byte-identical.

Exit codes: 0 success, 1 invalid configuration, 2 divergence, 3 runtime
invariant violation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine, graph, oracles, spectral, theory, weights
from .errors import ConfigError, ConvergenceError, DivergenceError, GateError, InvariantViolationError

__all__ = [
    "ExperimentConfig",
    "parse_kv_text",
    "load_experiment",
    "run_experiment",
    "compare_algorithms",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_DIVERGENCE",
    "EXIT_INVARIANT",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_INVARIANT = 3

_GRAPH_KINDS = ("cycle", "complete", "nearest-neighbor", "edge-list")
_WEIGHT_KINDS = ("uniform", "files")
_ORACLE_KINDS = ("quadratic-gaussian", "logistic-minibatch")

_KNOWN_KEYS = {
    "graph.kind", "graph.n", "graph.k", "graph.seed", "graph.path",
    "weights.kind", "weights.a_path", "weights.b_path",
    "oracle.kind", "oracle.p", "oracle.sigma_sq", "oracle.seed",
    "oracle.eig_min", "oracle.eig_max", "oracle.center_scale",
    "oracle.lambda", "oracle.train_csv", "oracle.test_csv",
    "run.algorithm", "run.alpha", "run.iterations", "run.epochs",
    "run.seed", "run.x0", "run.record_every", "run.runs", "run.require_gate",
}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A fully resolved experiment: topology, weights, oracle, run plan."""

    graph: graph.DirectedGraph
    pair: weights.WeightPair
    profile: spectral.SpectralProfile
    oracle: object
    algorithms: tuple
    alpha: float
    alpha_auto: bool
    iterations: int
    epochs: int
    seed: int
    x0: str
    x0_scale: float
    record_every: int
    runs: int
    require_gate: bool
    test_data: object  # (features, labels) or None


def parse_kv_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _get(kv: dict, key: str, default=None, required: bool = False) -> str:
    if key in kv:
        return kv[key]
    if required:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def _as_int(kv, key, default=None, required=False, minimum=None):
    raw = _get(kv, key, default=None, required=required)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _as_float(kv, key, default=None, required=False):
    raw = _get(kv, key, default=None, required=required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from exc


def _as_bool(kv, key, default=False):
    raw = _get(kv, key)
    if raw is None:
        return default
    if raw.lower() in ("true", "yes", "1"):
        return True
    if raw.lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key} must be true or false, got {raw!r}")


def _build_graph(kv: dict, base: Path) -> graph.DirectedGraph:
    kind = _get(kv, "graph.kind", required=True)
    if kind not in _GRAPH_KINDS:
        raise ConfigError(f"graph.kind must be one of {_GRAPH_KINDS}, got {kind!r}")
    if kind == "edge-list":
        path = _get(kv, "graph.path", required=True)
        g = graph.load_edge_list(base / path)
    else:
        n = _as_int(kv, "graph.n", required=True, minimum=1)
        try:
            if kind == "cycle":
                g = graph.cycle_digraph(n)
            elif kind == "complete":
                g = graph.complete_digraph(n)
            else:
                k = _as_int(kv, "graph.k", required=True, minimum=1)
                seed = _as_int(kv, "graph.seed", default=0)
                g = graph.random_nearest_neighbor_digraph(n, k, seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not g.has_all_self_loops or not graph.is_strongly_connected(g):
        raise ConfigError("graph must be strongly connected with all self-loops")
    return g


def _build_weights(kv: dict, base: Path, g: graph.DirectedGraph) -> weights.WeightPair:
    kind = _get(kv, "weights.kind", default="uniform")
    if kind not in _WEIGHT_KINDS:
        raise ConfigError(f"weights.kind must be one of {_WEIGHT_KINDS}, got {kind!r}")
    if kind == "uniform":
        return weights.uniform_weights(g)
    a_path = _get(kv, "weights.a_path", required=True)
    b_path = _get(kv, "weights.b_path", required=True)
    return weights.load_weight_pair(base / a_path, base / b_path, g)


def _build_oracle(kv: dict, base: Path, n: int):
    kind = _get(kv, "oracle.kind", required=True)
    if kind not in _ORACLE_KINDS:
        raise ConfigError(f"oracle.kind must be one of {_ORACLE_KINDS}, got {kind!r}")
    if kind == "quadratic-gaussian":
        try:
            oracle = oracles.random_quadratic(
                n=n,
                p=_as_int(kv, "oracle.p", default=2, minimum=1),
                seed=_as_int(kv, "oracle.seed", default=0),
                eig_min=_as_float(kv, "oracle.eig_min", default=1.0),
                eig_max=_as_float(kv, "oracle.eig_max", default=4.0),
                center_scale=_as_float(kv, "oracle.center_scale", default=1.0),
                sigma_sq=_as_float(kv, "oracle.sigma_sq", default=0.0),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return oracle, None
    lam = _as_float(kv, "oracle.lambda", default=1.0)
    train = _get(kv, "oracle.train_csv", required=True)
    if lam <= 0:
        raise ConfigError("oracle.lambda must be positive")
    oracle = oracles.logistic_oracle_from_csv(base / train, n, lam)
    test_path = _get(kv, "oracle.test_csv")
    test_data = oracles.load_labeled_csv(base / test_path) if test_path else None
    return oracle, test_data


def load_experiment(path, seed_override=None) -> ExperimentConfig:
    """Parse and fully resolve a config file; every referenced file is
    loaded and validated here so that a returned config is runnable."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    kv = parse_kv_text(text)
    unknown = set(kv) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    base = path.parent

    g = _build_graph(kv, base)
    pair = _build_weights(kv, base, g)
    try:
        profile = spectral.spectral_profile(pair)
    except (ConvergenceError, InvariantViolationError) as exc:
        raise ConfigError(f"weight matrices are not usable: {exc}") from exc
    oracle, test_data = _build_oracle(kv, base, g.n)

    algorithms = tuple(s.strip() for s in _get(kv, "run.algorithm", default="s-ab").split(","))
    for alg in algorithms:
        if alg not in engine.ALGORITHMS:
            raise ConfigError(f"unknown algorithm {alg!r}, expected one of {engine.ALGORITHMS}")
    if len(set(algorithms)) != len(algorithms):
        raise ConfigError("run.algorithm lists an algorithm twice")

    alpha_raw = _get(kv, "run.alpha", default="auto")
    alpha_auto = alpha_raw == "auto"
    if alpha_auto:
        mu, ell, _ = oracle.effective_constants()
        alpha = theory.alpha_max(profile, mu, ell) / 2.0
    else:
        try:
            alpha = float(alpha_raw)
        except ValueError as exc:
            raise ConfigError(f"run.alpha must be a number or 'auto', got {alpha_raw!r}") from exc
    if alpha <= 0:
        raise ConfigError(f"run.alpha must be positive, got {alpha}")

    x0_raw = _get(kv, "run.x0", default="zeros")
    if x0_raw == "zeros":
        x0, x0_scale = "zeros", 1.0
    elif x0_raw.startswith("gaussian:"):
        x0 = "gaussian"
        try:
            x0_scale = float(x0_raw.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"run.x0 gaussian scale must be a number, got {x0_raw!r}") from exc
    elif x0_raw == "gaussian":
        x0, x0_scale = "gaussian", 1.0
    else:
        raise ConfigError(f"run.x0 must be 'zeros' or 'gaussian:SCALE', got {x0_raw!r}")

    seed = _as_int(kv, "run.seed", default=0)
    if seed_override is not None:
        seed = int(seed_override)

    return ExperimentConfig(
        graph=g,
        pair=pair,
        profile=profile,
        oracle=oracle,
        algorithms=algorithms,
        alpha=alpha,
        alpha_auto=alpha_auto,
        iterations=_as_int(kv, "run.iterations", default=1000, minimum=1),
        epochs=_as_int(kv, "run.epochs", default=100, minimum=1),
        seed=seed,
        x0=x0,
        x0_scale=x0_scale,
        record_every=_as_int(kv, "run.record_every", default=1, minimum=1),
        runs=_as_int(kv, "run.runs", default=1, minimum=1),
        require_gate=_as_bool(kv, "run.require_gate", default=False),
        test_data=test_data,
    )


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, np.ndarray):
        return ",".join(f"{float(v):.17g}" for v in np.ravel(value))
    return str(value)


def _summary_lines(cfg: ExperimentConfig, bundle: theory.TheoryBundle) -> list:
    mu, ell, sigma_sq = cfg.oracle.effective_constants()
    lines = [
        ("graph.n", cfg.graph.n),
        ("graph.edges", len(cfg.graph.edges)),
        ("oracle.kind", cfg.oracle.kind),
        ("oracle.mu", mu),
        ("oracle.ell", ell),
        ("oracle.sigma_sq", sigma_sq),
        ("run.alpha", cfg.alpha),
        ("run.iterations", cfg.iterations),
        ("run.seed", cfg.seed),
        ("run.runs", cfg.runs),
        ("spectral.pi_r", cfg.profile.pi_r),
        ("spectral.pi_c", cfg.profile.pi_c),
        ("spectral.sigma_a", cfg.profile.sigma_a),
        ("spectral.sigma_b", cfg.profile.sigma_b),
        ("spectral.pi_r_dot_pi_c", cfg.profile.pi_r_dot_pi_c),
        ("spectral.h_r", cfg.profile.h_r),
        ("spectral.h_c", cfg.profile.h_c),
        ("theory.alpha_max", bundle.alpha_max),
        ("theory.rho", bundle.rho),
        ("theory.gate", "pass" if cfg.alpha < bundle.alpha_max else "exceeded"),
    ]
    for name, value in bundle.constants.as_dict().items():
        lines.append((f"theory.constants.{name}", value))
    for i in range(3):
        lines.append((f"theory.g_alpha.row{i}", bundle.g_alpha[i]))
    lines.append(("theory.b_alpha", bundle.b_alpha))
    if bundle.steady_state is not None:
        lines.append(("theory.steady_state", bundle.steady_state))
    else:
        lines.append(("theory.steady_state", "unavailable (rho >= 1)"))
    return lines


def _write_summary(path, pairs) -> None:
    Path(path).write_text(
        "\n".join(f"{key} = {_fmt(value)}" for key, value in pairs) + "\n",
        encoding="utf-8",
    )


def run_experiment(cfg: ExperimentConfig, out_dir) -> int:
    """Run every requested algorithm, writing one trace CSV each plus a
    summary; with ``runs > 1`` also write the across-run averaged error
    components and their steady-state means."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mu, ell, sigma_sq = cfg.oracle.effective_constants()
    bundle = theory.theory_bundle(cfg.profile, mu, ell, sigma_sq, cfg.alpha)
    if cfg.require_gate and not cfg.alpha < bundle.alpha_max:
        print(
            f"config rejected by step-size gate: alpha = {cfg.alpha:.17g} is not "
            f"strictly below alpha_max = {bundle.alpha_max:.17g}"
        )
        return EXIT_CONFIG

    summary = _summary_lines(cfg, bundle)
    try:
        x_star = cfg.oracle.global_minimizer()
        for alg in cfg.algorithms:
            run_cfg = engine.RunConfig(
                alpha=cfg.alpha,
                iterations=cfg.iterations,
                seed=cfg.seed,
                x0=cfg.x0,
                x0_scale=cfg.x0_scale,
                algorithm=alg,
                record_every=cfg.record_every,
            )
            records = engine.run(cfg.oracle, cfg.pair, cfg.profile, run_cfg, x_star=x_star)
            engine.write_trace(records, out / f"trace_{alg}.csv")
            last = records[-1]
            summary.extend(
                [
                    (f"run.{alg}.final.k", last.k),
                    (f"run.{alg}.final.consensus_err", last.consensus_err),
                    (f"run.{alg}.final.opt_gap", last.opt_gap),
                    (f"run.{alg}.final.tracking_err", last.tracking_err),
                    (f"run.{alg}.final.residual", last.residual),
                    (f"run.{alg}.final.global_loss", last.global_loss),
                ]
            )
            if cfg.runs > 1:
                mc = engine.monte_carlo_t(cfg.oracle, cfg.pair, cfg.profile, run_cfg, cfg.runs)
                lines = ["k,consensus_err,opt_gap,tracking_err"]
                for k, row in zip(mc.ks, mc.t):
                    lines.append(f"{k}," + ",".join(f"{v:.17g}" for v in row))
                (out / f"t_mean_{alg}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
                window = mc.ks >= 0.8 * cfg.iterations
                steady = mc.t[window].mean(axis=0)
                summary.append((f"run.{alg}.steady.t_mean", steady))
    except DivergenceError as exc:
        print(f"divergence: {exc}")
        return EXIT_DIVERGENCE
    except InvariantViolationError as exc:
        print(f"invariant violation: {exc}")
        return EXIT_INVARIANT
    except (GateError, ConvergenceError) as exc:
        print(f"invariant violation: {exc}")
        return EXIT_INVARIANT

    summary.append(("invariant.tracking_identity", "pass"))
    summary.append(("invariant.gradient_dispersion", "pass"))
    summary.append(("exit_status", EXIT_OK))
    _write_summary(out / "summary.txt", summary)
    print(f"ok: wrote {len(cfg.algorithms)} trace file(s) and summary.txt to {out}")
    return EXIT_OK


def _iterations_per_epoch(alg: str, oracle) -> int:
    # One epoch is one full batch of gradient work.  For the quadratic
    # oracle there is no dataset, so every algorithm counts one iteration
    # per epoch.
    if oracle.kind != "logistic-minibatch":
        return 1
    if alg == "s-ab":
        return oracle.m
    if alg == "centralized-sgd":
        return oracle.n * oracle.m
    return 1


def _flat_training_data(oracle):
    if oracle.kind != "logistic-minibatch":
        return None
    feats = oracle.features[:, :, :-1].reshape(-1, oracle.p - 1)
    labels = oracle.labels.reshape(-1)
    return feats, labels


def compare_algorithms(cfg: ExperimentConfig, out_dir) -> int:
    """Per-epoch comparison CSV across at least two algorithms, with
    train/test accuracy columns for logistic oracles."""
    if len(cfg.algorithms) < 2:
        print("config rejected: compare needs at least two algorithms (run.algorithm)")
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    logistic = cfg.oracle.kind == "logistic-minibatch"
    train = _flat_training_data(cfg.oracle)

    columns = {}
    try:
        for alg in cfg.algorithms:
            per_epoch = _iterations_per_epoch(alg, cfg.oracle)
            run_cfg = engine.RunConfig(
                alpha=cfg.alpha,
                iterations=cfg.epochs * per_epoch,
                seed=cfg.seed,
                x0=cfg.x0,
                x0_scale=cfg.x0_scale,
                algorithm=alg,
                record_every=per_epoch,
            )
            rows = []

            def evaluate(x_eval):
                row = [cfg.oracle.global_loss(x_eval)]
                if logistic:
                    row.append(oracles.classification_accuracy(x_eval, train[0], train[1]))
                    if cfg.test_data is not None:
                        row.append(
                            oracles.classification_accuracy(x_eval, cfg.test_data[0], cfg.test_data[1])
                        )
                rows.append(row)

            if alg in ("centralized-gd", "centralized-sgd"):
                for k, x in engine.iterate_centralized(cfg.oracle, run_cfg):
                    if k % per_epoch == 0:
                        evaluate(x)
            else:
                for state in engine.iterate_states(cfg.oracle, cfg.pair, run_cfg):
                    if state.k % per_epoch == 0:
                        evaluate(cfg.profile.pi_r @ state.x)
            columns[alg] = rows
    except DivergenceError as exc:
        print(f"divergence: {exc}")
        return EXIT_DIVERGENCE
    except InvariantViolationError as exc:
        print(f"invariant violation: {exc}")
        return EXIT_INVARIANT

    metric_names = ["loss"]
    if logistic:
        metric_names.append("train_acc")
        if cfg.test_data is not None:
            metric_names.append("test_acc")
    header = ["epoch"]
    for alg in cfg.algorithms:
        header.extend(f"{alg}_{m}" for m in metric_names)
    lines = [",".join(header)]
    for epoch in range(cfg.epochs + 1):
        cells = [str(epoch)]
        for alg in cfg.algorithms:
            cells.extend(f"{v:.17g}" for v in columns[alg][epoch])
        lines.append(",".join(cells))
    (out / "compare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"ok: wrote compare.csv to {out}")
    return EXIT_OK
