"""Row-stochastic / column-stochastic weight pairs conforming to a digraph.

The estimate-mixing matrix ``a`` is row-stochastic, the tracker-mixing
matrix ``b`` is column-stochastic, and both carry exactly the graph's
sparsity pattern: entry ``(i, j)`` is positive iff agent ``j`` sends to
agent ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .graph import DirectedGraph, is_strongly_connected

__all__ = [
    "STOCHASTICITY_TOL",
    "WeightPair",
    "uniform_weights",
    "validate",
    "save_matrix",
    "load_matrix",
    "load_weight_pair",
]

# Row/column sums of <= a few hundred doubles accumulate error well below this.
STOCHASTICITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightPair:
    """A row-stochastic matrix ``a`` and a column-stochastic matrix ``b``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"a must be square, got shape {a.shape}")
        if b.shape != a.shape:
            raise ValueError(f"a and b must have equal shape, got {a.shape} vs {b.shape}")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]


def uniform_weights(g: DirectedGraph) -> WeightPair:
    """Equal-split weights: each agent averages what it hears.

    ``a[i, j] = 1 / in-degree(i)`` for every sender ``j`` of ``i`` and
    ``b[i, j] = 1 / out-degree(j)`` for every edge, degrees counting the
    self-loop.  Needs only local degree information.  Rejects graphs that
    are missing self-loops or are not strongly connected, since either
    breaks primitivity of the resulting matrices.
    """
    if not g.has_all_self_loops:
        raise ValueError("graph must contain every self-loop")
    if not is_strongly_connected(g):
        raise ValueError("graph must be strongly connected")
    in_deg = np.zeros(g.n, dtype=int)
    out_deg = np.zeros(g.n, dtype=int)
    for i, j in g.edges:
        in_deg[i] += 1
        out_deg[j] += 1
    a = np.zeros((g.n, g.n))
    b = np.zeros((g.n, g.n))
    for i, j in g.edges:
        a[i, j] = 1.0 / in_deg[i]
        b[i, j] = 1.0 / out_deg[j]
    return WeightPair(a, b)


def validate(pair: WeightPair, g: DirectedGraph) -> list:
    """All weight-pair invariant violations against the graph's pattern.

    Returns an empty list iff ``pair`` is a valid weight pair for ``g``;
    otherwise one human-readable message per violation, naming the
    offending row, column, or entry.
    """
    msgs = []
    if pair.n != g.n:
        return [f"matrix size {pair.n} does not match graph size {g.n}"]
    row_sums = pair.a.sum(axis=1)
    for i in np.nonzero(np.abs(row_sums - 1.0) > STOCHASTICITY_TOL)[0]:
        msgs.append(f"row {i} of a sums to {row_sums[i]:.17g}, expected 1")
    col_sums = pair.b.sum(axis=0)
    for j in np.nonzero(np.abs(col_sums - 1.0) > STOCHASTICITY_TOL)[0]:
        msgs.append(f"column {j} of b sums to {col_sums[j]:.17g}, expected 1")
    for name, m in (("a", pair.a), ("b", pair.b)):
        for i in range(g.n):
            for j in range(g.n):
                on_edge = (i, j) in g.edges
                v = m[i, j]
                if v < 0.0:
                    msgs.append(f"{name}[{i}][{j}] = {v:.17g} is negative")
                elif on_edge and v <= 0.0:
                    msgs.append(f"{name}[{i}][{j}] must be positive on edge ({i}, {j})")
                elif not on_edge and v != 0.0:
                    msgs.append(f"{name}[{i}][{j}] = {v:.17g} outside the edge set")
    return msgs


def save_matrix(m: np.ndarray, path) -> None:
    """Dense matrix text format: one row per line, space-separated."""
    lines = [" ".join(f"{v:.17g}" for v in row) for row in np.asarray(m, dtype=float)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix(path) -> np.ndarray:
    try:
        m = np.loadtxt(path, ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc
    return m


def load_weight_pair(a_path, b_path, g: DirectedGraph) -> WeightPair:
    """Load custom matrices and reject them unless they validate cleanly."""
    pair = WeightPair(load_matrix(a_path), load_matrix(b_path))
    violations = validate(pair, g)
    if violations:
        head = "; ".join(violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        raise ConfigError(f"weight matrices rejected: {head}{more}")
    return pair
