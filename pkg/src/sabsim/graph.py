"""Directed communication topologies.

Edge convention used everywhere in this package: the ordered pair ``(i, j)``
means agent ``j`` can send to agent ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = [
    "DirectedGraph",
    "is_strongly_connected",
    "cycle_digraph",
    "complete_digraph",
    "random_nearest_neighbor_digraph",
    "to_edge_list_text",
    "from_edge_list_text",
    "save_edge_list",
    "load_edge_list",
]


@dataclass(frozen=True)
class DirectedGraph:
    """Communication topology over agents ``0..n-1``.

    ``edges`` holds ordered pairs ``(i, j)``: agent ``j`` sends to agent
    ``i``.  Graphs fed to the optimizer must contain every self-loop and be
    strongly connected.  The generators in this module guarantee both;
    construction itself only enforces index validity so that defective
    graphs can be built and rejected where they are consumed.
    """

    n: int
    edges: frozenset

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"agent count must be positive, got {self.n}")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)

    @property
    def has_all_self_loops(self) -> bool:
        return all((i, i) in self.edges for i in range(self.n))

    def in_neighbors(self, i: int) -> list:
        """Agents that send to ``i``, including ``i`` itself when self-looped."""
        return sorted(j for r, j in self.edges if r == i)

    def out_neighbors(self, j: int) -> list:
        """Agents that receive from ``j``."""
        return sorted(r for r, s in self.edges if s == j)


def _reaches_all(adjacency: list, n: int) -> bool:
    seen = [False] * n
    seen[0] = True
    stack = [0]
    count = 1
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n


def is_strongly_connected(g: DirectedGraph) -> bool:
    """True iff every agent reaches every other agent along directed edges.

    Two reachability sweeps from agent 0: one along the send direction and
    one against it.  Total function; never raises on a valid graph.
    """
    receivers: list = [[] for _ in range(g.n)]
    senders: list = [[] for _ in range(g.n)]
    for i, j in g.edges:
        receivers[j].append(i)
        senders[i].append(j)
    return _reaches_all(receivers, g.n) and _reaches_all(senders, g.n)


def cycle_digraph(n: int) -> DirectedGraph:
    """Directed n-cycle ``0 -> 1 -> ... -> n-1 -> 0`` plus all self-loops."""
    if n < 1:
        raise ValueError(f"cycle needs at least one agent, got {n}")
    edges = {(i, i) for i in range(n)} | {((i + 1) % n, i) for i in range(n)}
    return DirectedGraph(n, frozenset(edges))


def complete_digraph(n: int) -> DirectedGraph:
    """All ordered pairs present, self-loops included."""
    if n < 1:
        raise ValueError(f"complete digraph needs at least one agent, got {n}")
    edges = {(i, j) for i in range(n) for j in range(n)}
    return DirectedGraph(n, frozenset(edges))


def random_nearest_neighbor_digraph(n: int, k: int, seed: int) -> DirectedGraph:
    """Random digraph from nearest-neighbor rules on a circular embedding.

    Agents are placed at seeded uniform random angles on a circle; each
    agent sends to its ``k`` angularly nearest neighbors.  A directed cycle
    overlay ``i -> i+1 (mod n)`` guarantees strong connectivity by
    construction, and all self-loops are included.  Deterministic for a
    fixed ``(n, k, seed)``.
    """
    if n < 2:
        raise ValueError(f"nearest-neighbor graph needs n >= 2, got {n}")
    if not 1 <= k < n:
        raise ValueError(f"out-degree parameter must satisfy 1 <= k < n, got {k}")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    edges = {(i, i) for i in range(n)}
    edges |= {((i + 1) % n, i) for i in range(n)}
    for i in range(n):
        gap = np.abs(angles - angles[i])
        gap = np.minimum(gap, 2.0 * np.pi - gap)
        gap[i] = np.inf
        for v in np.argsort(gap, kind="stable")[:k]:
            edges.add((int(v), i))
    return DirectedGraph(n, frozenset(edges))


def to_edge_list_text(g: DirectedGraph) -> str:
    """Edge-list text: first line ``n``, then one ``i j`` pair per line."""
    lines = [str(g.n)] + [f"{i} {j}" for i, j in sorted(g.edges)]
    return "\n".join(lines) + "\n"


def from_edge_list_text(text: str) -> DirectedGraph:
    rows = [ln for ln in (s.strip() for s in text.splitlines()) if ln and not ln.startswith("#")]
    if not rows:
        raise ConfigError("empty edge-list text")
    try:
        n = int(rows[0])
    except ValueError as exc:
        raise ConfigError(f"first line must be the agent count, got {rows[0]!r}") from exc
    pairs = []
    for ln in rows[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ConfigError(f"expected 'i j' pair, got {ln!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"non-integer edge entry in {ln!r}") from exc
    if len(pairs) != len(set(pairs)):
        raise ConfigError("duplicate edges in edge list")
    try:
        return DirectedGraph(n, frozenset(pairs))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def save_edge_list(g: DirectedGraph, path) -> None:
    Path(path).write_text(to_edge_list_text(g), encoding="utf-8")


def load_edge_list(path) -> DirectedGraph:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read edge list {path}: {exc}") from exc
    return from_edge_list_text(text)
