"""Discrete pointed-DAG state spaces and the wrap-around transform.

A pointed DAG is rooted at an initial state s0 (always index 0) and every
maximal path ends at a distinguished terminal state. Wrapping deletes that
terminal state and redirects each edge into it back to s0, turning every
generation trajectory into one excursion of a single recurrent chain. The
terminating set X is exactly the set of parents of s0 after wrapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import GraphError


@dataclass(frozen=True)
class PointedDag:
    """Wrapped state graph: states indexed 0..n-1 with s0 at index 0.

    `edges` includes the wrap-around edges x -> 0; `terminating` is X.
    """

    states: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    terminating: frozenset[int]

    def __post_init__(self):
        n = len(self.states)
        if n == 0:
            raise GraphError("empty state set")
        seen = set()
        for s, t in self.edges:
            if not (0 <= s < n and 0 <= t < n):
                raise GraphError(f"edge ({s},{t}) references unknown state")
            if (s, t) in seen:
                raise GraphError(f"duplicate edge ({s},{t})")
            seen.add((s, t))
        if 0 in self.terminating:
            raise GraphError("s0 cannot be terminating")
        parents_of_s0 = {s for s, t in self.edges if t == 0}
        if parents_of_s0 != set(self.terminating):
            raise GraphError(
                f"terminating set {sorted(self.terminating)} must equal the "
                f"parents of s0 {sorted(parents_of_s0)}"
            )
        if not self.terminating:
            raise GraphError("no wrap-around edges into s0")
        non_wrap = [(s, t) for s, t in self.edges if t != 0]
        order = _topological_order(n, non_wrap)
        if order is None:
            raise GraphError("non-wrap edges contain a cycle")
        if _reachable_from(0, n, self.edges) != set(range(n)):
            raise GraphError("some states are unreachable from s0")
        out_deg = [0] * n
        for s, _ in self.edges:
            out_deg[s] += 1
        dead = [self.states[i] for i in range(n) if out_deg[i] == 0]
        if dead:
            raise GraphError(f"states with no outgoing edge: {dead}")
        object.__setattr__(self, "_topo_order", tuple(order))

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def non_wrap_edges(self) -> list[tuple[int, int]]:
        return [(s, t) for s, t in self.edges if t != 0]

    @property
    def wrap_edges(self) -> list[tuple[int, int]]:
        return [(s, t) for s, t in self.edges if t == 0]

    def topological_order(self) -> tuple[int, ...]:
        """Topological order of the non-wrap DAG (s0 first)."""
        return self._topo_order  # type: ignore[attr-defined]

    def out_edges(self, s: int) -> list[tuple[int, int]]:
        return [(a, b) for a, b in self.edges if a == s]


@dataclass(frozen=True)
class DagPrecursor:
    """Unwrapped pointed DAG with an explicit terminal state index."""

    states: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    sf: int


@dataclass(frozen=True)
class ContinuousSpace1D:
    """Closed interval [lo, hi] with a reference density (irreducibility measure)."""

    lo: float
    hi: float
    reference_density: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise GraphError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.reference_density is not None:
            mass, _ = quad(lambda x: float(self.reference_density(np.asarray(x))), self.lo, self.hi)
            if not (np.isfinite(mass) and mass > 0):
                raise GraphError(f"reference density has non-positive or infinite mass {mass}")


def _topological_order(n: int, edges: Sequence[tuple[int, int]]) -> list[int] | None:
    """Kahn's algorithm; None if the edge set has a cycle."""
    indeg = [0] * n
    children: list[list[int]] = [[] for _ in range(n)]
    for s, t in edges:
        indeg[t] += 1
        children[s].append(t)
    frontier = sorted(i for i in range(n) if indeg[i] == 0)
    order = []
    while frontier:
        v = frontier.pop(0)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                frontier.append(c)
        frontier.sort()
    return order if len(order) == n else None


def _reachable_from(start: int, n: int, edges: Sequence[tuple[int, int]]) -> set[int]:
    children: list[list[int]] = [[] for _ in range(n)]
    for s, t in edges:
        children[s].append(t)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for c in children[v]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def wrap_pointed_dag(precursor: DagPrecursor) -> PointedDag:
    """Merge the terminal state with s0: delete sf, redirect x->sf to x->s0.

    The input must be a pointed DAG: acyclic, rooted at index 0, all states
    reachable from s0, and every maximal path ending at sf.
    """
    n = len(precursor.states)
    sf = precursor.sf
    if not 0 < sf < n:
        raise GraphError(f"terminal index {sf} out of range (and must not be s0)")
    if _topological_order(n, precursor.edges) is None:
        raise GraphError("precursor contains a cycle")
    if _reachable_from(0, n, precursor.edges) != set(range(n)):
        raise GraphError("some states are unreachable from s0")
    if any(s == sf for s, _ in precursor.edges):
        raise GraphError("terminal state must have no children")
    out_deg = [0] * n
    for s, _ in precursor.edges:
        out_deg[s] += 1
    dead = [precursor.states[i] for i in range(n) if out_deg[i] == 0 and i != sf]
    if dead:
        raise GraphError(f"dead-end states (no path to terminal): {dead}")

    # Re-index with sf removed; indices above sf shift down by one.
    def remap(i: int) -> int:
        return i if i < sf else i - 1

    states = tuple(name for i, name in enumerate(precursor.states) if i != sf)
    edges = []
    terminating = set()
    for s, t in precursor.edges:
        if t == sf:
            edges.append((remap(s), 0))
            terminating.add(remap(s))
        else:
            edges.append((remap(s), remap(t)))
    return PointedDag(states=states, edges=tuple(edges), terminating=frozenset(terminating))


def check_irreducible(dag: PointedDag) -> bool:
    """True iff the wrapped graph is strongly connected."""
    n = dag.n
    forward = _reachable_from(0, n, dag.edges)
    reversed_edges = [(t, s) for s, t in dag.edges]
    backward = _reachable_from(0, n, reversed_edges)
    return forward == set(range(n)) and backward == set(range(n))


@dataclass(frozen=True)
class AbsorptionCheck:
    harris: bool
    n: int | None


def check_finitely_absorbing(dag: PointedDag, kernel, max_len: int) -> AbsorptionCheck:
    """Minimal N <= max_len with P(return to s0 within N steps) = 1, if any.

    "Exactly 1" is a support property, so the check runs on the boolean
    support graph of the kernel: the frontier of states reachable from s0
    without having returned must die out by step N. A positive result
    certifies Harris recurrence of the wrapped chain (every excursion has
    length at most N).
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    n = dag.n
    support = kernel.support_sets(n)
    if not support[0]:
        raise GraphError("kernel gives s0 no successors")
    # frontier after k steps: states != s0 reachable without an earlier return
    frontier = support[0] - {0}
    if not frontier:
        return AbsorptionCheck(harris=True, n=1)
    for k in range(2, max_len + 1):
        nxt: set[int] = set()
        for s in frontier:
            nxt |= support[s]
        frontier = nxt - {0}
        if not frontier:
            return AbsorptionCheck(harris=True, n=k)
    return AbsorptionCheck(harris=False, n=None)
