"""Standard wrapped graphs used across tests, configs, and examples."""

from __future__ import annotations

import numpy as np

from .kernel import DiscreteKernel
from .space import PointedDag


def diamond() -> PointedDag:
    """s0 -> {a, b}; a -> {x1, x2}; b -> x2; X = {x1, x2}."""
    return PointedDag(
        states=("s0", "a", "b", "x1", "x2"),
        edges=((0, 1), (0, 2), (1, 3), (1, 4), (2, 4), (3, 0), (4, 0)),
        terminating=frozenset({3, 4}),
    )


def diamond_kernel() -> DiscreteKernel:
    """The half/half diamond kernel whose invariant measure is (1, .5, .5, .2, .8)."""
    p = np.zeros((5, 5))
    p[0, 1] = p[0, 2] = 0.5
    p[1, 3] = 0.4
    p[1, 4] = 0.6
    p[2, 4] = 1.0
    p[3, 0] = 1.0
    p[4, 0] = 1.0
    return DiscreteKernel(p, support=set(diamond().edges))


def diamond_edge_flows(scale: float = 5.0) -> dict[tuple[int, int], float]:
    """Edge flows realizing the diamond kernel with total flow `scale` at s0."""
    lam = {0: 1.0, 1: 0.5, 2: 0.5, 3: 0.2, 4: 0.8}
    p = diamond_kernel().matrix
    return {
        (s, t): scale * lam[s] * p[s, t]
        for s, t in diamond().edges
    }


def chain2() -> PointedDag:
    """The 2-cycle s0 -> x -> s0."""
    return PointedDag(states=("s0", "x"), edges=((0, 1), (1, 0)), terminating=frozenset({1}))


def grid_lattice(side: int = 4) -> PointedDag:
    """Monotone side x side lattice: moves right or up; X = cells with i, j >= 1.

    Terminating cells keep their lattice continuations, so most of X has
    both a wrap edge and ordinary out-edges.
    """
    names = ["s0"] + [f"c{i}{j}" for i in range(side) for j in range(side)]
    idx = {(i, j): 1 + i * side + j for i in range(side) for j in range(side)}
    edges = [(0, idx[(0, 0)])]
    terminating = set()
    for i in range(side):
        for j in range(side):
            s = idx[(i, j)]
            if i + 1 < side:
                edges.append((s, idx[(i + 1, j)]))
            if j + 1 < side:
                edges.append((s, idx[(i, j + 1)]))
            if i >= 1 and j >= 1:
                edges.append((s, 0))
                terminating.add(s)
    return PointedDag(states=tuple(names), edges=tuple(edges), terminating=frozenset(terminating))


def blocked_fan(leaves: int = 21, block: int = 3) -> PointedDag:
    """Two-layer generator for a 1-D lattice: s0 -> block node -> leaf -> s0.

    Leaf k (k = 0..leaves-1) hangs under block k // block; the leaves are
    the terminating states, ordered by lattice position.
    """
    if leaves % block != 0:
        raise ValueError(f"leaves {leaves} must be a multiple of block {block}")
    groups = leaves // block
    names = ["s0"] + [f"g{j}" for j in range(groups)] + [f"v{k}" for k in range(leaves)]
    edges = []
    terminating = set()
    for j in range(groups):
        edges.append((0, 1 + j))
    for k in range(leaves):
        leaf = 1 + groups + k
        edges.append((1 + k // block, leaf))
        edges.append((leaf, 0))
        terminating.add(leaf)
    return PointedDag(states=tuple(names), edges=tuple(edges), terminating=frozenset(terminating))


def leaf_indices(dag: PointedDag) -> list[int]:
    """Terminating state indices in increasing order."""
    return sorted(dag.terminating)
