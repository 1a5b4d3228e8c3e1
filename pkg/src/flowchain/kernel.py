"""Transition kernels and reward measures over discrete and 1-D state spaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import quad

from .errors import KernelError
from .space import ContinuousSpace1D, PointedDag, _reachable_from

ROW_SUM_TOL = 1e-12
DENSE_LIMIT = 512


def _sequential_row_sum(cols: np.ndarray, vals: np.ndarray) -> float:
    # left-to-right by column index, so dense and sparse storage agree bitwise
    total = 0.0
    for v in vals:
        total += float(v)
    return total


class DiscreteKernel:
    """Row-stochastic transition matrix with a declared edge support.

    Stored dense up to DENSE_LIMIT states, row-compressed above; both paths
    sum rows left-to-right by column index.
    """

    def __init__(self, matrix: np.ndarray, support: set[tuple[int, int]] | None = None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise KernelError(f"matrix must be square, got shape {matrix.shape}")
        n = matrix.shape[0]
        if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
            raise KernelError("matrix entries must be finite and nonnegative")
        nz = {(int(i), int(j)) for i, j in zip(*np.nonzero(matrix))}
        if support is None:
            support = nz
        else:
            support = {(int(i), int(j)) for i, j in support}
            extra = nz - support
            if extra:
                raise KernelError(f"positive entries outside declared support: {sorted(extra)}")
        self.n = n
        self.support = frozenset(support)
        self._dense = n <= DENSE_LIMIT
        if self._dense:
            self._matrix = matrix
            self._rows = None
        else:
            self._matrix = None
            self._rows = []
            for i in range(n):
                cols = np.nonzero(matrix[i])[0]
                self._rows.append((cols.astype(np.int64), matrix[i, cols].copy()))
        bad = [
            (i, abs(s - 1.0))
            for i, s in enumerate(self.row_sums())
            if abs(s - 1.0) > ROW_SUM_TOL
        ]
        if bad:
            raise KernelError(f"rows deviate from sum 1 beyond {ROW_SUM_TOL}: {bad[:5]}")
        self._cum = None

    def row(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        if self._dense:
            cols = np.nonzero(self._matrix[s])[0]
            return cols, self._matrix[s, cols]
        return self._rows[s]

    def row_sums(self) -> list[float]:
        return [_sequential_row_sum(*self.row(i)) for i in range(self.n)]

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            m = np.zeros((self.n, self.n))
            for i, (cols, vals) in enumerate(self._rows):
                m[i, cols] = vals
            self._matrix = m
        return self._matrix

    def transition_cumulative(self) -> np.ndarray:
        """Row-wise cumulative sums, for inverse-CDF categorical sampling."""
        if self._cum is None:
            from .simulate import closed_cumulative

            self._cum = closed_cumulative(self.matrix)
        return self._cum

    def support_sets(self, n: int | None = None) -> list[set[int]]:
        """Successor sets with strictly positive probability (effective support)."""
        n = self.n if n is None else n
        sets: list[set[int]] = [set() for _ in range(n)]
        for s in range(min(self.n, n)):
            cols, vals = self.row(s)
            sets[s].update(int(c) for c, v in zip(cols, vals) if v > 0)
        return sets

    def strongly_connected(self) -> bool:
        edges = [(s, t) for s, ts in enumerate(self.support_sets()) for t in ts]
        full = set(range(self.n))
        return (
            _reachable_from(0, self.n, edges) == full
            and _reachable_from(0, self.n, [(t, s) for s, t in edges]) == full
        )


class Continuous1DKernel:
    """Markov kernel on an interval: a sampler plus a pointwise density.

    The sampler must be a pure function of (state, rng draw); densities are
    required because the split-chain arithmetic below needs them pointwise.
    """

    def __init__(
        self,
        space: ContinuousSpace1D,
        sample: Callable[[np.ndarray, np.random.Generator], np.ndarray],
        density: Callable[[np.ndarray, np.ndarray], np.ndarray],
    ):
        self.space = space
        self.sample = sample
        self.density = density

    def check_density_normalization(self, probe_states, tol: float = 1e-6) -> list[tuple[float, float]]:
        """(state, |mass - 1|) for probe states whose density misses mass 1."""
        bad = []
        for x in probe_states:
            mass, _ = quad(
                lambda t: float(self.density(np.asarray(x), np.asarray(t))),
                self.space.lo,
                self.space.hi,
                limit=200,
            )
            if abs(mass - 1.0) > tol:
                bad.append((float(x), abs(mass - 1.0)))
        return bad


@dataclass(frozen=True)
class DiscreteReward:
    """Positive reward on a subset of the terminating states, zero elsewhere."""

    values: dict[int, float]

    def __post_init__(self):
        for s, r in self.values.items():
            if not (np.isfinite(r) and r > 0):
                raise KernelError(f"reward at state {s} must be finite and positive, got {r}")
        if not self.values:
            raise KernelError("empty reward support")

    def total(self) -> float:
        return float(sum(self.values[s] for s in sorted(self.values)))

    def on_states(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for s, r in self.values.items():
            out[s] = r
        return out

    def check_support(self, dag: PointedDag) -> None:
        extra = set(self.values) - set(dag.terminating)
        if extra:
            raise KernelError(f"reward on non-terminating states: {sorted(extra)}")


@dataclass(frozen=True)
class ContinuousReward:
    """Reward density on a 1-D terminating set."""

    space: ContinuousSpace1D
    density: Callable[[np.ndarray], np.ndarray]

    def total(self) -> float:
        mass, _ = quad(lambda x: float(self.density(np.asarray(x))), self.space.lo, self.space.hi, limit=200)
        if not (np.isfinite(mass) and mass > 0):
            raise KernelError(f"reward mass must be finite and positive, got {mass}")
        return mass


def kernel_from_edge_flows(dag: PointedDag, edge_flows: Mapping[tuple[int, int], float]):
    """Row-normalize edge flows into a kernel; the per-state totals are the state flow.

    Returns (DiscreteKernel, FlowMeasure tagged flow_unnormalized) with
    F(s) = total outgoing flow of s and P(s, t) = flow(s->t) / F(s).
    """
    from .invariant import FlowMeasure

    edge_set = set(dag.edges)
    n = dag.n
    flow_matrix = np.zeros((n, n))
    for (s, t), f in edge_flows.items():
        if (s, t) not in edge_set:
            raise KernelError(f"flow on ({s},{t}) which is not a graph edge")
        if not (np.isfinite(f) and f > 0):
            raise KernelError(f"edge flow on ({s},{t}) must be positive, got {f}")
        flow_matrix[s, t] = f
    totals = flow_matrix.sum(axis=1)
    for s in range(n):
        if dag.out_edges(s) and totals[s] <= 0:
            raise KernelError(f"state {dag.states[s]} has outgoing edges but zero total outflow")
    matrix = flow_matrix / totals[:, None]
    kern = DiscreteKernel(matrix, support=edge_set)
    return kern, FlowMeasure(values=totals, normalization="flow_unnormalized")


@dataclass
class KernelReport:
    """Diagnostics from validate_kernel; empty lists mean a valid kernel."""

    row_sum_deviations: list[tuple[int, float]] = field(default_factory=list)
    support_violations: list[tuple[int, int]] = field(default_factory=list)
    unreachable_states: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.row_sum_deviations or self.support_violations or self.unreachable_states)

    def lines(self) -> list[str]:
        out = []
        for s, dev in self.row_sum_deviations:
            out.append(f"row {s}: sum deviates from 1 by {dev:.3e}")
        for s, t in self.support_violations:
            out.append(f"positive probability on ({s},{t}) outside the graph edges")
        for s in self.unreachable_states:
            out.append(f"state {s} unreachable from s0 under the kernel")
        return out


def validate_kernel(kernel, dag: PointedDag, matrix: np.ndarray | None = None) -> KernelReport:
    """Diagnose a (possibly invalid) transition matrix against the graph.

    Accepts a raw matrix so that inputs rejected by the DiscreteKernel
    constructor can still be reported on.
    """
    m = np.asarray(kernel.matrix if matrix is None else matrix, dtype=float)
    n = m.shape[0]
    report = KernelReport()
    edge_set = set(dag.edges)
    for i in range(n):
        cols = np.nonzero(m[i])[0]
        s = _sequential_row_sum(cols, m[i, cols])
        if abs(s - 1.0) > ROW_SUM_TOL:
            report.row_sum_deviations.append((i, abs(s - 1.0)))
    for i, j in zip(*np.nonzero(m)):
        if (int(i), int(j)) not in edge_set:
            report.support_violations.append((int(i), int(j)))
    reachable = _reachable_from(0, n, [(int(i), int(j)) for i, j in zip(*np.nonzero(m))])
    report.unreachable_states = sorted(set(range(n)) - reachable)
    return report
