"""Terminating-state distributions of wrapped chains, three independent ways.

The terminating distribution is the law of the state visited right before
the chain re-enters s0. It can be computed by dynamic programming over the
acyclic part of the graph, read off an invariant measure, or estimated by
simulation; agreement of the three is the discrete fundamental theorem in
executable form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KernelError
from .invariant import FlowMeasure, flow_matching_residual
from .kernel import DiscreteReward
from .simulate import DEFAULT_CAP, simulate_excursions
from .space import PointedDag

_Z95 = 1.959963984540054
LEMMA_RESIDUAL_TOL = 1e-8
SUM_TOL = 1e-10


@dataclass(frozen=True)
class TerminatingDistribution:
    """Probabilities over the terminating states X."""

    probs: dict[int, float]
    method: str
    stderr: dict[int, float] | None = None

    def __post_init__(self):
        if self.method in ("enumeration", "lemma") :
            total = sum(self.probs[x] for x in sorted(self.probs))
            if abs(total - 1.0) > SUM_TOL:
                raise KernelError(f"terminating probabilities sum to {total}, not 1")

    def as_array(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for x, p in self.probs.items():
            out[x] = p
        return out


def wilson_halfwidth(successes: int, trials: int, z: float = _Z95) -> float:
    """Half-width of the Wilson score interval at confidence z."""
    if trials == 0:
        return float("inf")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    return (z / denom) * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))


def terminating_by_enumeration(dag: PointedDag, kernel) -> TerminatingDistribution:
    """Dynamic programming over the DAG in topological order.

    reach(t) sums the probabilities of all s0->t paths along non-wrap
    edges; the terminating probability is reach(x) * P(x, s0). Same sum as
    explicit path enumeration, polynomial time.
    """
    p = kernel.matrix
    n = dag.n
    reach = np.zeros(n)
    reach[0] = 1.0
    incoming: list[list[int]] = [[] for _ in range(n)]
    for s, t in dag.non_wrap_edges:
        incoming[t].append(s)
    for t in dag.topological_order():
        if t == 0:
            continue
        reach[t] = sum(reach[s] * p[s, t] for s in sorted(incoming[t]))
    probs = {x: float(reach[x] * p[x, 0]) for x in sorted(dag.terminating)}
    return TerminatingDistribution(probs=probs, method="enumeration")


def terminating_by_lemma(kernel, lam: FlowMeasure) -> TerminatingDistribution:
    """Read the terminating distribution off the invariant measure.

    With lambda normalized to lambda(s0) = 1, the terminating probability
    at x is lambda(x) * P(x, s0).
    """
    if lam.normalization != "lambda_s0_one":
        raise KernelError(f"need lambda_s0_one normalization, got {lam.normalization}")
    residual = np.max(np.abs(flow_matching_residual(kernel, lam, exempt_s0=False)))
    if residual > LEMMA_RESIDUAL_TOL:
        raise KernelError(
            f"measure is not invariant: residual {residual:.3e} exceeds {LEMMA_RESIDUAL_TOL}"
        )
    p = kernel.matrix
    xs = sorted(s for s in range(kernel.n) if p[s, 0] > 0)
    probs = {x: float(lam.values[x] * p[x, 0]) for x in xs}
    return TerminatingDistribution(probs=probs, method="lemma")


def terminating_by_simulation(
    kernel,
    excursions: int,
    rng_seed: int,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> TerminatingDistribution:
    """Empirical frequency of the pre-return state over independent excursions."""
    stats = simulate_excursions(kernel, excursions, rng_seed, cap=cap, workers=workers, on_cap="raise")
    counts = np.bincount(stats.terminal, minlength=kernel.n)
    xs = sorted(s for s in range(kernel.n) if kernel.matrix[s, 0] > 0)
    probs = {x: counts[x] / excursions for x in xs}
    stderr = {x: wilson_halfwidth(int(counts[x]), excursions) for x in xs}
    return TerminatingDistribution(probs=probs, method="simulation", stderr=stderr)


def terminal_sequence(kernel, excursions: int, rng_seed: int, cap: int = DEFAULT_CAP, workers: int = 1) -> np.ndarray:
    """Per-excursion terminating states in excursion order (independent samples)."""
    stats = simulate_excursions(kernel, excursions, rng_seed, cap=cap, workers=workers, on_cap="raise")
    return stats.terminal


def check_boundary_conditions(flow: FlowMeasure, kernel, reward: DiscreteReward) -> dict[int, float]:
    """residual(x) = F(x) P(x, s0) - R(x) over the terminating states."""
    p = kernel.matrix
    xs = sorted(set(s for s in range(kernel.n) if p[s, 0] > 0) | set(reward.values))
    return {x: float(flow.values[x] * p[x, 0] - reward.values.get(x, 0.0)) for x in xs}


@dataclass(frozen=True)
class Theorem1Report:
    """Verdict of the discrete fundamental theorem on one instance."""

    invariance_ok: bool
    max_invariance_residual: float
    boundary_ok: bool
    max_boundary_residual: float
    conclusion_ok: bool | None
    max_deviation: float | None
    tol: float

    @property
    def hypotheses_ok(self) -> bool:
        return self.invariance_ok and self.boundary_ok

    @property
    def passed(self) -> bool:
        return self.hypotheses_ok and bool(self.conclusion_ok)

    def lines(self) -> list[str]:
        out = [
            f"invariance residuals on S\\{{s0}}: max {self.max_invariance_residual:.3e} "
            f"({'ok' if self.invariance_ok else 'FAIL'})",
            f"boundary residuals on X: max {self.max_boundary_residual:.3e} "
            f"({'ok' if self.boundary_ok else 'FAIL'})",
        ]
        if self.conclusion_ok is None:
            out.append("conclusion not asserted (hypothesis failed)")
        else:
            out.append(
                f"terminating distribution vs R/Z: max deviation {self.max_deviation:.3e} "
                f"({'ok' if self.conclusion_ok else 'FAIL'})"
            )
        return out


def verify_theorem1(dag: PointedDag, kernel, flow: FlowMeasure, reward: DiscreteReward, tol: float = 1e-8) -> Theorem1Report:
    """Check the hypotheses, then assert the conclusion by enumeration.

    Hypotheses: F invariant away from s0, and F(x) P(x, s0) = R(x) on X.
    Conclusion: the terminating distribution equals R / R(X).
    """
    inv_residual = flow_matching_residual(kernel, flow, exempt_s0=True)
    max_inv = float(np.max(np.abs(inv_residual)))
    boundary = check_boundary_conditions(flow, kernel, reward)
    max_bnd = float(max(abs(v) for v in boundary.values())) if boundary else 0.0
    invariance_ok = max_inv <= tol
    boundary_ok = max_bnd <= tol
    if not (invariance_ok and boundary_ok):
        return Theorem1Report(invariance_ok, max_inv, boundary_ok, max_bnd, None, None, tol)
    dist = terminating_by_enumeration(dag, kernel)
    z = reward.total()
    deviation = max(
        abs(dist.probs.get(x, 0.0) - reward.values.get(x, 0.0) / z)
        for x in set(dist.probs) | set(reward.values)
    )
    return Theorem1Report(True, max_inv, True, max_bnd, deviation <= tol, float(deviation), tol)
