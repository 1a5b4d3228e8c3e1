"""Invariant measures of wrapped chains: the GFlowNet state flow.

Three independent routes to the same measure: a direct linear solve with
the s0 coordinate pinned to 1, Cesaro-averaged power iteration (wrapped
chains are typically periodic), and a Monte Carlo occupation estimator
built from per-excursion visit counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, KernelError
from .simulate import DEFAULT_CAP, simulate_excursions

NORMALIZATIONS = ("lambda_s0_one", "flow_unnormalized", "eps_integral_one")
EXACT_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class FlowMeasure:
    """Nonnegative measure over states with a declared normalization tag."""

    values: np.ndarray
    normalization: str
    stderr: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.normalization not in NORMALIZATIONS:
            raise KernelError(f"unknown normalization tag {self.normalization!r}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise KernelError("flow values must be finite and nonnegative")
        if not np.any(values > 0):
            raise KernelError("flow measure is identically zero")
        if self.normalization == "lambda_s0_one" and abs(values[0] - 1.0) > 1e-12:
            raise KernelError(f"lambda_s0_one requires value 1 at s0, got {values[0]}")

    def scaled(self, c: float) -> "FlowMeasure":
        return FlowMeasure(values=self.values * c, normalization="flow_unnormalized")


def flow_matching_residual(kernel, flow: FlowMeasure, exempt_s0: bool) -> np.ndarray:
    """residual(t) = F(t) - sum_s F(s) P(s, t); the s0 slot is zeroed when exempt."""
    values = flow.values
    residual = values - values @ kernel.matrix
    if exempt_s0:
        residual = residual.copy()
        residual[0] = 0.0
    return residual


def solve_invariant_exact(kernel) -> FlowMeasure:
    """Unique invariant measure with lambda(s0) = 1, by direct linear solve.

    Pins coordinate 0 and solves the remaining (n-1)-dimensional system
    lambda(t) = sum_s lambda(s) P(s, t), t != s0.
    """
    if not kernel.strongly_connected():
        raise KernelError("kernel support is not irreducible")
    p = kernel.matrix
    n = p.shape[0]
    if n == 1:
        return FlowMeasure(values=np.ones(1), normalization="lambda_s0_one")
    a = np.eye(n - 1) - p[1:, 1:].T
    b = p[0, 1:]
    try:
        y = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise KernelError(f"reduced invariance system is singular: {exc}") from exc
    lam = np.concatenate(([1.0], y))
    residual = np.max(np.abs(lam @ p - lam))
    if residual > EXACT_RESIDUAL_TOL:
        raise KernelError(f"invariant solve residual {residual:.3e} exceeds {EXACT_RESIDUAL_TOL}")
    return FlowMeasure(values=lam, normalization="lambda_s0_one")


def kernel_period(kernel) -> int:
    """Period of state s0: gcd of level mismatches over support edges.

    Requires an irreducible support; computed from a BFS layering, so it
    is deterministic and needs no probe simulation.
    """
    n = kernel.n
    children = kernel.support_sets()
    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for s in frontier:
            for t in children[s]:
                if level[t] < 0:
                    level[t] = level[s] + 1
                    nxt.append(t)
        frontier = nxt
    g = 0
    for s in range(n):
        for t in children[s]:
            g = math.gcd(g, int(level[s] + 1 - level[t]))
    return max(g, 1)


def solve_invariant_power(kernel, tol: float = 1e-10, max_iters: int = 100_000) -> FlowMeasure:
    """Power iteration with Cesaro averaging over the detected period.

    Wrapped chains are often periodic (all excursions the same length), so
    plain iteration cycles; averaging the last p iterates restores
    convergence. The result is renormalized to lambda(s0) = 1.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not kernel.strongly_connected():
        raise KernelError("kernel support is not irreducible")
    p = kernel.matrix
    n = p.shape[0]
    period = kernel_period(kernel)
    x = np.full(n, 1.0 / n)
    window = [x]
    prev_avg = None
    for _ in range(max_iters):
        x = x @ p
        window.append(x)
        if len(window) > period:
            window.pop(0)
        if len(window) == period:
            avg = np.mean(window, axis=0)
            if prev_avg is not None and np.max(np.abs(avg - prev_avg)) <= tol * 0.1:
                if avg[0] <= 0:
                    raise ConvergenceError("averaged iterate vanished at s0")
                lam = avg / avg[0]
                if np.max(np.abs(lam - lam @ p)) <= tol:
                    return FlowMeasure(values=lam, normalization="lambda_s0_one")
            prev_avg = avg
    raise ConvergenceError(f"power iteration did not converge in {max_iters} iterations")


def estimate_invariant_occupation(
    kernel,
    excursions: int,
    rng_seed: int,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> FlowMeasure:
    """Monte Carlo occupation measure: mean per-excursion visit counts.

    lambda(s) is the expected number of visits to s before the return to
    s0, which is an unbiased estimate of the invariant measure normalized
    to lambda(s0) = 1. Any excursion longer than cap aborts the run.
    """
    if hasattr(kernel, "p_advance"):
        # ladder chains visit each of 0..sigma-1 exactly once per excursion
        from .recurrence import walk_ladder_excursions

        sigma = walk_ladder_excursions(kernel, excursions, cap, rng_seed)
        top = int(sigma.max())
        counts = np.array([(sigma > s).sum() for s in range(top)], dtype=float)
        mean = counts / excursions
        stderr = np.sqrt(mean * (1 - mean) / excursions)
        mean[0] = 1.0
        return FlowMeasure(values=mean, normalization="lambda_s0_one", stderr=stderr)
    stats = simulate_excursions(kernel, excursions, rng_seed, cap=cap, workers=workers, on_cap="raise")
    m = stats.excursions
    mean = stats.visits_sum / m
    if m > 1:
        var = np.maximum(stats.visits_sumsq - m * mean**2, 0.0) / (m - 1)
        stderr = np.sqrt(var / m)
    else:
        stderr = np.zeros_like(mean)
    mean = mean.astype(float)
    mean[0] = 1.0
    return FlowMeasure(values=mean, normalization="lambda_s0_one", stderr=stderr)
