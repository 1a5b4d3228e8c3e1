"""Return-time statistics and the escape-to-infinity counter-example.

The counter-example chain on the non-negative integers either advances
n -> n+1 with probability exp(-1/(n+1)^2) or drops back to 0. The graph is
irreducible, yet the total return probability is 1 - exp(-pi^2/6) < 1:
irreducibility plus wrap-around structure alone do not give recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonRecurrenceError
from .simulate import simulate_excursions
from .streams import substream

RETURN_LIMIT = 1.0 - math.exp(-(math.pi**2) / 6.0)


@dataclass(frozen=True)
class ReturnTimeSummary:
    """Moments of the return time among excursions that returned within cap."""

    mean: float
    variance: float
    max_observed: int
    return_fraction: float
    cap: int
    excursions: int


class LadderKernel:
    """Lazy countable-state kernel: from n, advance to n+1 or drop to 0.

    Rows are generated on demand from the advance probability; walking past
    the truncation bound routes into the step-cap pathway.
    """

    def __init__(self, p_advance: Callable[[np.ndarray], np.ndarray], truncation: int):
        if truncation < 1:
            raise ValueError(f"truncation must be >= 1, got {truncation}")
        self.p_advance = p_advance
        self.truncation = truncation

    def row(self, n: int) -> dict[int, float]:
        if n > self.truncation:
            raise NonRecurrenceError(
                f"state {n} beyond truncation {self.truncation}; treat as a cap abort"
            )
        p = float(self.p_advance(np.asarray([n], dtype=float))[0])
        return {n + 1: p, 0: 1.0 - p}


def build_counterexample_kernel(truncation: int = 10**6) -> LadderKernel:
    """Advance probabilities exp(-1/(n+1)^2); drop probability is the rest."""
    return LadderKernel(
        p_advance=lambda n: np.exp(-1.0 / (n + 1.0) ** 2),
        truncation=truncation,
    )


@dataclass(frozen=True)
class CounterexampleCurve:
    """Analytic return-by-n curve and its closed-form limit."""

    prob_return_by: np.ndarray
    limit: float


def counterexample_analytic(n_max: int) -> CounterexampleCurve:
    """Cumulative return probabilities of the counter-example chain.

    P(sigma = n) telescopes to exp(-S(n-1)) - exp(-S(n)) with S(m) the
    partial sum of 1/j^2, so P(sigma <= n) = 1 - exp(-S(n)) and the limit
    is 1 - exp(-pi^2/6).
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    j = np.arange(1, n_max + 1, dtype=float)
    partial = np.cumsum(1.0 / (j * j))
    return CounterexampleCurve(prob_return_by=1.0 - np.exp(-partial), limit=RETURN_LIMIT)


def simulate_ladder_returns(
    kernel: LadderKernel, excursions: int, cap: int, rng_seed: int
) -> tuple[np.ndarray, int]:
    """Return-time histogram of the ladder chain by binomial thinning.

    All excursions that are still running after k steps sit at state k, so
    the survivor count evolves as a binomial cascade driven only by the
    kernel's row probabilities; this samples exactly the same law as
    walking each lane separately.
    """
    if cap > kernel.truncation:
        raise NonRecurrenceError(
            f"cap {cap} exceeds kernel truncation {kernel.truncation}"
        )
    rng = substream(rng_seed, 0)
    counts = np.zeros(cap + 1, dtype=np.int64)
    alive = excursions
    for n in range(1, cap + 1):
        if alive == 0:
            break
        p = float(kernel.p_advance(np.asarray([n - 1], dtype=float))[0])
        survivors = int(rng.binomial(alive, p))
        counts[n] = alive - survivors
        alive = survivors
    return counts, alive


def walk_ladder_excursions(
    kernel: LadderKernel, excursions: int, cap: int, rng_seed: int
) -> np.ndarray:
    """Per-lane ladder walk; raises when any excursion outlives the cap."""
    rng = substream(rng_seed, 0)
    sigma = np.zeros(excursions, dtype=np.int64)
    lanes = np.arange(excursions)
    for n in range(1, cap + 1):
        if not lanes.size:
            return sigma
        p = float(kernel.p_advance(np.asarray([n - 1], dtype=float))[0])
        u = rng.random(lanes.size)
        returned = u >= p
        sigma[lanes[returned]] = n
        lanes = lanes[~returned]
    raise NonRecurrenceError(
        f"{lanes.size} excursion(s) exceeded the {cap}-step cap; "
        "the chain may not be recurrent"
    )


def return_time_stats(kernel, excursions: int, cap: int, rng_seed: int, workers: int = 1) -> ReturnTimeSummary:
    """Simulate excursions from s0 and summarize the return times.

    Excursions are truncated at cap; moments cover the returners only.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if isinstance(kernel, LadderKernel):
        counts, capped = simulate_ladder_returns(kernel, excursions, cap, rng_seed)
        ns = np.arange(cap + 1, dtype=float)
        returned = int(counts.sum())
        if returned == 0:
            return ReturnTimeSummary(math.nan, math.nan, 0, 0.0, cap, excursions)
        mean = float(np.dot(counts, ns) / returned)
        var = float(np.dot(counts, (ns - mean) ** 2) / returned)
        max_obs = int(np.max(np.nonzero(counts)[0]))
        return ReturnTimeSummary(mean, var, max_obs, returned / excursions, cap, excursions)
    stats = simulate_excursions(kernel, excursions, rng_seed, cap=cap, workers=workers, on_cap="truncate")
    sigma = stats.sigma[stats.sigma > 0]
    if sigma.size == 0:
        return ReturnTimeSummary(math.nan, math.nan, 0, 0.0, cap, excursions)
    return ReturnTimeSummary(
        mean=float(sigma.mean()),
        variance=float(sigma.var()),
        max_observed=int(sigma.max()),
        return_fraction=sigma.size / excursions,
        cap=cap,
        excursions=excursions,
    )
