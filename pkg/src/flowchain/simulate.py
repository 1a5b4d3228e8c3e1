"""Vectorized excursion simulation for discrete kernels.

Excursions start at s0 (index 0) and run until the chain re-enters s0.
Work is split into fixed blocks of lanes (see streams); within a block the
walker advances all live lanes one step at a time, drawing one uniform per
live lane per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonRecurrenceError
from .streams import map_blocks

DEFAULT_CAP = 10**6


def closed_cumulative(matrix: np.ndarray) -> np.ndarray:
    """Row-wise cumulative sums with the float roundoff gap closed.

    The tail from the last strictly positive entry onward is pinned to 1,
    so inverse-CDF sampling can never select a zero-probability column
    when a uniform lands in the gap between the true row sum and 1.
    """
    matrix = np.asarray(matrix, dtype=float)
    cum = np.cumsum(matrix, axis=1)
    for i in range(matrix.shape[0]):
        positive = np.nonzero(matrix[i] > 0)[0]
        if positive.size:
            cum[i, positive[-1] :] = 1.0
    return cum


@dataclass
class ExcursionStats:
    """Aggregates over a batch of excursions, in excursion order.

    terminal[i] is the state occupied right before return (time sigma-1);
    sigma[i] is the return time. Capped excursions carry terminal -1 and
    sigma 0 and are excluded from visit accumulators.
    """

    visits_sum: np.ndarray
    visits_sumsq: np.ndarray
    terminal: np.ndarray
    sigma: np.ndarray
    capped: int
    excursions: int

    @property
    def returned(self) -> int:
        return self.excursions - self.capped


def _walk_block(cum: np.ndarray, count: int, rng: np.random.Generator, cap: int, on_cap: str):
    n = cum.shape[0]
    visits = np.zeros((count, n), dtype=np.int64)
    visits[:, 0] = 1
    sigma = np.zeros(count, dtype=np.int64)
    terminal = np.full(count, -1, dtype=np.int64)
    lanes = np.arange(count)
    cur = np.zeros(count, dtype=np.int64)
    steps = 0
    while lanes.size:
        if steps >= cap:
            if on_cap == "raise":
                raise NonRecurrenceError(
                    f"{lanes.size} excursion(s) exceeded the {cap}-step cap; "
                    "the chain may not be recurrent"
                )
            visits[lanes] = 0
            break
        steps += 1
        u = rng.random(lanes.size)
        nxt = (u[:, None] < cum[cur]).argmax(axis=1)
        ret = nxt == 0
        done = lanes[ret]
        terminal[done] = cur[ret]
        sigma[done] = steps
        lanes = lanes[~ret]
        cur = nxt[~ret]
        visits[lanes, cur] += 1
    capped = int(np.sum(sigma == 0))
    return ExcursionStats(
        visits_sum=visits.sum(axis=0),
        visits_sumsq=(visits.astype(np.float64) ** 2).sum(axis=0),
        terminal=terminal,
        sigma=sigma,
        capped=capped,
        excursions=count,
    )


def simulate_excursions(
    kernel,
    excursions: int,
    rng_seed: int,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
    on_cap: str = "raise",
) -> ExcursionStats:
    """Run independent excursions of the wrapped chain from s0.

    on_cap: "raise" aborts on any excursion longer than cap; "truncate"
    marks it capped and keeps going.
    """
    if excursions < 1:
        raise ValueError(f"excursions must be >= 1, got {excursions}")
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    cum = kernel.transition_cumulative()
    blocks = map_blocks(
        excursions,
        rng_seed,
        lambda b, count, rng: _walk_block(cum, count, rng, cap, on_cap),
        workers=workers,
    )
    return ExcursionStats(
        visits_sum=sum(b.visits_sum for b in blocks),
        visits_sumsq=sum(b.visits_sumsq for b in blocks),
        terminal=np.concatenate([b.terminal for b in blocks]),
        sigma=np.concatenate([b.sigma for b in blocks]),
        capped=sum(b.capped for b in blocks),
        excursions=excursions,
    )
