"""Reproducible RNG substreams for parallel Monte Carlo.

All randomness in the toolkit derives from a single 64-bit seed. Work is
partitioned into fixed-size blocks of excursions (BLOCK_SIZE each); block b
draws from an independent Philox stream keyed by

    key(b) = seed XOR ((b * 0x9E3779B97F4A7C15) mod 2**64)

Philox is counter-based, so streams with distinct keys are independent.
Blocks are reduced in index order, which makes every result a function of
(seed, block structure) alone: the number of workers never changes output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 4096
_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def substream_key(seed: int, index: int) -> int:
    return (seed ^ ((index * _GOLDEN) & _MASK64)) & _MASK64


def derive_seed(seed: int, purpose: int) -> int:
    """Mix a purpose label into a run seed (splitmix64 finalizer).

    Nonlinear mixing keeps purpose-level streams disjoint from the linear
    XOR-fold used for block substreams below.
    """
    z = (seed ^ ((purpose * _GOLDEN) & _MASK64)) & _MASK64
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator for substream `index` of the run keyed by `seed`."""
    return np.random.Generator(np.random.Philox(key=substream_key(seed, index)))


def block_sizes(total: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rem = divmod(total, block_size)
    sizes = [block_size] * full
    if rem:
        sizes.append(rem)
    return sizes


def map_blocks(
    total: int,
    seed: int,
    fn: Callable[[int, int, np.random.Generator], object],
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list:
    """Run fn(block_index, block_count, rng) over all blocks.

    Results come back in block order regardless of worker count.
    """
    sizes = block_sizes(total, block_size)

    def run(b: int) -> object:
        return fn(b, sizes[b], substream(seed, b))

    if workers <= 1 or len(sizes) <= 1:
        return [run(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(sizes))))


def resolve_workers(workers: int | None, env: Sequence[tuple[str, str]] | dict | None = None) -> int:
    """CLI default chain: explicit flag, then RGFN_WORKERS, then 1."""
    if workers is not None:
        return max(1, int(workers))
    import os

    mapping = dict(env) if env is not None else os.environ
    raw = mapping.get("RGFN_WORKERS")
    if raw is None:
        return 1
    return max(1, int(raw))
