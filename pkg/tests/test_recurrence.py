import math

import numpy as np
import pytest

from flowchain.errors import NonRecurrenceError
from flowchain.graphs import chain2
from flowchain.kernel import DiscreteKernel
from flowchain.recurrence import (
    RETURN_LIMIT,
    build_counterexample_kernel,
    counterexample_analytic,
    return_time_stats,
    simulate_ladder_returns,
    walk_ladder_excursions,
)


def test_analytic_first_term_and_limit():
    curve = counterexample_analytic(10)
    assert curve.prob_return_by[0] == pytest.approx(1 - math.exp(-1.0), abs=1e-15)
    assert curve.limit == pytest.approx(1 - math.exp(-(math.pi**2) / 6), abs=1e-15)
    assert curve.limit == pytest.approx(0.80697, abs=5e-6)


def test_analytic_cumulative_close_to_limit_at_1e4():
    curve = counterexample_analytic(10_000)
    # tail bound: sum_{k>n} 1/(k+1)^2 < 1/n
    assert 0 < curve.limit - curve.prob_return_by[-1] <= 2.5e-5
    assert np.all(np.diff(curve.prob_return_by) > 0)


def test_kernel_rows_sum_to_one_and_escape():
    kern = build_counterexample_kernel(truncation=10**6)
    row0 = kern.row(0)
    assert row0[1] == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert row0[0] == pytest.approx(1 - math.exp(-1.0), abs=1e-15)
    for n in (0, 1, 5, 1000):
        row = kern.row(n)
        assert sum(row.values()) == pytest.approx(1.0, abs=1e-15)
    drops = [kern.row(n)[0] for n in (0, 10, 100, 1000, 10_000)]
    assert all(a > b for a, b in zip(drops, drops[1:]))
    assert drops[-1] < 1e-8


def test_kernel_truncation_routes_to_cap_pathway():
    kern = build_counterexample_kernel(truncation=10)
    with pytest.raises(NonRecurrenceError, match="truncation"):
        kern.row(11)
    with pytest.raises(ValueError):
        build_counterexample_kernel(truncation=0)


def test_counterexample_chain_is_irreducible_on_truncated_range():
    # 0 climbs to any n; any n drops straight to 0; yet return_fraction < 1
    kern = build_counterexample_kernel(truncation=100)
    for n in range(100):
        assert kern.row(n)[n + 1] > 0
        assert kern.row(n)[0] > 0
    stats = return_time_stats(kern, 200_000, cap=100, rng_seed=8)
    assert stats.return_fraction < 0.9


def test_simulated_return_fraction_matches_analytic():
    kern = build_counterexample_kernel(truncation=10**5)
    cap = 10_000
    excursions = 200_000
    stats = return_time_stats(kern, excursions, cap=cap, rng_seed=42)
    analytic = counterexample_analytic(cap).prob_return_by[-1]
    band = 4 * np.sqrt(analytic * (1 - analytic) / excursions)
    assert abs(stats.return_fraction - analytic) <= band


def test_per_step_cumulative_matches_analytic_along_the_curve():
    kern = build_counterexample_kernel(truncation=10**4)
    excursions = 100_000
    counts, capped = simulate_ladder_returns(kern, excursions, cap=100, rng_seed=3)
    assert counts.sum() + capped == excursions
    curve = counterexample_analytic(100).prob_return_by
    cum = np.cumsum(counts[1:]) / excursions
    for n in (1, 2, 10, 100):
        p = curve[n - 1]
        assert abs(cum[n - 1] - p) <= 4 * np.sqrt(p * (1 - p) / excursions)


def test_ladder_walk_matches_cascade_distribution():
    # same law, two samplers: per-lane walk vs binomial cascade, on a
    # ladder that always returns within 6 steps
    from flowchain.recurrence import LadderKernel

    kern = LadderKernel(p_advance=lambda n: np.where(n < 5, 0.5, 0.0), truncation=100)
    m = 50_000
    sigma = walk_ladder_excursions(kern, m, cap=10, rng_seed=5)
    counts, capped = simulate_ladder_returns(kern, m, cap=10, rng_seed=6)
    assert capped == 0
    for n in range(1, 7):
        p = 0.5**n if n < 6 else 0.5**5
        band = 4 * np.sqrt(p * (1 - p) / m) + 1e-9
        assert abs(np.mean(sigma == n) - p) <= band
        assert abs(counts[n] / m - p) <= band


def test_ladder_walk_cap_abort():
    kern = build_counterexample_kernel(truncation=10**4)
    with pytest.raises(NonRecurrenceError, match="cap"):
        walk_ladder_excursions(kern, 200, cap=1000, rng_seed=1)


def test_return_stats_wrapped_diamond(diamond_k):
    stats = return_time_stats(diamond_k, 50_000, cap=100, rng_seed=4)
    assert stats.mean == 3.0
    assert stats.variance == 0.0
    assert stats.max_observed == 3
    assert stats.return_fraction == 1.0


def test_return_stats_two_cycle():
    kern = DiscreteKernel(np.array([[0.0, 1.0], [1.0, 0.0]]))
    stats = return_time_stats(kern, 10_000, cap=10, rng_seed=4)
    assert stats.mean == 2.0 and stats.return_fraction == 1.0


def test_return_limit_constant():
    assert RETURN_LIMIT == pytest.approx(0.806974710860102, abs=1e-15)
