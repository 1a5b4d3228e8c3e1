import numpy as np
import pytest

from flowchain.errors import KernelError
from flowchain.kernel import DiscreteKernel
from flowchain.mcmc import (
    autocorrelation,
    bimodal_lattice_target,
    compare,
    default_checkpoints,
    ess_initial_positive,
    local_walk_proposal,
    metropolis_hastings,
    mh_transition_matrix,
    permutation_pvalue_lag1,
    stationary_autocorr_lag1,
    tv_curve,
    tv_distance,
)
from flowchain.streams import substream


def test_uniform_target_accepts_everything():
    q = local_walk_proposal(7)
    target = np.ones(7)
    assert np.max(np.abs(mh_transition_matrix(target, q) - q.matrix)) == 0.0


def test_two_state_flip_long_run_frequency():
    target = np.array([1.0, 4.0])
    q = DiscreteKernel(np.array([[0.0, 1.0], [1.0, 0.0]]))
    p = mh_transition_matrix(target, q)
    assert np.allclose(p, [[0.0, 1.0], [0.25, 0.75]], atol=1e-15)
    samples = metropolis_hastings(target, q, 1_000_000, rng_seed=13)
    # asymptotic variance of the occupation frequency of state 1 for the
    # exact two-state chain: pi0*pi1*(2/(a+b) - 1)
    a, b = 1.0, 0.25
    asym = (0.2 * 0.8) * (2.0 / (a + b) - 1.0)
    freq = np.mean(samples == 1)
    assert abs(freq - 0.8) <= 4 * np.sqrt(asym / samples.size)


def test_detailed_balance_entrywise():
    target = bimodal_lattice_target()
    q = local_walk_proposal(21)
    p = mh_transition_matrix(target, q)
    pi = target / target.sum()
    flux = pi[:, None] * p
    assert np.max(np.abs(flux - flux.T)) <= 1e-12
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-12


def test_bimodal_mode_indicator_autocorrelation_exceeds_point_nine():
    target = bimodal_lattice_target()
    q = local_walk_proposal(21)
    p = mh_transition_matrix(target, q)
    pi = target / target.sum()
    f = (np.arange(21) >= 11).astype(float)
    rho_exact = stationary_autocorr_lag1(p, pi, f)
    assert rho_exact > 0.9
    samples = metropolis_hastings(target, q, 400_000, rng_seed=2)[10_000:]
    rho_emp = autocorrelation(f[samples], 1)[0]
    assert abs(rho_emp - rho_exact) <= 0.02


def test_mh_preserves_target_tv():
    target = bimodal_lattice_target()
    q = local_walk_proposal(21)
    pi = target / target.sum()
    samples = metropolis_hastings(target, q, 1_010_000, rng_seed=42)[10_000:]
    emp = np.bincount(samples, minlength=21) / samples.size
    assert tv_distance(emp, pi) <= 0.01


def test_mh_validates_inputs():
    q = local_walk_proposal(5)
    with pytest.raises(KernelError, match="positive"):
        metropolis_hastings(np.array([1.0, 0.0, 1.0, 1.0, 1.0]), q, 10, rng_seed=0)
    with pytest.raises(KernelError, match="states"):
        metropolis_hastings(np.ones(4), q, 10, rng_seed=0)


def test_autocorrelation_iid_near_zero():
    rng = substream(1, 0)
    x = rng.random(200_000)
    rho = autocorrelation(x, 5)
    assert np.max(np.abs(rho)) <= 4 / np.sqrt(x.size) + 1e-3


def test_ess_bimodal_chain_matches_exact_tau():
    # oracle: integrated autocorrelation time from exact matrix powers
    target = bimodal_lattice_target()
    q = local_walk_proposal(21)
    p = mh_transition_matrix(target, q)
    pi = target / target.sum()
    f = (np.arange(21) >= 11).astype(float)
    mu = float(pi @ f)
    var = float(pi @ (f - mu) ** 2)
    tau_exact = 1.0
    vec = f - mu
    step = vec.copy()
    for _ in range(5000):
        step = p @ step
        tau_exact += 2.0 * float(pi @ ((f - mu) * step)) / var
    samples = metropolis_hastings(target, q, 1_000_000, rng_seed=3)[10_000:]
    ess = ess_initial_positive(f[samples], max_lag=10_000)
    expected = samples.size / tau_exact
    assert abs(ess - expected) / expected <= 0.25


def test_ess_capped_at_sample_count_for_anticorrelated_chain():
    target = np.array([1.0, 4.0])
    q = DiscreteKernel(np.array([[0.0, 1.0], [1.0, 0.0]]))
    samples = metropolis_hastings(target, q, 100_000, rng_seed=3)
    # lag-1 autocorrelation is -0.25: the mean is super-efficient, and the
    # reported ESS is capped at n
    assert ess_initial_positive(samples.astype(float)) == samples.size


def test_ess_iid_close_to_n():
    rng = substream(5, 0)
    x = rng.random(100_000)
    assert ess_initial_positive(x) >= 0.9 * x.size


def test_permutation_test_iid_does_not_reject():
    rng = substream(9, 0)
    x = (rng.random(100_000) < 0.4).astype(float)
    assert permutation_pvalue_lag1(x, n_perm=200, rng_seed=1) > 0.01


def test_permutation_test_rejects_correlated_chain():
    target = bimodal_lattice_target()
    q = local_walk_proposal(21)
    samples = metropolis_hastings(target, q, 100_000, rng_seed=7)
    f = (np.arange(21) >= 11).astype(float)
    assert permutation_pvalue_lag1(f[samples], n_perm=200, rng_seed=2) <= 0.01


def test_tv_curve_checkpoints():
    rng = substream(4, 0)
    target = np.array([0.25, 0.75])
    samples = (rng.random(10_000) < 0.75).astype(np.int64)
    curve = tv_curve(samples, target, [100, 1000, 10_000])
    assert [c for c, _ in curve] == [100, 1000, 10_000]
    assert all(v >= 0 for _, v in curve)


def test_compare_rejects_mismatched_spaces():
    with pytest.raises(KernelError, match="outside"):
        compare(
            np.array([0, 1, 25]), np.array([0, 1, 2]), np.ones(21),
            statistic=np.arange(21, dtype=float),
        )


def test_default_checkpoints():
    assert default_checkpoints(1_000_000) == [1000, 10_000, 100_000, 1_000_000]
    assert default_checkpoints(5000) == [1000, 5000]


def test_compare_independent_samples_dominate_mh_tv():
    # fixed-seed rendition of the qualitative comparison: the independent
    # terminating samples reach lower TV than MH at every checkpoint and
    # the MH curve decreases
    from flowchain.graphs import blocked_fan
    from flowchain.kernel import DiscreteReward
    from flowchain.terminating import terminal_sequence
    from flowchain.train import fit, kernel_from_params

    target = bimodal_lattice_target()
    dag = blocked_fan(21, 3)
    leaves = sorted(dag.terminating)
    reward = DiscreteReward({x: float(v) for x, v in zip(leaves, target)})
    params, _ = fit(dag, reward, iters=60_000, step_size=0.05, rng_seed=4, tol=1e-9)
    kern, _ = kernel_from_params(params, dag)
    term = terminal_sequence(kern, 100_000, rng_seed=5)
    position = {x: i for i, x in enumerate(leaves)}
    gfn = np.array([position[x] for x in term])
    mh = metropolis_hastings(target, local_walk_proposal(21), 110_000, rng_seed=99)[10_000:]
    indicator = (np.arange(21) >= 11).astype(float)
    gfn_report, mh_report = compare(gfn, mh, target, statistic=indicator, lags=10)
    mh_tvs = [v for _, v in mh_report.tv_curve]
    assert all(a > b for a, b in zip(mh_tvs, mh_tvs[1:]))
    for (_, gfn_tv), (_, mh_tv) in zip(gfn_report.tv_curve, mh_report.tv_curve):
        assert gfn_tv <= mh_tv
    assert gfn_report.ess > 10 * mh_report.ess
    assert abs(gfn_report.autocorr[0]) < 0.01
    assert mh_report.autocorr[0] > 0.5
