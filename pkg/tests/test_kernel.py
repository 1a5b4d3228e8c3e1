import numpy as np
import pytest

import flowchain.kernel as kernel_mod
from flowchain.errors import KernelError
from flowchain.graphs import chain2, diamond
from flowchain.kernel import (
    ContinuousReward,
    DiscreteKernel,
    DiscreteReward,
    kernel_from_edge_flows,
    validate_kernel,
)
from flowchain.space import ContinuousSpace1D
from flowchain.splitchain import catalogue_instance


def test_single_path_flows_force_deterministic_kernel():
    dag = chain2()
    kern, flow = kernel_from_edge_flows(dag, {(0, 1): 7.0, (1, 0): 7.0})
    assert np.array_equal(kern.matrix, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(flow.values, np.array([7.0, 7.0]))


def test_diamond_flows_normalize_per_row():
    dag = diamond()
    flows = {(0, 1): 1.0, (0, 2): 4.0, (1, 3): 0.4, (1, 4): 0.6, (2, 4): 4.0, (3, 0): 0.4, (4, 0): 4.6}
    kern, flow = kernel_from_edge_flows(dag, flows)
    assert kern.matrix[0, 1] == pytest.approx(0.2, abs=1e-15)
    assert kern.matrix[0, 2] == pytest.approx(0.8, abs=1e-15)
    assert kern.matrix[1, 3] == pytest.approx(0.4, abs=1e-15)
    # per-row sum oracle
    for s in kern.row_sums():
        assert abs(s - 1.0) <= 1e-12
    assert flow.values[0] == pytest.approx(5.0)


def test_flow_round_trip_identity():
    dag = diamond()
    flows = {(0, 1): 1.0, (0, 2): 4.0, (1, 3): 0.4, (1, 4): 0.6, (2, 4): 4.0, (3, 0): 0.4, (4, 0): 4.6}
    kern, flow = kernel_from_edge_flows(dag, flows)
    for (s, t), value in flows.items():
        assert abs(flow.values[s] * kern.matrix[s, t] - value) <= 1e-12


def test_zero_outflow_state_errors():
    dag = diamond()
    flows = {(0, 1): 1.0, (0, 2): 4.0, (2, 4): 4.0, (3, 0): 0.4, (4, 0): 4.6}  # a has no flow
    with pytest.raises(KernelError, match="zero total outflow"):
        kernel_from_edge_flows(dag, flows)
    with pytest.raises(KernelError, match="positive"):
        kernel_from_edge_flows(dag, {(0, 1): 0.0})
    with pytest.raises(KernelError, match="not a graph edge"):
        kernel_from_edge_flows(dag, {(3, 4): 1.0})


def test_kernel_rejects_bad_rows():
    with pytest.raises(KernelError, match="deviate"):
        DiscreteKernel(np.array([[0.5, 0.4], [1.0, 0.0]]))
    with pytest.raises(KernelError, match="nonnegative"):
        DiscreteKernel(np.array([[1.5, -0.5], [1.0, 0.0]]))
    with pytest.raises(KernelError, match="outside declared support"):
        DiscreteKernel(np.array([[0.0, 1.0], [1.0, 0.0]]), support={(0, 1)})


def test_validate_kernel_empty_report_on_diamond(diamond_dag, diamond_k):
    report = validate_kernel(diamond_k, diamond_dag)
    assert report.ok
    assert report.lines() == []


def test_validate_kernel_flags_support_violation(diamond_dag):
    bad = np.zeros((5, 5))
    bad[0, 3] = 1.0  # s0 -> x1 is not an edge
    bad[1, 3] = bad[1, 4] = 0.5
    bad[2, 4] = 1.0
    bad[3, 0] = 1.0
    bad[4, 0] = 1.0
    report = validate_kernel(None, diamond_dag, matrix=bad)
    assert (0, 3) in report.support_violations
    assert not report.ok


def test_validate_kernel_reports_row_sum_deviation(diamond_dag, diamond_k):
    off = diamond_k.matrix.copy()
    off[1, 3] = 0.399  # row 1 sums to 0.999
    report = validate_kernel(None, diamond_dag, matrix=off)
    rows = dict(report.row_sum_deviations)
    assert rows[1] == pytest.approx(1e-3, rel=1e-6)


def test_validate_kernel_reports_unreachable_states(diamond_dag):
    unreach = np.zeros((5, 5))
    unreach[0, 1] = 1.0  # never goes b-ward
    unreach[1, 3] = unreach[1, 4] = 0.5
    unreach[2, 4] = 1.0
    unreach[3, 0] = 1.0
    unreach[4, 0] = 1.0
    report = validate_kernel(None, diamond_dag, matrix=unreach)
    assert report.unreachable_states == [2]


def test_sparse_and_dense_storage_agree_bitwise(monkeypatch):
    rng = np.random.default_rng(0)
    n = 40
    matrix = np.zeros((n, n))
    for s in range(n):
        targets = rng.choice(n, size=3, replace=False)
        probs = rng.dirichlet(np.ones(3))
        matrix[s, targets] = probs
        matrix[s, targets[0]] += 1.0 - matrix[s].sum()  # exact row sum 1
    dense = DiscreteKernel(matrix)
    monkeypatch.setattr(kernel_mod, "DENSE_LIMIT", 10)
    sparse = DiscreteKernel(matrix)
    assert not sparse._dense and dense._dense
    assert dense.row_sums() == sparse.row_sums()
    assert np.array_equal(dense.matrix, sparse.matrix)
    assert dense.support_sets() == sparse.support_sets()


def test_large_kernel_uses_sparse_rows():
    n = 600
    matrix = np.zeros((n, n))
    for s in range(n):
        matrix[s, (s + 1) % n] = 1.0
    kern = DiscreteKernel(matrix)
    assert not kern._dense
    assert kern.row_sums() == [1.0] * n
    assert kern.strongly_connected()


def test_continuous_kernel_density_normalization():
    base = catalogue_instance("interval-geometric").base_kernel()
    assert base.check_density_normalization([0.0, 0.25, 0.5, 0.75, 1.0]) == []
    broken = catalogue_instance("interval-geometric").base_kernel()
    broken.density = lambda x, t: 2.0 * np.ones_like(np.asarray(t, dtype=float))
    bad = broken.check_density_normalization([0.5])
    assert bad and bad[0][1] == pytest.approx(1.0, abs=1e-6)


def test_discrete_reward_validation(diamond_dag):
    reward = DiscreteReward({3: 1.0, 4: 4.0})
    reward.check_support(diamond_dag)
    assert reward.total() == 5.0
    with pytest.raises(KernelError, match="positive"):
        DiscreteReward({3: 0.0})
    with pytest.raises(KernelError, match="non-terminating"):
        DiscreteReward({1: 1.0}).check_support(diamond_dag)


def test_continuous_reward_total():
    space = ContinuousSpace1D(0.0, 1.0)
    reward = ContinuousReward(space, lambda x: 2.0 * np.ones_like(np.asarray(x, dtype=float)))
    assert reward.total() == pytest.approx(2.0, abs=1e-9)
