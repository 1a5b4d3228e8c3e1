"""Tabular learning of a kernel and flow satisfying the theorem hypotheses.

Parametrization: per-state softmax logits over out-edges for the kernel
and log-space state flows, so stochasticity and positivity hold by
construction. The objective is the squared invariance residual away from
s0 plus the squared boundary residual on X; it is zero exactly when the
fundamental-theorem hypotheses hold.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError
from .kernel import DiscreteKernel, DiscreteReward
from .space import PointedDag
from .streams import substream

DIVERGENCE_ABORT = 1e6


@dataclass
class TabularParams:
    """Softmax logits per state (over sorted out-targets) and log state flows."""

    logits: dict[int, np.ndarray]
    log_flow: np.ndarray


@lru_cache(maxsize=64)
def edge_targets(dag: PointedDag) -> dict[int, tuple[int, ...]]:
    """Out-edge targets per state, sorted by target index."""
    out: dict[int, list[int]] = {s: [] for s in range(dag.n)}
    for s, t in dag.edges:
        out[s].append(t)
    return {s: tuple(sorted(ts)) for s, ts in out.items()}


@dataclass(frozen=True)
class _Workspace:
    """Flat-vector layout: log_flow (n entries) then logits in state order."""

    n: int
    starts: np.ndarray
    seg_id: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    xs: np.ndarray


@lru_cache(maxsize=64)
def _workspace(dag: PointedDag) -> _Workspace:
    targets = edge_targets(dag)
    starts, src, dst = [], [], []
    offset = 0
    for s in range(dag.n):
        starts.append(offset)
        for t in targets[s]:
            src.append(s)
            dst.append(t)
        offset += len(targets[s])
    counts = np.diff(np.append(starts, offset))
    return _Workspace(
        n=dag.n,
        starts=np.asarray(starts, dtype=np.int64),
        seg_id=np.repeat(np.arange(dag.n), counts),
        edge_src=np.asarray(src, dtype=np.int64),
        edge_dst=np.asarray(dst, dtype=np.int64),
        xs=np.asarray(sorted(dag.terminating), dtype=np.int64),
    )


def _softmax_edges(logits: np.ndarray, ws: _Workspace) -> np.ndarray:
    top = np.maximum.reduceat(logits, ws.starts)[ws.seg_id]
    e = np.exp(logits - top)
    return e / np.add.reduceat(e, ws.starts)[ws.seg_id]


def _flat_state(v: np.ndarray, ws: _Workspace):
    flow = np.exp(v[: ws.n])
    probs = _softmax_edges(v[ws.n :], ws)
    p = np.zeros((ws.n, ws.n))
    p[ws.edge_src, ws.edge_dst] = probs
    return flow, probs, p


def _loss_flat(v: np.ndarray, ws: _Workspace, r: np.ndarray) -> float:
    # overflowing candidates evaluate to inf/nan and lose the line search
    with np.errstate(over="ignore", invalid="ignore"):
        flow, _, p = _flat_state(v, ws)
        a = flow - flow @ p
        a[0] = 0.0
        b = flow[ws.xs] * p[ws.xs, 0] - r[ws.xs]
        return float(np.dot(a, a) + np.dot(b, b))


def _grad_flat(v: np.ndarray, ws: _Workspace, r: np.ndarray) -> np.ndarray:
    flow, probs, p = _flat_state(v, ws)
    a = flow - flow @ p
    a[0] = 0.0
    b = flow[ws.xs] * p[ws.xs, 0] - r[ws.xs]
    # dL/dP and dL/dF; a[0] = 0 keeps the exempt column out of both
    g_p = -2.0 * np.outer(flow, a)
    g_p[ws.xs, 0] += 2.0 * b * flow[ws.xs]
    df = 2.0 * a - 2.0 * (p @ a)
    df[ws.xs] += 2.0 * b * p[ws.xs, 0]
    out = np.empty_like(v)
    out[: ws.n] = df * flow
    g_edge = g_p[ws.edge_src, ws.edge_dst]
    seg_dot = np.add.reduceat(g_edge * probs, ws.starts)[ws.seg_id]
    out[ws.n :] = probs * (g_edge - seg_dot)
    return out


def pack(params: TabularParams, dag: PointedDag) -> np.ndarray:
    parts = [params.log_flow]
    for s in range(dag.n):
        parts.append(params.logits[s])
    return np.concatenate(parts)


def unpack(vec: np.ndarray, dag: PointedDag) -> TabularParams:
    n = dag.n
    logits = {}
    offset = n
    for s, ts in edge_targets(dag).items():
        logits[s] = vec[offset : offset + len(ts)].copy()
        offset += len(ts)
    return TabularParams(logits=logits, log_flow=vec[:n].copy())


def build_matrix(params: TabularParams, dag: PointedDag) -> np.ndarray:
    ws = _workspace(dag)
    _, _, p = _flat_state(pack(params, dag), ws)
    return p


def kernel_from_params(params: TabularParams, dag: PointedDag):
    from .invariant import FlowMeasure

    kern = DiscreteKernel(build_matrix(params, dag), support=set(dag.edges))
    flow = FlowMeasure(values=np.exp(params.log_flow), normalization="flow_unnormalized")
    return kern, flow


def loss(params: TabularParams, dag: PointedDag, reward: DiscreteReward) -> float:
    """Squared invariance residual off s0 plus squared boundary residual on X."""
    return _loss_flat(pack(params, dag), _workspace(dag), reward.on_states(dag.n))


def grad(params: TabularParams, dag: PointedDag, reward: DiscreteReward) -> TabularParams:
    """Analytic gradient of the loss through the softmax and exp maps."""
    return unpack(_grad_flat(pack(params, dag), _workspace(dag), reward.on_states(dag.n)), dag)


def finite_difference_grad(
    params: TabularParams, dag: PointedDag, reward: DiscreteReward, step: float = 1e-6
) -> TabularParams:
    """Central finite differences of the loss, for gradient verification."""
    ws = _workspace(dag)
    r = reward.on_states(dag.n)
    v = pack(params, dag)
    out = np.zeros_like(v)
    for i in range(v.size):
        hi = v.copy()
        lo = v.copy()
        hi[i] += step
        lo[i] -= step
        out[i] = (_loss_flat(hi, ws, r) - _loss_flat(lo, ws, r)) / (2 * step)
    return unpack(out, dag)


def params_random(dag: PointedDag, rng_seed: int, scale: float = 0.1) -> TabularParams:
    """Fully random parameter point, for gradient checks."""
    rng = substream(rng_seed, 0)
    targets = edge_targets(dag)
    logits = {s: scale * rng.standard_normal(len(ts)) for s, ts in targets.items()}
    return TabularParams(logits=logits, log_flow=rng.standard_normal(dag.n))


def params_init(dag: PointedDag, reward: DiscreteReward, rng_seed: int, scale: float = 0.1) -> TabularParams:
    """Training start: jittered logits, flows forward-propagated from F(s0) = R(X).

    Propagation makes the invariance residual zero at the start, which
    keeps gradient descent inside the interior basin; the remaining loss
    is the boundary mismatch. Seeds differ through the logit jitter.
    """
    rng = substream(rng_seed, 0)
    targets = edge_targets(dag)
    logits = {s: scale * rng.standard_normal(len(ts)) for s, ts in targets.items()}
    params = TabularParams(logits=logits, log_flow=np.zeros(dag.n))
    p = build_matrix(params, dag)
    flow = np.zeros(dag.n)
    flow[0] = reward.total()
    incoming: dict[int, list[int]] = {t: [] for t in range(dag.n)}
    for s, t in dag.non_wrap_edges:
        incoming[t].append(s)
    for t in dag.topological_order():
        if t == 0:
            continue
        flow[t] = sum(flow[s] * p[s, t] for s in sorted(incoming[t]))
    params.log_flow = np.log(np.maximum(flow, 1e-300))
    return params


def fit(
    dag: PointedDag,
    reward: DiscreteReward,
    iters: int = 20_000,
    step_size: float = 0.05,
    rng_seed: int = 0,
    tol: float = 0.0,
) -> tuple[TabularParams, np.ndarray]:
    """Gradient descent with step-halving on loss increase.

    The step recovers geometrically after successful iterations (capped at
    max(1, step_size)), making the halving a cheap backtracking search.
    Returns the final parameters and the per-iteration loss; stops early
    once the loss falls to tol and aborts if it explodes.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    ws = _workspace(dag)
    r = reward.on_states(dag.n)
    v = pack(params_init(dag, reward, rng_seed), dag)
    current = _loss_flat(v, ws, r)
    history = [current]
    step = step_size
    cap = max(1.0, step_size)
    for _ in range(iters):
        g = _grad_flat(v, ws, r)
        while True:
            cand = v - step * g
            cand_loss = _loss_flat(cand, ws, r)
            if cand_loss <= current or step <= 1e-20:
                break
            step *= 0.5
        v, current = cand, cand_loss
        step = min(step * 1.3, cap)
        history.append(current)
        if not np.isfinite(current) or current > DIVERGENCE_ABORT:
            raise ConvergenceError(f"training diverged: loss {current:.3e}")
        if current <= tol:
            break
    return unpack(v, dag), np.asarray(history)
