"""Metropolis-Hastings baseline and the MCMC-vs-GFlowNet diagnostics harness.

The comparison is qualitative: MH walks the sample space itself and its
consecutive samples are correlated, while terminating samples of a wrapped
chain are independent by the strong Markov property. The harness makes
that measurable: total-variation-to-target curves, lag autocorrelations of
a declared statistic, and effective sample sizes.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import KernelError
from .kernel import DiscreteKernel
from .streams import substream


def metropolis_hastings(
    target: np.ndarray,
    proposal: DiscreteKernel,
    steps: int,
    rng_seed: int,
    x0: int = 0,
) -> np.ndarray:
    """Standard MH chain on {0..k-1} targeting target/sum(target).

    Acceptance is min(1, R(x')q(x',x) / (R(x)q(x,x'))); proposals with
    q(x, x') = 0 never occur and jumps to zero-target states are rejected.
    """
    r = np.asarray(target, dtype=float)
    k = r.size
    if proposal.n != k:
        raise KernelError(f"proposal has {proposal.n} states, target has {k}")
    if not proposal.strongly_connected():
        raise KernelError("proposal kernel is not irreducible")
    if np.any(r <= 0):
        raise KernelError("target must be positive everywhere on X")
    q = proposal.matrix
    rows = []
    for i in range(k):
        cols = np.nonzero(q[i])[0]
        cum = np.cumsum(q[i, cols])
        cum[-1] = 1.0
        rows.append((cols.tolist(), cum.tolist()))
    rvals = r.tolist()
    qlist = q.tolist()
    rng = substream(rng_seed, 0)
    u = rng.random((steps, 2))
    out = np.empty(steps, dtype=np.int64)
    x = int(x0)
    for i in range(steps):
        cols, cum = rows[x]
        prop = cols[bisect_right(cum, u[i, 0])] if u[i, 0] < cum[-1] else cols[-1]
        ratio = (rvals[prop] * qlist[prop][x]) / (rvals[x] * qlist[x][prop])
        if u[i, 1] < ratio:
            x = prop
        out[i] = x
    return out


def mh_transition_matrix(target: np.ndarray, proposal: DiscreteKernel) -> np.ndarray:
    """Exact single-step MH transition matrix, for oracle computations."""
    r = np.asarray(target, dtype=float)
    q = proposal.matrix
    k = r.size
    p = np.zeros((k, k))
    for x in range(k):
        for t in np.nonzero(q[x])[0]:
            if t == x:
                continue
            accept = min(1.0, (r[t] * q[t, x]) / (r[x] * q[x, t])) if q[t, x] > 0 else 0.0
            p[x, t] = q[x, t] * accept
        p[x, x] = 1.0 - p[x].sum() + p[x, x]
    return p


def local_walk_proposal(k: int) -> DiscreteKernel:
    """Symmetric +/-1 proposal on a path of k states; off-grid mass stays put."""
    q = np.zeros((k, k))
    for x in range(k):
        if x > 0:
            q[x, x - 1] = 0.5
        if x < k - 1:
            q[x, x + 1] = 0.5
        q[x, x] = 1.0 - q[x].sum()
    return DiscreteKernel(q)


def bimodal_lattice_target(
    k: int = 21, centers: tuple[int, int] = (6, 14), sigma: float = 2.4, floor: float = 1e-3
) -> np.ndarray:
    """Two-peak lattice pmf with a low valley between the modes."""
    x = np.arange(k, dtype=float)
    r = np.exp(-0.5 * ((x - centers[0]) / sigma) ** 2) + np.exp(
        -0.5 * ((x - centers[1]) / sigma) ** 2
    )
    return r + floor


def stationary_autocorr_lag1(p: np.ndarray, pi: np.ndarray, f: np.ndarray) -> float:
    """Exact lag-1 autocorrelation of f(X) for a chain at stationarity."""
    mu = float(np.dot(pi, f))
    var = float(np.dot(pi, (f - mu) ** 2))
    cross = float(np.dot(pi * (f - mu), p @ (f - mu)))
    return cross / var


def autocorrelation(series: np.ndarray, lags: int) -> np.ndarray:
    """Biased sample autocorrelations at lags 1..lags."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    n = x.size
    c0 = float(np.dot(x, x)) / n
    if c0 == 0.0:
        return np.zeros(lags)
    return np.array([float(np.dot(x[: n - t], x[t:])) / n / c0 for t in range(1, lags + 1)])


def ess_initial_positive(series: np.ndarray, max_lag: int | None = None) -> float:
    """Effective sample size by initial-positive-sequence truncation.

    Pairs autocorrelations (rho_0 + rho_1), (rho_2 + rho_3), ... and sums
    until the first nonpositive pair, the standard deterministic
    truncation for reversible chains; the result is capped at the sample
    count.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    limit = n - 1 if max_lag is None else min(max_lag, n - 1)
    rho = np.concatenate(([1.0], autocorrelation(x, limit) if limit >= 1 else np.zeros(0)))
    tau = 0.0
    k = 0
    while 2 * k + 1 < rho.size:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
        k += 1
    tau = max(tau - 1.0, 1e-12)
    return min(float(n), n / tau)


def tv_distance(emp: np.ndarray, target_probs: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(emp - target_probs)))


def tv_curve(samples: np.ndarray, target_probs: np.ndarray, checkpoints: list[int]) -> list[tuple[int, float]]:
    """Total variation to the target at increasing sample-count prefixes."""
    k = target_probs.size
    out = []
    for count in checkpoints:
        counts = np.bincount(samples[:count], minlength=k)
        out.append((count, tv_distance(counts / count, target_probs)))
    return out


def permutation_pvalue_lag1(series: np.ndarray, n_perm: int, rng_seed: int) -> float:
    """Permutation test of lag-1 autocorrelation against exchangeability."""
    rng = substream(rng_seed, 0)
    observed = abs(autocorrelation(series, 1)[0])
    exceed = 0
    work = np.asarray(series, dtype=float).copy()
    for _ in range(n_perm):
        rng.shuffle(work)
        if abs(autocorrelation(work, 1)[0]) >= observed:
            exceed += 1
    return (1 + exceed) / (n_perm + 1)


@dataclass
class DiagnosticsReport:
    """Per-method sampling diagnostics for the comparison harness."""

    label: str
    tv_curve: list[tuple[int, float]]
    autocorr: np.ndarray
    ess: float
    wallclock_per_sample: float = float("nan")
    extras: dict = field(default_factory=dict)


def default_checkpoints(total: int) -> list[int]:
    points = []
    c = 1000
    while c < total:
        points.append(c)
        c *= 10
    points.append(total)
    return points


def compare(
    gfn_samples: np.ndarray,
    mh_samples: np.ndarray,
    target: np.ndarray,
    statistic: np.ndarray,
    lags: int = 20,
    checkpoints: list[int] | None = None,
    gfn_seconds_per_sample: float = float("nan"),
    mh_seconds_per_sample: float = float("nan"),
) -> tuple[DiagnosticsReport, DiagnosticsReport]:
    """Side-by-side diagnostics over a shared sample space.

    statistic maps each state index to the scalar whose autocorrelation is
    tracked (for bimodal targets, the mode indicator).
    """
    target_probs = np.asarray(target, dtype=float)
    target_probs = target_probs / target_probs.sum()
    k = target_probs.size
    for name, samples in (("gfn", gfn_samples), ("mh", mh_samples)):
        samples = np.asarray(samples)
        if samples.min() < 0 or samples.max() >= k:
            raise KernelError(f"{name} samples fall outside the {k}-state target space")
    stat = np.asarray(statistic, dtype=float)
    if checkpoints is None:
        checkpoints = default_checkpoints(min(len(gfn_samples), len(mh_samples)))
    reports = []
    for label, samples, per_sample in (
        ("gfn", gfn_samples, gfn_seconds_per_sample),
        ("mh", mh_samples, mh_seconds_per_sample),
    ):
        series = stat[np.asarray(samples)]
        reports.append(
            DiagnosticsReport(
                label=label,
                tv_curve=tv_curve(np.asarray(samples), target_probs, checkpoints),
                autocorr=autocorrelation(series, lags),
                ess=ess_initial_positive(series, max_lag=10_000),
                wallclock_per_sample=per_sample,
            )
        )
    return reports[0], reports[1]
