"""Split-chain construction over minorized kernels.

A minorized kernel is a triple (P, epsilon, nu) with P(s, B) >= eps(s) nu(B)
and eps positive exactly on the terminating set X. Splitting P into the
remainder kernel and the regeneration measure nu creates an artificial
atom X x {1}: whenever the indicator bit comes up 1 the chain forgets its
past, and the states seen at those moments are the terminating samples.

Discrete instances are handled exactly; 1-D continuous instances come from
a small closed-form catalogue and are solved on a fixed trapezoid grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betaincinv, ndtr, ndtri

from .errors import KernelError, NonRecurrenceError
from .invariant import FlowMeasure
from .kernel import Continuous1DKernel, ContinuousReward, DiscreteReward
from .space import ContinuousSpace1D
from .streams import map_blocks
from .terminating import TerminatingDistribution, wilson_halfwidth

MINORIZATION_SLACK = 1e-12
GRID_POINTS = 512
HIST_BINS = 64


@dataclass(frozen=True)
class SplitState:
    """One state of the split chain: base state x and regeneration bit y."""

    x: float | int
    y: int


class DiscreteMinorizedKernel:
    """(P, eps, nu) over a finite space with the minorization checked entrywise."""

    def __init__(self, matrix, epsilon, nu, declared_x: set[int] | None = None):
        p = np.asarray(matrix, dtype=float)
        eps = np.asarray(epsilon, dtype=float)
        nu = np.asarray(nu, dtype=float)
        n = p.shape[0]
        if p.shape != (n, n) or eps.shape != (n,) or nu.shape != (n,):
            raise KernelError("shape mismatch between matrix, epsilon, and nu")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise KernelError("base matrix must be row-stochastic")
        if np.any(eps < 0) or np.any(eps > 1):
            raise KernelError("epsilon must take values in [0, 1]")
        if np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-12:
            raise KernelError("nu must be a probability vector")
        deficit = p - eps[:, None] * nu[None, :]
        if deficit.min() < -MINORIZATION_SLACK:
            i, j = np.unravel_index(np.argmin(deficit), deficit.shape)
            raise KernelError(
                f"minorization fails at ({i},{j}): P={p[i, j]} < eps*nu={eps[i] * nu[j]}"
            )
        x_set = {int(i) for i in np.nonzero(eps > 0)[0]}
        if declared_x is not None and x_set != set(declared_x):
            raise KernelError(
                f"epsilon positive on {sorted(x_set)} but X declared as {sorted(declared_x)}"
            )
        self.matrix = p
        self.epsilon = eps
        self.nu = nu
        self.n = n
        self.x_set = frozenset(x_set)

    def remainder_row(self, s: int) -> np.ndarray:
        """Remainder kernel row: (P(s,.) - eps(s) nu) / (1 - eps(s)), or nu at eps(s)=1."""
        e = self.epsilon[s]
        if e >= 1.0:
            return self.nu.copy()
        row = (self.matrix[s] - e * self.nu) / (1.0 - e)
        if row.min() < -MINORIZATION_SLACK:
            raise KernelError(f"negative remainder density at state {s}: minorization violated")
        return np.maximum(row, 0.0)

    @property
    def remainder_matrix(self) -> np.ndarray:
        return np.vstack([self.remainder_row(s) for s in range(self.n)])

    def epsilon_infimum(self) -> float:
        return float(self.epsilon.min())


@dataclass(frozen=True)
class ContinuousDistribution:
    """Distribution on an interval given by a density and an inverse CDF."""

    density: Callable[[np.ndarray], np.ndarray]
    ppf: Callable[[np.ndarray], np.ndarray]


class Continuous1DMinorizedKernel:
    """Minorized kernel on [lo, hi] assembled from closed-form parts.

    The base kernel is the mixture (1 - eps(x)) R(x, .) + eps(x) nu(.),
    so the minorization holds by construction; it is still spot-checked on
    a quadrature grid against the stored pieces.
    """

    def __init__(
        self,
        space: ContinuousSpace1D,
        epsilon: Callable[[np.ndarray], np.ndarray],
        nu: ContinuousDistribution,
        remainder_density: Callable[[np.ndarray, np.ndarray], np.ndarray],
        remainder_ppf: Callable[[np.ndarray, np.ndarray], np.ndarray],
        epsilon_lipschitz: float = 0.0,
        name: str = "custom",
    ):
        self.space = space
        self.epsilon = epsilon
        self.nu = nu
        self.remainder_density = remainder_density
        self.remainder_ppf = remainder_ppf
        self.epsilon_lipschitz = epsilon_lipschitz
        self.name = name
        probes = np.linspace(space.lo, space.hi, 17)
        eps = np.asarray(epsilon(probes), dtype=float)
        if np.any(eps < 0) or np.any(eps > 1):
            raise KernelError("epsilon must take values in [0, 1]")
        # minorization holds by the mixture construction; spot-check the
        # stored pieces anyway at quadrature probes
        deficit = self.base_density(probes[:, None], probes[None, :]) - eps[:, None] * np.asarray(
            nu.density(probes)
        )[None, :]
        if deficit.min() < -1e-9:
            raise KernelError("minorization fails at a quadrature probe point")

    def base_density(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        e = self.epsilon(np.asarray(x, dtype=float))
        return (1.0 - e) * self.remainder_density(x, t) + e * self.nu.density(np.asarray(t, dtype=float))

    def base_kernel(self) -> Continuous1DKernel:
        def sample(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            pick_nu = rng.random(x.shape) < self.epsilon(x)
            u = rng.random(x.shape)
            out = self.remainder_ppf(x, u)
            out[pick_nu] = self.nu.ppf(u[pick_nu])
            return out

        return Continuous1DKernel(self.space, sample, self.base_density)

    def epsilon_infimum(self, n_grid: int = 4096) -> float:
        grid = np.linspace(self.space.lo, self.space.hi, n_grid)
        h = (self.space.hi - self.space.lo) / (n_grid - 1)
        inf_grid = float(np.min(self.epsilon(grid)))
        return inf_grid - self.epsilon_lipschitz * h / 2.0


@dataclass(frozen=True)
class RemainderMeasure:
    """Remainder kernel at one continuous state."""

    density: Callable[[np.ndarray], np.ndarray]
    ppf: Callable[[np.ndarray], np.ndarray]


def remainder_kernel(mk, s):
    """Remainder measure at state s, from the stored (P, eps, nu) triple."""
    if isinstance(mk, DiscreteMinorizedKernel):
        return mk.remainder_row(s)
    e = float(mk.epsilon(np.asarray([s], dtype=float))[0])
    if e >= 1.0:
        return RemainderMeasure(density=mk.nu.density, ppf=mk.nu.ppf)

    def density(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        vals = (mk.base_density(np.full_like(t, s), t) - e * mk.nu.density(t)) / (1.0 - e)
        if np.min(vals) < -1e-9:
            raise KernelError(f"negative remainder density at x={s}: minorization violated")
        return np.maximum(vals, 0.0)

    def ppf(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return mk.remainder_ppf(np.full_like(u, s), u)

    return RemainderMeasure(density=density, ppf=ppf)


def split_step(mk, z: SplitState, rng: np.random.Generator) -> SplitState:
    """One transition of the split chain Z = (X, Y).

    The next base state follows the remainder kernel when y = 0 and nu when
    y = 1; the next bit is 1 with probability eps at the new state.
    """
    if isinstance(mk, DiscreteMinorizedKernel):
        from .simulate import closed_cumulative

        weights = mk.nu if z.y == 1 else mk.remainder_row(int(z.x))
        cum = closed_cumulative(weights[None, :])[0]
        x_next = int(np.searchsorted(cum, rng.random(), side="right"))
        y_next = int(rng.random() < mk.epsilon[x_next])
        return SplitState(x=x_next, y=y_next)
    u = rng.random()
    if z.y == 1:
        x_next = float(mk.nu.ppf(np.asarray([u]))[0])
    else:
        x_next = float(mk.remainder_ppf(np.asarray([z.x]), np.asarray([u]))[0])
    eps_next = float(mk.epsilon(np.asarray([x_next]))[0])
    y_next = int(rng.random() < eps_next)
    return SplitState(x=x_next, y=y_next)


@dataclass
class SplitStats:
    """Per-excursion results of the split chain started at the atom."""

    terminal: np.ndarray
    sigma: np.ndarray
    excursions: int


def _split_block_discrete(nu_cum, rem_cum, eps, count, rng, cap):
    sigma = np.zeros(count, dtype=np.int64)
    terminal = np.full(count, -1, dtype=np.int64)
    lanes = np.arange(count)
    cur = np.zeros(count, dtype=np.int64)
    for step in range(1, cap + 1):
        u = rng.random(lanes.size)
        if step == 1:
            nxt = (u[:, None] < nu_cum[None, :]).argmax(axis=1)
        else:
            nxt = (u[:, None] < rem_cum[cur]).argmax(axis=1)
        uy = rng.random(lanes.size)
        stop = uy < eps[nxt]
        done = lanes[stop]
        terminal[done] = nxt[stop]
        sigma[done] = step
        lanes = lanes[~stop]
        cur = nxt[~stop]
        if not lanes.size:
            return SplitStats(terminal=terminal, sigma=sigma, excursions=count)
    raise NonRecurrenceError(f"{lanes.size} split excursion(s) exceeded the {cap}-step cap")


def _split_block_continuous(mk, count, rng, cap):
    sigma = np.zeros(count, dtype=np.int64)
    terminal = np.full(count, np.nan)
    lanes = np.arange(count)
    cur = np.zeros(count)
    for step in range(1, cap + 1):
        u = rng.random(lanes.size)
        if step == 1:
            nxt = mk.nu.ppf(u)
        else:
            nxt = mk.remainder_ppf(cur, u)
        uy = rng.random(lanes.size)
        stop = uy < mk.epsilon(nxt)
        done = lanes[stop]
        terminal[done] = nxt[stop]
        sigma[done] = step
        lanes = lanes[~stop]
        cur = nxt[~stop]
        if not lanes.size:
            return SplitStats(terminal=terminal, sigma=sigma, excursions=count)
    raise NonRecurrenceError(f"{lanes.size} split excursion(s) exceeded the {cap}-step cap")


def simulate_split_excursions(
    mk,
    excursions: int,
    rng_seed: int,
    cap: int = 10**6,
    workers: int = 1,
    assume_harris: bool = False,
) -> SplitStats:
    """Split-chain excursions from the atom; records X at each return to it.

    Unless the caller certifies Harris recurrence (for example via the
    bounded-length check), eps must be bounded away from zero.
    """
    if excursions < 1:
        raise ValueError(f"excursions must be >= 1, got {excursions}")
    if not assume_harris and mk.epsilon_infimum() <= 0.0:
        raise KernelError(
            "no Harris certificate: inf eps = 0 and no bounded-length certificate supplied"
        )
    if isinstance(mk, DiscreteMinorizedKernel):
        from .simulate import closed_cumulative

        nu_cum = closed_cumulative(mk.nu[None, :])[0]
        rem_cum = closed_cumulative(mk.remainder_matrix)
        blocks = map_blocks(
            excursions,
            rng_seed,
            lambda b, count, rng: _split_block_discrete(nu_cum, rem_cum, mk.epsilon, count, rng, cap),
            workers=workers,
        )
    else:
        blocks = map_blocks(
            excursions,
            rng_seed,
            lambda b, count, rng: _split_block_continuous(mk, count, rng, cap),
            workers=workers,
        )
    return SplitStats(
        terminal=np.concatenate([b.terminal for b in blocks]),
        sigma=np.concatenate([b.sigma for b in blocks]),
        excursions=excursions,
    )


@dataclass(frozen=True)
class ContinuousHistogram:
    """Fixed-bin empirical terminating distribution on an interval."""

    edges: np.ndarray
    masses: np.ndarray
    counts: np.ndarray
    excursions: int

    def tv_to(self, other_masses: np.ndarray) -> float:
        return 0.5 * float(np.sum(np.abs(self.masses - other_masses)))


def terminating_general_by_simulation(
    mk,
    excursions: int,
    rng_seed: int,
    cap: int = 10**6,
    workers: int = 1,
    assume_harris: bool = False,
    bins: int = HIST_BINS,
):
    """Empirical terminating distribution of the split chain.

    Discrete instances return a TerminatingDistribution with Wilson
    standard errors; continuous instances return a fixed-bin histogram.
    """
    stats = simulate_split_excursions(
        mk, excursions, rng_seed, cap=cap, workers=workers, assume_harris=assume_harris
    )
    if isinstance(mk, DiscreteMinorizedKernel):
        counts = np.bincount(stats.terminal, minlength=mk.n)
        xs = sorted(mk.x_set)
        probs = {x: counts[x] / excursions for x in xs}
        stderr = {x: wilson_halfwidth(int(counts[x]), excursions) for x in xs}
        return TerminatingDistribution(probs=probs, method="simulation", stderr=stderr)
    edges = np.linspace(mk.space.lo, mk.space.hi, bins + 1)
    counts, _ = np.histogram(stats.terminal, bins=edges)
    return ContinuousHistogram(
        edges=edges, masses=counts / excursions, counts=counts, excursions=excursions
    )


def solve_invariant_eps_normalized(mk: DiscreteMinorizedKernel) -> FlowMeasure:
    """Invariant measure of the base kernel with sum(eps * lambda) = 1."""
    p = mk.matrix
    n = mk.n
    a = (p.T - np.eye(n)).copy()
    a[0, :] = mk.epsilon
    rhs = np.zeros(n)
    rhs[0] = 1.0
    try:
        lam = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise KernelError(f"invariance system is singular: {exc}") from exc
    if lam.min() < -1e-10:
        raise KernelError("invariant solve produced negative mass")
    lam = np.maximum(lam, 0.0)
    residual = np.max(np.abs(lam @ p - lam))
    if residual > 1e-9:
        raise KernelError(f"invariant solve residual {residual:.3e}")
    return FlowMeasure(values=lam, normalization="eps_integral_one")


def solve_terminating_general_exact(mk: DiscreteMinorizedKernel) -> TerminatingDistribution:
    """Exact terminating distribution: P(x) = eps(x) lambda(x) on X."""
    lam = solve_invariant_eps_normalized(mk)
    probs = {int(x): float(mk.epsilon[x] * lam.values[x]) for x in sorted(mk.x_set)}
    return TerminatingDistribution(probs=probs, method="lemma")


@dataclass(frozen=True)
class GridMeasure:
    """Measure on a trapezoid grid: values with integration weights."""

    grid: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    normalization: str

    def integral(self, integrand: np.ndarray | None = None) -> float:
        vals = self.values if integrand is None else self.values * integrand
        return float(np.dot(self.weights, vals))


def trapezoid_grid(space: ContinuousSpace1D, n_grid: int = GRID_POINTS) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(space.lo, space.hi, n_grid)
    h = (space.hi - space.lo) / (n_grid - 1)
    weights = np.full(n_grid, h)
    weights[0] = weights[-1] = h / 2.0
    return grid, weights


def solve_invariant_quadrature(mk: Continuous1DMinorizedKernel, n_grid: int = GRID_POINTS) -> GridMeasure:
    """Quadrature oracle for the invariant density, normalized to int(eps lambda) = 1."""
    grid, weights = trapezoid_grid(mk.space, n_grid)
    k = mk.base_density(grid[:, None], grid[None, :])
    eps = mk.epsilon(grid)
    a = k.T * weights[None, :] - np.eye(n_grid)
    a[0, :] = weights * eps
    rhs = np.zeros(n_grid)
    rhs[0] = 1.0
    lam = np.linalg.solve(a, rhs)
    if lam.min() < -1e-8:
        raise KernelError("quadrature invariant solve produced negative density")
    lam = np.maximum(lam, 0.0)
    return GridMeasure(grid=grid, weights=weights, values=lam, normalization="eps_integral_one")


def terminating_density_quadrature(mk: Continuous1DMinorizedKernel, n_grid: int = GRID_POINTS) -> GridMeasure:
    """Exact-side terminating density eps * lambda on the quadrature grid."""
    lam = solve_invariant_quadrature(mk, n_grid)
    return GridMeasure(
        grid=lam.grid,
        weights=lam.weights,
        values=lam.values * mk.epsilon(lam.grid),
        normalization="flow_unnormalized",
    )


def integrate_linear(grid: np.ndarray, vals: np.ndarray, a: float, b: float) -> float:
    """Exact integral of the piecewise-linear interpolant over [a, b]."""
    ia = int(np.searchsorted(grid, a, side="right"))
    ib = int(np.searchsorted(grid, b, side="left"))
    xs = np.concatenate(([a], grid[ia:ib], [b]))
    ys = np.concatenate(([np.interp(a, grid, vals)], vals[ia:ib], [np.interp(b, grid, vals)]))
    return float(np.trapezoid(ys, xs))


def bin_masses(density: GridMeasure, bins: int = HIST_BINS) -> np.ndarray:
    """Bin integrals of a grid density over uniform bins."""
    edges = np.linspace(density.grid[0], density.grid[-1], bins + 1)
    return np.array(
        [integrate_linear(density.grid, density.values, edges[i], edges[i + 1]) for i in range(bins)]
    )


def check_harris_sufficient(mk, b: float) -> bool:
    """True iff eps is bounded below by b (grid infimum with Lipschitz slack)."""
    if not 0 < b <= 1:
        raise ValueError(f"b must lie in (0, 1], got {b}")
    return mk.epsilon_infimum() >= b


@dataclass(frozen=True)
class Theorem2Report:
    """Verdict of the general fundamental theorem on one instance."""

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


def verify_theorem2(mk, flow, reward, tol: float = 1e-8) -> Theorem2Report:
    """Check invariance and the boundary condition R = eps F, then the conclusion.

    Discrete: flow is a FlowMeasure and reward a DiscreteReward, checked
    entrywise. Continuous: flow is a GridMeasure and reward a
    ContinuousReward; invariance is checked as proportionality to the
    quadrature invariant density (raw grid residuals of the discretized
    operator carry O(h^2) noise) and the boundary holds pointwise on the
    grid.
    """
    if isinstance(mk, DiscreteMinorizedKernel):
        f = np.asarray(flow.values, dtype=float)
        max_inv = float(np.max(np.abs(f - f @ mk.matrix)))
        r = reward.on_states(mk.n)
        max_bnd = float(np.max(np.abs(mk.epsilon * f - r)))
        invariance_ok = max_inv <= tol
        boundary_ok = max_bnd <= tol
        if not (invariance_ok and boundary_ok):
            return Theorem2Report(invariance_ok, max_inv, boundary_ok, max_bnd, None, None, tol)
        dist = solve_terminating_general_exact(mk)
        z = reward.total()
        deviation = max(abs(dist.probs.get(x, 0.0) - r[x] / z) for x in sorted(mk.x_set))
        return Theorem2Report(True, max_inv, True, max_bnd, deviation <= tol, float(deviation), tol)

    # Raw grid residuals of the discretized operator carry O(h^2) quadrature
    # noise, so invariance is checked as proportionality to the quadrature
    # invariant density instead.
    grid, weights, f = flow.grid, flow.weights, np.asarray(flow.values, dtype=float)
    lam = solve_invariant_quadrature(mk, n_grid=len(grid))
    eps = mk.epsilon(grid)
    zf = float(np.dot(weights, eps * f))
    if zf <= 0:
        raise KernelError("flow has no mass on the terminating set")
    max_inv = float(np.max(np.abs(f / zf - lam.values)) / np.max(lam.values))
    r = reward.density(grid)
    max_bnd = float(np.max(np.abs(eps * f - r)))
    invariance_ok = max_inv <= tol
    boundary_ok = max_bnd <= tol
    if not (invariance_ok and boundary_ok):
        return Theorem2Report(invariance_ok, max_inv, boundary_ok, max_bnd, None, None, tol)
    predicted = eps * f / zf
    deviation = float(np.max(np.abs(predicted - eps * lam.values)))
    return Theorem2Report(True, max_inv, True, max_bnd, deviation <= tol, deviation, tol)


def _truncnorm_ppf(x: np.ndarray, u: np.ndarray, sigma: float, lo: float, hi: float) -> np.ndarray:
    a = ndtr((lo - x) / sigma)
    b = ndtr((hi - x) / sigma)
    return x + sigma * ndtri(a + u * (b - a))


def _truncnorm_pdf(x: np.ndarray, t: np.ndarray, sigma: float, lo: float, hi: float) -> np.ndarray:
    a = ndtr((lo - x) / sigma)
    b = ndtr((hi - x) / sigma)
    z = (t - x) / sigma
    pdf = np.exp(-0.5 * z * z) / (sigma * np.sqrt(2.0 * np.pi) * (b - a))
    inside = (t >= lo) & (t <= hi)
    return np.where(inside, pdf, 0.0)


def catalogue_instance(name: str, **params) -> Continuous1DMinorizedKernel:
    """Built-in continuous instances with closed-form densities.

    interval-geometric: S = X = [0, 1], constant eps, uniform nu, and a
    truncated-normal random-walk remainder step.
    interval-beta: same remainder, nu = Beta(a, b).
    """
    if name == "interval-geometric":
        eps_const = float(params.get("epsilon", 0.3))
        sigma = float(params.get("sigma", 0.2))
        space = ContinuousSpace1D(0.0, 1.0)
        nu = ContinuousDistribution(
            density=lambda t: np.where((t >= 0.0) & (t <= 1.0), 1.0, 0.0),
            ppf=lambda u: u,
        )
    elif name == "interval-beta":
        eps_const = float(params.get("epsilon", 0.3))
        sigma = float(params.get("sigma", 0.2))
        alpha = float(params.get("a", 2.0))
        beta = float(params.get("b", 5.0))
        from scipy.stats import beta as beta_dist

        space = ContinuousSpace1D(0.0, 1.0)
        nu = ContinuousDistribution(
            density=lambda t: beta_dist.pdf(t, alpha, beta),
            ppf=lambda u: betaincinv(alpha, beta, u),
        )
    else:
        raise KernelError(f"unknown catalogue instance {name!r}")
    if not 0 < eps_const <= 1:
        raise KernelError(f"constant epsilon must lie in (0, 1], got {eps_const}")
    return Continuous1DMinorizedKernel(
        space=space,
        epsilon=lambda x: np.full_like(np.asarray(x, dtype=float), eps_const),
        nu=nu,
        remainder_density=lambda x, t: _truncnorm_pdf(x, t, sigma, space.lo, space.hi),
        remainder_ppf=lambda x, u: _truncnorm_ppf(x, u, sigma, space.lo, space.hi),
        epsilon_lipschitz=0.0,
        name=name,
    )
