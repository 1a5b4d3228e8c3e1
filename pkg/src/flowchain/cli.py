"""Command-line entry point: config in, CSV/JSON artifacts out.

Exit codes: 0 pass, 1 config or usage error, 2 theorem-hypothesis failure,
3 conclusion or tolerance failure. All randomness derives from one seed;
see README for the bit-exact substream derivation. Outputs are
byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import FlowchainError
from .invariant import (
    estimate_invariant_occupation,
    solve_invariant_exact,
    solve_invariant_power,
)
from .kernel import validate_kernel
from .mcmc import (
    compare,
    local_walk_proposal,
    metropolis_hastings,
    permutation_pvalue_lag1,
)
from .recurrence import build_counterexample_kernel, counterexample_analytic, simulate_ladder_returns
from .splitchain import (
    ContinuousHistogram,
    terminating_general_by_simulation,
)
from .streams import derive_seed, resolve_workers
from .terminating import (
    terminal_sequence,
    terminating_by_enumeration,
    terminating_by_lemma,
    terminating_by_simulation,
    verify_theorem1,
)
from .train import fit, kernel_from_params

# purpose labels for per-seed substream derivation (documented in README)
PURPOSE_SIM = 0
PURPOSE_MH = 1
PURPOSE_TRAIN = 2
PURPOSE_PERM = 3
PURPOSE_GFN = 4

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_CONCLUSION = 3


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: list[str], rows, seed: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")
        handle.write(f"# seed={seed}, version={__version__}\n")


def _effective(args, config: RunConfig, name: str, default=None):
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    return getattr(config.simulation, name, default)


def _seed(args, config: RunConfig) -> int:
    seed = _effective(args, config, "seed")
    if not 0 <= seed <= 2**64 - 1:
        raise FlowchainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def cmd_validate(args) -> int:
    config = load_config(args.config)
    dag = config.dag()
    kern, _ = config.kernel_and_flow()
    report = validate_kernel(kern, dag)
    for line in report.lines():
        print(line)
    if report.ok:
        print(f"ok: {dag.n} states, {len(dag.edges)} edges, |X| = {len(dag.terminating)}")
        return EXIT_OK
    return EXIT_CONFIG


def cmd_solve_invariant(args) -> int:
    config = load_config(args.config)
    kern, _ = config.kernel_and_flow()
    seed = _seed(args, config)
    workers = resolve_workers(_effective(args, config, "workers"))
    if args.method == "exact":
        lam = solve_invariant_exact(kern)
    elif args.method == "power":
        lam = solve_invariant_power(kern, tol=args.tol or config.tol)
    elif args.method == "occupation":
        lam = estimate_invariant_occupation(
            kern,
            excursions=_effective(args, config, "excursions"),
            rng_seed=derive_seed(seed, PURPOSE_SIM),
            cap=_effective(args, config, "cap"),
            workers=workers,
        )
    else:
        raise FlowchainError(f"unknown method {args.method!r}")
    dag = config.dag()
    rows = [
        (dag.states[s], float(lam.values[s]), None if lam.stderr is None else float(lam.stderr[s]))
        for s in range(dag.n)
    ]
    write_csv(args.out, ["state", "lambda", "stderr"], rows, seed)
    return EXIT_OK


def cmd_terminating(args) -> int:
    config = load_config(args.config)
    dag = config.dag()
    kern, _ = config.kernel_and_flow()
    seed = _seed(args, config)
    if args.method == "enum":
        dist = terminating_by_enumeration(dag, kern)
    elif args.method == "lemma":
        dist = terminating_by_lemma(kern, solve_invariant_exact(kern))
    elif args.method == "sim":
        dist = terminating_by_simulation(
            kern,
            excursions=_effective(args, config, "excursions"),
            rng_seed=derive_seed(seed, PURPOSE_SIM),
            cap=_effective(args, config, "cap"),
            workers=resolve_workers(_effective(args, config, "workers")),
        )
    else:
        raise FlowchainError(f"unknown method {args.method!r}")
    rows = [
        (
            dag.states[x],
            float(dist.probs[x]),
            None if dist.stderr is None else float(dist.stderr[x]),
        )
        for x in sorted(dist.probs)
    ]
    write_csv(args.out, ["state", "prob", "stderr"], rows, seed)
    return EXIT_OK


def cmd_verify(args) -> int:
    config = load_config(args.config)
    dag = config.dag()
    kern, flow = config.kernel_and_flow()
    if flow is None:
        raise FlowchainError("verify needs a flow: provide 'edge_flows' or an explicit 'flow'")
    reward = config.reward()
    reward.check_support(dag)
    tol = args.tol if args.tol is not None else config.tol
    report = verify_theorem1(dag, kern, flow, reward, tol=tol)
    for line in report.lines():
        print(line)
    if args.out:
        payload = {
            "invariance_ok": report.invariance_ok,
            "max_invariance_residual": report.max_invariance_residual,
            "boundary_ok": report.boundary_ok,
            "max_boundary_residual": report.max_boundary_residual,
            "conclusion_ok": report.conclusion_ok,
            "max_deviation": report.max_deviation,
            "tol": report.tol,
            "passed": report.passed,
            "version": __version__,
        }
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
    if not report.hypotheses_ok:
        return EXIT_HYPOTHESIS
    if not report.conclusion_ok:
        return EXIT_CONCLUSION
    return EXIT_OK


def cmd_split_simulate(args) -> int:
    config = load_config(args.config)
    mk = config.split_kernel()
    seed = _seed(args, config)
    result = terminating_general_by_simulation(
        mk,
        excursions=_effective(args, config, "excursions"),
        rng_seed=derive_seed(seed, PURPOSE_SIM),
        cap=_effective(args, config, "cap"),
        workers=resolve_workers(_effective(args, config, "workers")),
    )
    if isinstance(result, ContinuousHistogram):
        rows = [
            (float(result.edges[i]), float(result.edges[i + 1]), float(result.masses[i]), int(result.counts[i]))
            for i in range(result.masses.size)
        ]
        write_csv(args.out, ["bin_lo", "bin_hi", "mass", "count"], rows, seed)
    else:
        rows = [
            (x, float(result.probs[x]), float(result.stderr[x]))
            for x in sorted(result.probs)
        ]
        write_csv(args.out, ["state", "prob", "stderr"], rows, seed)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if not 0 <= seed <= 2**64 - 1:
        raise FlowchainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    cap = args.cap
    excursions = args.excursions
    curve = counterexample_analytic(cap)
    kern = build_counterexample_kernel(truncation=max(cap, 1))
    counts, _ = simulate_ladder_returns(kern, excursions, cap, derive_seed(seed, PURPOSE_SIM))
    cum = np.cumsum(counts[1:])
    rows = []
    for i in range(cap):
        frac = cum[i] / excursions
        stderr = float(np.sqrt(max(frac * (1 - frac), 0.0) / excursions))
        rows.append((i + 1, float(curve.prob_return_by[i]), float(frac), stderr))
    write_csv(args.out, ["n", "analytic_cumulative", "simulated_fraction", "stderr"], rows, seed)
    print(f"analytic limit 1-exp(-pi^2/6) = {curve.limit!r}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config)
    dag = config.dag()
    reward = config.reward()
    reward.check_support(dag)
    seed = _seed(args, config)
    params, history = fit(
        dag,
        reward,
        iters=args.iters,
        step_size=args.step,
        rng_seed=derive_seed(seed, PURPOSE_TRAIN),
        tol=args.train_tol,
    )
    payload = {
        "log_flow": {dag.states[s]: float(params.log_flow[s]) for s in range(dag.n)},
        "logits": {
            dag.states[s]: {dag.states[t]: float(v) for t, v in zip(sorted(t for _, t in dag.out_edges(s)), params.logits[s])}
            for s in range(dag.n)
        },
        "final_loss": float(history[-1]),
        "seed": seed,
        "version": __version__,
    }
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    if args.history:
        write_csv(args.history, ["iter", "loss"], [(i, float(v)) for i, v in enumerate(history)], seed)
    print(f"final loss {history[-1]!r} after {len(history) - 1} iterations")
    return EXIT_OK


def cmd_mcmc_compare(args) -> int:
    config = load_config(args.config)
    dag = config.dag()
    reward = config.reward()
    reward.check_support(dag)
    section = config.mcmc_section()
    seed = _seed(args, config)
    workers = resolve_workers(_effective(args, config, "workers"))
    positions = sorted(dag.terminating)
    target = np.array([reward.values[x] for x in positions])
    k = target.size

    train_iters = int(section.get("train_iters", 60_000))
    params, history = fit(
        dag, reward, iters=train_iters, step_size=0.05,
        rng_seed=derive_seed(seed, PURPOSE_TRAIN), tol=float(section.get("train_tol", 1e-9)),
    )
    kern, _ = kernel_from_params(params, dag)
    excursions = _effective(args, config, "excursions")
    t0 = time.perf_counter()
    terminal = terminal_sequence(kern, excursions, derive_seed(seed, PURPOSE_GFN), workers=workers)
    gfn_seconds = (time.perf_counter() - t0) / excursions
    position_of = {x: i for i, x in enumerate(positions)}
    gfn_samples = np.array([position_of[x] for x in terminal], dtype=np.int64)

    steps = args.steps if args.steps is not None else config.simulation.steps
    burn_in = int(section.get("burn_in", config.simulation.burn_in))
    proposal = local_walk_proposal(k)
    t0 = time.perf_counter()
    mh_raw = metropolis_hastings(target, proposal, steps + burn_in, derive_seed(seed, PURPOSE_MH))
    mh_seconds = (time.perf_counter() - t0) / max(steps, 1)
    mh_samples = mh_raw[burn_in:]

    mode_split = int(section.get("mode_split", k // 2 + 1))
    statistic = (np.arange(k) >= mode_split).astype(float)
    lags = int(section.get("lags", 20))
    gfn_report, mh_report = compare(
        gfn_samples, mh_samples, target, statistic, lags=lags,
        gfn_seconds_per_sample=gfn_seconds, mh_seconds_per_sample=mh_seconds,
    )
    rows = []
    for (count, gfn_tv), (_, mh_tv) in zip(gfn_report.tv_curve, mh_report.tv_curve):
        rows.append(("tv", count, gfn_tv, mh_tv))
    for lag in range(lags):
        rows.append(("autocorr", lag + 1, float(gfn_report.autocorr[lag]), float(mh_report.autocorr[lag])))
    rows.append(("ess", 0, float(gfn_report.ess), float(mh_report.ess)))
    write_csv(args.out, ["section", "x", "gfn", "mh"], rows, seed)
    pval = permutation_pvalue_lag1(
        statistic[gfn_samples], n_perm=int(section.get("permutations", 200)),
        rng_seed=derive_seed(seed, PURPOSE_PERM),
    )
    print(f"training loss {history[-1]!r}", file=sys.stderr)
    print(
        f"seconds/sample: gfn {gfn_seconds:.2e}, mh {mh_seconds:.2e}; "
        f"gfn lag-1 permutation p-value {pval:.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowchain",
        description="Verify and sample GFlowNets as recurrent Markov chains.",
    )
    parser.add_argument("--version", action="version", version=f"flowchain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="JSON run configuration")
        if out:
            p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--seed", type=int, default=None, help="64-bit unsigned run seed")
        p.add_argument("--workers", type=int, default=None, help="worker threads (env RGFN_WORKERS)")
        p.add_argument("--excursions", type=int, default=None)
        p.add_argument("--cap", type=int, default=None, help="per-excursion step cap")
        p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("validate", help="check config, graph, and kernel consistency")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve-invariant", help="invariant measure by exact/power/occupation")
    common(p)
    p.add_argument("--method", choices=["exact", "power", "occupation"], default="exact")
    p.set_defaults(func=cmd_solve_invariant)

    p = sub.add_parser("terminating", help="terminating distribution by enum/lemma/sim")
    common(p)
    p.add_argument("--method", choices=["enum", "lemma", "sim"], default="enum")
    p.set_defaults(func=cmd_terminating)

    p = sub.add_parser("verify", help="verify the discrete fundamental theorem")
    common(p, out=False)
    p.add_argument("--out", default=None, help="optional verdict JSON path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("split-simulate", help="simulate the split chain to the atom")
    common(p)
    p.set_defaults(func=cmd_split_simulate)

    p = sub.add_parser("counterexample", help="escape-to-infinity counter-example")
    p.add_argument("--out", required=True)
    p.add_argument("--excursions", type=int, default=1_000_000)
    p.add_argument("--cap", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=None)
    # the binomial cascade is sequential; the flag is accepted for a
    # uniform interface and has no effect on the output
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("train", help="fit tabular kernel and flow to a reward")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output params JSON")
    p.add_argument("--history", default=None, help="optional loss-history CSV")
    p.add_argument("--iters", type=int, default=60_000)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-tol", type=float, default=1e-9)
    # training is single-threaded; accepted for a uniform interface
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("mcmc-compare", help="side-by-side MH vs terminating-sample diagnostics")
    common(p)
    p.add_argument("--steps", type=int, default=None, help="MH steps after burn-in")
    p.set_defaults(func=cmd_mcmc_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FlowchainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
