"""Run configuration: one JSON document describing a verification instance.

A config carries the wrapped graph, exactly one of an explicit kernel or
edge flows, optional reward / flow / split-chain / MCMC sections, and the
simulation parameters. State 0 must be named "s0"; rewards and flows are
keyed by state name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, FlowchainError
from .invariant import FlowMeasure
from .kernel import DiscreteKernel, DiscreteReward, kernel_from_edge_flows
from .space import PointedDag
from .splitchain import Continuous1DMinorizedKernel, DiscreteMinorizedKernel, catalogue_instance

MAX_SEED = 2**64 - 1


@dataclass
class SimulationParams:
    excursions: int = 10_000
    cap: int = 1_000_000
    seed: int = 0
    workers: int | None = None
    steps: int = 100_000
    burn_in: int = 10_000

    def validated(self) -> "SimulationParams":
        if self.excursions < 1:
            raise ConfigError(f"excursions must be >= 1, got {self.excursions}")
        if self.cap < 1:
            raise ConfigError(f"cap must be >= 1, got {self.cap}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        return self


@dataclass
class RunConfig:
    raw: dict[str, Any]
    path: str = "<dict>"
    simulation: SimulationParams = field(default_factory=SimulationParams)
    tol: float = 1e-8

    def has(self, key: str) -> bool:
        return key in self.raw

    # -- space / kernel / reward -------------------------------------------
    def dag(self) -> PointedDag:
        try:
            section = self.raw["space"]
        except KeyError:
            raise ConfigError("config has no 'space' section") from None
        states = section.get("states")
        if not isinstance(states, list) or not states:
            raise ConfigError("space.states must be a non-empty list of names")
        if states[0] != "s0":
            raise ConfigError(f"state 0 must be named 's0', got {states[0]!r}")
        if len(set(states)) != len(states):
            raise ConfigError("space.states contains duplicate names")
        edges = section.get("edges", [])
        terminating = section.get("terminating", [])
        try:
            return PointedDag(
                states=tuple(states),
                edges=tuple((int(s), int(t)) for s, t in edges),
                terminating=frozenset(int(x) for x in terminating),
            )
        except FlowchainError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed space section: {exc}") from exc

    def _state_index(self, dag: PointedDag, name: str) -> int:
        try:
            return dag.states.index(name)
        except ValueError:
            raise ConfigError(f"unknown state name {name!r}") from None

    def kernel_and_flow(self) -> tuple[DiscreteKernel, FlowMeasure | None]:
        dag = self.dag()
        has_kernel = "kernel" in self.raw
        has_flows = "edge_flows" in self.raw
        if has_kernel == has_flows:
            raise ConfigError("exactly one of 'kernel' and 'edge_flows' must be present")
        if has_flows:
            flows = {}
            for key, value in self.raw["edge_flows"].items():
                try:
                    src, dst = key.split("->")
                except ValueError:
                    raise ConfigError(f"edge flow key {key!r} is not 'from->to'") from None
                flows[(self._state_index(dag, src), self._state_index(dag, dst))] = float(value)
            kern, flow = kernel_from_edge_flows(dag, flows)
            explicit = self._explicit_flow(dag)
            return kern, explicit if explicit is not None else flow
        rows = np.asarray(self.raw["kernel"].get("rows"), dtype=float)
        if rows.shape != (dag.n, dag.n):
            raise ConfigError(f"kernel.rows must be {dag.n}x{dag.n}, got {rows.shape}")
        kern = DiscreteKernel(rows, support=set(dag.edges))
        return kern, self._explicit_flow(dag)

    def _explicit_flow(self, dag: PointedDag) -> FlowMeasure | None:
        if "flow" not in self.raw:
            return None
        values = np.zeros(dag.n)
        for name, value in self.raw["flow"].items():
            values[self._state_index(dag, name)] = float(value)
        return FlowMeasure(values=values, normalization="flow_unnormalized")

    def reward(self) -> DiscreteReward:
        if "reward" not in self.raw:
            raise ConfigError("config has no 'reward' section")
        dag = self.dag()
        values = {}
        for name, value in self.raw["reward"].items():
            idx = self._state_index(dag, name)
            if idx not in dag.terminating:
                raise ConfigError(f"reward on non-terminating state {name!r}")
            values[idx] = float(value)
        return DiscreteReward(values)

    # -- split chain ---------------------------------------------------------
    def split_kernel(self) -> DiscreteMinorizedKernel | Continuous1DMinorizedKernel:
        if "split" not in self.raw:
            raise ConfigError("config has no 'split' section")
        section = self.raw["split"]
        nu_spec = section.get("nu")
        if isinstance(nu_spec, dict) and "catalog" in nu_spec:
            params = dict(nu_spec.get("params", {}))
            eps_spec = section.get("epsilon")
            if isinstance(eps_spec, dict) and "const" in eps_spec:
                params.setdefault("epsilon", float(eps_spec["const"]))
            return catalogue_instance(nu_spec["catalog"], **params)
        base = section.get("base_kernel", {})
        rows = np.asarray(base.get("rows"), dtype=float)
        eps_spec = section.get("epsilon")
        if isinstance(eps_spec, dict) and "const" in eps_spec:
            epsilon = np.full(rows.shape[0], float(eps_spec["const"]))
        else:
            epsilon = np.asarray(eps_spec, dtype=float)
        nu = np.asarray(nu_spec, dtype=float)
        return DiscreteMinorizedKernel(rows, epsilon, nu)

    # -- mcmc -----------------------------------------------------------------
    def mcmc_section(self) -> dict[str, Any]:
        return dict(self.raw.get("mcmc", {}))


def parse_config(data: dict[str, Any], path: str = "<dict>") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be a JSON object")
    sim_raw = data.get("simulation", {})
    known = {"excursions", "cap", "seed", "workers", "steps", "burn_in"}
    unknown = set(sim_raw) - known
    if unknown:
        raise ConfigError(f"unknown simulation keys: {sorted(unknown)}")
    sim = SimulationParams(**{k: v for k, v in sim_raw.items()}).validated()
    tol = float(data.get("tolerances", {}).get("tol", 1e-8))
    if tol <= 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    if "space" in data and ("kernel" in data) == ("edge_flows" in data):
        raise ConfigError("exactly one of 'kernel' and 'edge_flows' must be present")
    return RunConfig(raw=data, path=path, simulation=sim, tol=tol)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_config(data, path=path)
