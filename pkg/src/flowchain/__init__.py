"""GFlowNet samplers as recurrent Markov chains: solvers, simulators, verifiers."""

__version__ = "0.1.0"
