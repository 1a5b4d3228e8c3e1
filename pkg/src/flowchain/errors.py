"""Exception types shared across the toolkit."""


class FlowchainError(Exception):
    """Base class for all toolkit errors."""


class GraphError(FlowchainError):
    """Invalid pointed-DAG structure."""


class KernelError(FlowchainError):
    """Invalid transition kernel, reward, or minorization data."""


class ConvergenceError(FlowchainError):
    """Iterative solver failed to converge within its budget."""


class NonRecurrenceError(FlowchainError):
    """An excursion exceeded the step cap; the chain may not be recurrent."""


class ConfigError(FlowchainError):
    """Run configuration failed to parse or validate."""
