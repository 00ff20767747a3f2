"""Exception types shared across the package."""


class GNNLabError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(GNNLabError, ValueError):
    """An argument violates a documented precondition."""


class GraphFormatError(GNNLabError, ValueError):
    """A graph file is malformed or fails validation; the message names the field."""


class ContractError(GNNLabError, ValueError):
    """Inputs are structurally inconsistent (shape mismatch, stale trace)."""


class NumericError(GNNLabError, ArithmeticError):
    """A numerical routine failed to converge or breached a tolerance."""
