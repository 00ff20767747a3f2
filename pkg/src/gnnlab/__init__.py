"""gnnlab: a numerical laboratory for finite-width ReLU graph neural
networks — generalized He initialization, oversmoothing measurement and
closed-form corridors, residual aggregation operators, fixup-style
residual connections, and desk-scale training protocols on two-block
random graphs.
"""

from .errors import (
    ContractError,
    GNNLabError,
    GraphFormatError,
    NumericError,
    ParameterError,
)

__all__ = [
    "ContractError",
    "GNNLabError",
    "GraphFormatError",
    "NumericError",
    "ParameterError",
]

__version__ = "0.1.0"
