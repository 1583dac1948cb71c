"""Sum-of-squares spectrum amplification toolkit.

Fits DFTHC factorizations of electronic-structure Hamiltonians, extracts the
spectrum-amplification parameters, reproduces the block-encoding cost model
and checks every operator identity against a dense Fock-space oracle.
"""

from sosamp.errors import (
    DegenerateDistributionError,
    DivergenceError,
    DomainError,
    NormalizationError,
    OracleLimitError,
    ParseError,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateDistributionError",
    "DivergenceError",
    "DomainError",
    "NormalizationError",
    "OracleLimitError",
    "ParseError",
    "__version__",
]
