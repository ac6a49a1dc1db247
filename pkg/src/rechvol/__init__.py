"""Recurrent conditional heteroskedastic (RECH) volatility models estimated by SMC."""

from rechvol.errors import (
    DegenerateInput,
    IncompleteAnneal,
    InvalidInput,
    NumericalFailure,
    OptimizationFailure,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateInput",
    "IncompleteAnneal",
    "InvalidInput",
    "NumericalFailure",
    "OptimizationFailure",
]
