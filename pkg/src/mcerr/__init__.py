"""Monte Carlo integration with first- and second-order error estimates."""

__version__ = "0.1.0"

from .estimators import EstimateReport, UndefinedEstimateError, report  # noqa: E402
from .moment_core import (  # noqa: E402
    CentralAccumulator,
    PowerSums,
    acc_from_stream,
    acc_merge,
    acc_update,
    sums_update,
)
from .sampling import DistributionSpec, SeededStream, parse_spec  # noqa: E402

__all__ = [
    "CentralAccumulator",
    "DistributionSpec",
    "EstimateReport",
    "PowerSums",
    "SeededStream",
    "UndefinedEstimateError",
    "acc_from_stream",
    "acc_merge",
    "acc_update",
    "parse_spec",
    "report",
    "sums_update",
]
