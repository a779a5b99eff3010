"""Randomization-based inference for 2x2 studies with one uncontrolled factor.

Factor A is completely randomized; factor B is assigned by an
uncontrolled per-unit Bernoulli mechanism whose probability is unknown.
The package provides the finite-population estimands, both point
estimators (B labels hidden vs observed) with their variance estimators
and intervals, the exact closed-form sampling theory, an exhaustive
enumeration oracle that validates the theory at small N, and a Monte
Carlo sweep engine with figure output.
"""

from .assignment import (
    AcceptanceFailureError,
    Assignment,
    Design,
    sample_assignment,
    sample_conditional_assignment,
    substream,
    truncated_inverse_mean,
)
from .estimators import (
    EstimateReport,
    ObservedData,
    confidence_interval,
    observe,
    theta_hat_1,
    theta_hat_2,
    var_hat_1,
    var_hat_2,
    var_hat_2_plugin,
)
from .population import (
    CELLS,
    DispersionSummary,
    EstimandSummary,
    PotentialOutcomesTable,
    build_table,
    dispersions,
    estimands,
    weighted_effect_dispersion,
)
from .simulation import (
    PopulationModel,
    SweepConfig,
    SweepResult,
    generate_population,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceFailureError",
    "Assignment",
    "CELLS",
    "Design",
    "DispersionSummary",
    "EstimandSummary",
    "EstimateReport",
    "ObservedData",
    "PopulationModel",
    "PotentialOutcomesTable",
    "SweepConfig",
    "SweepResult",
    "build_table",
    "confidence_interval",
    "dispersions",
    "estimands",
    "generate_population",
    "observe",
    "run_sweep",
    "sample_assignment",
    "sample_conditional_assignment",
    "substream",
    "theta_hat_1",
    "theta_hat_2",
    "truncated_inverse_mean",
    "var_hat_1",
    "var_hat_2",
    "var_hat_2_plugin",
    "weighted_effect_dispersion",
    "__version__",
]
