from sldkit.estimation.crb import (
    CRBReport,
    DomainTooNarrow,
    EstimationOptions,
    simulate_crb,
    trial_generator,
)
from sldkit.estimation.measurement import (
    POVM,
    InvalidPOVM,
    SingularOutcome,
    classical_fisher,
    classical_fisher_from_state,
    make_povm,
    optimal_measurement,
    outcome_distribution,
)

__all__ = [
    "CRBReport",
    "DomainTooNarrow",
    "EstimationOptions",
    "InvalidPOVM",
    "POVM",
    "SingularOutcome",
    "classical_fisher",
    "classical_fisher_from_state",
    "make_povm",
    "optimal_measurement",
    "outcome_distribution",
    "simulate_crb",
    "trial_generator",
]
