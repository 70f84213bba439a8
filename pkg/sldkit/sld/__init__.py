"""Routes to the symmetric logarithmic derivative of a density matrix."""

from sldkit.sld.lyapunov import (
    UnstableRegime,
    anticommutator_power,
    binomial_expansion,
    default_series_s,
    sld_quadrature,
    sld_series,
)
from sldkit.sld.operator import (
    Gauge,
    RankDrift,
    ResidualTooLarge,
    SLDOperator,
    compare_slds,
    defining_residual,
)
from sldkit.sld.options import QuadratureOptions, SeriesOptions, SolverOptions
from sldkit.sld.quadratic import (
    InvalidBloch,
    QuadraticClassCoefficients,
    bloch_state,
    bloch_vector,
    closed_form_coefficients,
    coefficient_derivatives,
    detect_quadratic_class,
    purity,
    sld_bloch_qubit,
    sld_quadratic_class,
)
from sldkit.sld.spectral import (
    NotCommuting,
    eigen_operator_rate,
    sld_commuting,
    sld_eigen_operator,
    sld_spectral,
    sld_sylvester,
)

__all__ = [
    "Gauge",
    "InvalidBloch",
    "NotCommuting",
    "QuadraticClassCoefficients",
    "QuadratureOptions",
    "RankDrift",
    "ResidualTooLarge",
    "SLDOperator",
    "SeriesOptions",
    "SolverOptions",
    "UnstableRegime",
    "anticommutator_power",
    "binomial_expansion",
    "bloch_state",
    "bloch_vector",
    "closed_form_coefficients",
    "coefficient_derivatives",
    "compare_slds",
    "default_series_s",
    "defining_residual",
    "detect_quadratic_class",
    "eigen_operator_rate",
    "purity",
    "sld_bloch_qubit",
    "sld_commuting",
    "sld_eigen_operator",
    "sld_quadratic_class",
    "sld_quadrature",
    "sld_series",
    "sld_spectral",
    "sld_sylvester",
]
