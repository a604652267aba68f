"""Resonant-manifold sampling, collisional invariants and entropy dissipation
for wave-kinetic dispersion laws."""

from .backend import BACKEND_NAME
from .dispersion import (
    DispersionLaw,
    LawError,
    SamplingDomain,
    gravity_law,
    independence_margin,
    omega_jet,
    parse_law,
    power_law,
    quadratic_law,
    relativistic_law,
    rossby_law,
    sheared_law,
)
from .exprlang import EvaluationError, Expr, ExprParseError, parse
from .invariants import (
    CramerReport,
    DegeneracyError,
    DegeneracyReport,
    FitResult,
    LevelSetReport,
    MuProfile,
    ResidualReport,
    cramer_coefficients,
    cross_product_residual,
    degeneracy_report,
    fit_equilibrium,
    four_wave_residual,
    level_set_constancy,
    mu_profile,
    quadratic_null_margin,
    three_wave_residual,
)
from .kinetics import (
    DissipationEstimate,
    NonpositiveDensityError,
    QApplyResult,
    entropy_dissipation_four,
    entropy_dissipation_three,
    linearized_form,
    q3_apply,
    qw_apply,
)
from .resonance import (
    ChartError,
    FourWaveChart,
    HypothesisError,
    QuadrupleSet,
    ResonantQuadruple,
    ResonantTriple,
    SampleDiagnostics,
    TripleSet,
    build_chart,
    chart_tangent_basis,
    gamma_sigma,
    gamma_sigma_inverse,
    sample_pairs,
    sample_quadruples,
    sample_triples,
    solve_psi_four,
    solve_psi_three,
    validate_three_wave,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "ChartError",
    "CramerReport",
    "DegeneracyError",
    "DegeneracyReport",
    "DispersionLaw",
    "DissipationEstimate",
    "EvaluationError",
    "Expr",
    "ExprParseError",
    "FitResult",
    "FourWaveChart",
    "HypothesisError",
    "LawError",
    "LevelSetReport",
    "MuProfile",
    "NonpositiveDensityError",
    "QApplyResult",
    "QuadrupleSet",
    "ResidualReport",
    "ResonantQuadruple",
    "ResonantTriple",
    "SampleDiagnostics",
    "SamplingDomain",
    "TripleSet",
    "__version__",
    "build_chart",
    "chart_tangent_basis",
    "cramer_coefficients",
    "cross_product_residual",
    "degeneracy_report",
    "entropy_dissipation_four",
    "entropy_dissipation_three",
    "fit_equilibrium",
    "four_wave_residual",
    "gamma_sigma",
    "gamma_sigma_inverse",
    "gravity_law",
    "independence_margin",
    "level_set_constancy",
    "linearized_form",
    "mu_profile",
    "omega_jet",
    "parse",
    "parse_law",
    "power_law",
    "q3_apply",
    "qw_apply",
    "quadratic_law",
    "quadratic_null_margin",
    "relativistic_law",
    "rossby_law",
    "sample_pairs",
    "sample_quadruples",
    "sample_triples",
    "sheared_law",
    "solve_psi_four",
    "solve_psi_three",
    "three_wave_residual",
    "validate_three_wave",
]
