"""Dissipativity certificates for discrete-time LTI systems with random input delays.

The package certifies quadratic (Q, S, R) supply-rate bounds that hold in
expectation over i.i.d. input-delay sequences with a known pmf, searches
for tight conic-sector characterizations, composes certificates across
feedback interconnections for static-gain design, and cross-validates
every certificate by seeded Monte-Carlo simulation.
"""

from .model import (
    Certificate,
    ConicSector,
    DelayDistribution,
    PlantModel,
    SupplyRate,
    conic_to_qsr,
    freq_gain,
    freq_min_real,
    frequency_response,
    qsr_to_conic,
)
from .lmi import (
    AffineMatrixExpr,
    DecisionVarTable,
    LMIProblem,
    build_deterministic_lmi,
    build_dissipation_form,
    build_stochastic_lmi,
    rank_structured_expand,
    newton_delay_value,
)
from .solver import SolveReport, minimize_quadratic_radius, solve
from .analysis import (
    ConeSearchResult,
    certify,
    compare_builders,
    max_a_then_min_b,
    min_gain,
    min_radius,
)
from .network import Interconnection, compose, sof_max_gain, stable_in_expectation
from .sim import (
    ClosedLoopRun,
    McCheckReport,
    SupplyLedger,
    Trajectory,
    closed_loop_simulate,
    make_input_bank,
    mc_check_dissipativity,
    simulate,
    supply_ledger,
    three_step_square_wave,
    trajectory_to_csv,
)

__version__ = "0.1.0"

__all__ = [
    "Certificate", "ConicSector", "DelayDistribution", "PlantModel",
    "SupplyRate", "conic_to_qsr", "qsr_to_conic", "freq_gain",
    "freq_min_real", "frequency_response",
    "AffineMatrixExpr", "DecisionVarTable", "LMIProblem",
    "build_dissipation_form", "build_stochastic_lmi", "build_deterministic_lmi",
    "rank_structured_expand", "newton_delay_value",
    "SolveReport", "solve", "minimize_quadratic_radius",
    "ConeSearchResult", "certify", "compare_builders",
    "min_gain", "max_a_then_min_b", "min_radius",
    "Interconnection", "compose", "sof_max_gain", "stable_in_expectation",
    "ClosedLoopRun", "McCheckReport", "SupplyLedger", "Trajectory",
    "closed_loop_simulate", "make_input_bank", "mc_check_dissipativity",
    "simulate", "supply_ledger", "three_step_square_wave", "trajectory_to_csv",
    "__version__",
]
