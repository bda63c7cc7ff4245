"""Conic-sector search drivers over the two inequality builders.

Each driver fixes the supply-rate shape, frees the remaining scalars, and
solves one or two linear-objective semidefinite programs:

* :func:`min_gain` -- smallest certified gain (Q = -1, S = 0, minimize R).
* :func:`max_a_then_min_b` -- largest lower intercept, then the smallest
  finite upper intercept for that lower bound, capped at ``b_cap``.
* :func:`min_radius` -- smallest certified disk via the R + S^2 epigraph.

``builder`` selects between the delay-averaged condition ("stochastic",
needs a pmf) and the bounded-delay condition ("deterministic", needs only
the delay range).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lmi import (
    AffineMatrixExpr,
    LMIProblem,
    build_deterministic_lmi,
    build_stochastic_lmi,
)
from .model import Certificate, ConicSector, DelayDistribution, PlantModel, SupplyRate
from .solver import SolveReport, minimize_quadratic_radius, solve

__all__ = [
    "ConeSearchResult",
    "min_gain",
    "max_a_then_min_b",
    "min_radius",
    "compare_builders",
    "certify",
    "NO_FINITE_GAIN",
]

STOCHASTIC = "stochastic"
DETERMINISTIC = "deterministic"
NO_FINITE_GAIN = "no finite gain certificate"

_GAIN_PROBE_R = 1e8  # R probed when the gain minimization itself fails


@dataclass
class ConeSearchResult:
    """One search outcome: the certified sector plus its solve evidence."""

    mode: str
    builder: str
    sector: ConicSector | None
    qsr: SupplyRate | None
    reports: dict[str, SolveReport] = field(default_factory=dict)
    gain: float | None = None
    a: float | None = None
    b: float | None = None
    c: float | None = None
    r: float | None = None
    b_capped: bool = False
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _bounds(dist_or_bounds) -> tuple[int, int]:
    if isinstance(dist_or_bounds, DelayDistribution):
        return dist_or_bounds.w_m, dist_or_bounds.w_M
    w_m, w_M = dist_or_bounds
    return int(w_m), int(w_M)


def _build(plant: PlantModel, dist_or_bounds, builder: str,
           qsr: SupplyRate, free_slots=()) -> LMIProblem:
    if builder == STOCHASTIC:
        if not isinstance(dist_or_bounds, DelayDistribution):
            raise ValueError("stochastic builder needs a DelayDistribution")
        return build_stochastic_lmi(plant, dist_or_bounds, qsr, free_slots)
    if builder == DETERMINISTIC:
        w_m, w_M = _bounds(dist_or_bounds)
        return build_deterministic_lmi(plant, w_m, w_M, qsr, free_slots)
    raise ValueError(f"unknown builder {builder!r}")


def certify(plant: PlantModel, dist_or_bounds, builder: str,
            qsr: SupplyRate, tol: float = 1e-8) -> Certificate:
    """Fresh feasibility solve at a fixed supply rate."""
    problem = _build(plant, dist_or_bounds, builder, qsr)
    report = solve(problem, tol)
    variables = {}
    if report.x is not None:
        variables = {
            name: problem.table.gather(name, report.x)
            for name in problem.table.names
        }
    return Certificate(qsr=qsr, feasible=report.feasible,
                       margin=report.margin, variables=variables)


def min_gain(plant: PlantModel, dist_or_bounds, builder: str = STOCHASTIC,
             tol: float = 1e-8) -> ConeSearchResult:
    """Smallest certified gain: fix Q = -1, S = 0, minimize R linearly."""
    if not plant.is_siso:
        raise ValueError("cone search drivers handle SISO plants")
    base = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[0.0]])
    problem = _build(plant, dist_or_bounds, builder, base, free_slots=("R",))
    problem.set_objective({"R": 1.0})
    report = solve(problem, tol)
    if not report.feasible or report.x is None:
        # distinguish "no certificate at any gain" from solver trouble
        probe = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[_GAIN_PROBE_R]])
        probe_report = solve(_build(plant, dist_or_bounds, builder, probe), tol)
        status = NO_FINITE_GAIN if not probe_report.feasible else report.status
        return ConeSearchResult(mode="gain", builder=builder, sector=None,
                                qsr=None, reports={"gain": report, "probe": probe_report},
                                status=status)
    R = float(problem.table.gather("R", report.x))
    gain = math.sqrt(max(R, 0.0))
    qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[R]])
    sector = ConicSector.from_cr(0.0, gain) if gain > 0 else None
    return ConeSearchResult(mode="gain", builder=builder, sector=sector,
                            qsr=qsr, reports={"gain": report}, gain=gain)


def max_a_then_min_b(plant: PlantModel, dist_or_bounds, builder: str = STOCHASTIC,
                     b_cap: float = 1e5, tol: float = 1e-8) -> ConeSearchResult:
    """Largest lower intercept, then smallest upper intercept at that a.

    Phase 1 works in the half-plane parametrization (Q = 0, S = 1/2,
    R = -a) and maximizes ``a``.  Phase 2 fixes ``a``, frees ``b`` in the
    finite-sector parametrization, and minimizes it; when the minimizer
    runs into ``b_cap`` the result keeps ``b = b_cap`` and sets a flag.
    """
    if not plant.is_siso:
        raise ValueError("cone search drivers handle SISO plants")
    base = SupplyRate(Q=[[0.0]], S=[[0.5]], R=[[0.0]])
    phase1 = _build(plant, dist_or_bounds, builder, base, free_slots=("a",))
    phase1.set_objective({"a": -1.0})
    rep1 = solve(phase1, tol)
    if not rep1.feasible or rep1.x is None:
        return ConeSearchResult(mode="max-a-min-b", builder=builder, sector=None,
                                qsr=None, reports={"max_a": rep1},
                                status=f"phase-1 {rep1.status}")
    a = float(phase1.table.gather("a", rep1.x))

    phase2 = _build(plant, dist_or_bounds, builder, base, free_slots=(("b", a),))
    kb = phase2.table.slot_index("b")
    cap_expr = AffineMatrixExpr(dim=1, constant=np.array([[b_cap]]),
                                basis={kb: np.array([[-1.0]])})
    phase2.add_constraint(cap_expr)
    floor_expr = AffineMatrixExpr(dim=1, constant=np.array([[-a]]),
                                  basis={kb: np.array([[1.0]])})
    phase2.add_constraint(floor_expr)  # keep b above a so the sector is valid
    phase2.set_objective({"b": 1.0})
    rep2 = solve(phase2, tol)
    reports = {"max_a": rep1, "min_b": rep2}
    if not rep2.feasible or rep2.x is None:
        # the half-plane certificate stands on its own
        sector = ConicSector.from_ab(a, math.inf)
        return ConeSearchResult(mode="max-a-min-b", builder=builder, sector=sector,
                                qsr=SupplyRate(Q=[[0.0]], S=[[0.5]], R=[[-a]]),
                                reports=reports, a=a, b=math.inf, b_capped=True)
    b = float(phase2.table.gather("b", rep2.x))
    capped = b >= b_cap * (1.0 - 1e-6)
    if capped:
        b = b_cap
    qsr = SupplyRate(Q=[[-1.0]], S=[[(a + b) / 2.0]], R=[[-a * b]])
    sector = ConicSector.from_ab(a, b)
    return ConeSearchResult(mode="max-a-min-b", builder=builder, sector=sector,
                            qsr=qsr, reports=reports, a=a, b=b, b_capped=capped)


def min_radius(plant: PlantModel, dist_or_bounds, builder: str = STOCHASTIC,
               tol: float = 1e-8) -> ConeSearchResult:
    """Smallest certified disk: minimize R + S^2 with Q = -1."""
    if not plant.is_siso:
        raise ValueError("cone search drivers handle SISO plants")
    base = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[0.0]])
    problem = _build(plant, dist_or_bounds, builder, base, free_slots=("S", "R"))
    report, c, r = minimize_quadratic_radius(problem, tol=tol)
    if not report.feasible or c is None:
        return ConeSearchResult(mode="min-radius", builder=builder, sector=None,
                                qsr=None, reports={"min_radius": report},
                                status=report.status)
    R = float(problem.table.gather("R", report.x))
    qsr = SupplyRate(Q=[[-1.0]], S=[[c]], R=[[R]])
    sector = ConicSector.from_cr(c, r) if r > 0 else None
    return ConeSearchResult(mode="min-radius", builder=builder, sector=sector,
                            qsr=qsr, reports={"min_radius": report}, c=c, r=r)


def compare_builders(plant: PlantModel, dist: DelayDistribution,
                     b_cap: float = 1e5, tol: float = 1e-8) -> dict:
    """Run all three searches under both builders and check the orderings.

    The delay-averaged certificates can never be meaningfully worse than
    the bounded-delay ones computed from the same delay range; the report
    carries both sets plus slack-tolerant comparison flags.
    """
    out: dict = {"stochastic": {}, "deterministic": {}}
    for builder in (STOCHASTIC, DETERMINISTIC):
        arg = dist if builder == STOCHASTIC else (dist.w_m, dist.w_M)
        out[builder]["gain"] = min_gain(plant, arg, builder, tol)
        out[builder]["max_a"] = max_a_then_min_b(plant, arg, builder, b_cap, tol)
        out[builder]["min_radius"] = min_radius(plant, arg, builder, tol)
    sg = out["stochastic"]["gain"].gain
    dg = out["deterministic"]["gain"].gain
    sa = out["stochastic"]["max_a"].a
    da = out["deterministic"]["max_a"].a
    out["gain_not_worse"] = (sg is not None and dg is not None
                             and sg <= dg + 0.05)
    out["a_not_worse"] = (sa is not None and da is not None
                          and sa >= da - 0.05)
    return out
