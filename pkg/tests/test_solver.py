import numpy as np
import pytest

from stochdiss import (
    AffineMatrixExpr,
    DecisionVarTable,
    DelayDistribution,
    LMIProblem,
    PlantModel,
    SupplyRate,
    build_stochastic_lmi,
    minimize_quadratic_radius,
    solve,
)
from stochdiss.solver import FEASIBLE, INFEASIBLE


def scalar_problem(names):
    table = DecisionVarTable.empty()
    for name in names:
        table.add_scalar(name)
    return LMIProblem(table=table)


class TestSolveBasics:
    def test_psd_boundary_2x2(self):
        # minimize t with [[t, 1], [1, t]] >= 0  ->  t = 1
        problem = scalar_problem(["t"])
        k = problem.table.slot_index("t")
        expr = AffineMatrixExpr(
            dim=2,
            constant=np.array([[0.0, 1.0], [1.0, 0.0]]),
            basis={k: np.eye(2)},
        )
        problem.add_constraint(expr)
        problem.set_objective({"t": 1.0})
        report = solve(problem)
        assert report.feasible
        assert report.objective == pytest.approx(1.0, abs=1e-6)

    def test_scalar_lower_bound(self):
        problem = scalar_problem(["x"])
        k = problem.table.slot_index("x")
        expr = AffineMatrixExpr(dim=1, constant=np.array([[-1.0]]),
                                basis={k: np.array([[1.0]])})
        problem.add_constraint(expr)
        problem.set_objective({"x": 1.0})
        report = solve(problem)
        assert report.feasible
        assert report.objective == pytest.approx(1.0, abs=1e-6)

    def test_constant_negative_is_infeasible(self):
        problem = scalar_problem(["x"])
        expr = AffineMatrixExpr(dim=1, constant=np.array([[-1.0]]), basis={})
        problem.add_constraint(expr)
        report = solve(problem)
        assert report.status == INFEASIBLE

    def test_feasibility_with_margin(self):
        problem = scalar_problem(["x"])
        k = problem.table.slot_index("x")
        expr = AffineMatrixExpr(dim=2, constant=np.eye(2) * 0.5,
                                basis={k: np.eye(2)})
        problem.add_constraint(expr)
        report = solve(problem)
        assert report.status == FEASIBLE
        assert report.margin > 0.0

    def test_tol_range_enforced(self):
        problem = scalar_problem(["x"])
        problem.add_constraint(
            AffineMatrixExpr(dim=1, constant=np.array([[1.0]]), basis={}))
        with pytest.raises(ValueError):
            solve(problem, tol=1e-2)
        with pytest.raises(ValueError):
            solve(problem, tol=1e-12)


class TestSoundness:
    def test_feasible_points_satisfy_raw_constraints(self, plant, dists):
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[25.0]])
        problem = build_stochastic_lmi(plant, dists["p3"], qsr)
        report = solve(problem)
        assert report.feasible
        tol = 1e-8
        for expr, shift in problem.constraints:
            M = expr.value(report.x) - shift * np.eye(expr.dim)
            assert np.linalg.eigvalsh(M).min() >= -10.0 * tol

    def test_infeasible_below_true_gain(self, plant, dists):
        # gain-1 sector on a gain-2 plant can never be certified
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[1.0]])
        problem = build_stochastic_lmi(plant, dists["p3"], qsr)
        report = solve(problem)
        assert report.status == INFEASIBLE

    def test_determinism(self, plant, dists):
        qsr = SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[25.0]])
        r1 = solve(build_stochastic_lmi(plant, dists["p2"], qsr))
        r2 = solve(build_stochastic_lmi(plant, dists["p2"], qsr))
        assert r1 == r2
        assert np.array_equal(r1.x, r2.x)


class TestDegenerateDirections:
    def test_point_mass_at_maximum_delay(self, plant):
        # w = w_M zeroes whole slack columns; elimination must cope, and the
        # certificate collapses to the tight constant-delay gain
        dist = DelayDistribution.point_mass(5, w_m=1, w_M=5)
        problem = build_stochastic_lmi(plant, dist, SupplyRate(
            Q=[[-1.0]], S=[[0.0]], R=[[0.0]]), free_slots=("R",))
        problem.set_objective({"R": 1.0})
        report = solve(problem)
        assert report.feasible
        gain = np.sqrt(problem.table.gather("R", report.x))
        assert gain == pytest.approx(2.0227, abs=0.05)


class TestQuadraticRadius:
    def test_pure_gain_plant(self):
        # unit-gain memoryless plant through a one-step delay: the frequency
        # locus is the unit circle, so the smallest disk is (c, r) = (0, 1)
        plant = PlantModel(A=[], B=np.zeros((0, 1)), C=np.zeros((1, 0)), D=[[1.0]])
        dist = DelayDistribution.point_mass(1)
        problem = build_stochastic_lmi(
            plant, dist, SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[0.0]]),
            free_slots=("S", "R"))
        report, c, r = minimize_quadratic_radius(problem)
        assert report.feasible
        assert c == pytest.approx(0.0, abs=1e-3)
        assert r == pytest.approx(1.0, abs=1e-3)

    def test_epigraph_relation(self, plant, dists):
        problem = build_stochastic_lmi(
            plant, dists["p5"], SupplyRate(Q=[[-1.0]], S=[[0.0]], R=[[0.0]]),
            free_slots=("S", "R"))
        report, c, r = minimize_quadratic_radius(problem)
        assert report.feasible
        R = problem.table.gather("R", report.x)
        S = problem.table.gather("S", report.x)
        t = problem.table.gather("t", report.x)
        assert c == pytest.approx(S)
        assert r * r == pytest.approx(t, rel=1e-9)
        # epigraph tightness at the optimum: t ~ R + S^2
        assert t == pytest.approx(R + S * S, abs=1e-5)
