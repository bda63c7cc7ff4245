"""Small dense semidefinite feasibility and linear-objective solves.

The default backend drives cvxopt's interior-point cone solver; problems
here are at most a few tens of decision scalars against blocks no larger
than ~30x30.  The wrapper owns the parts cvxopt does not: constraint
scaling, elimination of degenerate decision directions, margin
verification on the raw (unscaled) constraints, and a margin-maximization
reformulation so infeasibility never relies on backend dual certificates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lmi import AffineMatrixExpr, LMIProblem

__all__ = ["SolveReport", "solve", "minimize_quadratic_radius", "SolverError"]

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

_MARGIN_CAP = 1.0  # upper bound on the auxiliary margin variable


class SolverError(RuntimeError):
    pass


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``margin`` is the smallest eigenvalue across the raw constraints at the
    returned point; ``scaled_margin`` the same on the Frobenius-normalized
    problem the backend actually saw.  ``wall_time`` is excluded from
    equality so reports from identical inputs compare equal bitwise.
    """

    status: str
    objective: float | None
    x: np.ndarray | None
    margin: float
    scaled_margin: float
    iterations: int
    wall_time: float = field(compare=False, default=0.0)
    diagnostics: str = ""

    def __eq__(self, other) -> bool:  # wall_time deliberately ignored
        if not isinstance(other, SolveReport):
            return NotImplemented
        same_x = (
            (self.x is None and other.x is None)
            or (self.x is not None and other.x is not None
                and self.x.shape == other.x.shape
                and bool(np.all(self.x == other.x)))
        )
        return (
            self.status == other.status
            and self.objective == other.objective
            and same_x
            and self.margin == other.margin
            and self.scaled_margin == other.scaled_margin
            and self.iterations == other.iterations
        )

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def _import_cvxopt():
    import cvxopt
    import cvxopt.solvers
    return cvxopt


def _strip_zero_rows(constant: np.ndarray, bases: dict[int, np.ndarray]):
    """Drop rows/cols that are zero in the constant and every basis block."""
    dim = constant.shape[0]
    active = np.zeros(dim, dtype=bool)
    active |= np.any(constant != 0.0, axis=0)
    for Bk in bases.values():
        active |= np.any(Bk != 0.0, axis=0)
    if active.all():
        return constant, bases
    if not active.any():
        active[0] = True  # keep a 1x1 zero block rather than an empty one
    keep = np.where(active)[0]
    sub = np.ix_(keep, keep)
    return constant[sub], {k: Bk[sub] for k, Bk in bases.items()}


def _normalized_constraints(problem: LMIProblem, extra=()):
    """Fold shifts into constants, strip dead rows, normalize by Frobenius norm.

    Returns a list of (constant, bases, scale) triples; `extra` appends
    already-built raw triples (epigraph or margin blocks) before scaling.
    """
    out = []
    raw = []
    for expr, shift in problem.constraints:
        constant = expr.constant - shift * np.eye(expr.dim)
        raw.append((constant, dict(expr.basis)))
    raw.extend(extra)
    for constant, bases in raw:
        constant, bases = _strip_zero_rows(constant, bases)
        norm = max(
            float(np.linalg.norm(constant)),
            max((float(np.linalg.norm(Bk)) for Bk in bases.values()), default=0.0),
        )
        scale = norm if norm > 1e-300 else 1.0
        out.append((constant / scale, {k: Bk / scale for k, Bk in bases.items()}, scale))
    return out


def _raw_margin(problem: LMIProblem, x: np.ndarray, extra=()):
    vals = []
    for expr, shift in problem.constraints:
        M = expr.value(x) - shift * np.eye(expr.dim)
        vals.append(float(np.linalg.eigvalsh((M + M.T) / 2.0).min()))
    for constant, bases in extra:
        M = constant.copy()
        for k, Bk in bases.items():
            M += x[k] * Bk
        vals.append(float(np.linalg.eigvalsh((M + M.T) / 2.0).min()))
    return min(vals) if vals else 0.0


def _scaled_margin(norm_cons, x: np.ndarray):
    vals = []
    for constant, bases, _ in norm_cons:
        M = constant.copy()
        for k, Bk in bases.items():
            M += x[k] * Bk
        vals.append(float(np.linalg.eigvalsh((M + M.T) / 2.0).min()))
    return min(vals) if vals else 0.0


def _independent_columns(cols: np.ndarray, priority: np.ndarray, tol: float = 1e-10):
    """Greedy rank-revealing pass; `priority` columns are visited first."""
    nv = cols.shape[1]
    order = list(np.where(priority)[0]) + [k for k in range(nv) if not priority[k]]
    kept: list[int] = []
    basis: list[np.ndarray] = []
    for k in order:
        v = cols[:, k].copy()
        for b in basis:
            v -= (b @ cols[:, k]) * b
        nrm = float(np.linalg.norm(v))
        if nrm > tol * max(1.0, float(np.linalg.norm(cols[:, k]))):
            basis.append(v / nrm)
            kept.append(k)
    mask = np.zeros(nv, dtype=bool)
    mask[kept] = True
    return mask


def _run_cvxopt(c: np.ndarray, norm_cons, tol: float, drop_dependent: bool):
    cvxopt = _import_cvxopt()
    nv = c.shape[0]
    used = c != 0.0
    for _, bases, _ in norm_cons:
        for k in bases:
            used[k] = True
    if drop_dependent:
        rows = []
        for constant, bases, _ in norm_cons:
            dim = constant.shape[0]
            blk = np.zeros((dim * dim, nv))
            for k, Bk in bases.items():
                blk[:, k] = Bk.ravel()
            rows.append(blk)
        stacked = np.vstack(rows) if rows else np.zeros((1, nv))
        mask = _independent_columns(stacked, priority=(c != 0.0))
        used &= mask | (c != 0.0)
    idx = np.where(used)[0]
    remap = {k: i for i, k in enumerate(idx)}

    Gs, hs = [], []
    for constant, bases, _ in norm_cons:
        dim = constant.shape[0]
        G = np.zeros((dim * dim, idx.size))
        for k, Bk in bases.items():
            if k in remap:
                G[:, remap[k]] = -Bk.ravel()
        Gs.append(cvxopt.matrix(G))
        hs.append(cvxopt.matrix(constant))

    options = {
        "show_progress": False,
        "maxiters": 200,
        "abstol": max(tol, 1e-10),
        "reltol": max(tol, 1e-10),
        "feastol": max(tol * 0.1, 1e-10),
    }
    saved = dict(cvxopt.solvers.options)
    cvxopt.solvers.options.update(options)
    try:
        sol = cvxopt.solvers.sdp(cvxopt.matrix(c[idx]), Gs=Gs, hs=hs)
    finally:
        cvxopt.solvers.options.clear()
        cvxopt.solvers.options.update(saved)
    x = np.zeros(nv)
    if sol["x"] is not None:
        x[idx] = np.array(sol["x"]).ravel()
    return sol["status"], x, int(sol.get("iterations", 0))


def solve(problem: LMIProblem, tol: float = 1e-8) -> SolveReport:
    """Feasibility with margin, or linear-objective minimization.

    Without an objective, feasibility is decided through the auxiliary
    margin-maximization problem (maximize ``s`` such that every constraint
    stays PSD after subtracting ``s I``): optimum below ``-tol`` on the
    scaled problem means infeasible.  A point is only ever reported
    feasible when its raw constraint margin is above ``-10 * tol``.
    """
    if not 1e-10 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-10, 1e-4], got {tol}")
    if not problem.constraints:
        raise ValueError("problem has no constraints")
    t0 = time.perf_counter()

    if problem.objective is None:
        return _solve_feasibility(problem, tol, t0)

    c = np.asarray(problem.objective, dtype=float)
    norm_cons = _normalized_constraints(problem)
    try:
        status, x, iters = _run_cvxopt(c, norm_cons, tol, drop_dependent=False)
        if status not in ("optimal", "primal infeasible", "dual infeasible"):
            status, x, iters = _run_cvxopt(c, norm_cons, tol, drop_dependent=True)
    except (ArithmeticError, ValueError, ZeroDivisionError):
        try:
            status, x, iters = _run_cvxopt(c, norm_cons, tol, drop_dependent=True)
        except (ArithmeticError, ValueError, ZeroDivisionError) as exc:
            return SolveReport(
                status=NUMERICAL_FAILURE, objective=None, x=None,
                margin=-math.inf, scaled_margin=-math.inf, iterations=0,
                wall_time=time.perf_counter() - t0,
                diagnostics=f"backend failure: {type(exc).__name__}: {exc}",
            )

    wall = time.perf_counter() - t0
    if status == "primal infeasible":
        return SolveReport(status=INFEASIBLE, objective=None, x=None,
                           margin=-math.inf, scaled_margin=-math.inf,
                           iterations=iters, wall_time=wall,
                           diagnostics="backend primal infeasibility certificate")
    if status != "optimal":
        return SolveReport(status=NUMERICAL_FAILURE, objective=None, x=None,
                           margin=-math.inf, scaled_margin=-math.inf,
                           iterations=iters, wall_time=wall,
                           diagnostics=f"backend status {status!r}")
    margin = _raw_margin(problem, x)
    scaled = _scaled_margin(norm_cons, x)
    if scaled < -10.0 * tol:
        return SolveReport(status=NUMERICAL_FAILURE, objective=float(c @ x), x=x,
                           margin=margin, scaled_margin=scaled,
                           iterations=iters, wall_time=wall,
                           diagnostics="optimal point violates scaled constraints")
    return SolveReport(status=FEASIBLE, objective=float(c @ x), x=x,
                       margin=margin, scaled_margin=scaled,
                       iterations=iters, wall_time=wall)


def _solve_feasibility(problem: LMIProblem, tol: float, t0: float) -> SolveReport:
    nv = problem.table.size
    s_idx = nv  # auxiliary margin variable appended after all table slots
    norm_cons = _normalized_constraints(problem)
    aug = []
    for constant, bases, scale in norm_cons:
        dim = constant.shape[0]
        bases2 = {k: Bk for k, Bk in bases.items()}
        bases2[s_idx] = -np.eye(dim)
        aug.append((constant, bases2, scale))
    # cap the margin variable so the auxiliary problem stays bounded
    aug.append((np.array([[_MARGIN_CAP]]), {s_idx: np.array([[-1.0]])}, 1.0))

    c = np.zeros(nv + 1)
    c[s_idx] = -1.0  # maximize s
    try:
        status, xs, iters = _run_cvxopt(c, aug, tol, drop_dependent=False)
        if status not in ("optimal",):
            status, xs, iters = _run_cvxopt(c, aug, tol, drop_dependent=True)
    except (ArithmeticError, ValueError, ZeroDivisionError):
        try:
            status, xs, iters = _run_cvxopt(c, aug, tol, drop_dependent=True)
        except (ArithmeticError, ValueError, ZeroDivisionError) as exc:
            return SolveReport(
                status=NUMERICAL_FAILURE, objective=None, x=None,
                margin=-math.inf, scaled_margin=-math.inf, iterations=0,
                wall_time=time.perf_counter() - t0,
                diagnostics=f"backend failure: {type(exc).__name__}: {exc}",
            )
    wall = time.perf_counter() - t0
    if status != "optimal":
        return SolveReport(status=NUMERICAL_FAILURE, objective=None, x=None,
                           margin=-math.inf, scaled_margin=-math.inf,
                           iterations=iters, wall_time=wall,
                           diagnostics=f"margin subproblem status {status!r}")
    s_opt = float(xs[s_idx])
    x = xs[:nv]
    margin = _raw_margin(problem, x)
    scaled = _scaled_margin(norm_cons, x)
    if s_opt < -tol:
        return SolveReport(status=INFEASIBLE, objective=None, x=x,
                           margin=margin, scaled_margin=scaled,
                           iterations=iters, wall_time=wall,
                           diagnostics=f"maximized margin {s_opt:.3e} < -tol")
    if margin < -10.0 * tol:
        # scaling can hide a raw violation behind a huge constraint norm;
        # a feasible verdict always implies the raw margin holds
        return SolveReport(status=INFEASIBLE, objective=None, x=x,
                           margin=margin, scaled_margin=scaled,
                           iterations=iters, wall_time=wall,
                           diagnostics=f"raw margin {margin:.3e} at the "
                                       "maximized-margin point")
    return SolveReport(status=FEASIBLE, objective=s_opt, x=x,
                       margin=margin, scaled_margin=scaled,
                       iterations=iters, wall_time=wall)


def minimize_quadratic_radius(problem: LMIProblem, R_slot: str = "R",
                              S_slot: str = "S", tol: float = 1e-8):
    """Minimize R + S^2 through the epigraph device.

    Appends a scalar ``t`` with the 2x2 constraint ``[[t - R, S], [S, 1]]``
    PSD and minimizes ``t``; the optimal sector is then
    ``(c, r) = (S, sqrt(t))``.  Returns ``(report, c, r)``.
    """
    table = problem.table
    table.add_scalar("t")
    kR = table.slot_index(R_slot)
    kS = table.slot_index(S_slot)
    kt = table.slot_index("t")
    epi = AffineMatrixExpr(
        dim=2,
        constant=np.array([[0.0, 0.0], [0.0, 1.0]]),
        basis={
            kt: np.array([[1.0, 0.0], [0.0, 0.0]]),
            kR: np.array([[-1.0, 0.0], [0.0, 0.0]]),
            kS: np.array([[0.0, 1.0], [1.0, 0.0]]),
        },
    )
    problem.add_constraint(epi)
    problem.set_objective({"t": 1.0})
    report = solve(problem, tol)
    if not report.feasible or report.x is None:
        return report, None, None
    c = float(table.gather(S_slot, report.x))
    t = float(table.gather("t", report.x))
    return report, c, math.sqrt(max(t, 0.0))
