"""Assembly of the delay-dependent dissipativity matrix inequalities.

Two builders produce :class:`LMIProblem` instances over a shared decision
variable layout:

* :func:`build_stochastic_lmi` -- the delay-averaged condition: one PSD
  constraint equal to the pmf-weighted sum of a per-delay block matrix,
  of dimension ``n + 7m``.
* :func:`build_deterministic_lmi` -- the bounded-delay condition that uses
  only ``[w_m, w_M]`` and no distribution; same dimension, single block.

Both are congruent assemblies over the signal stack
``theta = (x(k), u(k), u(k-1), u(k-w_k), u(k-w_M))`` with named partitions
``(x, u, u1, uw, uM)``.  The module also carries the two proof utilities
that make the assemblies testable in isolation: the rank-structured
3-block expansion (:func:`rank_structured_expand`) and the exact finite-difference
reconstruction of a delayed sample (:func:`newton_delay_value`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import DelayDistribution, PlantModel, SupplyRate

__all__ = [
    "DecisionVarTable",
    "AffineMatrixExpr",
    "LMIProblem",
    "build_dissipation_form",
    "build_stochastic_lmi",
    "build_deterministic_lmi",
    "rank_structured_expand",
    "newton_delay_value",
    "definiteness_eps",
]

_BLOCK_NAMES = ("P", "X", "Y", "Z1", "Z2",
                "M1", "M2", "M3", "N1", "N2", "N3", "W1", "W2", "W3")


class DecisionVarTable:
    """Named decision blocks flattened into one scalar vector.

    Symmetric blocks store upper-triangle coordinates only, so scatter and
    gather round-trip exactly.  Every scalar slot has exactly one owning
    block.
    """

    def __init__(self, n: int, m: int, standard: bool = True):
        self.n, self.m = n, m
        self._kinds: dict[str, tuple[str, int]] = {}
        self._slots: list[tuple[str, int, int]] = []
        self._offsets: dict[str, int] = {}
        if standard:
            self._add("P", "sym", n + m)
            for name in ("X", "Y", "Z1", "Z2"):
                self._add(name, "sym", m)
            for name in _BLOCK_NAMES[5:]:
                self._add(name, "full", m)

    @classmethod
    def empty(cls) -> "DecisionVarTable":
        """Table with no standard blocks; callers add scalar slots."""
        return cls(0, 0, standard=False)

    def _add(self, name: str, kind: str, size: int) -> None:
        if name in self._kinds:
            raise ValueError(f"duplicate block {name!r}")
        self._kinds[name] = (kind, size)
        self._offsets[name] = len(self._slots)
        if kind == "sym":
            for i in range(size):
                for j in range(i, size):
                    self._slots.append((name, i, j))
        elif kind == "full":
            for i in range(size):
                for j in range(size):
                    self._slots.append((name, i, j))
        elif kind == "scalar":
            self._slots.append((name, 0, 0))
        else:
            raise ValueError(kind)

    def add_scalar(self, name: str) -> None:
        """Append one free scalar slot (supply-rate unknowns, epigraph vars)."""
        self._add(name, "scalar", 1)

    @property
    def size(self) -> int:
        return len(self._slots)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._kinds)

    def kind(self, name: str) -> tuple[str, int]:
        return self._kinds[name]

    def slots(self) -> list[tuple[str, int, int]]:
        return list(self._slots)

    def slot_index(self, name: str, i: int = 0, j: int = 0) -> int:
        kind, size = self._kinds[name]
        if kind == "sym" and i > j:
            i, j = j, i
        off = self._offsets[name]
        if kind == "scalar":
            return off
        if kind == "sym":
            # offset of (i, j) in row-major upper triangle
            return off + i * size - i * (i - 1) // 2 + (j - i)
        return off + i * size + j

    def gather(self, name: str, x: np.ndarray) -> np.ndarray | float:
        """Extract block value from a flat decision vector."""
        kind, size = self._kinds[name]
        if kind == "scalar":
            return float(x[self._offsets[name]])
        out = np.zeros((size, size))
        for i in range(size):
            for j in range(size):
                if kind == "sym" and j < i:
                    continue
                v = x[self.slot_index(name, i, j)]
                out[i, j] = v
                if kind == "sym":
                    out[j, i] = v
        return out

    def scatter(self, values: dict[str, np.ndarray | float]) -> np.ndarray:
        """Inverse of :meth:`gather` for every block present in ``values``."""
        x = np.zeros(self.size)
        for name, val in values.items():
            kind, size = self._kinds[name]
            if kind == "scalar":
                x[self._offsets[name]] = float(val)
                continue
            M = np.asarray(val, dtype=float)
            for i in range(size):
                rng = range(i, size) if kind == "sym" else range(size)
                for j in rng:
                    x[self.slot_index(name, i, j)] = M[i, j]
        return x

    def gather_all(self, x: np.ndarray) -> dict[str, np.ndarray | float]:
        return {name: self.gather(name, x) for name in self._kinds}


@dataclass
class AffineMatrixExpr:
    """Symmetric matrix-valued expression affine in the decision vector.

    ``value(x) = constant + sum_k x[k] * basis[k]`` where only nonzero
    basis blocks are stored.
    """

    dim: int
    constant: np.ndarray
    basis: dict[int, np.ndarray] = field(default_factory=dict)

    def value(self, x: np.ndarray) -> np.ndarray:
        out = self.constant.copy()
        for k, Bk in self.basis.items():
            out += x[k] * Bk
        return out

    @classmethod
    def from_callable(cls, fn, nvars: int, zero_tol: float = 0.0) -> "AffineMatrixExpr":
        """Probe an affine matrix function at 0 and the unit vectors."""
        x0 = np.zeros(nvars)
        constant = np.asarray(fn(x0), dtype=float)
        basis: dict[int, np.ndarray] = {}
        for k in range(nvars):
            xk = np.zeros(nvars)
            xk[k] = 1.0
            Bk = np.asarray(fn(xk), dtype=float) - constant
            if np.max(np.abs(Bk), initial=0.0) > zero_tol:
                basis[k] = Bk
        return cls(dim=constant.shape[0], constant=constant, basis=basis)


@dataclass
class LMIProblem:
    """Decision table plus affine PSD constraints and an optional objective.

    Each constraint is ``expr.value(x) >= shift * I`` (positive
    semidefinite after subtracting the shift); ``objective`` is a linear
    functional over the decision vector, minimized when present.
    """

    table: DecisionVarTable
    constraints: list[tuple[AffineMatrixExpr, float]] = field(default_factory=list)
    objective: np.ndarray | None = None

    def add_constraint(self, expr: AffineMatrixExpr, shift: float = 0.0) -> None:
        for k in expr.basis:
            if k >= self.table.size:
                raise ValueError(f"constraint references unknown slot {k}")
        self.constraints.append((expr, shift))

    def set_objective(self, coeffs: dict[str, float]) -> None:
        c = np.zeros(self.table.size)
        for name, coef in coeffs.items():
            c[self.table.slot_index(name)] = coef
        self.objective = c


def definiteness_eps(plant: PlantModel) -> float:
    """Strict-definiteness margin for Z1, Z2, scaled by the plant size."""
    return 1e-7 * (1.0 + plant.frobenius_norm())


# ---------------------------------------------------------------------------
# Supply-rate slot handling.  Free scalars enter the constant block linearly:
#   "R"        R = r * I (gain-squared), Q and S fixed from `qsr`
#   "S"        S = s (SISO center), Q and R per other slots / qsr
#   "a"        Q = 0, S = 1/2, R = -a   (lower-intercept search)
#   ("b", a)   Q = -1, S = (a + b)/2, R = -a b   (upper-intercept search)

def _declare_supply_slots(table: DecisionVarTable, free_slots) -> list:
    parsed = []
    for slot in free_slots:
        if isinstance(slot, tuple):
            name, aval = slot
            if name != "b":
                raise ValueError(f"unknown free slot {slot!r}")
            table.add_scalar("b")
            parsed.append(("b", float(aval)))
        elif slot in ("R", "S", "a"):
            table.add_scalar(slot)
            parsed.append((slot, None))
        else:
            raise ValueError(f"unknown free slot {slot!r}")
    return parsed


def _supply_at(qsr: SupplyRate, parsed_slots, table: DecisionVarTable,
               x: np.ndarray, m: int, p: int):
    Q, S, R = qsr.Q, qsr.S, qsr.R
    for name, aval in parsed_slots:
        if name == "R":
            R = table.gather("R", x) * np.eye(m)
        elif name == "S":
            S = np.full((p, m), table.gather("S", x))
        elif name == "a":
            a = table.gather("a", x)
            Q = np.zeros((p, p))
            S = np.full((p, m), 0.5)
            R = -a * np.eye(m)
        elif name == "b":
            b = table.gather("b", x)
            Q = -np.eye(p)
            S = np.full((p, m), (aval + b) / 2.0)
            R = -aval * b * np.eye(m)
    return Q, S, R


# ---------------------------------------------------------------------------
# Numeric assembly over the theta partition (x, u, u1, uw, uM).

def _theta_index(n: int, m: int) -> dict[str, slice]:
    idx, off = {}, 0
    for name, size in (("x", n), ("u", m), ("u1", m), ("uw", m), ("uM", m)):
        idx[name] = slice(off, off + size)
        off += size
    return idx


def _dissipation_matrix(plant: PlantModel, Q, S, R, vals, w_m: int, w_M: int) -> np.ndarray:
    """Supply terms minus storage-difference bounds over (x, u, u1, uw, uM)."""
    n, m = plant.n, plant.m
    A, B, C, D = plant.A, plant.B, plant.C, plant.D
    d = n + 4 * m
    idx = _theta_index(n, m)

    def put(M, a, b, blk):
        M[idx[a], idx[b]] += blk
        if a != b:
            M[idx[b], idx[a]] += np.asarray(blk).T

    # supply-rate terms for y = C x + D u(k - w_k), u = u(k)
    supply = np.zeros((d, d))
    put(supply, "x", "x", C.T @ Q @ C)
    put(supply, "x", "u", C.T @ S)
    put(supply, "x", "uw", C.T @ Q @ D)
    put(supply, "u", "u", R)
    put(supply, "u", "uw", S.T @ D)
    put(supply, "uw", "uw", D.T @ Q @ D)

    # storage difference through P: (A x + B uw, u) vs (x, u1)
    P = vals["P"]
    nxt = np.zeros((d, n + m))
    nxt[idx["x"], :n] = A.T
    nxt[idx["u"], n:] = np.eye(m)
    nxt[idx["uw"], :n] = B.T
    cur = np.zeros((d, n + m))
    cur[idx["x"], :n] = np.eye(n)
    cur[idx["u1"], n:] = np.eye(m)
    storage = nxt @ P @ nxt.T - cur @ P @ cur.T

    # window-sum bounds: diagonal weights on u1, uw, uM
    X, Y = vals["X"], vals["Y"]
    window = np.zeros((d, d))
    window[idx["u1"], idx["u1"]] = (w_M - w_m + 1) * X + Y
    window[idx["uw"], idx["uw"]] = -X
    window[idx["uM"], idx["uM"]] = -Y

    # increment term on eta(k) = u(k) - u(k-1)
    Z1, Z2 = vals["Z1"], vals["Z2"]
    sel = np.zeros((d, m))
    sel[idx["u"], :] = np.eye(m)
    sel[idx["u1"], :] = -np.eye(m)
    increment = (w_M - 1) * sel @ (Z1 + Z2) @ sel.T

    # slack coupling over zeta = (u1, uw, uM)
    M_ = np.vstack([vals["M1"], vals["M2"], vals["M3"]])
    N_ = np.vstack([vals["N1"], vals["N2"], vals["N3"]])
    W_ = np.vstack([vals["W1"], vals["W2"], vals["W3"]])
    Phi = np.hstack([M_ + N_, W_ - M_, -W_ - N_])
    slack = np.zeros((d, d))
    tail = slice(n + m, d)
    slack[tail, tail] = Phi + Phi.T

    return supply - storage - window - increment - slack


def _big_block(plant: PlantModel, Q, S, R, vals, w: int, w_m: int, w_M: int) -> np.ndarray:
    """Per-delay block of the delay-averaged condition, dimension n + 7m.

    The leading block collapses theta onto (x, u, u1, u(k-w_M), L1) with
    scalar weights (w_M - w) and (w_M - w)^2; the three slack columns carry
    sqrt(w_M - 1), sqrt(w - 1) and sqrt(w_M - w) against diag(Z2, Z1, Z1).
    """
    n, m = plant.n, plant.m
    F = _dissipation_matrix(plant, Q, S, R, vals, w_m, w_M)
    idx = _theta_index(n, m)
    nb = n + 2 * m
    F11 = F[:nb, :nb]
    F12 = F[:nb, idx["uw"]]
    F13 = F[:nb, idx["uM"]]
    F22 = F[idx["uw"], idx["uw"]]
    F23 = F[idx["uw"], idx["uM"]]
    F33 = F[idx["uM"], idx["uM"]]
    dw = float(w_M - w)
    Ft = np.block([
        [F11, F12 + F13, dw * F12],
        [(F12 + F13).T, F22 + F33 + F23 + F23.T, dw * (F22 + F23)],
        [dw * F12.T, dw * (F22 + F23).T, dw * dw * F22],
    ])
    z0 = np.zeros((n + m, m))
    Nt = math.sqrt(w_M - 1) * np.vstack(
        [z0, vals["N1"], vals["N2"] + vals["N3"], dw * vals["N2"]])
    Mt = math.sqrt(w - 1) * np.vstack(
        [z0, vals["M1"], vals["M2"] + vals["M3"], dw * vals["M2"]])
    Wt = math.sqrt(w_M - w) * np.vstack(
        [z0, vals["W1"], vals["W2"] - vals["W3"], dw * vals["W2"]])
    Z1, Z2 = vals["Z1"], vals["Z2"]
    zm = np.zeros((m, m))
    return np.block([
        [Ft, Nt, Mt, Wt],
        [Nt.T, Z2, zm, zm],
        [Mt.T, zm, Z1, zm],
        [Wt.T, zm, zm, Z1],
    ])


def _det_block(plant: PlantModel, Q, S, R, vals, w_m: int, w_M: int) -> np.ndarray:
    """Bounded-delay block: the core form bordered by worst-case slack rows."""
    n, m = plant.n, plant.m
    F = _dissipation_matrix(plant, Q, S, R, vals, w_m, w_M)
    M_ = np.vstack([vals["M1"], vals["M2"], vals["M3"]])
    N_ = np.vstack([vals["N1"], vals["N2"], vals["N3"]])
    W_ = np.vstack([vals["W1"], vals["W2"], vals["W3"]])
    z = np.zeros((m, n + m))
    rowN = np.hstack([z, math.sqrt(w_M - 1) * N_.T])
    rowM = np.hstack([z, math.sqrt(w_M - 1) * M_.T])
    rowW = np.hstack([z, math.sqrt(w_M - w_m) * W_.T])
    Z1, Z2 = vals["Z1"], vals["Z2"]
    zm = np.zeros((m, m))
    return np.block([
        [F, rowN.T, rowM.T, rowW.T],
        [rowN, Z2, zm, zm],
        [rowM, zm, Z1, zm],
        [rowW, zm, zm, Z1],
    ])


def _check_dims(plant: PlantModel, qsr: SupplyRate) -> None:
    if qsr.Q.shape[0] != plant.p or qsr.R.shape[0] != plant.m:
        raise ValueError(
            f"supply rate sized for ({qsr.Q.shape[0]} outputs, "
            f"{qsr.R.shape[0]} inputs) does not match plant "
            f"({plant.p} outputs, {plant.m} inputs)"
        )


def build_dissipation_form(plant: PlantModel, qsr: SupplyRate, table: DecisionVarTable,
             w_m: int, w_M: int) -> AffineMatrixExpr:
    """Affine core quadratic form over (x, u, u1, uw, uM), dimension n + 4m."""
    _check_dims(plant, qsr)
    if w_m < 1:
        raise ValueError(f"w_m must be >= 1, got {w_m}")
    if table.n != plant.n or table.m != plant.m:
        raise ValueError("decision table sized for a different plant")

    def fn(x):
        vals = {name: table.gather(name, x) for name in _BLOCK_NAMES}
        return _dissipation_matrix(plant, qsr.Q, qsr.S, qsr.R, vals, w_m, w_M)

    return AffineMatrixExpr.from_callable(fn, table.size)


def _add_side_constraints(problem: LMIProblem, plant: PlantModel) -> None:
    eps = definiteness_eps(plant)
    table = problem.table
    for name, shift in (("P", 0.0), ("X", 0.0), ("Y", 0.0),
                        ("Z1", eps), ("Z2", eps)):
        def fn(x, name=name):
            return np.atleast_2d(table.gather(name, x))
        problem.add_constraint(
            AffineMatrixExpr.from_callable(fn, table.size), shift)


def build_stochastic_lmi(plant: PlantModel, dist: DelayDistribution,
                         qsr: SupplyRate, free_slots=()) -> LMIProblem:
    """Delay-averaged dissipativity condition for a known delay pmf.

    The main constraint is the exact pmf-weighted sum of the per-delay
    block over the finite support (no sampling), one PSD constraint of
    dimension ``n + 7m``; side constraints keep P, X, Y positive
    semidefinite and Z1, Z2 strictly positive definite.
    """
    _check_dims(plant, qsr)
    if dist.w_m < 1:
        raise ValueError(
            "delays below 1 are outside the certified class "
            "(sqrt(w - 1) weights would have a negative radicand)"
        )
    table = DecisionVarTable(plant.n, plant.m)
    parsed = _declare_supply_slots(table, free_slots)
    support = dist.support
    pmf = dist.pmf

    def fn(x):
        vals = {name: table.gather(name, x) for name in _BLOCK_NAMES}
        Q, S, R = _supply_at(qsr, parsed, table, x, plant.m, plant.p)
        out = None
        for w, pw in zip(support, pmf):
            blk = pw * _big_block(plant, Q, S, R, vals, int(w), dist.w_m, dist.w_M)
            out = blk if out is None else out + blk
        return out

    problem = LMIProblem(table=table)
    problem.add_constraint(AffineMatrixExpr.from_callable(fn, table.size))
    _add_side_constraints(problem, plant)
    return problem


def build_deterministic_lmi(plant: PlantModel, w_m: int, w_M: int,
                            qsr: SupplyRate, free_slots=()) -> LMIProblem:
    """Bounded-delay dissipativity condition (delay bounds only, no pmf)."""
    _check_dims(plant, qsr)
    if w_m < 1:
        raise ValueError(
            "delays below 1 are outside the certified class "
            "(sqrt(w - 1) weights would have a negative radicand)"
        )
    if w_M < w_m:
        raise ValueError(f"need w_M >= w_m, got [{w_m}, {w_M}]")
    table = DecisionVarTable(plant.n, plant.m)
    parsed = _declare_supply_slots(table, free_slots)

    def fn(x):
        vals = {name: table.gather(name, x) for name in _BLOCK_NAMES}
        Q, S, R = _supply_at(qsr, parsed, table, x, plant.m, plant.p)
        return _det_block(plant, Q, S, R, vals, w_m, w_M)

    problem = LMIProblem(table=table)
    problem.add_constraint(AffineMatrixExpr.from_callable(fn, table.size))
    _add_side_constraints(problem, plant)
    return problem


def rank_structured_expand(A_blk: np.ndarray, B_blk: np.ndarray, C_blk: np.ndarray,
                  n_scalar: float) -> np.ndarray:
    """Rank-structured 3-block expansion of a symmetric 2-block matrix.

    Returns ``[[A, B, nB], [B', C, nC], [nB', nC, n^2 C]]``, which is PSD
    exactly when ``[[A, B], [B', C]]`` is (for C nonsingular and n >= 0).
    """
    A_blk = np.atleast_2d(np.asarray(A_blk, dtype=float))
    B_blk = np.atleast_2d(np.asarray(B_blk, dtype=float))
    C_blk = np.atleast_2d(np.asarray(C_blk, dtype=float))
    if n_scalar < 0:
        raise ValueError(f"n_scalar must be >= 0, got {n_scalar}")
    for name, Mx in (("A_blk", A_blk), ("C_blk", C_blk)):
        if Mx.shape[0] != Mx.shape[1] or np.max(np.abs(Mx - Mx.T), initial=0.0) > 1e-12:
            raise ValueError(f"{name} must be square symmetric")
    if B_blk.shape != (A_blk.shape[0], C_blk.shape[0]):
        raise ValueError(
            f"B_blk must be {A_blk.shape[0]}x{C_blk.shape[0]}, got {B_blk.shape}"
        )
    nB = n_scalar * B_blk
    nC = n_scalar * C_blk
    return np.block([
        [A_blk, B_blk, nB],
        [B_blk.T, C_blk, nC],
        [nB.T, nC, n_scalar * n_scalar * C_blk],
    ])


def newton_delay_value(u: np.ndarray, k: int, w: int, w_m: int, w_M: int) -> np.ndarray:
    """Reconstruct ``u(k - w)`` from ``u(k - w_M)`` and its forward differences.

    Uses the finite Newton series
    ``u(k - w) = u(k - w_M) + sum_i binom(w_M - w, i) D^i[u](k - w_M)``
    truncated at order ``w_M - w_m``, which is exact because higher
    binomials vanish on the integer support.
    """
    u = np.asarray(u, dtype=float)
    if not (w_m <= w <= w_M):
        raise ValueError(f"w={w} outside support [{w_m}, {w_M}]")
    base = k - w_M
    if base < 0 or k > u.shape[0] - 1:
        raise ValueError(f"u must be defined on [k - w_M, k] = [{base}, {k}]")

    def sample(i):
        return u[i] if u.ndim == 1 else u[i, :]

    def fwd_diff(order):
        # D^i[u](base) with exact integer binomial coefficients
        acc = None
        for l in range(order + 1):
            term = ((-1) ** (order - l)) * math.comb(order, l) * sample(base + l)
            acc = term if acc is None else acc + term
        return acc

    out = np.atleast_1d(np.array(sample(base), dtype=float, copy=True))
    for i in range(1, w_M - w_m + 1):
        coef = math.comb(w_M - w, i)
        if coef:
            out = out + coef * np.atleast_1d(fwd_diff(i))
    return out
