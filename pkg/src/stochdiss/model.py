"""Domain types: plants, delay distributions, supply rates, conic sectors.

A discrete-time LTI plant driven through a randomly delayed input channel
is described by a :class:`PlantModel` together with a
:class:`DelayDistribution` over the integer delays it may experience.
Input-output certificates are quadratic supply rates (:class:`SupplyRate`);
for SISO systems these are interchangeable with conic sectors
(:class:`ConicSector`) given either by real-axis intercepts ``(a, b)`` or
by center/radius ``(c, r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "PlantModel",
    "DelayDistribution",
    "SupplyRate",
    "ConicSector",
    "Certificate",
    "conic_to_qsr",
    "qsr_to_conic",
    "freq_gain",
    "freq_min_real",
    "frequency_response",
]

_SYM_TOL = 1e-12
_PMF_TOL = 1e-12


def _as_matrix(value: Any, rows: int, cols: int, name: str) -> np.ndarray:
    out = np.asarray(value, dtype=float)
    if out.size == 0:
        out = out.reshape(rows, cols)
    if out.ndim != 2 or out.shape != (rows, cols):
        raise ValueError(f"{name} must be {rows}x{cols}, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


@dataclass(frozen=True)
class PlantModel:
    """Discrete-time state-space realization (A, B, C, D).

    ``n = 0`` is permitted and describes a memoryless system: the state
    blocks simply vanish from every matrix assembled downstream.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, 0)
        else:
            A = np.atleast_2d(A)
        n = A.shape[0]
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(n, m) if B.size == n * m else B.reshape(n, -1)
        C = np.asarray(self.C, dtype=float)
        if C.ndim == 1:
            C = C.reshape(p, n) if C.size == p * n else C.reshape(-1, n)
        object.__setattr__(self, "A", _as_matrix(A, n, n, "A"))
        object.__setattr__(self, "B", _as_matrix(B, n, m, "B"))
        object.__setattr__(self, "C", _as_matrix(C, p, n, "C"))
        object.__setattr__(self, "D", _as_matrix(D, p, m, "D"))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def is_siso(self) -> bool:
        return self.m == 1 and self.p == 1

    def spectral_radius(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def frobenius_norm(self) -> float:
        """Frobenius norm of the stacked realization [[A, B], [C, D]]."""
        top = np.hstack([self.A, self.B])
        bot = np.hstack([self.C, self.D])
        return float(np.linalg.norm(np.vstack([top, bot])))


@dataclass(frozen=True)
class DelayDistribution:
    """Pmf over integer delays on ``[w_m, w_M]``, sampled i.i.d. per step.

    ``w_m >= 1`` is required: the certified class excludes zero delay
    because the assembled inequalities contain sqrt(w - 1) weights.
    """

    w_m: int
    w_M: int
    pmf: np.ndarray

    def __post_init__(self) -> None:
        w_m, w_M = int(self.w_m), int(self.w_M)
        if w_m < 1:
            raise ValueError(f"w_m must be >= 1, got {w_m}")
        if w_M < w_m:
            raise ValueError(f"w_M must be >= w_m, got [{w_m}, {w_M}]")
        pmf = np.asarray(self.pmf, dtype=float).ravel()
        if pmf.size != w_M - w_m + 1:
            raise ValueError(
                f"pmf needs {w_M - w_m + 1} entries for delays {w_m}..{w_M}, "
                f"got {pmf.size}"
            )
        if np.any(pmf < 0):
            raise ValueError("pmf entries must be nonnegative")
        total = float(pmf.sum())
        if abs(total - 1.0) > _PMF_TOL:
            raise ValueError(f"pmf must sum to 1 (within {_PMF_TOL}), got {total!r}")
        object.__setattr__(self, "w_m", w_m)
        object.__setattr__(self, "w_M", w_M)
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def from_mapping(cls, mapping: dict[int, float]) -> "DelayDistribution":
        """Build from ``{delay: probability}``; missing delays get mass 0."""
        delays = sorted(int(k) for k in mapping)
        w_m, w_M = delays[0], delays[-1]
        pmf = np.zeros(w_M - w_m + 1)
        for k, v in mapping.items():
            pmf[int(k) - w_m] = float(v)
        return cls(w_m, w_M, pmf)

    @classmethod
    def point_mass(cls, w: int, w_m: int | None = None, w_M: int | None = None) -> "DelayDistribution":
        """Degenerate distribution concentrated on a single delay ``w``."""
        lo = w if w_m is None else w_m
        hi = w if w_M is None else w_M
        pmf = np.zeros(hi - lo + 1)
        pmf[w - lo] = 1.0
        return cls(lo, hi, pmf)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.w_m, self.w_M + 1)

    def mean(self) -> float:
        return float(np.dot(self.support, self.pmf))


@dataclass(frozen=True)
class SupplyRate:
    """Quadratic supply rate (Q, S, R): s(u, y) = y'Qy + 2 y'Su + u'Ru."""

    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray

    def __post_init__(self) -> None:
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be square, got {M.shape}")
            if np.max(np.abs(M - M.T), initial=0.0) > _SYM_TOL:
                raise ValueError(f"{name} must be symmetric within {_SYM_TOL}")
        if S.shape != (Q.shape[0], R.shape[0]):
            raise ValueError(
                f"S must be {Q.shape[0]}x{R.shape[0]}, got {S.shape}"
            )
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "R", R)

    @property
    def is_scalar(self) -> bool:
        return self.Q.shape == (1, 1) and self.R.shape == (1, 1)

    def evaluate(self, y: np.ndarray, u: np.ndarray) -> float:
        """Per-step supply for output ``y`` and input ``u``."""
        y = np.atleast_1d(y)
        u = np.atleast_1d(u)
        return float(y @ self.Q @ y + 2.0 * (y @ self.S @ u) + u @ self.R @ u)


@dataclass(frozen=True)
class ConicSector:
    """SISO conic sector, as intercepts ``(a, b)`` or center/radius ``(c, r)``.

    ``b = math.inf`` is a first-class value (the half-plane sector); callers
    that need a finite upper intercept substitute their own ``b_cap``.
    """

    a: float | None = None
    b: float | None = None
    c: float | None = None
    r: float | None = None

    def __post_init__(self) -> None:
        ab = self.a is not None and self.b is not None
        cr = self.c is not None and self.r is not None
        if ab == cr:
            raise ValueError("give exactly one of (a, b) or (c, r)")
        if ab:
            a, b = float(self.a), float(self.b)
            if not a < b:
                raise ValueError(f"need a < b, got a={a}, b={b}")
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        else:
            c, r = float(self.c), float(self.r)
            if not r > 0:
                raise ValueError(f"need r > 0, got r={r}")
            object.__setattr__(self, "c", c)
            object.__setattr__(self, "r", r)

    @classmethod
    def from_ab(cls, a: float, b: float) -> "ConicSector":
        return cls(a=a, b=b)

    @classmethod
    def from_cr(cls, c: float, r: float) -> "ConicSector":
        return cls(c=c, r=r)

    @property
    def kind(self) -> str:
        return "ab" if self.a is not None else "cr"

    def intercepts(self) -> tuple[float, float]:
        """Real-axis intercepts (a, b); derived from (c, r) when needed."""
        if self.kind == "ab":
            return self.a, self.b
        return self.c - self.r, self.c + self.r


@dataclass(frozen=True)
class Certificate:
    """Outcome of one feasibility or optimization run over a supply rate."""

    qsr: SupplyRate
    feasible: bool
    margin: float
    variables: dict[str, np.ndarray] = field(default_factory=dict)
    beta_hint: float | None = None


def conic_to_qsr(sector: ConicSector) -> SupplyRate:
    """Map a SISO conic sector to its supply-rate triple.

    Finite sector: Q = -1, S = (a + b)/2, R = -a b.  Half-plane sector
    (b infinite): Q = 0, S = 1/2, R = -a.  Center/radius: Q = -1, S = c,
    R = r^2 - c^2.
    """
    if sector.kind == "cr":
        c, r = sector.c, sector.r
        return SupplyRate(Q=[[-1.0]], S=[[c]], R=[[r * r - c * c]])
    a, b = sector.a, sector.b
    if math.isinf(b):
        return SupplyRate(Q=[[0.0]], S=[[0.5]], R=[[-a]])
    return SupplyRate(Q=[[-1.0]], S=[[(a + b) / 2.0]], R=[[-a * b]])


def qsr_to_conic(qsr: SupplyRate, prefer: str = "cr") -> ConicSector:
    """Invert :func:`conic_to_qsr` for SISO supply rates.

    Accepts Q = -1 (within 1e-9), returning the (c, r) or (a, b) form, or
    Q = 0 with S = 1/2, returning the half-plane sector (a, inf).  The
    radius root is taken positive: r = +sqrt(R + S^2).
    """
    if not qsr.is_scalar:
        raise ValueError("conic sectors only parameterize SISO supply rates")
    q = float(qsr.Q[0, 0])
    s = float(qsr.S[0, 0])
    r_ = float(qsr.R[0, 0])
    if abs(q) <= 1e-9:
        if abs(s - 0.5) > 1e-9:
            raise ValueError(
                f"Q = 0 supply rate must have S = 1/2 to be a sector, got S={s}"
            )
        return ConicSector.from_ab(-r_, math.inf)
    if abs(q + 1.0) > 1e-9:
        raise ValueError(f"not a normalized sector: Q must be -1 or 0, got {q}")
    rad2 = r_ + s * s
    if rad2 <= 0:
        raise ValueError(f"degenerate sector: R + S^2 = {rad2} <= 0")
    c, r = s, math.sqrt(rad2)
    if prefer == "ab":
        return ConicSector.from_ab(c - r, c + r)
    return ConicSector.from_cr(c, r)


def frequency_response(plant: PlantModel, grid_points: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """Transfer matrix G(e^{i w}) = C (e^{i w} I - A)^{-1} B + D on [0, pi].

    Returns ``(omegas, G)`` with ``G`` of shape (grid_points, p, m).
    """
    if grid_points < 64:
        raise ValueError(f"grid_points must be >= 64, got {grid_points}")
    if plant.spectral_radius() >= 1.0:
        raise ValueError("frequency response requires a stable A (spectral radius < 1)")
    omegas = np.linspace(0.0, np.pi, grid_points)
    n, p, m = plant.n, plant.p, plant.m
    G = np.empty((grid_points, p, m), dtype=complex)
    if n == 0:
        G[:] = plant.D
        return omegas, G
    eye = np.eye(n)
    for i, w in enumerate(omegas):
        G[i] = plant.C @ np.linalg.solve(np.exp(1j * w) * eye - plant.A, plant.B) + plant.D
    return omegas, G


def freq_gain(plant: PlantModel, grid_points: int = 1024) -> float:
    """Peak gain over a uniform frequency grid on [0, pi].

    The gain at each grid point is the largest singular value of the
    transfer matrix; only the grid maximum is returned, so results refine
    as ``grid_points`` grows.
    """
    _, G = frequency_response(plant, grid_points)
    return float(max(np.linalg.svd(Gi, compute_uv=False)[0] for Gi in G))


def freq_min_real(plant: PlantModel, grid_points: int = 1024) -> float:
    """Minimum over the frequency grid of Re G(e^{i w}) for a SISO plant.

    This is the tightest lower conic intercept of the undelayed plant, used
    by the delay-free design pipeline.
    """
    if not plant.is_siso:
        raise ValueError("freq_min_real is defined for SISO plants")
    _, G = frequency_response(plant, grid_points)
    return float(G[:, 0, 0].real.min())
