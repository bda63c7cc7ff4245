"""Trajectory simulation, supply accounting, and Monte-Carlo validation.

The recursion is ``x(k+1) = A x(k) + B u(k - w_k)``,
``y(k) = C x(k) + D u(k - w_k)`` with zero input pre-history
(``u(k) = 0`` for k < 0) and per-step delays that are either sampled
i.i.d. from a :class:`~stochdiss.model.DelayDistribution` or supplied
explicitly.  The explicit path accepts delays down to zero, which the
certified class excludes but the gain counterexamples need.

Monte-Carlo validation averages running supply sums over delay draws; a
certificate fails only when the averaged sum dips significantly (99%
normal band) below the tolerance floor, never on single realizations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import DelayDistribution, PlantModel, SupplyRate, frequency_response

__all__ = [
    "Trajectory",
    "SupplyLedger",
    "McCheckReport",
    "ClosedLoopRun",
    "simulate",
    "supply_ledger",
    "mc_check_dissipativity",
    "closed_loop_simulate",
    "make_input_bank",
    "three_step_square_wave",
    "trajectory_to_csv",
]

DEFAULT_BETA_TOL_PER_STEP = 1e-6
_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class Trajectory:
    """Simulated sequences on k = 0..T plus the convention record."""

    u: np.ndarray          # (T+1, m)
    x: np.ndarray          # (T+1, n)
    y: np.ndarray          # (T+1, p)
    w: np.ndarray          # (T+1,) delay applied at each step
    seed: int | None = None
    pre_history: str = "zero"

    @property
    def T(self) -> int:
        return self.u.shape[0] - 1

    def delayed_input(self, k: int) -> np.ndarray:
        j = k - int(self.w[k])
        if j < 0:
            return np.zeros(self.u.shape[1])
        return self.u[j]


@dataclass(frozen=True)
class SupplyLedger:
    """Per-step supply values and their running sums for one trajectory."""

    supply: np.ndarray       # (T+1,)
    running: np.ndarray      # (T+1,)
    minimum: float


@dataclass(frozen=True)
class McCheckReport:
    beta_hat: float
    passed: bool
    worst_input: str
    worst_step: int
    worst_mean: float
    worst_se: float
    per_input: dict[str, tuple[float, int, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class ClosedLoopRun:
    trajectory: Trajectory
    controller_output: np.ndarray   # (T+1,)
    disturbance: np.ndarray         # (T+1,)
    gain: float


def _draw_delays(dist: DelayDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(dist.support, size=count, p=dist.pmf).astype(np.int64)


def simulate(plant: PlantModel, delays, inputs: np.ndarray,
             x0: np.ndarray | None = None, T: int | None = None,
             seed: int | None = None,
             bounds: tuple[int, int] | None = None) -> Trajectory:
    """Run the delayed recursion for ``T`` steps.

    ``delays`` is a :class:`DelayDistribution` (sampled with ``seed``) or
    an explicit integer sequence of length T+1.  Explicit sequences may
    contain zero delays; when ``bounds`` is given they are validated
    against it instead.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    if T is None:
        T = inputs.shape[0] - 1
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if inputs.shape[0] < T + 1:
        raise ValueError(f"input must cover [0, T] = [0, {T}]")
    inputs = inputs[:T + 1]
    if inputs.shape[1] != plant.m:
        raise ValueError(f"input has {inputs.shape[1]} channels, plant has {plant.m}")

    if isinstance(delays, DelayDistribution):
        rng = np.random.default_rng(seed)
        w = _draw_delays(delays, T + 1, rng)
    else:
        w = np.asarray(delays, dtype=np.int64).ravel()
        if w.shape[0] < T + 1:
            raise ValueError(f"explicit delay sequence must cover [0, T] = [0, {T}]")
        w = w[:T + 1]
        if np.any(w < 0):
            raise ValueError("delays must be nonnegative")
        if bounds is not None:
            lo, hi = bounds
            if np.any(w < lo) or np.any(w > hi):
                raise ValueError(f"explicit delays leave the range [{lo}, {hi}]")

    if x0 is None:
        x0 = np.zeros(plant.n)
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape[0] != plant.n:
        raise ValueError(f"x0 must have {plant.n} entries")

    x, y = _kernels.sim_recursion(plant.A, plant.B, plant.C, plant.D,
                                  inputs, w, x0)
    return Trajectory(u=inputs, x=x, y=y, w=w, seed=seed)


def supply_ledger(traj: Trajectory, qsr: SupplyRate) -> SupplyLedger:
    """Evaluate s(k) = y'Qy + 2 y'Su + u'Ru along a trajectory."""
    steps = traj.T + 1
    s = np.zeros(steps)
    for k in range(steps):
        s[k] = qsr.evaluate(traj.y[k], traj.u[k])
    running = np.cumsum(s)
    return SupplyLedger(supply=s, running=running, minimum=float(running.min()))


def three_step_square_wave(T: int, amplitude: float = 10.0) -> np.ndarray:
    """Pulse of the given amplitude over the first three steps."""
    d = np.zeros(T + 1)
    d[:3] = amplitude
    return d


def worst_frequency(plant: PlantModel, grid_points: int = 1024) -> float:
    """Frequency of peak gain on the uniform grid (SISO)."""
    omegas, G = frequency_response(plant, grid_points)
    mags = np.abs(G[:, 0, 0])
    return float(omegas[int(np.argmax(mags))])


def make_input_bank(plant: PlantModel, T: int, seed: int = 0,
                    gaussian_count: int = 3) -> dict[str, np.ndarray]:
    """Standard probe inputs: Gaussian noise, peak-gain sinusoid, square wave."""
    if not plant.is_siso:
        raise ValueError("the default input bank is built for SISO plants")
    bank: dict[str, np.ndarray] = {}
    seqs = np.random.SeedSequence(seed).spawn(gaussian_count)
    for i, sq in enumerate(seqs):
        rng = np.random.default_rng(sq)
        bank[f"gaussian_{i}"] = rng.standard_normal(T + 1)
    try:
        w_star = worst_frequency(plant)
    except ValueError:
        w_star = math.pi / 4.0  # unstable/memoryless: any probe tone will do
    ks = np.arange(T + 1, dtype=float)
    bank["sine_worst"] = np.sin(w_star * ks) if w_star > 0 else np.ones(T + 1)
    period = max(2, T // 5)
    bank["square"] = np.where((ks // period) % 2 == 0, 1.0, -1.0)
    return bank


def mc_check_dissipativity(plant: PlantModel, dist: DelayDistribution,
                           qsr: SupplyRate, input_bank: dict[str, np.ndarray] | None = None,
                           T: int = 200, runs: int = 1000, seed: int = 0,
                           beta_tol_per_step: float = DEFAULT_BETA_TOL_PER_STEP) -> McCheckReport:
    """Monte-Carlo check of the averaged supply-sum lower bound.

    For every input the running supply sums are averaged over ``runs``
    i.i.d. delay realizations; the certificate passes unless the averaged
    sum at some step sits below ``beta_hat = -beta_tol_per_step * T`` by
    more than the 99% confidence band.  Initial conditions are zero, so no
    stored-energy offset enters ``beta_hat``.
    """
    if runs < 100:
        raise ValueError(f"runs must be >= 100, got {runs}")
    if input_bank is None:
        input_bank = make_input_bank(plant, T, seed=seed + 1)
    beta_hat = -beta_tol_per_step * T

    root = np.random.SeedSequence(seed)
    children = root.spawn(len(input_bank))
    per_input: dict[str, tuple[float, int, float]] = {}
    worst = (math.inf, "", -1, 0.0)  # mean, name, step, se
    for sq, (name, u) in zip(children, sorted(input_bank.items())):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if u.shape[0] < T + 1:
            raise ValueError(f"input {name!r} must cover [0, T]")
        u = u[:T + 1]
        rng = np.random.default_rng(sq)
        W = _draw_delays(dist, runs * (T + 1), rng).reshape(runs, T + 1)
        running = _kernels.mc_running_supply(
            plant.A, plant.B, plant.C, plant.D,
            qsr.Q, qsr.S, qsr.R, u, W)
        mean = running.mean(axis=0)
        se = running.std(axis=0, ddof=1) / math.sqrt(runs)
        k_min = int(np.argmin(mean))
        per_input[name] = (float(mean[k_min]), k_min, float(se[k_min]))
        if mean[k_min] < worst[0]:
            worst = (float(mean[k_min]), name, k_min, float(se[k_min]))

    passed = worst[0] + _Z99 * worst[3] >= beta_hat
    return McCheckReport(beta_hat=beta_hat, passed=bool(passed),
                         worst_input=worst[1], worst_step=worst[2],
                         worst_mean=worst[0], worst_se=worst[3],
                         per_input=per_input)


def closed_loop_simulate(plant: PlantModel, K: float, dist: DelayDistribution,
                         T: int = 50, seed: int = 0,
                         disturbance: np.ndarray | None = None,
                         explicit_delays: np.ndarray | None = None) -> ClosedLoopRun:
    """Static-output-feedback loop under the three-step pulse disturbance.

    The disturbance feeds both paths: the controller sees ``y + d`` and the
    plant input is ``u = d - K (y + d)``.  ``explicit_delays`` overrides
    the sampled delay sequence (still validated against the distribution's
    range).
    """
    if not plant.is_siso:
        raise ValueError("closed-loop runs are SISO")
    if disturbance is None:
        disturbance = three_step_square_wave(T)
    d = np.asarray(disturbance, dtype=float).ravel()
    if d.shape[0] < T + 1:
        raise ValueError("disturbance must cover [0, T]")
    d = d[:T + 1]
    if explicit_delays is not None:
        w = np.asarray(explicit_delays, dtype=np.int64).ravel()[:T + 1]
        if np.any(w < dist.w_m) or np.any(w > dist.w_M):
            raise ValueError(
                f"explicit delays leave the range [{dist.w_m}, {dist.w_M}]")
    else:
        rng = np.random.default_rng(seed)
        w = _draw_delays(dist, T + 1, rng)

    x, y, u, yc = _kernels.closed_loop_recursion(
        plant.A, plant.B, plant.C, float(K), d, w, T)
    traj = Trajectory(u=u[:, None], x=x, y=y[:, None], w=w, seed=seed)
    return ClosedLoopRun(trajectory=traj, controller_output=yc,
                         disturbance=d, gain=float(K))


def trajectory_to_csv(traj: Trajectory, path, qsr: SupplyRate | None = None) -> None:
    """Write columns k, u, w, x_1..x_n, y, supply, running_sum."""
    n = traj.x.shape[1]
    if qsr is not None:
        ledger = supply_ledger(traj, qsr)
        supply, running = ledger.supply, ledger.running
    else:
        supply = np.zeros(traj.T + 1)
        running = np.zeros(traj.T + 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "u", "w"] + [f"x_{i + 1}" for i in range(n)]
                        + ["y", "supply", "running_sum"])
        for k in range(traj.T + 1):
            row = [k, _fmt(traj.u[k, 0]), int(traj.w[k])]
            row += [_fmt(v) for v in traj.x[k]]
            row += [_fmt(traj.y[k, 0]), _fmt(supply[k]), _fmt(running[k])]
            writer.writerow(row)


def _fmt(v: float) -> str:
    return format(float(v), ".12g")
