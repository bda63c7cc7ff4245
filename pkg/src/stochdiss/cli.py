"""Batch command-line front end.

Four subcommands drive the library from a JSON config:

* ``cones``     -- sector searches per (distribution, mode, builder), with
  a Nyquist overlay CSV for constant-delay frequency responses.
* ``design``    -- static-gain synthesis from the stochastic, bounded-delay
  and undelayed sector pipelines, with composed-loop verdicts.
* ``simulate``  -- closed-loop pulse-response runs for a list of gains.
* ``verify``    -- Monte-Carlo check of a supplied supply rate.

Exit codes: 0 success, 2 config or validation error, 3 verification
failure, 4 solver numerical failure.  Outputs are byte-stable for a fixed
config and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import (
    DETERMINISTIC,
    STOCHASTIC,
    max_a_then_min_b,
    min_gain,
    min_radius,
)
from .model import (
    ConicSector,
    DelayDistribution,
    PlantModel,
    SupplyRate,
    freq_min_real,
    frequency_response,
)
from .network import feedback_gain_certified, sof_max_gain
from .sim import closed_loop_simulate, mc_check_dissipativity, trajectory_to_csv
from .solver import NUMERICAL_FAILURE

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_SOLVER = 4

_MODES = ("gain", "min-radius", "max-a-min-b")
_BUILDERS = (STOCHASTIC, DETERMINISTIC)

_SCHEMA: dict[str, set[str]] = {
    "top": {
        "plant", "distribution", "distributions", "modes", "builders",
        "solver_tol", "b_cap", "seed", "horizon", "runs", "gains",
        "supply", "nyquist_points",
    },
    "plant": {"A", "B", "C", "D"},
    "distribution": {"w_m", "w_M", "pmf"},
    "supply": {"Q", "S", "R"},
}


class ConfigError(Exception):
    pass


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def load_config(path_or_name: str) -> dict:
    """Read a config from a path, or from the bundled examples by name."""
    p = Path(path_or_name)
    if p.exists():
        text = p.read_text()
    else:
        candidate = resources.files("stochdiss").joinpath(
            "configs", f"{path_or_name}.json")
        if not candidate.is_file():
            raise ConfigError(
                f"config {path_or_name!r} is neither a file nor a bundled name")
        text = candidate.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(cfg, _SCHEMA["top"], "config")
    return cfg


def _parse_plant(cfg: dict) -> PlantModel:
    if "plant" not in cfg:
        raise ConfigError("config needs a 'plant' section")
    section = cfg["plant"]
    _reject_unknown(section, _SCHEMA["plant"], "plant")
    try:
        return PlantModel(A=section.get("A", []), B=section["B"],
                          C=section["C"], D=section["D"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid plant: {exc}") from exc


def _parse_distribution(section: dict, where: str) -> DelayDistribution:
    _reject_unknown(section, _SCHEMA["distribution"], where)
    try:
        pmf_map = {int(k): float(v) for k, v in section["pmf"].items()}
        w_m = int(section.get("w_m", min(pmf_map)))
        w_M = int(section.get("w_M", max(pmf_map)))
        pmf = np.zeros(w_M - w_m + 1)
        for k, v in pmf_map.items():
            if not w_m <= k <= w_M:
                raise ValueError(f"pmf key {k} outside [{w_m}, {w_M}]")
            pmf[k - w_m] = v
        return DelayDistribution(w_m, w_M, pmf)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def _distributions(cfg: dict) -> dict[str, DelayDistribution]:
    if "distributions" in cfg:
        return {name: _parse_distribution(sec, f"distributions[{name}]")
                for name, sec in cfg["distributions"].items()}
    if "distribution" in cfg:
        return {"dist": _parse_distribution(cfg["distribution"], "distribution")}
    raise ConfigError("config needs 'distribution' or 'distributions'")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sanitize(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, (np.floating, np.integer)):
        return _sanitize(float(v))
    if isinstance(v, dict):
        return {k: _sanitize(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_sanitize(x) for x in v]
    return v


# ---------------------------------------------------------------------------
# cones

def cmd_cones(cfg: dict, out: Path, tol: float, seed: int) -> int:
    plant = _parse_plant(cfg)
    dists = _distributions(cfg)
    modes = cfg.get("modes", list(_MODES))
    builders = cfg.get("builders", list(_BUILDERS))
    b_cap = float(cfg.get("b_cap", 1e5))
    for mode in modes:
        if mode not in _MODES:
            raise ConfigError(f"unknown mode {mode!r}")
    for builder in builders:
        if builder not in _BUILDERS:
            raise ConfigError(f"unknown builder {builder!r}")

    rows = []
    failed_solver = False
    for dist_name in sorted(dists):
        dist = dists[dist_name]
        for builder in builders:
            arg = dist if builder == STOCHASTIC else (dist.w_m, dist.w_M)
            for mode in modes:
                if mode == "gain":
                    res = min_gain(plant, arg, builder, tol)
                elif mode == "min-radius":
                    res = min_radius(plant, arg, builder, tol)
                else:
                    res = max_a_then_min_b(plant, arg, builder, b_cap, tol)
                margin = min((r.margin for r in res.reports.values()),
                             default=float("nan"))
                if any(r.status == NUMERICAL_FAILURE for r in res.reports.values()):
                    failed_solver = True
                rows.append({
                    "distribution": dist_name, "builder": builder, "mode": mode,
                    "gain": res.gain, "c": res.c, "r": res.r,
                    "a": res.a, "b": res.b, "b_capped": res.b_capped,
                    "status": res.status, "margin": margin,
                })

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "cones.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["distribution", "builder", "mode", "gain", "c", "r",
                  "a", "b", "b_capped", "status", "margin"]
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[h]) if not isinstance(row[h], str)
                             else row[h] for h in header])
    _write_json(out / "cones.json", _sanitize(rows))

    _write_nyquist(plant, max(d.w_M for d in dists.values()),
                   int(cfg.get("nyquist_points", 512)), out / "nyquist.csv")

    lines = ["distribution  builder        mode          result"]
    for row in rows:
        if row["mode"] == "gain":
            result = f"gain={_fmt(row['gain'])}"
        elif row["mode"] == "min-radius":
            result = f"c={_fmt(row['c'])} r={_fmt(row['r'])}"
        else:
            result = (f"a={_fmt(row['a'])} b={_fmt(row['b'])}"
                      + (" (capped)" if row["b_capped"] else ""))
        lines.append(f"{row['distribution']:<13} {row['builder']:<14} "
                     f"{row['mode']:<13} {result}")
    (out / "cones.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_SOLVER if failed_solver else EXIT_OK


def _write_nyquist(plant: PlantModel, w_M: int, points: int, path: Path) -> None:
    omegas, G = frequency_response(plant, points)
    base = G[:, 0, 0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delay", "omega", "re", "im"])
        for w in range(0, w_M + 1):
            shifted = base * np.exp(-1j * omegas * w)
            for om, g in zip(omegas, shifted):
                writer.writerow([w, _fmt(om), _fmt(g.real), _fmt(g.imag)])


# ---------------------------------------------------------------------------
# design

def cmd_design(cfg: dict, out: Path, tol: float, seed: int) -> int:
    plant = _parse_plant(cfg)
    dists = _distributions(cfg)
    if len(dists) != 1:
        raise ConfigError("design expects exactly one distribution")
    dist = next(iter(dists.values()))
    b_cap = float(cfg.get("b_cap", 1e5))

    rows = []
    failed_solver = False
    for pipeline in ("stochastic", "deterministic", "undelayed"):
        if pipeline == "undelayed":
            a = freq_min_real(plant, 8192)
            sector = ConicSector.from_ab(a, math.inf)
            b = math.inf
            capped = True
        else:
            arg = dist if pipeline == STOCHASTIC else (dist.w_m, dist.w_M)
            res = max_a_then_min_b(plant, arg, pipeline, b_cap, tol)
            if any(r.status == NUMERICAL_FAILURE for r in res.reports.values()):
                failed_solver = True
            if not res.ok or res.sector is None:
                rows.append({"pipeline": pipeline, "status": res.status,
                             "a": None, "b": None, "K": None, "stable": None})
                continue
            sector = res.sector
            a, b, capped = res.a, res.b, res.b_capped
        K = sof_max_gain(sector, b_cap=b_cap)
        verdict = feedback_gain_certified(sector, K, b_cap=b_cap) if K > 0 else None
        rows.append({"pipeline": pipeline, "status": "ok", "a": a, "b": b,
                     "b_capped": capped, "K": K, "stable": verdict})

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "design.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["pipeline", "status", "a", "b", "b_capped", "K", "stable"]
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row.get(h)) if not isinstance(row.get(h), str)
                             else row.get(h) for h in header])
    _write_json(out / "design.json", _sanitize(rows))
    for row in rows:
        print(f"{row['pipeline']:<14} a={_fmt(row.get('a'))} "
              f"b={_fmt(row.get('b'))} K={_fmt(row.get('K'))} "
              f"stable={row.get('stable')}")
    return EXIT_SOLVER if failed_solver else EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(cfg: dict, out: Path, tol: float, seed: int) -> int:
    plant = _parse_plant(cfg)
    dists = _distributions(cfg)
    if len(dists) != 1:
        raise ConfigError("simulate expects exactly one distribution")
    dist = next(iter(dists.values()))
    gains = cfg.get("gains", [0.0])
    T = int(cfg.get("horizon", 50))
    out.mkdir(parents=True, exist_ok=True)

    summary = []
    for K in gains:
        run = closed_loop_simulate(plant, float(K), dist, T=T, seed=seed)
        tag = _fmt(float(K)).replace(".", "p").replace("-", "m")
        trajectory_to_csv(run.trajectory, out / f"traj_K{tag}.csv")
        y = np.abs(run.trajectory.y[:, 0])
        half = max(1, (T + 1) // 2)
        early = float(y[:half].max())
        late = float(y.max())
        diverged = late >= 10.0 * max(early, 1e-12) and late > 1.0
        settled = bool((y[min(40, T):] < 0.01).all()) if T >= 40 else None
        summary.append({
            "K": float(K), "peak": float(y.max()),
            "early_peak": early, "late_peak": late,
            "diverged": bool(diverged), "settled": settled,
            "trajectory_csv": f"traj_K{tag}.csv",
        })
    _write_json(out / "simulate.json", _sanitize(summary))
    for row in summary:
        print(f"K={_fmt(row['K'])}: peak={_fmt(row['peak'])} "
              f"diverged={row['diverged']} settled={row['settled']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def cmd_verify(cfg: dict, out: Path, tol: float, seed: int, runs: int) -> int:
    plant = _parse_plant(cfg)
    dists = _distributions(cfg)
    if len(dists) != 1:
        raise ConfigError("verify expects exactly one distribution")
    dist = next(iter(dists.values()))
    if "supply" not in cfg:
        raise ConfigError("verify needs a 'supply' section (Q, S, R scalars)")
    section = cfg["supply"]
    _reject_unknown(section, _SCHEMA["supply"], "supply")
    try:
        qsr = SupplyRate(Q=[[float(section["Q"])]], S=[[float(section["S"])]],
                         R=[[float(section["R"])]])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid supply: {exc}") from exc

    T = int(cfg.get("horizon", 200))
    report = mc_check_dissipativity(plant, dist, qsr, T=T, runs=runs, seed=seed)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "beta_hat": report.beta_hat, "passed": report.passed,
        "worst_input": report.worst_input, "worst_step": report.worst_step,
        "worst_mean": report.worst_mean, "worst_se": report.worst_se,
        "per_input": {k: {"min_mean": v[0], "step": v[1], "se": v[2]}
                      for k, v in report.per_input.items()},
    }
    _write_json(out / "verify.json", _sanitize(payload))
    if not report.passed:
        from .sim import make_input_bank
        bank = make_input_bank(plant, T, seed=seed + 1)
        witness = bank[report.worst_input]
        with open(out / "witness.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "u"])
            for k, u in enumerate(np.asarray(witness).ravel()):
                writer.writerow([k, _fmt(u)])
        print(f"FAIL: averaged running supply dips to {report.worst_mean:.6g} "
              f"(beta_hat {report.beta_hat:.6g}) under input "
              f"{report.worst_input!r}; witness at {out / 'witness.csv'}")
        return EXIT_VERIFY
    print(f"PASS: minimum averaged running supply {report.worst_mean:.6g} "
          f">= beta_hat {report.beta_hat:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochdiss",
        description="Certify and validate dissipativity of input-delayed systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("cones", "design", "simulate", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="path to a JSON config, or a bundled config name")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--runs", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        tol = args.tol if args.tol is not None else float(cfg.get("solver_tol", 1e-8))
        runs = args.runs if args.runs is not None else int(cfg.get("runs", 1000))
        out = Path(args.out)
        if args.command == "cones":
            return cmd_cones(cfg, out, tol, seed)
        if args.command == "design":
            return cmd_design(cfg, out, tol, seed)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, tol, seed)
        return cmd_verify(cfg, out, tol, seed, runs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # malformed inputs must not produce tracebacks
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
