"""Command-line interface: ``pointer-collapse <command> [options]``.

Every command writes its data as CSV plus a ``<command>.json`` summary that
embeds the resolved configuration, the seed, the kernel backend, the time
convention, the wall time and the headline metrics.  Files are written
atomically.

Exit codes: 0 on success, 1 when a computation fails, 2 for invalid
configuration or usage.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .bounds import DegenerateParameterError, stability_min_tau
from .config import ConfigError, RunConfig, env_overrides, load_config_file, resolve_config
from .dynamics import flow_grid
from .ensemble import (
    CalibrationRangeError,
    EnsembleStats,
    born_deviation,
    calibrate_b0,
    run_ensemble,
)
from .integrate import IntegrationError, PATH_COLUMNS, integrate_trajectory
from .io import write_csv, write_json
from .kernels import backend_name, get_backend

__all__ = ["main", "build_parser", "COMMANDS"]

METRICS = ("max_abs", "l2", "signed_mean", "folded_mean")

# (flag, key, type, help)
FLAGS = (
    ("--seed", "seed", int, "master seed (unsigned 64-bit)"),
    ("--out", "out", str, "output directory"),
    ("--trials", "trials", int, "trajectories per initial angle"),
    ("--threads", "threads", int, "worker threads"),
    ("--b0", "b0", float, "field strength B0"),
    ("--j", "j", float, "coupling J"),
    ("--n-spins", "n_spins", int, "number of spins N"),
    ("--epsilon", "epsilon", float, "non-unitary scale epsilon"),
    ("--tau-r", "tau_r", float, "noise correlation time"),
    ("--noise-mode", "noise_mode", str, "frozen | per_step | poisson_resample"),
    ("--dt", "dt", float, "time step"),
    ("--max-steps", "max_steps", int, "step cap per trajectory"),
    ("--delta-theta", "delta_theta", float, "pole-region half width"),
    ("--substeps", "substeps", int, "RK4 sub-steps per noise step (0 = automatic)"),
    ("--record-stride", "record_stride", int, "path sampling stride for simulate"),
    ("--theta0", "theta0", float, "initial polar angle for simulate"),
    ("--b0-values", "b0_values", str, "comma-separated B0 list for born-curve"),
    ("--tau-u", "tau_u", float, "survival time for stability-bound"),
    ("--backend", "backend", str, "compiled | python"),
)


def _time_convention(cfg: RunConfig) -> dict[str, Any]:
    p = cfg.model()
    return {
        "units": "hbar = %r; times in units of hbar / energy" % p.hbar,
        "collapse_rate": p.collapse_rate,
        "dimensionless_time": "t * J * N * epsilon / hbar",
        "tau_c": p.hbar / (2.0 * p.j_coupling * p.n_spins),
        "relation_ratio": "J hbar / (2 B0^2 N tau_r), tau_r in the same units as dt",
    }


def _stats_metrics(stats: EnsembleStats) -> dict[str, Any]:
    m = {name: born_deviation(stats, name) for name in METRICS}
    m["unresolved_frac"] = [float(v) for v in stats.unresolved_frac]
    m["unresolved_total"] = int(stats.unresolved.sum())
    m["mean_steps"] = [float(v) for v in stats.mean_steps]
    return m


# --- commands -------------------------------------------------------------
def cmd_flow_diagram(cfg: RunConfig) -> tuple[dict, list[str]]:
    chi = np.linspace(0.0, math.pi, cfg.chi_count) if cfg.chi_count > 1 else np.zeros(1)
    grid = flow_grid(cfg.model(), cfg.theta_count, chi)
    path = Path(cfg.out) / "flow_diagram.csv"
    write_csv(path, ("theta", "chi", "theta_dot"), grid.rows())
    sign = {repr(float(c)): int(np.sign(grid.rate[i, 1:-1]).min() == np.sign(grid.rate[i, 1:-1]).max())
            for i, c in enumerate(grid.chi)}
    return {"curves": int(grid.chi.size), "theta_samples": int(grid.theta.size), "uniform_sign": sign}, [path.name]


def cmd_simulate(cfg: RunConfig) -> tuple[dict, list[str]]:
    rec = integrate_trajectory(cfg.theta0, cfg.phi0, cfg.model(), cfg.noise(), cfg.integrator())
    files = []
    if rec.path is not None:
        path = Path(cfg.out) / "trajectory.csv"
        rec.to_csv(path)
        files.append(path.name)
    fs = rec.final_state
    metrics = {
        "outcome": rec.outcome.name,
        "hemisphere_outcome": rec.hemisphere_outcome.name,
        "steps_used": rec.steps_used,
        "final_state": {"theta": fs.theta, "phi": fs.phi, "xi": fs.xi, "log_norm": fs.log_norm},
        "columns": list(PATH_COLUMNS),
    }
    return metrics, files


def _ensemble_rows(stats: EnsembleStats, b0: float | None = None):
    for row in stats.rows():
        yield row if b0 is None else (b0, *row)


def cmd_ensemble(cfg: RunConfig) -> tuple[dict, list[str]]:
    stats = run_ensemble(cfg.grid(), cfg.trials, cfg.model(), cfg.noise(), cfg.integrator(), cfg.threads, cfg.backend)
    path = Path(cfg.out) / "ensemble.csv"
    write_csv(path, EnsembleStats.CSV_COLUMNS, _ensemble_rows(stats))
    return _stats_metrics(stats), [path.name]


def cmd_born_curve(cfg: RunConfig) -> tuple[dict, list[str]]:
    params, noise, integ = cfg.model(), cfg.noise(), cfg.integrator()
    rows, curves = [], []
    for b0 in cfg.b0_values:
        p = params.replace(b0=b0)
        stats = run_ensemble(cfg.grid(), cfg.trials, p, noise, integ, cfg.threads, cfg.backend)
        rows.extend(_ensemble_rows(stats, b0))
        m = _stats_metrics(stats)
        m["substeps"] = integ.substeps_for(p)
        curves.append({"b0": float(b0), **m})
    path = Path(cfg.out) / "born_curve.csv"
    write_csv(path, ("b0", *EnsembleStats.CSV_COLUMNS), rows)
    return {"curves": curves, "duration_per_step": cfg.dt * params.collapse_rate}, [path.name]


def cmd_calibrate(cfg: RunConfig) -> tuple[dict, list[str]]:
    res = calibrate_b0(
        cfg.model(), cfg.noise(), cfg.integrator(), cfg.trials, cfg.grid(),
        bracket=tuple(cfg.bracket) if cfg.bracket else None, rel_tol=cfg.rel_tol,
        threads=cfg.threads, backend=cfg.backend,
    )
    path = Path(cfg.out) / "calibration.csv"
    write_csv(path, ("b0", "folded_mean"), res.evaluations)
    metrics = {
        "b0_star": res.b0_star,
        "deviation": res.deviation,
        "relation_ratio": res.relation_ratio,
        "bracket": list(res.bracket),
        "tau_c": res.tau_c,
        "tau_r_over_tau_c": cfg.tau_r / res.tau_c,
        "evaluations": len(res.evaluations),
    }
    return metrics, [path.name]


def cmd_stability(cfg: RunConfig) -> tuple[dict, list[str]]:
    sb = stability_min_tau(cfg.j, cfg.n_spins, cfg.epsilon, cfg.tau_u, cfg.hbar)
    path = Path(cfg.out) / "stability_bound.csv"
    header = ("j", "n_spins", "epsilon", "tau_u", "tau_r_min", "residual")
    write_csv(path, header, [(sb.j_coupling, sb.n_spins, sb.epsilon, sb.tau_u, sb.tau_r_min, sb.residual)])
    metrics = {"tau_r_min": sb.tau_r_min, "residual": sb.residual, "iterations": sb.iterations,
               "delta_theta": sb.delta_theta}
    return metrics, [path.name]


COMMANDS: dict[str, tuple[Callable[[RunConfig], tuple[dict, list[str]]], str]] = {
    "flow-diagram": (cmd_flow_diagram, "theta-dot over (chi, theta)"),
    "simulate": (cmd_simulate, "one trajectory with an optional path dump"),
    "ensemble": (cmd_ensemble, "outcome frequencies over an initial-angle grid"),
    "born-curve": (cmd_born_curve, "outcome frequencies for a list of B0 values"),
    "calibrate": (cmd_calibrate, "B0 that reproduces Born's rule for given N, tau_r"),
    "stability-bound": (cmd_stability, "minimal correlation time for stable collapse"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file or earlier run summary")
    for flag, key, type_, help_ in FLAGS:
        common.add_argument(flag, dest=key, type=type_, default=argparse.SUPPRESS, help=help_)
    parser = argparse.ArgumentParser(prog="pointer-collapse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_fn, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return parser


def run(command: str, cfg: RunConfig) -> dict[str, Any]:
    fn = COMMANDS[command][0]
    start = time.perf_counter()
    metrics, files = fn(cfg)
    summary = {
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "backend": backend_name(get_backend(cfg.backend)),
        "time_convention": _time_convention(cfg),
        "metrics": metrics,
        "outputs": files,
        "wall_time_s": time.perf_counter() - start,
        "version": __version__,
    }
    write_json(Path(cfg.out) / f"{command.replace('-', '_')}.json", summary)
    return summary


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        file_values = load_config_file(config_path) if config_path else {}
        cfg = resolve_config(command, file_values, env_overrides(), args)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run(command, cfg)
    except (IntegrationError, CalibrationRangeError, DegenerateParameterError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{command}: wrote {', '.join(summary['outputs'] + [command.replace('-', '_') + '.json'])} to {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
