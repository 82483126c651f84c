"""Command-line entry point.

    decosieve <subcommand> --config <path> [--out <dir>]

Subcommands: kernels | coeffs | evolve | rates | sieve | oracle. Each one
reads a dotted-key config file, writes its data product as CSV (17
significant digits, no timestamps), echoes the fully resolved
configuration, and finishes with a manifest recording diagnostics, the
active backend and wall time. On failure nothing is left behind: partial
outputs are removed, and the exit code tells the class of failure apart
(2 config, 3 truncation/abort, 4 quadrature, 5 degeneracy).

Output directory precedence: --out flag, then the DECOSIEVE_OUT
environment variable, then the config's output.dir. The environment can
override nothing else.
"""

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .. import backend
from ..bath import BathModel, build_kernel_table, flatness, kernel_csv, kernels_at_zero
from ..coeffs import build_coefficients, coefficient_csv
from ..errors import ConfigError, DegeneracyError, QuadratureError, TruncationError
from ..hilbert import SystemParams, build_operators, coherent_state, number_state, superposition_state
from ..oracle import JointModel, Mode, perturbative_scaling_check, scaling_csv
from ..sieve import StateFamily, run_sieve, sieve_csv
from ..solvers import (
    build_channel_set,
    evolve_channels,
    evolve_qbm,
    evolve_secular,
    rates_csv,
    secular_rates,
    trajectory_csv,
)
from . import config as cfgmod
from .plots import emit_plot

_PLOT_SOURCES = {
    "coefficient_traces": "coeffs",
    "offdiag_decay": "evolve",
    "entropy_curves": "sieve",
}


class _RunDir:
    """Tracks written files so a failed run can sweep them away."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written = []

    def write_text(self, name, text):
        path = self.root / name
        path.write_text(text, encoding="utf-8")
        self.written.append(path)
        return path

    def cleanup(self):
        for path in reversed(self.written):
            try:
                path.unlink()
            except OSError:
                pass


def _params(cfg):
    return SystemParams(cfg["system.m"], cfg["system.omega"], cfg["system.d"])


def _bath(cfg):
    return BathModel(
        cutoff=cfg["bath.cutoff"],
        dim=cfg["bath.dim"],
        window=cfg["bath.window"],
        k_max=cfg["bath.k_max"],
        n_k=cfg["bath.n_k"],
        temperature=cfg["bath.temperature"],
        field_mass=cfg["bath.field_mass"],
        e2=cfg["bath.e2"],
    )


def _knot_grid(cfg):
    """dt/2 lattice covering the kernel horizon: RK4 stage times land
    exactly on knots, so coefficient interpolation is exact."""
    dt = cfg["solver.dt"]
    horizon = cfg["kernels.t_max"]
    n = int(np.ceil(horizon / dt - 1e-9))
    return np.linspace(0.0, n * dt, 2 * n + 1)


def _initial_state(cfg, d):
    kind = cfg["state.kind"]
    if kind == "number":
        return number_state(cfg["state.n"], d)
    if kind == "coherent":
        return coherent_state(complex(cfg["state.alpha_re"], cfg["state.alpha_im"]), d)
    pair = cfg["state.pair"][0] if cfg["state.pair"] else (0, 1)
    return superposition_state(pair[0], pair[1], d, cfg["state.phase"])


def _maybe_plot(cfg, rundir, command, csv_path):
    kind = cfg["output.plot"]
    if not kind:
        return None
    if _PLOT_SOURCES[kind] != command:
        raise ConfigError(
            f"output.plot = {kind} belongs to the '{_PLOT_SOURCES[kind]}' "
            f"subcommand, not '{command}'"
        )
    out = rundir.root / "plot.svg"
    emit_plot(kind, csv_path, out)
    rundir.written.append(out)
    return out


def _run_kernels(cfg, rundir):
    model = _bath(cfg)
    table = build_kernel_table(model, _knot_grid(cfg))
    rundir.write_text("kernels.csv", kernel_csv(table))
    params = _params(cfg)
    horizon = min(params.period, float(table.t[-1]))
    return {
        "n_nodes": table.n_nodes,
        "F_H_0": f"{table.f_h[0]:.17g}",
        "flatness_one_period": f"{flatness(table, horizon):.6g}",
    }


def _run_coeffs(cfg, rundir):
    model = _bath(cfg)
    params = _params(cfg)
    table = build_kernel_table(model, _knot_grid(cfg))
    coeff = build_coefficients(table, params)
    path = rundir.write_text("coefficients.csv", coefficient_csv(coeff))
    _maybe_plot(cfg, rundir, "coeffs", path)
    return {
        "t_max": f"{coeff.t_max:.17g}",
        "max_abs_D": f"{np.max(np.abs(coeff.D)):.6g}",
        "provenance": coeff.provenance,
    }


def _evolve_once(cfg, rho0, t_max):
    params = _params(cfg)
    ops = build_operators(params)
    engine = cfg["solver.engine"]
    dt = cfg["solver.dt"]
    stride = cfg["solver.snapshot_stride"]
    coarse = cfg["solver.allow_coarse_step"]
    if engine == "channels":
        channels = build_channel_set(_bath(cfg), ops)
        return evolve_channels(rho0, channels, params, t_max, dt, stride, coarse)
    if engine == "qbm":
        kern = build_kernel_table(_bath(cfg), _knot_grid(cfg))
        table = build_coefficients(kern, params)
        return evolve_qbm(rho0, table, ops, t_max, dt, stride, coarse,
                          cfg["solver.anomalous_sign"])
    channels = build_channel_set(_bath(cfg), ops)
    rates = secular_rates(channels, ops)
    return evolve_secular(rho0, rates, ops, t_max, dt, stride,
                          cfg["solver.include_cross"], cfg["solver.b_reading"])


def _run_evolve(cfg, rundir):
    t_max = cfg["solver.t_max"]
    rho0 = _initial_state(cfg, cfg["system.d"])
    traj = _evolve_once(cfg, rho0, t_max)
    path = rundir.write_text("trajectory.csv",
                             trajectory_csv(traj, cfg["solver.elements"]))
    _maybe_plot(cfg, rundir, "evolve", path)
    return {
        "engine": traj.engine,
        "snapshots": traj.t.size,
        "final_entropy": f"{traj.entropy[-1]:.17g}",
        "max_trace_err": f"{traj.trace_err.max():.6g}",
        "max_top_occ": f"{traj.top_occ.max():.6g}",
        "min_eigenvalue": f"{traj.min_eigenvalue():.6g}",
    }


def _run_rates(cfg, rundir):
    params = _params(cfg)
    ops = build_operators(params)
    channels = build_channel_set(_bath(cfg), ops)
    rates = secular_rates(channels, ops)
    rundir.write_text("rates.csv", rates_csv(rates))
    return {
        "max_gamma_sq": f"{rates.gamma_sq.max():.17g}",
        "averaging_period": f"{rates.averaging_period:.17g}",
    }


def _run_sieve(cfg, rundir):
    d = cfg["system.d"]
    kind = cfg["sieve.kind"]
    fam_params = {
        "number_states": {"n_max": cfg["family.n_max"]},
        "coherent_grid": {"amps": cfg["family.amps"], "phases": cfg["family.phases"]},
        "two_state_superpositions": {"pairs": cfg["family.pairs"],
                                     "phases": cfg["family.phases"]},
        "squeezed_grid": {"rs": cfg["family.rs"], "thetas": cfg["family.thetas"]},
    }[kind]
    family = StateFamily(kind, d, fam_params)
    checkpoints = np.asarray(cfg["sieve.checkpoints"], dtype=float)
    dt = cfg["solver.dt"]
    idx = np.round(checkpoints / dt).astype(int)
    if np.max(np.abs(idx * dt - checkpoints)) > 1e-9:
        raise ConfigError("sieve.checkpoints must sit on the solver.dt lattice")
    t_max = float(idx.max() * dt)

    def engine(rho0, cps):
        traj = _evolve_once(cfg, rho0, t_max)
        return [traj.states[i] for i in idx]

    result = run_sieve(family, engine, checkpoints, cfg["sieve.measure"])
    path = rundir.write_text("ranking.csv", sieve_csv(result))
    _maybe_plot(cfg, rundir, "sieve", path)
    ranked = result.ranked
    return {
        "candidates": len(result.records),
        "excluded": len(result.excluded),
        "winner": ranked[0].label,
        "winner_score": f"{ranked[0].score:.17g}",
        "non_robust": str(result.non_robust).lower(),
        "degenerate": str(result.degenerate).lower(),
    }


def _run_oracle(cfg, rundir):
    omegas = cfg["oracle.mode_omegas"]
    coups = cfg["oracle.mode_couplings"]
    levels = cfg["oracle.mode_levels"]
    waves = cfg["oracle.wavenumbers"] or (0.0,) * len(omegas)
    if not (len(omegas) == len(coups) == len(levels) == len(waves)):
        raise ConfigError(
            "oracle.mode_omegas, mode_couplings, mode_levels (and wavenumbers "
            "if given) must have the same length"
        )
    modes = tuple(Mode(om, c, lv, w) for om, c, lv, w in
                  zip(omegas, coups, levels, waves))
    joint = JointModel(cfg["oracle.d_s"], modes, cfg["oracle.form"])
    params = SystemParams(cfg["system.m"], cfg["system.omega"], cfg["oracle.d_s"])
    rho0 = _initial_state(cfg, cfg["oracle.d_s"])
    temp = cfg["oracle.bath_temperature"]
    bath_state = "vacuum" if temp == 0 else ("fock_ensemble", temp)
    report = perturbative_scaling_check(
        joint, params, rho0, cfg["oracle.t_star"], dt=cfg["solver.dt"],
        multipliers=cfg["oracle.multipliers"], bath_state=bath_state,
    )
    rundir.write_text("scaling.csv", scaling_csv(report))
    return {
        "joint_dim": joint.dim,
        "deltas": ",".join(f"{x:.6g}" for x in report.deltas),
        "ratios": ",".join(f"{x:.6g}" for x in report.ratios),
        "monotone": str(report.monotone).lower(),
    }


_RUNNERS = {
    "kernels": _run_kernels,
    "coeffs": _run_coeffs,
    "evolve": _run_evolve,
    "rates": _run_rates,
    "sieve": _run_sieve,
    "oracle": _run_oracle,
}


def _manifest(command, cfg, diagnostics, wall):
    lines = [f"command = {command}", f"backend = {backend.BACKEND}",
             f"wall_time_s = {wall:.3f}"]
    for key, value in diagnostics.items():
        lines.append(f"{key} = {value}")
    lines.append("")
    lines.append("[resolved configuration]")
    lines.append(cfg.echo().rstrip("\n"))
    return "\n".join(lines) + "\n"


def run(command, config_path, out_dir=None):
    """Execute one subcommand; returns the output directory Path."""
    cfg = cfgmod.load(config_path, command)
    out = out_dir or os.environ.get("DECOSIEVE_OUT") or cfg["output.dir"]
    rundir = _RunDir(out)
    try:
        rundir.write_text("resolved.cfg", cfg.echo())
        start = time.perf_counter()
        diagnostics = _RUNNERS[command](cfg, rundir)
        wall = time.perf_counter() - start
        rundir.write_text("manifest.txt", _manifest(command, cfg, diagnostics, wall))
    except BaseException:
        rundir.cleanup()
        raise
    return rundir.root


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="decosieve",
        description="Open-oscillator decoherence lab: kernels, coefficients, "
                    "master-equation runs, secular rates, the predictability "
                    "sieve, and exact-reference scaling checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="dotted-key config file")
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        out = run(args.command, args.config, args.out)
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return 2
    except TruncationError as exc:
        print(f"error (truncation): {exc}", file=sys.stderr)
        return 3
    except QuadratureError as exc:
        print(f"error (quadrature): {exc}", file=sys.stderr)
        return 4
    except DegeneracyError as exc:
        print(f"error (degeneracy): {exc}", file=sys.stderr)
        return 5
    except (ValueError, OSError) as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
