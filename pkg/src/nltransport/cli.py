"""Unified command-line entry point.

Exit codes: 0 success, 2 config error, 3 numerical failure (admissibility
loss / step rejection / failing verification), 4 IO error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, RunConfig, parse_config, rho0_params_from
from .errors import NumericalError
from .experiments import (
    CONVERGENCE_CASES,
    ContinuitySweepConfig,
    continuity_sweep,
    convergence_study,
    lemma_suite,
)
from .fields import compute_norm_report, lattice_field
from .flow import build_marker_lattice, simulate
from .kernels import (
    builtin_kernel_names,
    check_spherical_mean_zero,
    dirac_correction,
    get_kernel,
    homogeneity_residual,
)
from .outputs import OutputWriter, norm_report_payload, read_field_csv
from .presets import make_profile, profile_from_samples
from .singular import PVConfig, estimate_sio_constants
from .summation import set_worker_count


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlt",
        description="Lagrangian simulation and verification harness for "
        "non-local transport equations rho_t + v . grad rho = 0, v = k * rho",
    )
    parser.add_argument("--version", action="version", version=f"nlt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[],
            metavar="SECTION.KEY=VALUE", help="override a config value",
        )
        p.add_argument("--output-dir", default=None, help="overrides run.output_dir")
        if cmd == "norms":
            p.add_argument("--input", default=None, help="field CSV (columns x_1..x_n, value)")
            p.add_argument("--gamma", default=None, help="Holder exponent in (0, 1)")
            p.add_argument("--pair-budget", default=None, help="all-pairs point threshold")
            p.add_argument("--h-levels", default=None, help="comma-separated modulus levels")
    args = parser.parse_args(argv)

    overrides = list(args.overrides)
    if args.command == "norms":
        for flag, key in (
            ("input", "norms.input_csv"), ("gamma", "norms.gamma"),
            ("pair_budget", "norms.pair_budget"), ("h_levels", "norms.h_levels"),
        ):
            val = getattr(args, flag)
            if val is not None:
                overrides.append(f"{key}={val}")

    try:
        cfg = parse_config(args.command, args.config, overrides)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2

    workers = cfg["run"]["worker_count"]
    env_workers = os.environ.get("NLT_WORKERS", "")
    if env_workers:
        try:
            workers = int(env_workers)
        except ValueError:
            print(f"NLT_WORKERS must be an integer, got {env_workers!r}", file=sys.stderr)
            return 2
    set_worker_count(workers if workers > 0 else (os.cpu_count() or 1))

    out_dir = args.output_dir or cfg["run"]["output_dir"]
    writer = OutputWriter(out_dir, args.command, cfg.flat())
    try:
        return _dispatch(args.command, cfg, writer)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        writer.abort()
        print(f"io failure: {exc}", file=sys.stderr)
        return 4


def _profile(cfg: RunConfig):
    name, params = rho0_params_from(cfg)
    n = cfg["lattice"]["n"]
    if name == "custom-csv":
        path = cfg["rho0"]["csv"]
        if not path:
            raise ConfigError(["rho0.csv is required for preset custom-csv"])
        samples = read_field_csv(path)
        return profile_from_samples(samples.points, samples.values, n)
    return make_profile(name, n, **params)


def _dispatch(command: str, cfg: RunConfig, writer: OutputWriter) -> int:
    if command == "simulate":
        return _cmd_simulate(cfg, writer)
    if command == "continuity":
        return _cmd_continuity(cfg, writer)
    if command == "convergence":
        return _cmd_convergence(cfg, writer)
    if command == "norms":
        return _cmd_norms(cfg, writer)
    if command == "validate-kernels":
        return _cmd_validate_kernels(cfg, writer)
    if command == "validate-sio":
        return _cmd_validate_sio(cfg, writer)
    return _cmd_lemmas(cfg, writer)


def _cmd_simulate(cfg: RunConfig, writer: OutputWriter) -> int:
    lattice = build_marker_lattice(
        _profile(cfg), cfg["lattice"]["half_width"], cfg["lattice"]["h"],
        cfg["lattice"]["gamma"], n=cfg["lattice"]["n"],
    )
    kernel = get_kernel(cfg["kernel"]["name"], cfg["kernel"]["sign"])
    checkpoints = tuple(cfg["flow"]["checkpoint_times"]) or (cfg["time"]["T"],)
    rec = simulate(
        lattice,
        kernel,
        dt=cfg["time"]["dt"],
        T=cfg["time"]["T"],
        integrator=cfg["time"]["integrator"],
        checkpoint_times=checkpoints,
        delta=cfg["flow"]["delta"],
        rule=cfg["flow"]["singular_rule"],
        store_velocities=cfg["flow"]["store_velocities"],
        picard_tol=cfg["time"]["picard_tol"],
        picard_max_iter=cfg["time"]["picard_max_iter"],
    )
    n = lattice.n
    idx_cols = [f"i{m + 1}" for m in range(n)]
    x_cols = [f"x{m + 1}" for m in range(n)]
    rows = []
    indices = np.stack(np.unravel_index(np.arange(lattice.count), lattice.shape), axis=1)
    for snap in rec.snapshots:
        for m in range(lattice.count):
            rows.append(
                (snap.step, snap.time, *indices[m], *snap.X[m], lattice.rho0[m], snap.detDX[m])
            )
    writer.csv("markers.csv", "markers", ["step", "t", *idx_cols, *x_cols, "rho0", "detdx"], rows)
    writer.csv(
        "monitors.csv",
        "monitors",
        ["t", "min_detdx", "phi_norm", "max_speed"],
        zip(rec.times, rec.min_det, rec.phi_norm, rec.max_speed),
    )
    writer.json(
        "metadata.json",
        {
            "config": cfg.flat(),
            "version": __version__,
            "halt_reason": rec.halt_reason,
            "n_steps": rec.n_steps,
            "marker_count": lattice.count,
            "final_time": rec.final_state.t,
            "checkpoint_steps": [s.step for s in rec.snapshots],
        },
    )
    writer.finalize(halt_reason=rec.halt_reason)
    print(f"simulate: {rec.halt_reason} at t={rec.final_state.t:.6g} -> {writer.output_dir}")
    return 0 if rec.halt_reason == "completed" else 3


def _sweep_config(cfg: RunConfig) -> ContinuitySweepConfig:
    name, params = rho0_params_from(cfg)
    return ContinuitySweepConfig(
        kernel_name=cfg["kernel"]["name"],
        kernel_sign=cfg["kernel"]["sign"],
        n=cfg["lattice"]["n"],
        gamma=cfg["lattice"]["gamma"],
        spacing=cfg["lattice"]["h"],
        half_width=cfg["lattice"]["half_width"],
        rho0_name=name,
        rho0_params=params,
        perturbation_center=tuple(cfg["sweep"]["perturbation_center"]),
        perturbation_width=cfg["sweep"]["perturbation_width"],
        perturbation_amplitude=cfg["sweep"]["perturbation_amplitude"],
        epsilons=tuple(cfg["sweep"]["epsilons"]),
        norm_kind=cfg["sweep"]["norm_kind"],
        dt=cfg["time"]["dt"],
        T=cfg["time"]["T"],
        integrator=cfg["time"]["integrator"],
        delta=cfg["flow"]["delta"],
        rule=cfg["flow"]["singular_rule"],
        checkpoint_times=tuple(cfg["flow"]["checkpoint_times"]) or (cfg["time"]["T"],),
        eval_half_width=cfg["sweep"]["eval_half_width"],
        eval_points_per_axis=cfg["sweep"]["eval_points"],
        seed=cfg["run"]["seed"],
    )


def _cmd_continuity(cfg: RunConfig, writer: OutputWriter) -> int:
    res = continuity_sweep(_sweep_config(cfg))
    writer.csv(
        "sweep.csv",
        "sweep",
        ["epsilon", "input_distance", "output_distance", "flow_distance", "admissible_to_T"],
        (
            (r.epsilon, r.input_distance, r.output_distance, r.flow_distance, r.admissible_to_T)
            for r in res.rows
        ),
    )
    writer.json(
        "fit.json",
        {
            "beta": res.beta,
            "r_squared": res.r_squared,
            "spearman": res.spearman,
            "norm_kind": res.norm_kind,
        },
    )
    writer.json("metadata.json", {"config": cfg.flat(), "version": __version__})
    writer.finalize()
    print(
        f"continuity ({res.norm_kind}): beta={res.beta:.4f} r2={res.r_squared:.4f} "
        f"spearman={res.spearman:.3f} -> {writer.output_dir}"
    )
    return 0


def _cmd_convergence(cfg: RunConfig, writer: OutputWriter) -> int:
    case = cfg["convergence"]["case"]
    if case not in CONVERGENCE_CASES:
        print(f"unknown convergence case {case!r} (choose from {CONVERGENCE_CASES})", file=sys.stderr)
        return 2
    rep = convergence_study(
        case,
        h_list=tuple(cfg["convergence"]["h_list"]),
        dt_list=tuple(cfg["convergence"]["dt_list"]),
        T=cfg["time"]["T"],
        dt=cfg["time"]["dt"],
    )
    writer.csv(
        "orders.csv",
        "orders",
        ["case", "h", "dt", "error", "rate"],
        ((r["case"], r["h"], r["dt"], r["error"], r.get("rate", "")) for r in rep.rows),
    )
    writer.json(
        "metadata.json",
        {
            "config": cfg.flat(),
            "version": __version__,
            "spatial_order": rep.spatial_order,
            "temporal_order": rep.temporal_order,
            "rate_error": rep.rate_error,
            "monotone": rep.monotone,
        },
    )
    writer.finalize()
    print(
        f"convergence {case}: spatial={rep.spatial_order} temporal={rep.temporal_order} "
        f"monotone={rep.monotone} -> {writer.output_dir}"
    )
    return 0 if rep.passed else 3


def _cmd_norms(cfg: RunConfig, writer: OutputWriter) -> int:
    path = cfg["norms"]["input_csv"]
    if not path:
        print("norms.input_csv is required", file=sys.stderr)
        return 2
    try:
        field = read_field_csv(path)
    except FileNotFoundError:
        print(f"input CSV not found: {path}", file=sys.stderr)
        return 4
    levels = list(cfg["norms"]["h_levels"]) or None
    rep = compute_norm_report(
        field, cfg["norms"]["gamma"], pair_budget=cfg["norms"]["pair_budget"], h_levels=levels
    )
    writer.json("norms.json", norm_report_payload(rep))
    writer.json("metadata.json", {"config": cfg.flat(), "version": __version__})
    writer.finalize()
    print(
        f"norms: sup={rep.sup_norm:.6g} |.|_gamma={rep.holder_seminorm:.6g} "
        f"zygmund={rep.zygmund_seminorm} -> {writer.output_dir}"
    )
    return 0


def _cmd_validate_kernels(cfg: RunConfig, writer: OutputWriter) -> int:
    reports = []
    worst = 0.0
    for name in builtin_kernel_names():
        k = get_kernel(name)
        res = homogeneity_residual(k, samples=100, seed=cfg["run"]["seed"])
        means = {}
        for i in range(1, k.n + 1):
            for j in range(1, k.n + 1):
                rep = check_spherical_mean_zero(k, i, j, 256)
                means[f"{i}{j}"] = rep.mean
        mat = dirac_correction(k, 256)
        reports.append(
            {
                "kernel": name,
                "homogeneity_residual": res,
                "spherical_mean_residuals": means,
                "c_matrix": mat.c.tolist(),
                "c_error": mat.estimated_error,
            }
        )
        worst = max(worst, res, max(abs(v) for v in means.values()), mat.estimated_error)
    writer.json("kernels.json", {"kernels": reports})
    writer.json("metadata.json", {"config": cfg.flat(), "version": __version__})
    writer.finalize()
    print(f"validate-kernels: worst residual {worst:.3e} -> {writer.output_dir}")
    return 0 if worst <= 1e-8 else 3


def _cmd_validate_sio(cfg: RunConfig, writer: OutputWriter) -> int:
    kernel = get_kernel(cfg["kernel"]["name"], cfg["kernel"]["sign"])
    if not (1 <= cfg["sio"]["i"] <= kernel.n and 1 <= cfg["sio"]["j"] <= kernel.n):
        raise ConfigError([f"sio.i and sio.j must lie in 1..{kernel.n} for kernel {kernel.name}"])
    h = cfg["lattice"]["h"]
    half = cfg["lattice"]["half_width"]
    k = int(round(half / h))
    xs = h * np.arange(-k, k + 1)
    mesh = np.meshgrid(*([xs] * kernel.n), indexing="ij")
    r2 = sum(g**2 for g in mesh)
    fields = []
    for idx, sig in enumerate((0.4 * half, 0.2 * half)):
        vals = np.exp(-r2 / sig**2)
        vals[r2 > (3.0 * sig) ** 2] = 0.0
        fields.append((f"bump-{idx}", lattice_field([xs[0]] * kernel.n, h, vals)))
    pv = PVConfig(epsilon=cfg["sio"]["epsilon_factor"] * h, h=h)
    rows = estimate_sio_constants(
        kernel, cfg["sio"]["i"], cfg["sio"]["j"], fields, cfg["lattice"]["gamma"], pv
    )
    writer.csv(
        "sio.csv",
        "sio",
        ["kernel", "i", "j", "field_id", "epsilon", "h", "sup_S", "seminorm_S",
         "implied_c_eps", "implied_c_sna"],
        (
            (r.kernel, r.i, r.j, r.field_id, r.epsilon, r.h, r.sup_S, r.seminorm_S,
             r.implied_c_eps, r.implied_c_sna)
            for r in rows
        ),
    )
    writer.json("metadata.json", {"config": cfg.flat(), "version": __version__})
    writer.finalize()
    print(f"validate-sio: {len(rows)} rows -> {writer.output_dir}")
    return 0


def _cmd_lemmas(cfg: RunConfig, writer: OutputWriter) -> int:
    report = lemma_suite(seed=cfg["run"]["seed"], trials=cfg["lemmas"]["trials"])
    writer.json("lemmas.json", report)
    writer.json("metadata.json", {"config": cfg.flat(), "version": __version__})
    writer.finalize()
    print(f"lemmas: passed={report['passed']} -> {writer.output_dir}")
    return 0 if report["passed"] else 3


if __name__ == "__main__":
    sys.exit(main())
