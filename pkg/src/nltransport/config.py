"""Run configuration: flat INI-style files plus ``--set section.key=value``
overrides, validated against a closed schema (unknown keys rejected, all
problems reported in one aggregated error)."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .kernels import builtin_kernel_names

__all__ = ["ConfigError", "RunConfig", "parse_config", "COMMANDS"]

COMMANDS = ("simulate", "continuity", "convergence", "norms", "validate-kernels", "validate-sio", "lemmas")


class ConfigError(DomainError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


def _floats(text: str) -> tuple[float, ...]:
    items = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in items)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


# section -> key -> (parser, default, validator or None, description of the constraint)
_SCHEMA: dict = {
    "run": {
        "seed": (int, 0, _nonneg, ">= 0"),
        "worker_count": (int, 0, _nonneg, ">= 0 (0 = all cores)"),
        "output_dir": (str, "out", None, ""),
    },
    "kernel": {
        "name": (str, "biot-savart-2d", lambda v: v in builtin_kernel_names(),
                 f"one of {builtin_kernel_names()}"),
        "sign": (float, 1.0, lambda v: v in (1.0, -1.0), "+1 or -1"),
    },
    "lattice": {
        "n": (int, 2, lambda v: v in (2, 3), "2 or 3"),
        "h": (float, 1.0 / 32.0, _pos, "> 0"),
        "half_width": (float, 0.875, _pos, "> 0"),
        "gamma": (float, 0.5, lambda v: 0.0 < v < 1.0, "in the open interval (0, 1)"),
    },
    "rho0": {
        "preset": (str, "gaussian",
                   lambda v: v in ("gaussian", "mollified-disk", "ring", "cusp", "zero", "custom-csv"),
                   "a known preset"),
        "amplitude": (float, 1.0, None, ""),
        "sigma": (float, 0.25, _pos, "> 0"),
        "cutoff": (float, 0.65, _pos, "> 0"),
        "taper": (float, 0.0, _nonneg, ">= 0 (0 = preset default)"),
        "radius": (float, 0.35, _pos, "> 0"),
        "width": (float, 0.1, _pos, "> 0"),
        "r0": (float, 0.5, _pos, "> 0"),
        "extent": (float, 0.5, _pos, "> 0"),
        "center": (_floats, (), None, ""),
        "csv": (str, "", None, ""),
    },
    "time": {
        "dt": (float, 1e-3, _pos, "> 0"),
        "T": (float, 0.5, _pos, "> 0"),
        "integrator": (str, "rk4", lambda v: v in ("rk4", "picard"), "rk4 or picard"),
        "picard_tol": (float, 1e-12, _pos, "> 0"),
        "picard_max_iter": (int, 50, _pos, "> 0"),
    },
    "flow": {
        "delta": (float, 0.45, _pos, "> 0"),
        "singular_rule": (str, "exclude", lambda v: v in ("exclude", "polar-correct"),
                          "exclude or polar-correct"),
        "checkpoint_times": (_floats, (), None, ""),
        "store_velocities": (_bool, False, None, ""),
    },
    "sweep": {
        "epsilons": (_floats, (0.25, 0.125, 0.0625, 0.03125, 0.015625), None, ""),
        "norm_kind": (str, "holder", lambda v: v in ("holder", "zygmund"), "holder or zygmund"),
        "perturbation_center": (_floats, (0.2, 0.1), None, ""),
        "perturbation_width": (float, 0.15, _pos, "> 0"),
        "perturbation_amplitude": (float, 1.0, None, ""),
        "eval_half_width": (float, 0.7, _pos, "> 0"),
        "eval_points": (int, 43, lambda v: v >= 5, ">= 5"),
    },
    "convergence": {
        "case": (str, "radial-euler-stationary", None, ""),
        "h_list": (_floats, (1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0), None, ""),
        "dt_list": (_floats, (0.1, 0.05, 0.025), None, ""),
    },
    "norms": {
        "input_csv": (str, "", None, ""),
        "gamma": (float, 0.5, lambda v: 0.0 < v < 1.0, "in the open interval (0, 1)"),
        "pair_budget": (int, 2000, _pos, "> 0"),
        "h_levels": (_floats, (), None, ""),
    },
    "sio": {
        "i": (int, 1, _pos, "> 0"),
        "j": (int, 2, _pos, "> 0"),
        "epsilon_factor": (float, 2.0, lambda v: v >= 1.0, ">= 1 (epsilon = factor * h)"),
    },
    "lemmas": {
        "trials": (int, 200, _nonneg, ">= 0"),
    },
}

_KERNEL_DIM = {"biot-savart-2d": 2, "grad-newtonian-2d": 2, "grad-newtonian-3d": 3, "qg-3d": 3}


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)  # section -> key -> parsed value

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def flat(self) -> dict:
        return {f"{s}.{k}": v for s, d in sorted(self.values.items()) for k, v in sorted(d.items())}


def parse_config(
    command: str,
    path: str | None = None,
    overrides: list[str] | None = None,
) -> RunConfig:
    """Build a validated RunConfig from defaults, an optional INI file and
    --set overrides (applied in that order)."""
    problems: list[str] = []
    if command not in COMMANDS:
        raise ConfigError([f"unknown command {command!r} (choose from {COMMANDS})"])
    values = {s: {k: spec[1] for k, spec in d.items()} for s, d in _SCHEMA.items()}

    def assign(section: str, key: str, raw: str, where: str):
        if section not in _SCHEMA:
            problems.append(f"{where}: unknown section [{section}]")
            return
        if key not in _SCHEMA[section]:
            problems.append(f"{where}: unknown key {section}.{key}")
            return
        parser, _, validator, constraint = _SCHEMA[section][key]
        try:
            val = parser(raw)
        except (TypeError, ValueError):
            problems.append(f"{where}: {section}.{key} = {raw!r} is not a valid {parser.__name__}")
            return
        if validator is not None and not validator(val):
            problems.append(f"{where}: {section}.{key} = {raw!r} must be {constraint}")
            return
        values[section][key] = val

    if path is not None:
        if not os.path.exists(path):
            raise ConfigError([f"config file not found: {path}"])
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str  # keys are case-sensitive (time.T)
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (configparser.Error, OSError) as exc:
            raise ConfigError([f"cannot parse {path}: {exc}"]) from exc
        for section in cp.sections():
            for key, raw in cp.items(section):
                assign(section, key, raw, path)

    for ov in overrides or []:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            problems.append(f"override {ov!r} must look like section.key=value")
            continue
        target, raw = ov.split("=", 1)
        section, key = target.split(".", 1)
        assign(section.strip(), key.strip(), raw.strip(), "--set")

    # cross-field checks
    kname = values["kernel"]["name"]
    if kname in _KERNEL_DIM and _KERNEL_DIM[kname] != values["lattice"]["n"]:
        problems.append(
            f"kernel {kname!r} needs lattice.n = {_KERNEL_DIM[kname]}, got {values['lattice']['n']}"
        )
    if values["time"]["dt"] > values["time"]["T"]:
        problems.append("time.dt must not exceed time.T")
    eps = values["sweep"]["epsilons"]
    if any(e <= 0 for e in eps) or any(eps[m] <= eps[m + 1] for m in range(len(eps) - 1)):
        problems.append("sweep.epsilons must be positive and strictly decreasing")
    ctr = values["rho0"]["center"]
    if ctr and len(ctr) != values["lattice"]["n"]:
        problems.append("rho0.center dimension must match lattice.n")

    if problems:
        raise ConfigError(problems)
    return RunConfig(command=command, values=values)


def rho0_params_from(cfg: RunConfig) -> tuple[str, dict]:
    """Preset name and kwargs for presets.make_profile."""
    sec = cfg["rho0"]
    name = sec["preset"]
    params: dict = {"amplitude": sec["amplitude"]}
    if sec["center"]:
        params["center"] = np.asarray(sec["center"], dtype=float)
    if name == "gaussian":
        params.update(sigma=sec["sigma"], cutoff=sec["cutoff"])
        if sec["taper"] > 0:
            params["taper"] = sec["taper"]
    elif name == "mollified-disk":
        params.update(radius=sec["radius"], width=sec["width"])
    elif name == "ring":
        params.update(r0=sec["r0"], width=sec["width"])
    elif name == "cusp":
        params.update(extent=sec["extent"], width=sec["width"])
    return name, params
