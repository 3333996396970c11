"""Figure rendering from simulator CSV/JSON outputs.

Rendering never recomputes physics: every figure is a pure function of
the input file contents. Vector output is byte-stable across repeated
invocations (fixed SVG hash salt, no timestamps in the file).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "SchemaVersionError", "render", "FIGURE_KINDS"]

FIGURE_KINDS = ("trajectories", "density", "detdx", "sweep", "convergence", "modulus")

# CSV schema versions this renderer understands, by figure kind
SUPPORTED = {
    "trajectories": {"nlt.markers.v1"},
    "density": {"nlt.markers.v1"},
    "detdx": {"nlt.markers.v1"},
    "sweep": {"nlt.sweep.v1"},
    "convergence": {"nlt.orders.v1"},
}

plt.rcParams["svg.hashsalt"] = "nlt-plots"


class SchemaVersionError(ValueError):
    """The input file's schema line does not match a supported version."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_path: str
    output_path: str
    fit_path: str | None = None  # sweep figures: fit JSON with beta / r2
    title: str | None = None
    size: tuple = (6.0, 4.5)
    dpi: int = 150
    style: dict = field(default_factory=dict)


def _read_csv(path: str, kind: str):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaVersionError(f"{path}: missing schema line")
    schema = lines[0].split("=", 1)[1].strip()
    if schema not in SUPPORTED[kind]:
        raise SchemaVersionError(
            f"{path}: schema {schema!r} not supported for {kind} figures "
            f"(supported: {sorted(SUPPORTED[kind])})"
        )
    if len(lines) < 2:
        raise SchemaVersionError(f"{path}: missing header row")
    header = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:]]
    return header, rows


def _placeholder(spec: FigureSpec, message: str) -> None:
    fig, ax = plt.subplots(figsize=spec.size)
    ax.axis("off")
    ax.text(0.5, 0.5, message, ha="center", va="center", fontsize=18, color="0.35",
            transform=ax.transAxes,
            bbox={"boxstyle": "round", "facecolor": "0.92", "edgecolor": "0.6"})
    if spec.title:
        ax.set_title(spec.title)
    _save(fig, spec)


def _save(fig, spec: FigureSpec) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(spec.output_path)), exist_ok=True)
    if spec.output_path.endswith(".svg"):
        fig.savefig(spec.output_path, format="svg", metadata={"Date": None})
    else:
        fig.savefig(spec.output_path, dpi=spec.dpi)
    plt.close(fig)


def _markers_table(header, rows):
    n = sum(1 for c in header if c.startswith("i"))
    cols = {c: k for k, c in enumerate(header)}
    data = np.array([[float(v) for v in r] for r in rows]) if rows else np.zeros((0, len(header)))
    return n, cols, data


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    if spec.kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {spec.kind!r} (choose from {FIGURE_KINDS})")
    if spec.kind == "modulus":
        _render_modulus(spec)
    else:
        header, rows = _read_csv(spec.input_path, spec.kind)
        if not rows:
            _placeholder(spec, "no data")
            return spec.output_path
        if spec.kind in ("trajectories", "density", "detdx"):
            _render_markers(spec, header, rows)
        elif spec.kind == "sweep":
            _render_sweep(spec, header, rows)
        else:
            _render_convergence(spec, header, rows)
    return spec.output_path


def _render_markers(spec: FigureSpec, header, rows) -> None:
    n, cols, data = _markers_table(header, rows)
    steps = np.unique(data[:, cols["step"]])
    fig, ax = plt.subplots(figsize=spec.size)
    if spec.kind == "trajectories":
        last = data[data[:, cols["step"]] == steps[-1]]
        count = last.shape[0]
        stride = max(count // int(spec.style.get("max_tracks", 256)), 1)
        per_step = [data[data[:, cols["step"]] == s] for s in steps]
        xs = np.stack([ps[::stride, cols["x1"]] for ps in per_step])
        ys = np.stack([ps[::stride, cols["x2"]] for ps in per_step])
        ax.plot(xs, ys, lw=0.6, color="tab:blue", alpha=0.7)
        ax.plot(xs[0], ys[0], ".", ms=2.0, color="tab:gray")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal")
        ax.set_title(spec.title or f"marker trajectories ({len(steps)} checkpoints)")
    elif spec.kind == "density":
        last = data[data[:, cols["step"]] == steps[-1]]
        sc = ax.scatter(last[:, cols["x1"]], last[:, cols["x2"]], c=last[:, cols["rho0"]],
                        s=4.0, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="density")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal")
        ax.set_title(spec.title or f"density at t = {last[0, cols['t']]:g}")
    else:  # detdx heatmap on the label lattice
        last = data[data[:, cols["step"]] == steps[-1]]
        i1 = last[:, cols["i1"]].astype(int)
        i2 = last[:, cols["i2"]].astype(int)
        if n == 3:  # middle slice of the third label axis
            i3 = last[:, cols["i3"]].astype(int)
            mid = int(round(np.median(i3)))
            sel = i3 == mid
            last, i1, i2 = last[sel], i1[sel], i2[sel]
        grid = np.full((i1.max() + 1, i2.max() + 1), np.nan)
        grid[i1, i2] = last[:, cols["detdx"]]
        im = ax.imshow(grid.T, origin="lower", cmap="RdBu_r")
        fig.colorbar(im, ax=ax, label="det DX")
        ax.set_xlabel("label index 1")
        ax.set_ylabel("label index 2")
        ax.set_title(spec.title or f"det DX at t = {last[0, cols['t']]:g}")
    _save(fig, spec)


def _render_sweep(spec: FigureSpec, header, rows) -> None:
    cols = {c: k for k, c in enumerate(header)}
    ins = np.array([float(r[cols["input_distance"]]) for r in rows])
    outs = np.array([float(r[cols["output_distance"]]) for r in rows])
    flows = np.array([float(r[cols["flow_distance"]]) for r in rows])
    admissible = np.array([r[cols["admissible_to_T"]].strip().lower() == "true" for r in rows])
    fig, ax = plt.subplots(figsize=spec.size)
    ax.loglog(ins[admissible], outs[admissible], "o-", color="tab:blue", label="density distance")
    ax.loglog(ins[admissible], flows[admissible], "s--", color="tab:orange", label="flow distance")
    if np.any(~admissible):
        ax.loglog(ins[~admissible], outs[~admissible], "x", color="tab:red", label="halted early")
    if spec.fit_path:
        with open(spec.fit_path, encoding="utf-8") as fh:
            fit = json.load(fh)
        beta, r2 = fit["beta"], fit["r_squared"]
        anchor = np.sort(ins[admissible])
        ref = outs[admissible][np.argsort(ins[admissible])]
        ax.loglog(anchor, ref[0] * (anchor / anchor[0]) ** beta, ":", color="0.4",
                  label=f"fit slope {beta_text(beta)}")
        ax.text(0.04, 0.96, f"beta = {beta_text(beta)}\nr2 = {r2:.4f}",
                transform=ax.transAxes, va="top",
                bbox={"boxstyle": "round", "facecolor": "white", "edgecolor": "0.6"})
    ax.set_xlabel("input distance")
    ax.set_ylabel("max output distance")
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title(spec.title or "continuity of the data-to-solution map")
    _save(fig, spec)


def beta_text(beta: float) -> str:
    return f"{beta:.6g}"


def _render_convergence(spec: FigureSpec, header, rows) -> None:
    cols = {c: k for k, c in enumerate(header)}
    hs = np.array([float(r[cols["h"]]) for r in rows])
    dts = np.array([float(r[cols["dt"]]) for r in rows])
    errs = np.array([float(r[cols["error"]]) for r in rows])
    fig, ax = plt.subplots(figsize=spec.size)
    # spatial refinement rows share dt; temporal rows share h
    uniq_dt = np.unique(dts)
    uniq_h = np.unique(hs)
    if len(uniq_h) > 1 or len(uniq_dt) == 1:
        sel = dts == uniq_dt[0] if len(uniq_dt) > 1 else np.ones_like(hs, dtype=bool)
        order = np.argsort(hs[sel])
        ax.loglog(hs[sel][order], errs[sel][order], "o-", color="tab:blue", label="vs h")
        ax.set_xlabel("lattice spacing h")
    if len(uniq_dt) > 1:
        sel = hs == uniq_h[0] if len(uniq_h) > 1 else np.ones_like(dts, dtype=bool)
        order = np.argsort(dts[sel])
        ax.loglog(dts[sel][order], errs[sel][order], "s--", color="tab:orange", label="vs dt")
        ax.set_xlabel("dt" if len(uniq_h) <= 1 else "h (circles) / dt (squares)")
    ax.set_ylabel("error")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(spec.title or f"convergence: {rows[0][cols['case']]}")
    _save(fig, spec)


def _render_modulus(spec: FigureSpec) -> None:
    try:
        with open(spec.input_path, encoding="utf-8") as fh:
            rep = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaVersionError(f"{spec.input_path}: not a norm-report JSON: {exc}") from exc
    required = {"sup_norm", "holder_seminorm", "gamma", "vanishing_modulus"}
    if not required.issubset(rep):
        raise SchemaVersionError(
            f"{spec.input_path}: missing norm-report keys {sorted(required - set(rep))}"
        )
    pairs = rep["vanishing_modulus"]
    if not pairs:
        _placeholder(spec, "no data")
        return
    fig, ax = plt.subplots(figsize=spec.size)
    hs = [p[0] for p in pairs]
    ws = [p[1] for p in pairs]
    ax.loglog(hs, ws, "o-", color="tab:blue", label=f"holder modulus (gamma={rep['gamma']:g})")
    if rep.get("zygmund_modulus"):
        zh = [p[0] for p in rep["zygmund_modulus"]]
        zw = [p[1] for p in rep["zygmund_modulus"]]
        ax.loglog(zh, zw, "s--", color="tab:orange", label="zygmund modulus")
    ax.set_xlabel("separation bound h")
    ax.set_ylabel("omega(h)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(spec.title or "vanishing-condition modulus")
    _save(fig, spec)
