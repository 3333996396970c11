"""CSV/JSON persistence and the run manifest.

Every CSV starts with a schema comment line, uses '.' decimals and
newline-terminated rows, and serializes floats at 17 significant digits
so a round trip is exact. CSV content carries no timestamps: reruns with
identical config and seed are byte-identical. The manifest (config echo,
version, timestamps, file digests) is written last, atomically.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import DomainError
from .fields import NormReport, SampledField, lattice_field, scattered_field

__all__ = [
    "SCHEMA_VERSIONS",
    "RunManifest",
    "OutputWriter",
    "fmt",
    "read_field_csv",
    "write_field_csv",
]

SCHEMA_VERSIONS = {
    "markers": "nlt.markers.v1",
    "monitors": "nlt.monitors.v1",
    "sweep": "nlt.sweep.v1",
    "orders": "nlt.orders.v1",
    "sio": "nlt.sio.v1",
    "field": "nlt.field.v1",
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    started_at: str
    finished_at: str
    files: list[dict]
    halt_reason: str | None = None


class OutputWriter:
    """Collects emitted files for one run, then seals them in a manifest.

    IO failures abort the run and remove any partially written files.
    """

    def __init__(self, output_dir: str, command: str, config_flat: dict):
        self.output_dir = output_dir
        self.command = command
        self.config_flat = config_flat
        self.started_at = _utcnow()
        self.written: list[str] = []
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def csv(self, name: str, schema: str, header: list[str], rows) -> str:
        target = self.path(name)
        try:
            with open(target, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(f"# schema={SCHEMA_VERSIONS[schema]}\n")
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
        except OSError:
            self.abort()
            raise
        self.written.append(name)
        return target

    def json(self, name: str, payload: dict) -> str:
        target = self.path(name)
        try:
            with open(target, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
                fh.write("\n")
        except OSError:
            self.abort()
            raise
        self.written.append(name)
        return target

    def abort(self) -> None:
        for name in self.written:
            try:
                os.remove(self.path(name))
            except OSError:
                pass
        self.written.clear()

    def finalize(self, halt_reason: str | None = None) -> RunManifest:
        files = []
        for name in self.written:
            digest = hashlib.sha256()
            with open(self.path(name), "rb") as fh:
                digest.update(fh.read())
            files.append(
                {"name": name, "sha256": digest.hexdigest(), "bytes": os.path.getsize(self.path(name))}
            )
        manifest = RunManifest(
            command=self.command,
            config=self.config_flat,
            version=__version__,
            started_at=self.started_at,
            finished_at=_utcnow(),
            files=files,
            halt_reason=halt_reason,
        )
        tmp = self.path("manifest.json.tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest.__dict__, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        os.replace(tmp, self.path("manifest.json"))
        return manifest


def _utcnow() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def norm_report_payload(rep: NormReport) -> dict:
    return {
        "sup_norm": rep.sup_norm,
        "holder_seminorm": rep.holder_seminorm,
        "gamma": rep.gamma,
        "zygmund_seminorm": rep.zygmund_seminorm,
        "vanishing_modulus": [[h, w] for h, w in rep.vanishing_modulus],
        "zygmund_modulus": (
            None if rep.zygmund_modulus is None else [[h, w] for h, w in rep.zygmund_modulus]
        ),
    }


def write_field_csv(path: str, field: SampledField) -> None:
    n = field.n
    header = [f"x_{m + 1}" for m in range(n)] + ["value"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema={SCHEMA_VERSIONS['field']}\n")
        fh.write(",".join(header) + "\n")
        for pt, val in zip(field.points, field.values):
            fh.write(",".join(fmt(v) for v in pt) + "," + fmt(val) + "\n")


def read_field_csv(path: str) -> SampledField:
    """Parse a field CSV (columns x_1..x_n, value); detects lattice structure."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    lines = [ln for ln in lines if not ln.startswith("#")]
    if not lines:
        raise DomainError(f"empty field CSV: {path}")
    header = lines[0].split(",")
    if header[-1] != "value" or not all(c == f"x_{m + 1}" for m, c in enumerate(header[:-1])):
        raise DomainError(f"field CSV must have columns x_1..x_n,value, got {header}")
    n = len(header) - 1
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if data.size == 0:
        raise DomainError(f"field CSV has no data rows: {path}")
    points, values = data[:, :n], data[:, n]
    lattice = _detect_lattice(points)
    if lattice is not None:
        origin, spacing, shape, order = lattice
        grid = np.empty(int(np.prod(shape)))
        grid[order] = values
        return lattice_field(origin, spacing, grid.reshape(shape))
    return scattered_field(points, values)


def _detect_lattice(points: np.ndarray):
    """Recognize a full regular grid (any row order); returns
    (origin, spacing, shape, position-of-each-point) or None."""
    n = points.shape[1]
    axes = [np.unique(points[:, a]) for a in range(n)]
    shape = tuple(len(ax) for ax in axes)
    if int(np.prod(shape)) != points.shape[0]:
        return None
    spacings = []
    for ax in axes:
        if len(ax) < 2:
            return None
        d = np.diff(ax)
        if np.max(d) - np.min(d) > 1e-9 * max(np.max(np.abs(ax)), 1.0):
            return None
        spacings.append(float(np.mean(d)))
    if max(spacings) - min(spacings) > 1e-9 * max(spacings):
        return None
    spacing = spacings[0]
    idx = np.empty((points.shape[0], n), dtype=int)
    for a in range(n):
        idx[:, a] = np.searchsorted(axes[a], points[:, a])
    flat = np.ravel_multi_index(tuple(idx.T), shape)
    if len(np.unique(flat)) != points.shape[0]:
        return None
    origin = np.array([ax[0] for ax in axes])
    return origin, spacing, shape, flat
