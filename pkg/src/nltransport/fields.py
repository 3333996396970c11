"""Sampled scalar fields and discrete Holder / Zygmund (semi)norms.

Norms over finite samples are lower bounds of the true suprema; every
estimate is meant to be paired with its lattice spacing so refinement
studies can extrapolate. All-pairs evaluation is exact up to the
``pair_budget`` point threshold; beyond it the maximum is taken over all
small-separation pairs (which dominate the quotients for little-space
data and are never subsampled) plus a deterministic strided subsample.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DomainError, UnsupportedStructureError

__all__ = [
    "SampledField",
    "NormReport",
    "ModulusReport",
    "lattice_field",
    "scattered_field",
    "holder_seminorm",
    "zygmund_seminorm",
    "vanishing_modulus",
    "compute_norm_report",
    "sup_norm",
    "holder_norm",
    "zygmund_norm",
]

EXACT_PAIR_POINTS = 2000  # default all-pairs threshold (point count)
_CHUNK = 512


@dataclass(frozen=True)
class SampledField:
    """Point set with scalar values; optionally carrying lattice structure."""

    points: np.ndarray  # (N, n)
    values: np.ndarray  # (N,)
    lattice_shape: tuple[int, ...] | None = None
    lattice_spacing: float | None = None
    lattice_origin: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def is_lattice(self) -> bool:
        return self.lattice_shape is not None

    @property
    def support_radius(self) -> float | None:
        """R with R^n ~ measure of the value support (lattice fields)."""
        if not self.is_lattice:
            return None
        nnz = int(np.count_nonzero(self.values))
        return float((nnz * self.lattice_spacing**self.n) ** (1.0 / self.n))

    def grid_values(self) -> np.ndarray:
        if not self.is_lattice:
            raise UnsupportedStructureError("field has no lattice structure")
        return self.values.reshape(self.lattice_shape)


@dataclass(frozen=True)
class ModulusReport:
    """Small-separation moduli: omega(h) per level, little-space diagnostics."""

    holder: list[tuple[float, float]]
    zygmund: list[tuple[float, float]] | None = None


@dataclass(frozen=True)
class NormReport:
    sup_norm: float
    holder_seminorm: float
    gamma: float
    zygmund_seminorm: float | None
    vanishing_modulus: list[tuple[float, float]]
    zygmund_modulus: list[tuple[float, float]] | None = None


def lattice_points(origin: np.ndarray, spacing: float, shape: tuple[int, ...]) -> np.ndarray:
    """Regular lattice nodes in C order (last axis fastest)."""
    axes = [origin[a] + spacing * np.arange(shape[a]) for a in range(len(shape))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def lattice_field(origin, spacing: float, values_grid: np.ndarray) -> SampledField:
    """Field on a regular lattice; `values_grid` is shaped like the lattice."""
    origin = np.atleast_1d(np.asarray(origin, dtype=float))
    shape = values_grid.shape
    if origin.shape[0] != len(shape):
        raise DomainError("origin dimension does not match values_grid rank")
    if spacing <= 0:
        raise DomainError("lattice spacing must be positive")
    vals = np.asarray(values_grid, dtype=float).ravel()
    if not np.all(np.isfinite(vals)):
        raise DomainError("field values must be finite")
    return SampledField(
        points=lattice_points(origin, spacing, shape),
        values=vals,
        lattice_shape=tuple(shape),
        lattice_spacing=float(spacing),
        lattice_origin=origin,
    )


def scattered_field(points: np.ndarray, values: np.ndarray) -> SampledField:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    values = np.asarray(values, dtype=float).ravel()
    if points.shape[0] != values.shape[0]:
        raise DomainError("points and values length mismatch")
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(points)):
        raise DomainError("field points and values must be finite")
    order = np.lexsort(points.T)
    if points.shape[0] > 1 and np.any(np.all(np.diff(points[order], axis=0) == 0.0, axis=1)):
        raise DomainError("field points must be pairwise distinct")
    return SampledField(points=points, values=values)


# -- pairwise engine ----------------------------------------------------------

def _pair_max(points, values, gamma, levels=None):
    """Exact all-pairs max of |df| / d^gamma, chunked over rows.

    With `levels`, also returns per-level maxima over pairs with d < level.
    `values` may be (N,) or (N, d); component maxima are merged.
    """
    vals = values if values.ndim == 2 else values[:, None]
    npts = points.shape[0]
    best = 0.0
    level_best = np.zeros(len(levels)) if levels is not None else None
    for start in range(0, npts, _CHUNK):
        stop = min(start + _CHUNK, npts)
        diff = points[start:stop, None, :] - points[None, start:, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        rows = np.arange(start, stop)
        cols = np.arange(start, npts)
        mask = cols[None, :] > rows[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = dist**gamma
            for c in range(vals.shape[1]):
                q = np.abs(vals[start:stop, c, None] - vals[None, start:, c]) / denom
                q = np.where(mask, q, 0.0)
                best = max(best, float(np.max(q, initial=0.0)))
                if levels is not None:
                    for li, h in enumerate(levels):
                        sel = mask & (dist < h)
                        level_best[li] = max(level_best[li], float(np.max(np.where(sel, q, 0.0), initial=0.0)))
    return best, level_best


def _near_pair_quotients_lattice(field, gamma, values, radius_cells=4):
    """Max quotient over every lattice pair at separation < radius_cells * h."""
    shape = field.lattice_shape
    h = field.lattice_spacing
    n = len(shape)
    vals = values if values.ndim == 2 else values[:, None]
    grids = [vals[:, c].reshape(shape) for c in range(vals.shape[1])]
    best = 0.0
    offsets = []
    for off in product(range(-(radius_cells - 1), radius_cells), repeat=n):
        if all(o == 0 for o in off):
            continue
        if sum(o * o for o in off) >= radius_cells**2:
            continue
        # half-space dedupe: first nonzero component positive
        for o in off:
            if o != 0:
                if o > 0:
                    offsets.append(off)
                break
    for off in offsets:
        sl_a, sl_b = [], []
        ok = True
        for o, size in zip(off, shape):
            if abs(o) >= size:
                ok = False
                break
            sl_a.append(slice(max(0, -o), size - max(0, o)))
            sl_b.append(slice(max(0, o), size - max(0, -o)))
        if not ok:
            continue
        dist = h * float(np.sqrt(sum(o * o for o in off)))
        denom = dist**gamma
        for g in grids:
            d = np.abs(g[tuple(sl_a)] - g[tuple(sl_b)])
            best = max(best, float(np.max(d, initial=0.0)) / denom)
    return best


def _subsample_indices(field: SampledField, budget: int) -> np.ndarray:
    """Deterministic spatially-strided subset of at most `budget` points."""
    npts = field.points.shape[0]
    if npts <= budget:
        return np.arange(npts)
    if field.is_lattice:
        shape = field.lattice_shape
        stride = 1
        while np.prod([int(np.ceil(s / stride)) for s in shape]) > budget:
            stride += 1
        idx = np.arange(npts).reshape(shape)
        sl = tuple(slice(0, s, stride) for s in shape)
        return idx[sl].ravel()
    stride = int(np.ceil(npts / budget))
    order = np.lexsort(field.points.T)
    return order[::stride]


def holder_seminorm(
    field: SampledField,
    gamma: float,
    pair_budget: int | None = EXACT_PAIR_POINTS,
    _values: np.ndarray | None = None,
) -> float:
    """sup over sampled pairs of |f(x) - f(y)| / |x - y|^gamma.

    Exact over all pairs when the point count is <= pair_budget (None
    means unlimited); otherwise all separations below 4 lattice spacings
    are kept and longer ranges come from a strided subsample.
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    values = field.values if _values is None else _values
    npts = field.points.shape[0]
    if npts < 2:
        raise DomainError("holder seminorm needs at least 2 points")
    if pair_budget is None or npts <= pair_budget:
        best, _ = _pair_max(field.points, values, gamma)
        return best
    idx = _subsample_indices(field, pair_budget)
    best, _ = _pair_max(field.points[idx], values[idx], gamma)
    if field.is_lattice:
        best = max(best, _near_pair_quotients_lattice(field, gamma, values))
    else:
        from scipy.spatial import cKDTree

        tree = cKDTree(field.points)
        nn = tree.query(field.points, k=2)[0][:, 1]
        pairs = tree.query_pairs(4.0 * float(np.median(nn)), output_type="ndarray")
        if pairs.size:
            d = np.linalg.norm(field.points[pairs[:, 0]] - field.points[pairs[:, 1]], axis=1)
            vals = values if values.ndim == 2 else values[:, None]
            for c in range(vals.shape[1]):
                q = np.abs(vals[pairs[:, 0], c] - vals[pairs[:, 1], c]) / d**gamma
                best = max(best, float(np.max(q, initial=0.0)))
    return best


def _zygmund_directions(n: int) -> list[tuple[int, ...]]:
    dirs = []
    for off in product((-1, 0, 1), repeat=n):
        if all(o == 0 for o in off):
            continue
        for o in off:
            if o != 0:
                if o > 0:
                    dirs.append(off)
                break
    return dirs


def zygmund_seminorm(
    field: SampledField, delta_max: float | None = None, _values: np.ndarray | None = None
) -> float:
    """sup over symmetric lattice stencils of |f(x+h) - 2 f(x) + f(x-h)| / |h|.

    Stencils run along lattice axes and diagonals with any whole multiple
    of the spacing, so the three points exist exactly in the sample.
    """
    if not field.is_lattice:
        raise UnsupportedStructureError("zygmund seminorm requires a lattice field")
    shape = field.lattice_shape
    if min(shape) < 3:
        raise DomainError("zygmund seminorm needs at least 3 collinear points per axis")
    values = field.values if _values is None else _values
    vals = values if values.ndim == 2 else values[:, None]
    spacing = field.lattice_spacing
    best = 0.0
    for off in _zygmund_directions(len(shape)):
        norm_off = float(np.sqrt(sum(o * o for o in off)))
        m_max = min((s - 1) // (2 * abs(o)) for s, o in zip(shape, off) if o != 0)
        for m in range(1, m_max + 1):
            v = tuple(m * o for o in off)
            step_len = m * spacing * norm_off
            if delta_max is not None and not step_len < delta_max:
                continue
            sl_c, sl_p, sl_m = [], [], []
            for o, size in zip(v, shape):
                a = abs(o)
                sl_c.append(slice(a, size - a))
                sl_p.append(slice(a + o, size - a + o if size - a + o != 0 else None))
                sl_m.append(slice(a - o, size - a - o if size - a - o != 0 else None))
            for c in range(vals.shape[1]):
                g = vals[:, c].reshape(shape)
                num = np.abs(g[tuple(sl_p)] - 2.0 * g[tuple(sl_c)] + g[tuple(sl_m)])
                if num.size:
                    best = max(best, float(np.max(num)) / step_len)
    return best


def vanishing_modulus(
    field: SampledField,
    gamma: float,
    h_levels: list[float],
    pair_budget: int | None = EXACT_PAIR_POINTS,
) -> ModulusReport:
    """omega(h) = sup over pairs at separation < h of the gamma-quotient.

    Decay of omega(h) toward 0 is the little-space diagnostic. For lattice
    fields the analogous second-difference modulus is produced as well.
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    npts = field.points.shape[0]
    if npts < 2:
        raise DomainError("vanishing modulus needs at least 2 points")
    levels = sorted(float(h) for h in h_levels)
    if any(h <= 0 for h in levels):
        raise DomainError("h levels must be positive")
    if pair_budget is not None and npts > pair_budget:
        idx = _subsample_indices(field, pair_budget)
        pts, vals = field.points[idx], field.values[idx]
    else:
        pts, vals = field.points, field.values
    _, per_level = _pair_max(pts, vals, gamma, levels=levels)
    holder = list(zip(levels, [float(v) for v in per_level]))
    zyg = None
    if field.is_lattice:
        zyg = [(h, zygmund_seminorm(field, delta_max=h)) for h in levels]
    return ModulusReport(holder=holder, zygmund=zyg)


def sup_norm(field: SampledField) -> float:
    return float(np.max(np.abs(field.values), initial=0.0))


def holder_norm(field: SampledField, gamma: float, pair_budget=EXACT_PAIR_POINTS) -> float:
    return sup_norm(field) + holder_seminorm(field, gamma, pair_budget)


def zygmund_norm(field: SampledField) -> float:
    return sup_norm(field) + zygmund_seminorm(field)


def compute_norm_report(
    field: SampledField,
    gamma: float,
    pair_budget: int | None = EXACT_PAIR_POINTS,
    h_levels: list[float] | None = None,
) -> NormReport:
    if h_levels is None:
        span = float(np.max(field.points) - np.min(field.points))
        h_levels = [span * 2.0**-k for k in range(7)]
    mod = vanishing_modulus(field, gamma, h_levels, pair_budget)
    zyg = None
    if field.is_lattice:
        zyg = zygmund_seminorm(field)
    return NormReport(
        sup_norm=sup_norm(field),
        holder_seminorm=holder_seminorm(field, gamma, pair_budget),
        gamma=gamma,
        zygmund_seminorm=zyg,
        vanishing_modulus=mod.holder,
        zygmund_modulus=mod.zygmund,
    )
