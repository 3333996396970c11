"""Quadrature for the weakly singular convolution T f = k * f and the
principal-value operator S f = p.v. P * f with P = d_i k_j.

Both operators use midpoint sums over lattice cells. The singularity
caps the attainable order anyway, so a predictable first-order error
model is preferred over high-order rules. Excision for S is spherical by
cell-center distance: a cell contributes iff its center lies strictly
outside B(x, epsilon).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, UnsupportedStructureError
from .fields import SampledField, holder_seminorm, scattered_field, sup_norm, _subsample_indices
from .kernels import KernelSpec, check_spherical_mean_zero, kernel_surface_mean
from .summation import grad_convolution, kernel_convolution

__all__ = ["PVConfig", "SPVResult", "SioRow", "convolve_T", "convolve_S_pv", "estimate_sio_constants"]


@dataclass(frozen=True)
class PVConfig:
    """Excision radius and singular-cell policy for the p.v. quadrature."""

    epsilon: float
    h: float
    singular_rule: str = "exclude"  # {"exclude", "polar-correct"}

    def __post_init__(self):
        if self.h <= 0.0:
            raise DomainError("lattice spacing h must be positive")
        if self.epsilon < self.h:
            raise DomainError(
                f"excision epsilon ({self.epsilon}) must be >= lattice spacing ({self.h})"
            )
        if self.singular_rule not in ("exclude", "polar-correct"):
            raise DomainError(f"unknown singular_cell_rule {self.singular_rule!r}")


@dataclass(frozen=True)
class SPVResult:
    values: np.ndarray  # (M,)
    epsilon_sensitivity: np.ndarray  # |S_eps - S_2eps| per target
    epsilon: float


@dataclass(frozen=True)
class SioRow:
    kernel: str
    i: int
    j: int
    field_id: str
    epsilon: float
    h: float
    sup_S: float
    seminorm_S: float
    implied_c_eps: float
    implied_c_sna: float


def _require_lattice(field: SampledField, kernel: KernelSpec) -> None:
    if not field.is_lattice:
        raise UnsupportedStructureError("convolution quadrature requires a lattice field")
    if field.n != kernel.n:
        raise DomainError(f"kernel dimension {kernel.n} != field dimension {field.n}")


def _sources(field: SampledField):
    nz = field.values != 0.0
    h = field.lattice_spacing
    return field.points[nz], field.values[nz] * h**field.n


# identity-keyed caches; entries hold the kernel so ids stay valid
_SURFACE_MEAN_CACHE: dict = {}
_MEAN_ZERO_CACHE: dict = {}


def _surface_mean_cached(kernel: KernelSpec) -> np.ndarray:
    key = id(kernel)
    hit = _SURFACE_MEAN_CACHE.get(key)
    if hit is None or hit[0] is not kernel:
        hit = (kernel, kernel_surface_mean(kernel))
        _SURFACE_MEAN_CACHE[key] = hit
    return hit[1]


def _equal_measure_radius(h: float, n: int) -> float:
    # ball with the same measure as one lattice cell
    if n == 2:
        return h / np.sqrt(np.pi)
    return h * (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)


def convolve_T(
    kernel: KernelSpec,
    field: SampledField,
    targets: np.ndarray,
    singular_rule: str = "exclude",
) -> np.ndarray:
    """Midpoint-rule T f at the targets; the cell containing each target is
    dropped, and under ``polar-correct`` replaced by the analytic integral
    of the homogeneous kernel over an equal-measure ball (zero for odd
    kernels)."""
    _require_lattice(field, kernel)
    if singular_rule not in ("exclude", "polar-correct"):
        raise DomainError(f"unknown singular_cell_rule {singular_rule!r}")
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    src, w = _sources(field)
    h = field.lattice_spacing
    out = kernel_convolution(kernel, targets, src, w, box_halfwidth=h / 2.0)
    if singular_rule == "polar-correct":
        mean_vec = np.asarray(_surface_mean_cached(kernel))
        if np.any(mean_vec != 0.0):
            # value of f at the dropped cell's node (zero when the target
            # falls outside the sampled lattice)
            idx = np.rint((targets - field.lattice_origin[None, :]) / h).astype(int)
            shape = np.array(field.lattice_shape)
            inside = np.all((idx >= 0) & (idx < shape[None, :]), axis=1)
            fvals = np.zeros(targets.shape[0])
            if np.any(inside):
                flat = np.ravel_multi_index(tuple(idx[inside].T), field.lattice_shape)
                node = field.points[flat]
                hit = np.max(np.abs(targets[inside] - node), axis=1) <= h / 2.0
                vals = np.where(hit, field.values[flat], 0.0)
                fvals[inside] = vals
            out = out + fvals[:, None] * _equal_measure_radius(h, kernel.n) * mean_vec[None, :]
    return out


def _mean_zero_ok(kernel: KernelSpec, i: int, j: int) -> tuple:
    key = (id(kernel), i, j)
    hit = _MEAN_ZERO_CACHE.get(key)
    if hit is None or hit[0] is not kernel:
        rep = check_spherical_mean_zero(kernel, i, j, 128, tolerance=1e-6)
        hit = (kernel, rep.passed, rep.mean)
        _MEAN_ZERO_CACHE[key] = hit
    return hit[1], hit[2]


def convolve_S_pv(
    kernel: KernelSpec,
    i: int,
    j: int,
    field: SampledField,
    targets: np.ndarray,
    cfg: PVConfig,
) -> SPVResult:
    """Excised midpoint sum for S f = p.v. (d_i k_j) * f, with an
    epsilon-sensitivity estimate (value at epsilon vs 2 epsilon)."""
    _require_lattice(field, kernel)
    if abs(cfg.h - field.lattice_spacing) > 1e-12 * cfg.h:
        raise DomainError("PVConfig.h must equal the field's lattice spacing")
    ok, mean = _mean_zero_ok(kernel, i, j)
    if not ok:
        raise NumericalError(
            f"p.v. undefined for component ({i}, {j}) of kernel {kernel.name!r}: "
            f"spherical mean {mean:.3e} is not zero"
        )
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    src, w = _sources(field)
    v1 = grad_convolution(kernel, i, j, targets, src, w, cfg.epsilon)
    v2 = grad_convolution(kernel, i, j, targets, src, w, 2.0 * cfg.epsilon)
    return SPVResult(values=v1, epsilon_sensitivity=np.abs(v1 - v2), epsilon=cfg.epsilon)


def estimate_sio_constants(
    kernel: KernelSpec,
    i: int,
    j: int,
    fields: list[tuple[str, SampledField]],
    gamma: float,
    cfg: PVConfig,
    max_targets: int = 1800,
) -> list[SioRow]:
    """Empirical constants for the sup-norm and seminorm bounds on S.

    For each field the implied constants are
    c_eps = sup|Sf| / (|f|_g eps^g + max(1, ln(R/eps)) sup|f|)   and
    c_sna = |Sf|_g / |f|_g ,
    measured with discrete norms; both are diagnostics, not asserted here.
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    rows = []
    for field_id, field in fields:
        _require_lattice(field, kernel)
        sup_f = sup_norm(field)
        if sup_f == 0.0:
            continue  # both sides vanish; constant undefined
        semi_f = holder_seminorm(field, gamma)
        idx = _subsample_indices(field, max_targets)
        tg = field.points[idx]
        res = convolve_S_pv(kernel, i, j, field, tg, cfg)
        s_field = scattered_field(tg, res.values)
        sup_s = sup_norm(s_field)
        semi_s = holder_seminorm(s_field, gamma, pair_budget=None)
        r_supp = field.support_radius
        bracket = semi_f * cfg.epsilon**gamma + max(1.0, np.log(r_supp / cfg.epsilon)) * sup_f
        rows.append(
            SioRow(
                kernel=kernel.name,
                i=i,
                j=j,
                field_id=field_id,
                epsilon=cfg.epsilon,
                h=field.lattice_spacing,
                sup_S=sup_s,
                seminorm_S=semi_s,
                implied_c_eps=sup_s / bracket,
                implied_c_sna=semi_s / semi_f if semi_f > 0 else 0.0,
            )
        )
    return rows
