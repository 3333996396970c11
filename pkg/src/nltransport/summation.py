"""Direct N-body summation for kernel and derivative-kernel quadrature.

Hot loops are jitted with numba when available and parallelized over
targets; each target accumulates its sources sequentially in lattice
index order, so results are bit-reproducible at any worker count. A
chunked numpy path covers kernels registered at runtime (and platforms
without numba) with identical semantics.

Exclusion rules:
* ``self_indices``      drop one source index per target (the alpha' = alpha cell);
* ``box_halfwidth``     drop sources with max-norm distance <= halfwidth
                        (the lattice cell containing the target);
* ``epsilon``           derivative kernels only: keep sources with
                        Euclidean distance strictly greater than epsilon.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DomainError
from .kernels import KernelSpec

try:  # pragma: no cover - exercised implicitly everywhere
    import numba
    from numba import njit, prange

    HAVE_NUMBA = os.environ.get("NLT_NO_NUMBA", "") == ""
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

__all__ = ["kernel_convolution", "grad_convolution", "set_worker_count", "HAVE_NUMBA"]

_TWO_PI = 2.0 * np.pi
_FOUR_PI = 4.0 * np.pi


def set_worker_count(workers: int) -> None:
    """Pin the thread pool; results do not depend on this value."""
    if workers < 1:
        raise DomainError("worker_count must be >= 1")
    if HAVE_NUMBA:
        numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))


if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _sum_k_2d(tx, ty, sx, sy, w, kid, self_idx, hw, out):
        for t in prange(tx.shape[0]):
            ax, ay = tx[t], ty[t]
            ei = self_idx[t]
            u = 0.0
            v = 0.0
            for s in range(sx.shape[0]):
                if s == ei:
                    continue
                dx = ax - sx[s]
                dy = ay - sy[s]
                if hw > 0.0 and abs(dx) <= hw and abs(dy) <= hw:
                    continue
                r2 = dx * dx + dy * dy
                if r2 == 0.0:
                    continue
                c = w[s] / (_TWO_PI * r2)
                if kid == 0:  # rotational: (-y, x)/(2 pi r^2)
                    u -= dy * c
                    v += dx * c
                else:  # gradient: (x, y)/(2 pi r^2)
                    u += dx * c
                    v += dy * c
            out[t, 0] = u
            out[t, 1] = v

    @njit(parallel=True, cache=True)
    def _sum_k_3d(tx, ty, tz, sx, sy, sz, w, kid, self_idx, hw, out):
        for t in prange(tx.shape[0]):
            ax, ay, az = tx[t], ty[t], tz[t]
            ei = self_idx[t]
            u = 0.0
            v = 0.0
            q = 0.0
            for s in range(sx.shape[0]):
                if s == ei:
                    continue
                dx = ax - sx[s]
                dy = ay - sy[s]
                dz = az - sz[s]
                if hw > 0.0 and abs(dx) <= hw and abs(dy) <= hw and abs(dz) <= hw:
                    continue
                r2 = dx * dx + dy * dy + dz * dz
                if r2 == 0.0:
                    continue
                c = w[s] / (_FOUR_PI * r2 * np.sqrt(r2))
                if kid == 2:  # gradient: x/(4 pi r^3)
                    u += dx * c
                    v += dy * c
                    q += dz * c
                else:  # rotational: (-y, x, 0)/(4 pi r^3)
                    u -= dy * c
                    v += dx * c
            out[t, 0] = u
            out[t, 1] = v
            out[t, 2] = q

    @njit(parallel=True, cache=True)
    def _sum_p_2d(tx, ty, sx, sy, w, kid, i, j, eps, out):
        eps2 = eps * eps
        for t in prange(tx.shape[0]):
            ax, ay = tx[t], ty[t]
            acc = 0.0
            for s in range(sx.shape[0]):
                dx = ax - sx[s]
                dy = ay - sy[s]
                r2 = dx * dx + dy * dy
                if r2 <= eps2:
                    continue
                r4 = r2 * r2
                if kid == 0:  # rotational kernel derivatives
                    if i == 1 and j == 1:
                        val = dx * dy / (np.pi * r4)
                    elif i == 2 and j == 2:
                        val = -dx * dy / (np.pi * r4)
                    else:
                        val = (dy * dy - dx * dx) / (_TWO_PI * r4)
                else:  # gradient kernel derivatives
                    xi = dx if i == 1 else dy
                    xj = dx if j == 1 else dy
                    delta = 1.0 if i == j else 0.0
                    val = (delta * r2 - 2.0 * xi * xj) / (_TWO_PI * r4)
                acc += w[s] * val
            out[t] = acc

    @njit(parallel=True, cache=True)
    def _sum_p_3d(tx, ty, tz, sx, sy, sz, w, kid, i, j, eps, out):
        eps2 = eps * eps
        for t in prange(tx.shape[0]):
            ax, ay, az = tx[t], ty[t], tz[t]
            acc = 0.0
            for s in range(sx.shape[0]):
                dx = ax - sx[s]
                dy = ay - sy[s]
                dz = az - sz[s]
                r2 = dx * dx + dy * dy + dz * dz
                if r2 <= eps2:
                    continue
                r5 = r2 * r2 * np.sqrt(r2)
                xi = dx if i == 1 else (dy if i == 2 else dz)
                if kid == 2:  # gradient kernel derivatives
                    xj = dx if j == 1 else (dy if j == 2 else dz)
                    delta = 1.0 if i == j else 0.0
                    val = (delta * r2 - 3.0 * xi * xj) / (_FOUR_PI * r5)
                else:  # rotational kernel derivatives
                    if j == 3:
                        val = 0.0
                    elif j == 1:
                        delta = 1.0 if i == 2 else 0.0
                        val = (3.0 * xi * dy - delta * r2) / (_FOUR_PI * r5)
                    else:
                        delta = 1.0 if i == 1 else 0.0
                        val = (delta * r2 - 3.0 * xi * dx) / (_FOUR_PI * r5)
                acc += w[s] * val
            out[t] = acc


_CHUNK = 256


def _np_sum_k(kernel, targets, sources, weights, self_idx, hw):
    out = np.zeros((targets.shape[0], kernel.n))
    for start in range(0, targets.shape[0], _CHUNK):
        stop = min(start + _CHUNK, targets.shape[0])
        diff = targets[start:stop, None, :] - sources[None, :, :]
        keep = np.ones(diff.shape[:2], dtype=bool)
        if hw > 0.0:
            keep &= ~np.all(np.abs(diff) <= hw, axis=2)
        rows = np.arange(start, stop)
        sel = self_idx[rows] >= 0
        keep[np.where(sel)[0], self_idx[rows[sel]]] = False
        r2 = np.sum(diff * diff, axis=2)
        keep &= r2 > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            kv = kernel.eval(diff.reshape(-1, kernel.n)).reshape(diff.shape)
        kv = np.where(keep[:, :, None], kv, 0.0)
        out[start:stop] = np.einsum("tsn,s->tn", np.nan_to_num(kv), weights)
    return out


def _np_sum_p(kernel, i, j, targets, sources, weights, eps):
    out = np.zeros(targets.shape[0])
    for start in range(0, targets.shape[0], _CHUNK):
        stop = min(start + _CHUNK, targets.shape[0])
        diff = targets[start:stop, None, :] - sources[None, :, :]
        r2 = np.sum(diff * diff, axis=2)
        keep = r2 > eps * eps
        with np.errstate(divide="ignore", invalid="ignore"):
            pv = kernel.grad_pv(i, j, diff.reshape(-1, kernel.n)).reshape(r2.shape)
        pv = np.where(keep, pv, 0.0)
        out[start:stop] = np.nan_to_num(pv) @ weights
    return out


def _prepare(targets, sources, weights, n):
    targets = np.ascontiguousarray(np.atleast_2d(targets), dtype=np.float64)
    sources = np.ascontiguousarray(np.atleast_2d(sources), dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if targets.shape[1] != n or sources.shape[1] != n:
        raise DomainError(f"points must live in R^{n}")
    if weights.shape[0] != sources.shape[0]:
        raise DomainError("weights length must match sources")
    return targets, sources, weights


def kernel_convolution(
    kernel: KernelSpec,
    targets: np.ndarray,
    sources: np.ndarray,
    weights: np.ndarray,
    self_indices: np.ndarray | None = None,
    box_halfwidth: float = 0.0,
) -> np.ndarray:
    """sum_s k(x_t - y_s) w_s with the configured exclusion rules."""
    targets, sources, weights = _prepare(targets, sources, weights, kernel.n)
    self_idx = (
        np.full(targets.shape[0], -1, dtype=np.int64)
        if self_indices is None
        else np.ascontiguousarray(self_indices, dtype=np.int64)
    )
    if self_idx.shape[0] != targets.shape[0]:
        raise DomainError("self_indices length must match targets")
    if sources.shape[0] == 0:
        return np.zeros((targets.shape[0], kernel.n))
    if HAVE_NUMBA and kernel.kid is not None:
        out = np.empty((targets.shape[0], kernel.n))
        if kernel.n == 2:
            _sum_k_2d(
                targets[:, 0], targets[:, 1], sources[:, 0], sources[:, 1],
                weights, kernel.kid, self_idx, float(box_halfwidth), out,
            )
        else:
            _sum_k_3d(
                targets[:, 0], targets[:, 1], targets[:, 2],
                sources[:, 0], sources[:, 1], sources[:, 2],
                weights, kernel.kid, self_idx, float(box_halfwidth), out,
            )
        return kernel.sign * out
    return _np_sum_k(kernel, targets, sources, weights, self_idx, float(box_halfwidth))


def grad_convolution(
    kernel: KernelSpec,
    i: int,
    j: int,
    targets: np.ndarray,
    sources: np.ndarray,
    weights: np.ndarray,
    epsilon: float,
) -> np.ndarray:
    """sum over |x_t - y_s| > epsilon of d_i k_j (x_t - y_s) w_s."""
    if not (1 <= i <= kernel.n and 1 <= j <= kernel.n):
        raise DomainError(f"component indices must be in 1..{kernel.n}, got ({i}, {j})")
    targets, sources, weights = _prepare(targets, sources, weights, kernel.n)
    if sources.shape[0] == 0:
        return np.zeros(targets.shape[0])
    if HAVE_NUMBA and kernel.kid is not None:
        out = np.empty(targets.shape[0])
        if kernel.n == 2:
            _sum_p_2d(
                targets[:, 0], targets[:, 1], sources[:, 0], sources[:, 1],
                weights, kernel.kid, i, j, float(epsilon), out,
            )
        else:
            _sum_p_3d(
                targets[:, 0], targets[:, 1], targets[:, 2],
                sources[:, 0], sources[:, 1], sources[:, 2],
                weights, kernel.kid, i, j, float(epsilon), out,
            )
        return kernel.sign * out
    return _np_sum_p(kernel, i, j, targets, sources, weights, float(epsilon))
