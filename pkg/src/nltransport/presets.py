"""Initial-density presets and perturbation shapes.

All presets are radial profiles with exactly compact support (C-infinity
cutoffs, except the cusp whose support edge is a Lipschitz kink by
design). Smoothness keeps the shipped data inside the little spaces; the
cusp width is the roughness knob for approaching the space boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import DomainError
from .synth import smooth_bump, smooth_step

__all__ = ["DensityProfile", "make_profile", "make_perturbation", "PROFILE_NAMES"]

PROFILE_NAMES = ("gaussian", "mollified-disk", "ring", "cusp", "zero")


@dataclass(frozen=True)
class DensityProfile:
    name: str
    n: int
    fn: Callable[[np.ndarray], np.ndarray]
    params: dict = dc_field(default_factory=dict)
    support_radius: float = np.inf

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.fn(pts)


def _radii(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((points - center[None, :]) ** 2, axis=1))


def make_profile(name: str, n: int, **params) -> DensityProfile:
    center = np.asarray(params.pop("center", np.zeros(n)), dtype=float)
    if center.shape != (n,):
        raise DomainError(f"profile center must have dimension {n}")
    amplitude = float(params.pop("amplitude", 1.0))

    if name == "gaussian":
        sigma = float(params.pop("sigma", 0.3))
        cutoff = float(params.pop("cutoff", 2.75 * sigma))
        taper = float(params.pop("taper", 0.25 * cutoff))

        def fn(pts, _s=sigma, _c=cutoff, _t=taper):
            r = _radii(pts, center)
            return amplitude * np.exp(-((r / _s) ** 2)) * smooth_step(r, _c - _t, _c)

        support = cutoff
    elif name == "mollified-disk":
        radius = float(params.pop("radius", 0.4))
        width = float(params.pop("width", 0.08))
        if width >= radius:
            raise DomainError("mollified-disk width must be smaller than its radius")

        def fn(pts, _r=radius, _w=width):
            r = _radii(pts, center)
            return amplitude * smooth_step(r, _r - _w, _r)

        support = radius
    elif name == "ring":
        r0 = float(params.pop("r0", 0.5))
        width = float(params.pop("width", 0.12))

        def fn(pts, _r0=r0, _w=width):
            r = _radii(pts, center)
            return amplitude * np.exp(-(((r - _r0) / _w) ** 2)) * smooth_step(
                np.abs(r - _r0), 2.5 * _w, 3.5 * _w
            )

        support = r0 + 3.5 * width
    elif name == "cusp":
        extent = float(params.pop("extent", 0.5))
        width = float(params.pop("width", 0.05))

        def fn(pts, _e=extent, _w=width):
            r = _radii(pts, center)
            return amplitude * np.maximum(_e - np.sqrt(r * r + _w * _w), 0.0)

        support = float(np.sqrt(max(extent**2 - width**2, 0.0)))
    elif name == "zero":

        def fn(pts):
            return np.zeros(pts.shape[0])

        support = 0.0
    else:
        raise DomainError(f"unknown rho0 preset {name!r} (choose from {PROFILE_NAMES})")
    if params:
        raise DomainError(f"unknown parameters for preset {name!r}: {sorted(params)}")
    return DensityProfile(name=name, n=n, fn=fn, params={"amplitude": amplitude}, support_radius=support)


def profile_from_samples(points: np.ndarray, values: np.ndarray, n: int) -> DensityProfile:
    """Density profile interpolated from scattered samples (tapered
    inverse-distance over the 2^n nearest samples, zero far away)."""
    from scipy.spatial import cKDTree

    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    if points.shape[1] != n:
        raise DomainError(f"custom samples must live in R^{n}")
    if points.shape[0] != values.shape[0]:
        raise DomainError("custom sample points/values length mismatch")
    tree = cKDTree(points)
    nn = tree.query(points, k=2)[0][:, 1]
    reach = 2.0 * float(np.median(nn))
    k = 2**n

    def fn(pts):
        dist, idx = tree.query(pts, k=k + 1)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        ring = dist[:, -1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = (1.0 / dist[:, :k]) * np.maximum(1.0 - dist[:, :k] / ring, 0.0) ** 2
        w[~np.isfinite(w)] = 0.0
        wsum = np.sum(w, axis=1)
        wsum[wsum == 0.0] = 1.0
        out = np.sum(w * values[idx[:, :k]], axis=1) / wsum
        out[dist[:, 0] <= 1e-13] = values[idx[dist[:, 0] <= 1e-13, 0]]
        out[dist[:, 0] > reach] = 0.0
        return out

    support = float(np.max(np.linalg.norm(points[values != 0.0], axis=1), initial=0.0) + reach)
    return DensityProfile(name="custom-csv", n=n, fn=fn, params={}, support_radius=support)


def make_perturbation(n: int, center=None, width: float = 0.15, amplitude: float = 1.0) -> DensityProfile:
    """Smooth compactly supported off-center bump used by continuity sweeps."""
    if center is None:
        center = np.full(n, 0.2)
        center[1:] = 0.1
    center = np.asarray(center, dtype=float)
    if center.shape != (n,):
        raise DomainError(f"perturbation center must have dimension {n}")

    def fn(pts):
        r = _radii(pts, center)
        return amplitude * smooth_bump(r, 2.0 * width)

    return DensityProfile(
        name="offset-bump",
        n=n,
        fn=fn,
        params={"amplitude": amplitude, "width": width},
        support_radius=float(np.linalg.norm(center) + 2.0 * width),
    )
