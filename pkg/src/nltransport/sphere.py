"""Quadrature rules on the unit circle and unit sphere.

Used for surface integrals of homogeneous kernels: delta-mass correction
matrices and zero-spherical-mean diagnostics. Both rules converge
spectrally for integrands smooth on the surface.
"""

from __future__ import annotations

import numpy as np

__all__ = ["surface_rule", "unit_circle_rule", "unit_sphere_rule", "SPHERE_AREA"]

# |S^{n-1}| for n = 2, 3
SPHERE_AREA = {2: 2.0 * np.pi, 3: 4.0 * np.pi}


def unit_circle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite trapezoid rule on the unit circle.

    Returns (points, weights) with points of shape (order, 2); the rule
    integrates trigonometric polynomials of degree < order exactly.
    """
    if order < 4:
        raise ValueError(f"quadrature order must be >= 4, got {order}")
    theta = 2.0 * np.pi * np.arange(order) / order
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    w = np.full(order, 2.0 * np.pi / order)
    return pts, w


def unit_sphere_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Product Gauss-Legendre (polar) x trapezoid (azimuth) rule on S^2.

    `order` azimuthal nodes and order//2 Gauss nodes in z = cos(theta);
    the surface measure is dz dphi, so the product weights integrate
    dsigma exactly for separable polynomial integrands.
    """
    if order < 4:
        raise ValueError(f"quadrature order must be >= 4, got {order}")
    n_phi = order
    n_z = max(order // 2, 2)
    z, wz = np.polynomial.legendre.leggauss(n_z)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    s = np.sqrt(1.0 - z**2)
    # outer product lattice, C-order: z major, phi minor
    pts = np.empty((n_z * n_phi, 3))
    pts[:, 0] = np.outer(s, np.cos(phi)).ravel()
    pts[:, 1] = np.outer(s, np.sin(phi)).ravel()
    pts[:, 2] = np.outer(z, np.ones(n_phi)).ravel()
    w = np.outer(wz, np.full(n_phi, wphi)).ravel()
    return pts, w


def surface_rule(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature rule for the unit sphere in R^n, n in {2, 3}."""
    if n == 2:
        return unit_circle_rule(order)
    if n == 3:
        return unit_sphere_rule(order)
    raise ValueError(f"dimension must be 2 or 3, got {n}")
