"""Convolution kernels homogeneous of degree -(n-1) and their calculus.

Built-ins (all smooth away from the origin, all odd):

* ``biot-savart-2d``     k = rot90 grad N,  N = (1/2pi) log|x|
* ``grad-newtonian-2d``  k = grad N
* ``grad-newtonian-3d``  k = grad N,        N = -1/(4pi |x|)
* ``qg-3d``              k = L(grad N),     L(x) = (-x2, x1, 0)

Each kernel carries closed-form pointwise derivatives d_i k_j (degree -n,
zero spherical mean) and a delta-mass correction matrix
c_ij = int_{|s|=1} k_j(s) s_i dsigma(s), so that distributionally
d_i k_j = p.v. d_i k_j + c_ij delta_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, NumericalError
from .sphere import surface_rule

__all__ = [
    "KernelSpec",
    "DiracCorrectionMatrix",
    "SphericalMeanReport",
    "get_kernel",
    "register_kernel",
    "builtin_kernel_names",
    "eval_kernel",
    "eval_grad_pv",
    "dirac_correction",
    "check_spherical_mean_zero",
    "homogeneity_residual",
]

# integer codes for the jitted direct-sum loops (summation.py)
KID_BIOT_SAVART_2D = 0
KID_GRAD_NEWTONIAN_2D = 1
KID_GRAD_NEWTONIAN_3D = 2
KID_QG_3D = 3


@dataclass(frozen=True)
class KernelSpec:
    """A kernel k: R^n \\ {0} -> R^n, homogeneous of degree -(n-1).

    ``eval`` maps an (m, n) array of nonzero points to (m, n) kernel values;
    ``grad_pv`` maps (i, j, points) to the pointwise derivative d_i k_j,
    1-based indices, valid away from the origin.
    """

    name: str
    n: int
    eval: Callable[[np.ndarray], np.ndarray]
    grad_pv: Callable[[int, int, np.ndarray], np.ndarray]
    parity: str = "odd"  # {"odd", "even", "none"}; metadata
    sign: float = 1.0
    kid: int | None = field(default=None, compare=False)  # fast-path code

    def with_sign(self, sign: float) -> "KernelSpec":
        if sign == self.sign:
            return self
        if sign not in (+1.0, -1.0):
            raise DomainError(f"kernel sign must be +1 or -1, got {sign}")
        base_eval, base_grad = self.eval, self.grad_pv
        flip = sign / self.sign
        return KernelSpec(
            name=self.name,
            n=self.n,
            eval=lambda x: flip * base_eval(x),
            grad_pv=lambda i, j, x: flip * base_grad(i, j, x),
            parity=self.parity,
            sign=sign,
            kid=self.kid,
        )


@dataclass(frozen=True)
class DiracCorrectionMatrix:
    """c_ij = int_{|s|=1} k_j(s) s_i dsigma(s) with a refinement error estimate."""

    c: np.ndarray
    quadrature_order: int
    estimated_error: float


@dataclass(frozen=True)
class SphericalMeanReport:
    """Diagnostic for |int_{|s|=1} d_i k_j dsigma| (p.v. existence prerequisite)."""

    kernel: str
    i: int
    j: int
    mean: float
    estimated_error: float
    quadrature_order: int
    passed: bool
    tolerance: float


def _as_points(x: np.ndarray, n: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != n:
        raise DomainError(f"expected points in R^{n}, got shape {pts.shape}")
    return pts


def _check_nonzero(pts: np.ndarray) -> np.ndarray:
    r2 = np.sum(pts * pts, axis=-1)
    if np.any(r2 == 0.0):
        raise DomainError("kernel singular at origin")
    return r2


# -- built-in closed forms ---------------------------------------------------

def _bs2d_eval(pts: np.ndarray) -> np.ndarray:
    r2 = np.sum(pts * pts, axis=-1)
    c = 1.0 / (2.0 * np.pi * r2)
    return np.stack([-pts[..., 1] * c, pts[..., 0] * c], axis=-1)


def _bs2d_grad(i: int, j: int, pts: np.ndarray) -> np.ndarray:
    x1, x2 = pts[..., 0], pts[..., 1]
    r2 = x1 * x1 + x2 * x2
    r4 = r2 * r2
    if (i, j) == (1, 1):
        return x1 * x2 / (np.pi * r4)
    if (i, j) in ((1, 2), (2, 1)):
        return (x2 * x2 - x1 * x1) / (2.0 * np.pi * r4)
    return -x1 * x2 / (np.pi * r4)  # (2, 2)


def _gn2d_eval(pts: np.ndarray) -> np.ndarray:
    r2 = np.sum(pts * pts, axis=-1)
    return pts / (2.0 * np.pi * r2[..., None])


def _gn2d_grad(i: int, j: int, pts: np.ndarray) -> np.ndarray:
    xi, xj = pts[..., i - 1], pts[..., j - 1]
    r2 = np.sum(pts * pts, axis=-1)
    delta = 1.0 if i == j else 0.0
    return (delta * r2 - 2.0 * xi * xj) / (2.0 * np.pi * r2 * r2)


def _gn3d_eval(pts: np.ndarray) -> np.ndarray:
    r2 = np.sum(pts * pts, axis=-1)
    r3 = r2 * np.sqrt(r2)
    return pts / (4.0 * np.pi * r3[..., None])


def _gn3d_grad(i: int, j: int, pts: np.ndarray) -> np.ndarray:
    xi, xj = pts[..., i - 1], pts[..., j - 1]
    r2 = np.sum(pts * pts, axis=-1)
    r5 = r2 * r2 * np.sqrt(r2)
    delta = 1.0 if i == j else 0.0
    return (delta * r2 - 3.0 * xi * xj) / (4.0 * np.pi * r5)


def _qg3d_eval(pts: np.ndarray) -> np.ndarray:
    r2 = np.sum(pts * pts, axis=-1)
    r3 = r2 * np.sqrt(r2)
    c = 1.0 / (4.0 * np.pi * r3)
    return np.stack([-pts[..., 1] * c, pts[..., 0] * c, np.zeros_like(c)], axis=-1)


def _qg3d_grad(i: int, j: int, pts: np.ndarray) -> np.ndarray:
    if j == 3:
        return np.zeros(pts.shape[:-1])
    xi = pts[..., i - 1]
    r2 = np.sum(pts * pts, axis=-1)
    r5 = r2 * r2 * np.sqrt(r2)
    if j == 1:
        delta = 1.0 if i == 2 else 0.0
        return (3.0 * xi * pts[..., 1] - delta * r2) / (4.0 * np.pi * r5)
    delta = 1.0 if i == 1 else 0.0
    return (delta * r2 - 3.0 * xi * pts[..., 0]) / (4.0 * np.pi * r5)


_BUILTINS: dict[str, KernelSpec] = {}
_REGISTRY: dict[str, KernelSpec] = {}


def _register_builtin(name: str, n: int, ev, gr, kid: int) -> None:
    _BUILTINS[name] = KernelSpec(name=name, n=n, eval=ev, grad_pv=gr, parity="odd", kid=kid)


_register_builtin("biot-savart-2d", 2, _bs2d_eval, _bs2d_grad, KID_BIOT_SAVART_2D)
_register_builtin("grad-newtonian-2d", 2, _gn2d_eval, _gn2d_grad, KID_GRAD_NEWTONIAN_2D)
_register_builtin("grad-newtonian-3d", 3, _gn3d_eval, _gn3d_grad, KID_GRAD_NEWTONIAN_3D)
_register_builtin("qg-3d", 3, _qg3d_eval, _qg3d_grad, KID_QG_3D)


def builtin_kernel_names() -> list[str]:
    return sorted(_BUILTINS)


def homogeneity_residual(kernel: KernelSpec, samples: int = 100, seed: int = 0) -> float:
    """Max relative defect of k(lam x) = lam^{-(n-1)} k(x) over random (x, lam)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(samples, kernel.n))
    r = np.linalg.norm(x, axis=1)
    x = x[r > 0.3]
    lam = rng.uniform(0.1, 10.0, size=x.shape[0])
    kx = kernel.eval(x)
    klx = kernel.eval(lam[:, None] * x)
    expected = kx * lam[:, None] ** (-(kernel.n - 1))
    scale = np.maximum(np.linalg.norm(kx, axis=1), 1e-300)
    return float(np.max(np.linalg.norm(klx - expected, axis=1) / scale))


def register_kernel(
    name: str,
    n: int,
    eval_fn: Callable[[np.ndarray], np.ndarray],
    grad_pv_fn: Callable[[int, int, np.ndarray], np.ndarray],
    parity: str = "none",
    homogeneity_tol: float = 1e-8,
) -> KernelSpec:
    """Register a user kernel; homogeneity is checked by sampling, not assumed."""
    if n not in (2, 3):
        raise DomainError(f"dimension must be 2 or 3, got {n}")
    spec = KernelSpec(name=name, n=n, eval=eval_fn, grad_pv=grad_pv_fn, parity=parity)
    res = homogeneity_residual(spec)
    if res > homogeneity_tol:
        raise DomainError(
            f"kernel {name!r} fails degree -(n-1) homogeneity: residual {res:.3e}"
        )
    _REGISTRY[name] = spec
    return spec


def get_kernel(name: str, sign: float = 1.0) -> KernelSpec:
    spec = _BUILTINS.get(name) or _REGISTRY.get(name)
    if spec is None:
        known = ", ".join(builtin_kernel_names())
        raise DomainError(f"unknown kernel {name!r} (built-ins: {known})")
    return spec.with_sign(sign)


# -- operations ---------------------------------------------------------------

def eval_kernel(kernel: KernelSpec, x: np.ndarray) -> np.ndarray:
    """k(x) for nonzero x; accepts a single point or a batch."""
    pts = _as_points(x, kernel.n)
    _check_nonzero(pts)
    out = kernel.eval(pts)
    return out[0] if np.asarray(x).ndim == 1 else out


def eval_grad_pv(kernel: KernelSpec, i: int, j: int, x: np.ndarray) -> np.ndarray:
    """Pointwise d_i k_j(x) away from the origin, 1-based component indices."""
    if not (1 <= i <= kernel.n and 1 <= j <= kernel.n):
        raise DomainError(f"component indices must be in 1..{kernel.n}, got ({i}, {j})")
    pts = _as_points(x, kernel.n)
    _check_nonzero(pts)
    out = kernel.grad_pv(i, j, pts)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def _surface_integral_c(kernel: KernelSpec, order: int) -> np.ndarray:
    pts, w = surface_rule(kernel.n, order)
    kv = kernel.eval(pts)  # (m, n)
    # c[i, j] = sum_m w_m k_j(s_m) s_i(s_m)
    return np.einsum("m,mi,mj->ij", w, pts, kv)


def dirac_correction(kernel: KernelSpec, quadrature_order: int = 256) -> DiracCorrectionMatrix:
    """Delta-mass matrix c_ij by surface quadrature with refinement error estimate."""
    if quadrature_order < 4:
        raise DomainError(f"quadrature_order must be >= 4, got {quadrature_order}")
    orders = [max(quadrature_order // 4, 4), max(quadrature_order // 2, 4), quadrature_order]
    mats = [_surface_integral_c(kernel, o) for o in orders]
    err_prev = float(np.max(np.abs(mats[1] - mats[0])))
    err = float(np.max(np.abs(mats[2] - mats[1])))
    if err > max(2.0 * err_prev, 1e-10) and err > 1e-8:
        raise NumericalError(
            f"dirac correction for {kernel.name!r} not converging under refinement: "
            f"error {err_prev:.3e} -> {err:.3e}"
        )
    return DiracCorrectionMatrix(c=mats[2], quadrature_order=quadrature_order, estimated_error=err)


def check_spherical_mean_zero(
    kernel: KernelSpec, i: int, j: int, quadrature_order: int = 256, tolerance: float = 1e-8
) -> SphericalMeanReport:
    """Report |int_{|s|=1} d_i k_j dsigma|; must vanish for the p.v. to exist."""
    if not (1 <= i <= kernel.n and 1 <= j <= kernel.n):
        raise DomainError(f"component indices must be in 1..{kernel.n}, got ({i}, {j})")
    if quadrature_order < 4:
        raise DomainError(f"quadrature_order must be >= 4, got {quadrature_order}")
    pts, w = surface_rule(kernel.n, quadrature_order)
    pts_c, w_c = surface_rule(kernel.n, max(quadrature_order // 2, 4))
    mean = float(np.dot(w, kernel.grad_pv(i, j, pts)))
    mean_c = float(np.dot(w_c, kernel.grad_pv(i, j, pts_c)))
    err = abs(mean - mean_c)
    return SphericalMeanReport(
        kernel=kernel.name,
        i=i,
        j=j,
        mean=mean,
        estimated_error=err,
        quadrature_order=quadrature_order,
        passed=abs(mean) <= tolerance,
        tolerance=tolerance,
    )


def kernel_surface_mean(kernel: KernelSpec, order: int = 128) -> np.ndarray:
    """int_{|s|=1} k(s) dsigma(s); zero for odd kernels. Used by the
    polar-correction rule for the singular quadrature cell."""
    pts, w = surface_rule(kernel.n, order)
    return w @ kernel.eval(pts)
