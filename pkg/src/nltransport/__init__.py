"""Lagrangian simulation and verification harness for non-local transport
equations rho_t + v . grad rho = 0 with v = k * rho."""

__version__ = "0.1.0"

from .errors import (
    DomainError,
    InadmissibleStateError,
    NumericalError,
    PoisonedStateError,
    StepRejectedError,
    UnsupportedStructureError,
)
from .kernels import KernelSpec, builtin_kernel_names, get_kernel, register_kernel

__all__ = [
    "__version__",
    "DomainError",
    "InadmissibleStateError",
    "NumericalError",
    "PoisonedStateError",
    "StepRejectedError",
    "UnsupportedStructureError",
    "KernelSpec",
    "builtin_kernel_names",
    "get_kernel",
    "register_kernel",
]
