"""Synthetic smooth test functions with analytic evaluators.

Random fields are finite Fourier series with decaying coefficients plus
Gaussian bumps, compactly truncated by a C-infinity cutoff; they can be
evaluated at arbitrary points, which the composition checks need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["smooth_step", "smooth_bump", "RandomSmoothField", "SineDiffeo", "random_smooth_field"]


def _q(u: np.ndarray) -> np.ndarray:
    """exp(-1/u) for u > 0, zero otherwise; the standard C-infinity glue."""
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(s: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """C-infinity step: exactly 1 for s <= lo, exactly 0 for s >= hi."""
    s = np.asarray(s, dtype=float)
    u = (s - lo) / (hi - lo)
    a = _q(1.0 - u)
    b = _q(u)
    return a / (a + b + 1e-300)


def smooth_bump(r: np.ndarray, radius: float) -> np.ndarray:
    """C-infinity bump supported exactly in |r| < radius, equal 1 at 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < radius
    u = (r[inside] / radius) ** 2
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u))
    return out


@dataclass(frozen=True)
class RandomSmoothField:
    """1D compactly supported smooth function on [-half_width, half_width]."""

    amps: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray
    bump_amps: np.ndarray
    bump_centers: np.ndarray
    bump_widths: np.ndarray
    half_width: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, w, p in zip(self.amps, self.freqs, self.phases):
            out = out + a * np.cos(w * x + p)
        for a, c, w in zip(self.bump_amps, self.bump_centers, self.bump_widths):
            out = out + a * np.exp(-(((x - c) / w) ** 2))
        return out * smooth_step(np.abs(x), 0.7 * self.half_width, self.half_width)


def random_smooth_field(rng: np.random.Generator, half_width: float = np.pi) -> RandomSmoothField:
    nmodes = 5
    k = np.arange(1, nmodes + 1)
    return RandomSmoothField(
        amps=rng.uniform(-1.0, 1.0, nmodes) / k**2,
        freqs=k * np.pi / half_width,
        phases=rng.uniform(0.0, 2.0 * np.pi, nmodes),
        bump_amps=rng.uniform(-0.5, 0.5, 2),
        bump_centers=rng.uniform(-0.5 * half_width, 0.5 * half_width, 2),
        bump_widths=rng.uniform(0.2, 0.6, 2) * half_width / np.pi,
        half_width=half_width,
    )


@dataclass(frozen=True)
class SineDiffeo:
    """X(a) = a + amp sin(freq a + phase); invertible when |amp freq| < 1."""

    amp: float
    freq: float
    phase: float

    def __post_init__(self):
        if abs(self.amp * self.freq) >= 1.0:
            raise ValueError("|amp * freq| must be < 1 for invertibility")

    def __call__(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return a + self.amp * np.sin(self.freq * a + self.phase)

    def deriv(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return 1.0 + self.amp * self.freq * np.cos(self.freq * a + self.phase)

    @property
    def sup_deriv(self) -> float:
        """Analytic sup of |X'| over the whole line."""
        return 1.0 + abs(self.amp * self.freq)

    @property
    def inf_deriv(self) -> float:
        return 1.0 - abs(self.amp * self.freq)


def random_diffeo(rng: np.random.Generator, strength: float = 0.5) -> SineDiffeo:
    freq = rng.uniform(0.5, 2.0)
    amp = strength * rng.uniform(0.2, 1.0) / freq
    return SineDiffeo(amp=amp, freq=freq, phase=rng.uniform(0.0, 2.0 * np.pi))
