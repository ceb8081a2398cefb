"""Uniform 1D grid, spectral kinetic propagation and quadrature.

All quantities are in harmonic-oscillator units (hbar = m = omega = 1), so
lengths are in a0 = sqrt(hbar / m omega), energies in hbar*omega and times
in 1/omega.  Fields are sampled so that ``sum(|f|**2) * dx`` is the norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np


class GridError(ValueError):
    """Raised when samples do not live on the grid they are used with."""


@dataclass(frozen=True)
class SpatialGrid:
    n_points: int = 256
    x_min: float = -12.0
    x_max: float = 12.0
    x: np.ndarray = field(init=False, repr=False, compare=False)
    k_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n_points)
        if n < 1 or n & (n - 1):
            raise GridError(f"n_points must be a positive power of two, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise GridError("x_max must exceed x_min")
        x = self.x_min + self.dx * np.arange(n)
        k = 2 * np.pi * np.fft.fftfreq(n, d=self.dx)
        x.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "k_values", k)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @classmethod
    def single_mode(cls) -> "SpatialGrid":
        """One-point grid with dx = 1: spatial dynamics switched off."""
        return cls(1, -0.5, 0.5)

    def check(self, values) -> np.ndarray:
        values = np.asarray(values)
        if values.shape[-1] != self.n_points:
            raise GridError(
                f"field has {values.shape[-1]} samples, grid has {self.n_points}")
        return values

    def integrate(self, f) -> np.ndarray | float:
        """Riemann sum of ``f`` over the last axis."""
        f = self.check(f)
        return f.sum(axis=-1) * self.dx

    def overlap(self, f, g) -> complex:
        """Return the inner product sum(conj(f) * g) * dx."""
        f = self.check(f)
        g = self.check(g)
        if f.shape != g.shape:
            raise GridError(f"shape mismatch {f.shape} vs {g.shape}")
        return np.sum(np.conj(f) * g, axis=-1) * self.dx

    def norm(self, f) -> np.ndarray | float:
        return self.integrate(np.abs(f) ** 2)

    def kinetic_phase(self, dt: complex, sign: int = -1) -> np.ndarray:
        """Spectral multiplier exp(sign * i * k**2/2 * dt).

        A pure-imaginary ``dt = -1j*dtau`` with the default sign gives the
        imaginary-time factor exp(-k**2/2 * dtau).
        """
        return np.exp(sign * 1j * 0.5 * self.k_values ** 2 * dt)

    def kinetic_half_step(self, f, dt: complex) -> np.ndarray:
        """Propagate ``f`` by the free-particle kinetic term for ``dt/2``."""
        f = self.check(f)
        return np.fft.ifft(np.fft.fft(f, axis=-1) * self.kinetic_phase(dt / 2),
                           axis=-1)

    def boundary_fraction(self, f, edge: int = 2) -> float:
        """Largest |f| among the ``edge`` outermost points relative to max |f|."""
        a = np.abs(self.check(f))
        peak = a.max()
        if peak == 0 or self.n_points <= 2 * edge:
            return 0.0
        return float(max(a[..., :edge].max(), a[..., -edge:].max()) / peak)

    def warn_if_truncated(self, f, tol: float = 1e-8) -> bool:
        frac = self.boundary_fraction(f)
        if frac > tol:
            warnings.warn(
                f"field reaches {frac:.2e} of its peak at the grid boundary; "
                "widen the grid", RuntimeWarning, stacklevel=2)
            return True
        return False

    def as_dict(self) -> dict:
        return {"n_points": self.n_points, "x_min": self.x_min, "x_max": self.x_max}


def gaussian(grid: SpatialGrid, center: float = 0.0, width: float = 1.0) -> np.ndarray:
    """Normalized Gaussian pi**(-1/4) w**(-1/2) exp(-(x-c)**2 / 2w**2)."""
    x = grid.x - center
    return (np.pi ** -0.25 / np.sqrt(width)
            * np.exp(-x ** 2 / (2 * width ** 2))).astype(complex)
