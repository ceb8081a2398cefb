"""Mean-field preparation and evolution of the two mode functions.

The initial state is the ground state of a single-component condensate with
all N atoms in state a.  A pi/2 pulse puts every atom in an equal
superposition, so both components start in the same normalized mode.  The
modes then evolve under coupled Gross-Pitaevskii equations in which each
component carries N/2 atoms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
from pathlib import Path

import numpy as np

from .grid import SpatialGrid
from .twomode import CouplingSet

SPECIES = ("a", "b")


class GroundStateError(RuntimeError):
    def __init__(self, message, last_delta):
        super().__init__(f"{message} (last energy change {last_delta:.3e})")
        self.last_delta = last_delta


class NumericBlowUp(FloatingPointError):
    def __init__(self, component, t=None):
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"non-finite values in component {component}{where}")
        self.component = component


@dataclass(frozen=True)
class TrapConfig:
    """Harmonic traps V_i = omega**2 (x - x_offset_i)**2 / 2 of equal curvature."""
    omega: float = 1.0
    x_offset_a: float = 0.0
    x_offset_b: float = 0.0

    def potential(self, grid: SpatialGrid, species: str) -> np.ndarray:
        offset = self.x_offset_a if species == "a" else self.x_offset_b
        return 0.5 * self.omega ** 2 * (grid.x - offset) ** 2

    def potentials(self, grid: SpatialGrid) -> np.ndarray:
        return np.stack([self.potential(grid, s) for s in SPECIES])


@dataclass
class ModePair:
    phi_a: np.ndarray
    phi_b: np.ndarray
    N: float
    grid: SpatialGrid
    t: float = 0.0

    @property
    def n_per_component(self) -> float:
        return self.N / 2

    def stacked(self) -> np.ndarray:
        return np.stack([self.phi_a, self.phi_b])

    def norms(self) -> tuple[float, float]:
        return float(self.grid.norm(self.phi_a)), float(self.grid.norm(self.phi_b))


def _potentials(trap, grid):
    if trap is None:
        return np.zeros((2, grid.n_points))
    return trap.potentials(grid)


def single_component_energy(phi, grid, V, gN):
    """Energy per particle and chemical potential of a single condensate."""
    dphi = np.fft.ifft(1j * grid.k_values * np.fft.fft(phi))
    kin = grid.integrate(0.5 * np.abs(dphi) ** 2)
    pot = grid.integrate(V * np.abs(phi) ** 2)
    inter = grid.integrate(np.abs(phi) ** 4)
    energy = kin + pot + 0.5 * gN * inter
    mu = kin + pot + gN * inter
    return float(energy), float(mu)


def ground_state(trap: TrapConfig, g: CouplingSet, N: float, grid: SpatialGrid,
                 tol: float = 1e-13, dtaus=(0.05, 0.01, 0.002, 0.0005),
                 max_iter: int = 200_000, check_every: int = 20,
                 guess=None) -> np.ndarray:
    """Relax to the single-component ground state with all atoms in state a.

    Imaginary-time split-step propagation with renormalization after every
    step.  Each stage of ``dtaus`` runs until the energy per particle changes
    by less than ``tol`` per iteration.
    """
    if g.g_aa < 0:
        raise ValueError("ground state requires g_aa >= 0")
    if N <= 0:
        raise ValueError("N must be positive")
    V = trap.potential(grid, "a")
    gN = g.g_aa * N
    phi = (np.exp(-0.5 * (grid.x - trap.x_offset_a) ** 2).astype(complex)
           if guess is None else np.array(guess, dtype=complex))
    phi /= np.sqrt(grid.norm(phi))
    n_iter = 0
    for dtau in dtaus:
        kin = np.exp(-0.25 * grid.k_values ** 2 * dtau)
        energy, _ = single_component_energy(phi, grid, V, gN)
        delta = np.inf
        while True:
            for _ in range(check_every):
                phi = np.fft.ifft(kin * np.fft.fft(phi))
                phi *= np.exp(-dtau * (V + gN * np.abs(phi) ** 2))
                phi = np.fft.ifft(kin * np.fft.fft(phi))
                phi /= np.sqrt(grid.norm(phi))
            n_iter += check_every
            new_energy, _ = single_component_energy(phi, grid, V, gN)
            delta = abs(new_energy - energy) / check_every
            energy = new_energy
            if delta < tol:
                break
            if n_iter >= max_iter:
                raise GroundStateError("imaginary-time relaxation did not converge", delta)
    # fix the global phase so the state is real and positive at its peak
    phi *= np.exp(-1j * np.angle(phi[np.argmax(np.abs(phi))]))
    grid.warn_if_truncated(phi)
    return phi


def pi_half_pulse(phi0: np.ndarray, N: float, grid: SpatialGrid) -> ModePair:
    """Both components start in ``phi0`` with N/2 atoms each on average."""
    phi0 = np.asarray(phi0, dtype=complex)
    return ModePair(phi0.copy(), phi0.copy(), N, grid)


class _CoupledSplitStep:
    """Strang splitting for the coupled equations; shared by stepping and evolution."""

    def __init__(self, grid, trap, g, N, dt):
        self.grid = grid
        self.dt = dt
        self.half_kin = grid.kinetic_phase(dt / 2)
        self.full_kin = grid.kinetic_phase(dt)
        self.V = _potentials(trap, grid)
        self.G = g.matrix * (N / 2)

    def kinetic(self, phi, full):
        mult = self.full_kin if full else self.half_kin
        return np.fft.ifft(np.fft.fft(phi, axis=-1) * mult, axis=-1)

    def interaction(self, phi):
        dens = np.abs(phi) ** 2
        U = self.V + np.einsum("ij,jx->ix", self.G.real, dens)
        return phi * np.exp(-1j * self.dt * U)

    def advance(self, phi, n_steps):
        if n_steps == 0:
            return phi
        phi = self.kinetic(phi, full=False)
        for step in range(n_steps):
            phi = self.interaction(phi)
            phi = self.kinetic(phi, full=step < n_steps - 1)
        return phi


def _check_finite(phi, t=None):
    for i, s in enumerate(SPECIES):
        if not np.all(np.isfinite(phi[i])):
            raise NumericBlowUp(s, t)


def gpe_step(modes: ModePair, trap: TrapConfig, g: CouplingSet, dt: float) -> ModePair:
    """Advance both mode functions by one split step."""
    stepper = _CoupledSplitStep(modes.grid, trap, g, modes.N, dt)
    phi = stepper.advance(modes.stacked(), 1)
    _check_finite(phi, modes.t + dt)
    return ModePair(phi[0], phi[1], modes.N, modes.grid, modes.t + dt)


def steps_between(sample_times, dt: float, t0: float = 0.0) -> list[int]:
    """Step counts separating consecutive sample times on a grid of ``dt``."""
    counts = []
    prev = t0
    for t in sample_times:
        n = (t - prev) / dt
        if n < -1e-9 or abs(n - round(n)) > 1e-6 * max(1.0, abs(n)):
            raise ValueError(f"sample time {t} is not on the dt={dt} step grid")
        counts.append(int(round(n)))
        prev = t
    return counts


@dataclass
class ModeEvolution:
    """Mode functions sampled along a GPE run."""
    times: np.ndarray
    phi: np.ndarray  # (n_times, 2, n_points)
    N: float
    grid: SpatialGrid
    dt: float
    trap: TrapConfig | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def modes(self, index: int) -> ModePair:
        return ModePair(self.phi[index, 0], self.phi[index, 1], self.N, self.grid,
                        float(self.times[index]))

    def __iter__(self):
        return (self.modes(i) for i in range(len(self)))

    def position(self) -> np.ndarray:
        """Center of mass of each component, shape (n_times, 2)."""
        return self.grid.integrate(self.grid.x * np.abs(self.phi) ** 2)

    def rms_width(self) -> np.ndarray:
        dens = np.abs(self.phi) ** 2
        x = self.grid.x
        m1 = self.grid.integrate(x * dens)
        m2 = self.grid.integrate(x ** 2 * dens)
        return np.sqrt(m2 - m1 ** 2)

    def write_csv(self, directory) -> list[Path]:
        """One CSV per sample time with columns x, Re/Im phi_a, Re/Im phi_b."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, t in enumerate(self.times):
            path = directory / f"modes_{i:04d}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow([f"# t={t:.10g}"])
                w.writerow(["x", "re_phi_a", "im_phi_a", "re_phi_b", "im_phi_b"])
                pa, pb = self.phi[i]
                for row in zip(self.grid.x, pa.real, pa.imag, pb.real, pb.imag):
                    w.writerow([f"{v:.17g}" for v in row])
            paths.append(path)
        return paths


def evolve_modes(modes: ModePair, trap: TrapConfig, g: CouplingSet, dt: float,
                 sample_times) -> ModeEvolution:
    """Integrate the coupled equations and record the modes at ``sample_times``."""
    sample_times = np.asarray(sample_times, dtype=float)
    stepper = _CoupledSplitStep(modes.grid, trap, g, modes.N, dt)
    phi = modes.stacked()
    out = np.empty((len(sample_times), 2, modes.grid.n_points), dtype=complex)
    for i, n in enumerate(steps_between(sample_times, dt, modes.t)):
        phi = stepper.advance(phi, n)
        _check_finite(phi, sample_times[i])
        out[i] = phi
    return ModeEvolution(sample_times, out, modes.N, modes.grid, dt, trap)


def mean_field_energy(modes: ModePair, trap: TrapConfig, g: CouplingSet) -> float:
    """Total energy of the coupled mean-field functional, N/2 atoms per component."""
    grid = modes.grid
    phi = modes.stacked()
    n = modes.N / 2
    dphi = np.fft.ifft(1j * grid.k_values * np.fft.fft(phi, axis=-1), axis=-1)
    V = _potentials(trap, grid)
    dens = np.abs(phi) ** 2
    single = grid.integrate(0.5 * np.abs(dphi) ** 2 + V * dens).sum() * n
    G = g.matrix.real
    inter = 0.5 * n ** 2 * sum(G[i, j] * grid.integrate(dens[i] * dens[j])
                               for i in range(2) for j in range(2))
    return float(single + inter)
