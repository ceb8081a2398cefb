"""Positive-P Langevin engine for the two-component field.

Each realization carries four c-number fields psi[s, m] (s = a, b; m = 1, 2
stored at index 0, 1) standing for the annihilation field and an independent
stand-in for its adjoint.  They obey noisy Gross-Pitaevskii equations

    d psi_sm = (-1)^m i dt [h_s + g_ss psi_s2 psi_s1 + g_ab psi_s'2 psi_s'1] psi_sm + dW_sm

with Ito noise <dW_sm(x) dW_tn(x')> = delta_mn (-1)^m i dt g_st psi_sm psi_tm delta(x-x').
Integration splits off the exact spectral kinetic propagator; the local part
uses an exponential Euler-Maruyama step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import csv

import numpy as np

from .grid import SpatialGrid
from .gpe import ModePair, TrapConfig, steps_between, _potentials
from .twomode import CouplingSet

# (-1)^m for m = 1, 2
SIGNS = np.array([-1.0, 1.0])
NOISE_BRANCH = np.sqrt(SIGNS * 1j)  # principal roots of -i and +i


@dataclass
class TrajectoryState:
    """Fields of one or many realizations, shape (..., 2 species, 2, n_points)."""
    psi: np.ndarray
    grid: SpatialGrid
    t: float = 0.0
    diverged: bool = False
    divergence_time: float | None = None

    @property
    def psi_a1(self):
        return self.psi[..., 0, 0, :]

    @property
    def psi_a2(self):
        return self.psi[..., 0, 1, :]

    @property
    def psi_b1(self):
        return self.psi[..., 1, 0, :]

    @property
    def psi_b2(self):
        return self.psi[..., 1, 1, :]

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(self.psi.copy(), self.grid, self.t, self.diverged,
                               self.divergence_time)


def init_coherent(modes: ModePair, N: float | None = None) -> TrajectoryState:
    """Coherent state with N/2 atoms in each mode: a point mass in positive-P."""
    N = modes.N if N is None else N
    amp = np.sqrt(N / 2)
    psi = np.empty((2, 2, modes.grid.n_points), dtype=complex)
    psi[0, 0] = amp * modes.phi_a
    psi[1, 0] = amp * modes.phi_b
    psi[:, 1] = np.conj(psi[:, 0])
    return TrajectoryState(psi, modes.grid)


class LangevinStepper:
    """Split-step integrator acting on stacks of trajectories."""

    def __init__(self, grid: SpatialGrid, trap: TrapConfig | None, g: CouplingSet, dt: float):
        self.grid = grid
        self.dt = dt
        self.V = _potentials(trap, grid)          # (2, nx)
        self.G = g.matrix
        self.S = g.noise_factor
        self.has_noise = bool(np.any(self.G != 0))
        self.free = grid.n_points == 1
        k2 = 0.5 * grid.k_values ** 2
        # (2 conj index, nx): psi_1 gets exp(-i k^2 dt/2), psi_2 its conjugate
        self.half_kin = np.exp(np.outer(SIGNS, k2) * 1j * dt / 2)
        self.full_kin = np.exp(np.outer(SIGNS, k2) * 1j * dt)
        self.noise_scale = NOISE_BRANCH[:, None] * np.sqrt(dt / grid.dx)  # (2, 1)
        self.branch_scale = self.noise_scale[:, :, None]                   # (2, 1, 1)
        # Ito -> Stratonovich drift correction g_ss / (2 dx), per species
        self.strat_shift = (np.diag(self.G) / (2 * grid.dx))[:, None]

    def kinetic(self, psi, full: bool):
        if self.free:
            return psi
        mult = self.full_kin if full else self.half_kin
        return np.fft.ifft(np.fft.fft(psi, axis=-1) * mult, axis=-1)

    def interaction(self, psi):
        dens = psi[..., 1, :] * psi[..., 0, :]            # psi_s2 psi_s1
        U = self.V + self.G @ dens
        phase = np.exp(-1j * self.dt * U)
        out = np.empty_like(psi)
        out[..., 0, :] = psi[..., 0, :] * phase
        out[..., 1, :] = psi[..., 1, :] / phase
        return out

    def noise(self, psi, xi):
        """Ito increment dW for standard normals ``xi`` of shape (..., 2 conj, 2 species, nx)."""
        mixed = np.einsum("sj,...mjx->...smx", self.S, xi)
        return self.noise_scale * psi * mixed

    def step(self, psi, xi=None):
        """Local drift plus noise over one step.

        Without noise this is the exponential phase step of ``interaction``.
        With noise the local equations are linear in psi at fixed density, so
        the Stratonovich form is integrated exactly as a multiplicative
        exponential.  The density entering the drift is taken at the
        midpoint, which for n_s = psi_s2 psi_s1 only sees the noise.
        """
        if xi is None or not self.has_noise:
            return self.interaction(psi)
        # (..., 2 conj, 2 species, nx)
        kick = self.branch_scale * (self.S @ xi)
        k1, k2 = kick[..., 0, :, :], kick[..., 1, :, :]
        dens = psi[..., 1, :] * psi[..., 0, :]
        half = np.exp(0.5 * (k1 + k2))
        U = self.V + self.G @ (dens * half) - self.strat_shift
        f1 = np.exp(k1 - 1j * self.dt * U)
        out = np.empty_like(psi)
        out[..., 0, :] = psi[..., 0, :] * f1
        # exp(kick_2 + i dt U) = exp(kick_1 + kick_2) / f1 saves one exponential
        out[..., 1, :] = psi[..., 1, :] * (half * half / f1)
        return out


def drift_step(state: TrajectoryState, trap: TrapConfig | None, g: CouplingSet,
               dt: float) -> TrajectoryState:
    """One deterministic split step (kinetic half, local drift, kinetic half)."""
    st = LangevinStepper(state.grid, trap, g, dt)
    out = state.copy()
    if out.diverged:
        return out
    with np.errstate(all="ignore"):
        psi = st.kinetic(st.interaction(st.kinetic(state.psi, False)), False)
    out.psi = psi
    out.t = state.t + dt
    if not np.all(np.isfinite(psi)):
        out.diverged = True
        out.divergence_time = out.t
    return out


def noise_increment(state: TrajectoryState, g: CouplingSet, dt: float, rng) -> np.ndarray:
    """Sample dW for the current fields."""
    st = LangevinStepper(state.grid, None, g, dt)
    xi = rng.standard_normal(state.psi.shape[:-3] + (2, 2, state.grid.n_points))
    return st.noise(state.psi, xi)


def noise_step(state: TrajectoryState, g: CouplingSet, dt: float, rng) -> TrajectoryState:
    out = state.copy()
    if not out.diverged:
        out.psi = state.psi + noise_increment(state, g, dt, rng)
    return out


def divergence_check(state: TrajectoryState, threshold: float) -> bool:
    """Sticky flag: any non-finite value or amplitude above ``threshold``."""
    if state.diverged:
        return True
    psi = state.psi
    bad = (not np.all(np.isfinite(psi))) or bool(np.abs(psi).max() > threshold)
    if bad:
        state.diverged = True
        state.divergence_time = state.t
    return bad


@dataclass
class EnsembleConfig:
    n_trajectories: int
    seed: int
    dt: float
    sample_times: np.ndarray
    divergence_threshold: float | None = None
    max_diverged_fraction: float = 1e-3
    noise_substeps: int = 1
    chunk_size: int | None = None
    noise: bool = True

    def __post_init__(self):
        self.sample_times = np.asarray(self.sample_times, dtype=float)
        if self.n_trajectories < 2:
            raise ValueError("n_trajectories must be at least 2")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.max_diverged_fraction <= 1:
            raise ValueError("max_diverged_fraction must lie in [0, 1]")
        if self.noise_substeps < 1:
            raise ValueError("noise_substeps must be >= 1")


@dataclass
class EnsembleResult:
    """Per-trajectory spin functionals at every sample time.

    Arrays have shape (n_times, n_trajectories); entries of diverged
    trajectories are NaN and masked in ``diverged``.
    """
    times: np.ndarray
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    n_total: np.ndarray
    diverged: np.ndarray
    divergence_times: np.ndarray
    N: float
    max_diverged_fraction: float = 1e-3
    fields: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_trajectories(self) -> int:
        return self.jx.shape[1]

    @property
    def diverged_fraction(self) -> np.ndarray:
        return self.diverged.mean(axis=1)

    @property
    def trusted(self) -> np.ndarray:
        """Sample times before the diverged fraction first exceeds its bound."""
        ok = self.diverged_fraction <= self.max_diverged_fraction
        return np.cumprod(ok).astype(bool)

    def write_raw_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "trajectory", "re_jx", "im_jx", "re_jy", "im_jy",
                        "re_jz", "im_jz", "re_n", "im_n", "diverged"])
            for i, t in enumerate(self.times):
                for j in range(self.n_trajectories):
                    vals = [self.jx[i, j], self.jy[i, j], self.jz[i, j], self.n_total[i, j]]
                    row = [f"{t:.10g}", j]
                    for v in vals:
                        row += [f"{v.real:.17g}", f"{v.imag:.17g}"]
                    row.append(int(self.diverged[i, j]))
                    w.writerow(row)


def spin_functionals_array(psi, dx):
    """c-number jx, jy, jz, n for fields of shape (..., 2, 2, nx)."""
    a1, a2 = psi[..., 0, 0, :], psi[..., 0, 1, :]
    b1, b2 = psi[..., 1, 0, :], psi[..., 1, 1, :]
    ba = (b2 * a1).sum(axis=-1) * dx
    ab = (a2 * b1).sum(axis=-1) * dx
    nb = (b2 * b1).sum(axis=-1) * dx
    na = (a2 * a1).sum(axis=-1) * dx
    return 0.5 * (ba + ab), (ba - ab) / 2j, 0.5 * (nb - na), na + nb


def trajectory_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent counter-based streams, one per trajectory index."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def default_threshold(state: TrajectoryState) -> float:
    return 1e3 * float(np.abs(state.psi).max())


def _run_chunk(psi0, streams, stepper, step_counts, threshold, substeps, noise,
               keep_fields, block_budget=2 ** 22, check_every=8):
    n = len(streams)
    shape = psi0.shape
    nx = shape[-1]
    n_times = len(step_counts)
    out = [np.full((n_times, n), np.nan + 0j) for _ in range(4)]
    diverged = np.zeros((n_times, n), dtype=bool)
    div_time = np.full(n, np.nan)
    fields = np.full((n_times, n) + shape, np.nan + 0j) if keep_fields else None
    psi = np.broadcast_to(psi0, (n,) + shape).copy()
    active = np.arange(n)
    total_steps = sum(step_counts)
    block = max(1, min(total_steps, block_budget // max(1, n * substeps * 4 * nx)))
    pending = None        # noise block per active trajectory
    pos = block
    step_index = 0
    t = 0.0
    dt = stepper.dt
    norm = 1.0 / np.sqrt(substeps)

    def draw():
        xi = np.empty((len(active), block, 2, 2, nx))
        for r, j in enumerate(active):
            z = streams[j].standard_normal((block, substeps, 2, 2, nx))
            xi[r] = z.sum(axis=1) * norm if substeps > 1 else z[:, 0]
        return xi

    def flag(bad, when):
        nonlocal psi, active, pending
        if not np.any(bad):
            return
        div_time[active[bad]] = when
        keep = ~bad
        psi = psi[keep]
        active = active[keep]
        if pending is not None:
            pending = pending[keep]

    def check(when):
        if not len(active):
            return
        with np.errstate(all="ignore"):
            amp = np.abs(psi).reshape(len(active), -1).max(axis=1)
        flag(~(amp <= threshold), when)

    with np.errstate(all="ignore"):
        for ti, n_steps in enumerate(step_counts):
            if n_steps:
                psi = stepper.kinetic(psi, full=False)
            for s in range(n_steps):
                xi = None
                if noise and stepper.has_noise:
                    if pos >= block:
                        pending = draw()
                        pos = 0
                    xi = pending[:, pos]
                    pos += 1
                psi = stepper.step(psi, xi)
                psi = stepper.kinetic(psi, full=s < n_steps - 1)
                step_index += 1
                t = step_index * dt
                if step_index % check_every == 0:
                    check(t)
            check(t)
            jx, jy, jz, nt = spin_functionals_array(psi, stepper.grid.dx)
            for arr, val in zip(out, (jx, jy, jz, nt)):
                arr[ti, active] = val
            diverged[ti] = True
            diverged[ti, active] = False
            if keep_fields:
                fields[ti, active] = psi
    return out, diverged, div_time, fields


def run_ensemble(config: EnsembleConfig, modes: ModePair, trap: TrapConfig | None,
                 g: CouplingSet, N: float | None = None,
                 keep_fields: bool = False) -> EnsembleResult:
    """Integrate independent realizations from a coherent initial state.

    Trajectory j draws its noise from its own stream, so its path depends
    only on (seed, j, dt, grid) and not on how trajectories are chunked.
    """
    N = modes.N if N is None else N
    state = init_coherent(modes, N)
    threshold = (config.divergence_threshold if config.divergence_threshold is not None
                 else default_threshold(state))
    stepper = LangevinStepper(modes.grid, trap, g, config.dt)
    counts = steps_between(config.sample_times, config.dt, state.t)
    streams = trajectory_streams(config.seed, config.n_trajectories)
    M = config.n_trajectories
    chunk = config.chunk_size or max(1, min(M, 2 ** 17 // (4 * modes.grid.n_points)))
    T = len(counts)
    results = [np.empty((T, M), dtype=complex) for _ in range(4)]
    diverged = np.empty((T, M), dtype=bool)
    div_time = np.empty(M)
    fields = np.empty((T, M) + state.psi.shape, dtype=complex) if keep_fields else None
    for start in range(0, M, chunk):
        sl = slice(start, min(M, start + chunk))
        out, dv, dtm, fl = _run_chunk(state.psi, streams[sl], stepper, counts, threshold,
                                      config.noise_substeps, config.noise, keep_fields)
        for arr, part in zip(results, out):
            arr[:, sl] = part
        diverged[:, sl] = dv
        div_time[sl] = dtm
        if keep_fields:
            fields[:, sl] = fl
    return EnsembleResult(config.sample_times, *results, diverged, div_time, N,
                          config.max_diverged_fraction, fields)
