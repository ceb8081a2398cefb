"""Two-mode model of the internal-state dynamics.

Projecting the field Hamiltonian on two time-dependent mode functions gives

    H = e N + k Sz + E N**2 + D N Sz + chi Sz**2,

whose one-axis-twisting term chi Sz**2 squeezes the collective spin.  The
Kitagawa-Ueda expressions give the minimal transverse variance and its
direction as functions of the accumulated twisting angle mu = 2 int chi dt.
"""
from __future__ import annotations

from dataclasses import dataclass
import csv

import numpy as np


@dataclass(frozen=True)
class CouplingSet:
    """Interaction strengths in units of hbar*omega*a0 (1D effective)."""
    g_aa: float
    g_ab: float
    g_bb: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.g_aa, self.g_ab], [self.g_ab, self.g_bb]], dtype=float)

    @property
    def noise_factor(self) -> np.ndarray:
        """Symmetric (complex) principal square root S with S @ S.T == matrix.

        The coupling matrix need not be positive definite, e.g. for
        g_aa*g_bb < g_ab**2 one eigenvalue is negative and S is complex.
        """
        w, Q = np.linalg.eigh(self.matrix)
        return (Q * np.sqrt(w.astype(complex))) @ Q.T

    def scaled(self, factor: float) -> "CouplingSet":
        return CouplingSet(self.g_aa * factor, self.g_ab * factor, self.g_bb * factor)

    def as_tuple(self):
        return (self.g_aa, self.g_ab, self.g_bb)


def mode_integrals(modes) -> tuple[float, float, float]:
    """Return (int |phi_a|^4, int |phi_b|^4, int |phi_a|^2 |phi_b|^2)."""
    grid = modes.grid
    da = np.abs(modes.phi_a) ** 2
    db = np.abs(modes.phi_b) ** 2
    return (float(grid.integrate(da * da)), float(grid.integrate(db * db)),
            float(grid.integrate(da * db)))


def chi_integral(modes, g: CouplingSet) -> float:
    """Twisting strength chi = 1/2 int (g_bb|phi_b|^4 + g_aa|phi_a|^4 - 2 g_ab|phi_a|^2|phi_b|^2)."""
    Ia, Ib, Iab = mode_integrals(modes)
    return 0.5 * (g.g_bb * Ib + g.g_aa * Ia - 2 * g.g_ab * Iab)


def chi_thomas_fermi(g: float, N: float) -> float:
    """Twisting strength for Thomas-Fermi modes, g_aa = g_bb = 2 g_ab = g.

    Evaluates chi = (1/2) g int |phi_TF|^4 dx for the 1D Thomas-Fermi profile
    of N atoms with interaction g, which is (3/2)**(2/3) / 5 * g**(2/3) / N**(1/3).
    """
    if g <= 0 or N <= 0:
        raise ValueError("chi_thomas_fermi needs g > 0 and N > 0")
    return (1.5 ** (2 / 3) / 5) * g ** (2 / 3) / N ** (1 / 3)


@dataclass
class TwoModeCoefficients:
    """Coefficients of N, Sz, N^2, N Sz and Sz^2 (energies in hbar*omega)."""
    e: np.ndarray
    k: np.ndarray
    E: np.ndarray
    D: np.ndarray
    chi: np.ndarray
    times: np.ndarray | None = None

    def write_csv(self, path):
        times = self.times if self.times is not None else np.arange(np.size(self.chi))
        cols = [np.atleast_1d(c) for c in (times, self.e, self.k, self.E, self.D, self.chi)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "e", "k", "E", "D", "chi"])
            for row in zip(*cols):
                w.writerow([f"{v:.17g}" for v in row])


def coefficients_from_integrals(Ia, Ib, Iab, g: CouplingSet, N: float) -> TwoModeCoefficients:
    """Expand the projected interaction Hamiltonian in N and Sz.

    The mode functions follow the Gross-Pitaevskii equations with N/2 atoms
    per component, so the projected Hamiltonian is

        g_bb Ib (b+b+bb/2 - N/2 b+b) + g_aa Ia (a+a+aa/2 - N/2 a+a)
        + g_ab Iab (a+b+ba - N/2 (a+a + b+b)),

    rewritten with b+b = N/2 + Sz and a+a = N/2 - Sz.
    """
    Ga = g.g_aa * np.asarray(Ia)
    Gb = g.g_bb * np.asarray(Ib)
    Gab = g.g_ab * np.asarray(Iab)
    e = -(1 + N) / 4 * (Gb + Ga) - N / 2 * Gab
    k = -(1 + N) / 2 * (Gb - Ga)
    E = (Gb + Ga) / 8 + Gab / 4
    D = (Gb - Ga) / 2
    chi = (Gb + Ga) / 2 - Gab
    return TwoModeCoefficients(e, k, E, D, chi)


def two_mode_coefficients(modes, g: CouplingSet) -> TwoModeCoefficients:
    return coefficients_from_integrals(*mode_integrals(modes), g, modes.N)


def coefficient_series(evolution, g: CouplingSet) -> TwoModeCoefficients:
    """Coefficients at every sample of a ModeEvolution."""
    grid = evolution.grid
    dens = np.abs(evolution.phi) ** 2
    Ia = grid.integrate(dens[:, 0] ** 2)
    Ib = grid.integrate(dens[:, 1] ** 2)
    Iab = grid.integrate(dens[:, 0] * dens[:, 1])
    coeffs = coefficients_from_integrals(Ia, Ib, Iab, g, evolution.N)
    coeffs.times = np.asarray(evolution.times)
    return coeffs


def overlap_series(evolution) -> np.ndarray:
    """rho * exp(i nu) = int conj(phi_b) phi_a dx at every sample."""
    return evolution.grid.overlap(evolution.phi[:, 1], evolution.phi[:, 0])


# -- Kitagawa-Ueda one-axis twisting --------------------------------------

def _pow_cos(angle, p):
    """cos(angle)**p for integer p, through logarithms to avoid underflow."""
    c = np.cos(angle)
    half = np.sin(0.5 * angle)
    with np.errstate(divide="ignore"):
        log_abs = np.log1p(-2 * half * half)
    sign = np.where((c < 0) & (np.mod(p, 2) == 1), -1.0, 1.0)
    return log_abs, sign


def _ku_ab(mu, S):
    mu = np.asarray(mu, dtype=float)
    p = int(round(2 * S - 2))
    log_c, sign_c = _pow_cos(mu, p)
    with np.errstate(invalid="ignore", over="ignore"):
        powered = sign_c * np.exp(p * log_c)
        # 1 - cos^p written with expm1 where the sign is positive
        A = np.where(sign_c > 0, -np.expm1(p * log_c), 1 - powered)
        log_h, sign_h = _pow_cos(mu / 2, p)
        B = 4 * np.sin(mu / 2) * sign_h * np.exp(p * log_h)
    A = np.where(p == 0, 0.0, A)
    return A, B


def ueda_variance(mu, S):
    """Minimal variance of a spin component perpendicular to the mean spin.

    Kitagawa-Ueda result for the coherent spin state of length S twisted by
    exp(-i mu Sz**2 / 2).  Uses A - sqrt(A^2+B^2) = -B^2 / (A + sqrt(A^2+B^2)).
    """
    if S < 0.5:
        raise ValueError("spin length must be at least 1/2")
    A, B = _ku_ab(mu, S)
    root = np.sqrt(A * A + B * B)
    denom = A + root
    with np.errstate(invalid="ignore", divide="ignore"):
        diff = np.where(denom > 0, -B * B / np.where(denom > 0, denom, 1.0), 0.0)
    out = 0.5 * S * (1 + 0.5 * (S - 0.5) * diff)
    return out if np.ndim(out) else float(out)


def ueda_angle(mu, S):
    """Direction theta of the squeezed component cos(theta) Sy + sin(theta) Sz.

    Returns pi/2 where mu == 0; there the transverse variance is isotropic
    and the direction is degenerate (see ``is_degenerate``).
    """
    A, B = _ku_ab(mu, S)
    theta = np.pi / 2 + 0.5 * np.arctan2(B, A)
    return theta if np.ndim(theta) else float(theta)


def is_degenerate(mu) -> np.ndarray | bool:
    return np.asarray(mu) == 0


def ueda_mean_spin(mu, S):
    """<Sx> = S cos(mu/2)**(2S-1) for the twisted coherent state."""
    p = int(round(2 * S - 1))
    log_c, sign_c = _pow_cos(np.asarray(mu, dtype=float) / 2, p)
    out = S * sign_c * np.exp(p * log_c)
    return out if np.ndim(out) else float(out)


# -- closed-form estimates for displaced harmonic traps -------------------

def displaced_overlap(x0, t, omega=1.0):
    """int |phi_a|^2 |phi_b|^2 dx for oscillator ground states displaced by x0."""
    if np.any(np.asarray(x0) < 0):
        raise ValueError("x0 must be non-negative")
    return np.exp(-np.asarray(x0) ** 2 * (1 - np.cos(omega * np.asarray(t))) / 4) / np.sqrt(2 * np.pi)


def displaced_rho_nu(x0, t, omega=1.0):
    """Magnitude and phase of int conj(phi_b) phi_a dx for the displaced mode."""
    if np.any(np.asarray(x0) < 0):
        raise ValueError("x0 must be non-negative")
    wt = omega * np.asarray(t, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    rho = np.exp(-x0 ** 2 * (1 - np.cos(wt)) / 2)
    nu = x0 ** 2 * np.sin(wt) / 2
    return rho, nu


def displaced_chi(g: CouplingSet, x0, t, omega=1.0):
    """chi(t) with unit Gaussian modes and the displaced-overlap estimate."""
    self_term = (g.g_aa + g.g_bb) / np.sqrt(2 * np.pi)
    return 0.5 * (self_term - 2 * g.g_ab * displaced_overlap(x0, t, omega))


# -- predictions ----------------------------------------------------------

@dataclass
class SqueezingPrediction:
    times: np.ndarray
    chi: np.ndarray
    mu: np.ndarray
    variance: np.ndarray
    theta: np.ndarray
    nu: np.ndarray
    rho: np.ndarray
    mean_spin: np.ndarray
    degenerate: np.ndarray
    N: float

    def at(self, t):
        """Index of the sample closest to ``t``."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"prediction does not cover t={t}")
        return i

    def write_csv(self, path, coefficients: TwoModeCoefficients | None = None):
        header = ["t", "chi", "mu", "variance", "theta", "nu", "rho", "mean_spin"]
        cols = [self.times, self.chi, self.mu, self.variance, self.theta, self.nu,
                self.rho, self.mean_spin]
        if coefficients is not None:
            header += ["e", "k", "E", "D"]
            cols += [coefficients.e, coefficients.k, coefficients.E, coefficients.D]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([f"{float(v):.17g}" for v in row])


def cumulative_trapezoid(y, t):
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def predict(times, chi_series, nu_series, rho_series, N, rotation_rate=None,
            t0: float = 0.0) -> SqueezingPrediction:
    """Two-mode squeezing prediction on a common time grid.

    ``rotation_rate`` (k + D N, optional) is integrated and added to the
    spatial phase nu.  The twisting angle integrates chi from ``t0``; when
    the first sample lies after ``t0``, chi is taken constant on that gap.
    """
    times = np.asarray(times, dtype=float)
    chi = np.broadcast_to(np.asarray(chi_series, dtype=float), times.shape).copy()
    nu = np.broadcast_to(np.asarray(nu_series, dtype=float), times.shape).copy()
    rho = np.broadcast_to(np.asarray(rho_series, dtype=float), times.shape).copy()
    for name, s in (("chi", chi_series), ("nu", nu_series), ("rho", rho_series)):
        if np.ndim(s) and np.shape(s) != times.shape:
            raise ValueError(f"{name} series has shape {np.shape(s)}, times {times.shape}")
    mu = 2 * cumulative_trapezoid(chi, times) + 2 * chi[0] * (times[0] - t0)
    if rotation_rate is not None:
        rate = np.broadcast_to(np.asarray(rotation_rate, dtype=float), times.shape)
        nu = nu + cumulative_trapezoid(rate, times) + rate[0] * (times[0] - t0)
    S = N / 2
    return SqueezingPrediction(
        times=times, chi=chi, mu=mu,
        variance=np.asarray(ueda_variance(mu, S)),
        theta=np.asarray(ueda_angle(mu, S)),
        nu=nu, rho=rho,
        mean_spin=rho * np.asarray(ueda_mean_spin(mu, S)),
        degenerate=np.asarray(is_degenerate(mu)),
        N=N)
