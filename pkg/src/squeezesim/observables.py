"""Collective spin observables from positive-P ensembles.

Positive-P averages give normally ordered moments directly.  For any unit
direction n, J_n**2 = :J_n**2: + N/4, so a variance is the averaged square of
the c-number functional plus a quarter of the mean atom number minus the
squared mean.
"""
from __future__ import annotations

from dataclasses import dataclass
import csv

import numpy as np

from .posp import EnsembleResult, TrajectoryState, spin_functionals_array


@dataclass
class SpinSample:
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    n_total: np.ndarray

    def quadratic(self, alpha: str, beta: str):
        """Normally ordered :J_alpha J_beta: as the product of c-number functionals."""
        return getattr(self, "j" + alpha) * getattr(self, "j" + beta)


def spin_functionals(state: TrajectoryState) -> SpinSample | None:
    """Spin functionals of a trajectory state; ``None`` marks a diverged state."""
    if state.diverged:
        return None
    return SpinSample(*spin_functionals_array(state.psi, state.grid.dx))


def rotated_components(jx, jy, jz, theta, nu):
    """Return (J_nu, J_theta) with J_theta = cos(theta) J_y' + sin(theta) J_z.

    J_y' = -sin(nu) J_x + cos(nu) J_y is the transverse axis of the frame
    rotated by nu about z.
    """
    j_nu = np.cos(nu) * jx + np.sin(nu) * jy
    j_yp = -np.sin(nu) * jx + np.cos(nu) * jy
    return j_nu, np.cos(theta) * j_yp + np.sin(theta) * jz


def _nanmean(a, axis=-1):
    a = np.asarray(a)
    ok = ~np.isnan(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ok, a, 0).sum(axis=axis) / ok.sum(axis=axis)


def variance_with_commutator(jx, jy, jz, n_total, theta, nu) -> complex:
    """Var(J_theta) = E[:J_theta^2:] + E[N]/4 - E[J_theta]^2 over the last axis.

    NaN entries (diverged trajectories) are skipped.  The result is complex;
    its imaginary part only vanishes in the infinite-ensemble limit.
    """
    _, jt = rotated_components(np.asarray(jx), np.asarray(jy), np.asarray(jz), theta, nu)
    return _nanmean(jt * jt) + _nanmean(n_total) / 4 - _nanmean(jt) ** 2


def batch_error_bars(samples, statistic, n_batches: int = 10):
    """Standard error of ``statistic`` from contiguous batches of trajectories.

    ``samples`` is a tuple of arrays whose last axis runs over trajectories;
    ``statistic`` maps such a tuple (restricted to one batch) to a value.
    Returns std(batch values) / sqrt(n_batches).
    """
    samples = tuple(np.asarray(s) for s in samples)
    M = samples[0].shape[-1]
    if n_batches < 5:
        raise ValueError("need at least 5 batches")
    if M < n_batches:
        raise ValueError(f"{M} trajectories cannot form {n_batches} batches")
    edges = np.linspace(0, M, n_batches + 1).round().astype(int)
    vals = np.array([statistic(tuple(s[..., lo:hi] for s in samples))
                     for lo, hi in zip(edges[:-1], edges[1:])])
    return np.std(vals, axis=0, ddof=1) / np.sqrt(n_batches)


def predicted_directions(prediction, t):
    """(theta, nu, degenerate) from a two-mode prediction at time ``t``."""
    i = prediction.at(t)
    return float(prediction.theta[i]), float(prediction.nu[i]), bool(prediction.degenerate[i])


@dataclass
class SpinRecord:
    times: np.ndarray
    mean_jx: np.ndarray
    mean_jy: np.ndarray
    mean_jz: np.ndarray
    mean_j_nu: np.ndarray
    var_j_theta: np.ndarray
    theta_used: np.ndarray
    nu_used: np.ndarray
    stderr_jx: np.ndarray
    stderr_jy: np.ndarray
    stderr_jz: np.ndarray
    stderr_j_nu: np.ndarray
    stderr_var_j_theta: np.ndarray
    mean_n: np.ndarray
    stderr_n: np.ndarray
    imag_parts: np.ndarray          # (n_times, 4) imaginary parts of mean jx, jy, jz, n
    diverged_fraction: np.ndarray
    trusted: np.ndarray
    scan_theta: np.ndarray | None = None
    scan_var: np.ndarray | None = None

    COLUMNS = ("t", "mean_jx", "mean_jy", "mean_jz", "mean_j_nu", "var_j_theta",
               "theta", "nu", "stderr_jx", "stderr_jy", "stderr_jz", "stderr_j_nu",
               "stderr_var_j_theta", "diverged_fraction", "trusted",
               "mean_n", "stderr_n", "im_jx", "im_jy", "im_jz", "im_n",
               "scan_theta_opt", "scan_var_min")

    def optimal_scan(self):
        if self.scan_var is None:
            return np.full(len(self.times), np.nan), np.full(len(self.times), np.nan)
        idx = np.nanargmin(np.where(np.isnan(self.scan_var), np.inf, self.scan_var), axis=1)
        rows = np.arange(len(self.times))
        return self.scan_theta[idx], self.scan_var[rows, idx]

    def write_csv(self, path):
        th_opt, v_opt = self.optimal_scan()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for i, t in enumerate(self.times):
                vals = [t, self.mean_jx[i], self.mean_jy[i], self.mean_jz[i],
                        self.mean_j_nu[i], self.var_j_theta[i], self.theta_used[i],
                        self.nu_used[i], self.stderr_jx[i], self.stderr_jy[i],
                        self.stderr_jz[i], self.stderr_j_nu[i],
                        self.stderr_var_j_theta[i], self.diverged_fraction[i]]
                row = [f"{float(v):.17g}" for v in vals]
                row.append(str(bool(self.trusted[i])).lower())
                rest = [self.mean_n[i], self.stderr_n[i], *self.imag_parts[i],
                        th_opt[i], v_opt[i]]
                row += [f"{float(v):.17g}" for v in rest]
                w.writerow(row)


SCAN_ANGLES = np.linspace(0, np.pi, 33, endpoint=False)


def spin_record(result: EnsembleResult, theta, nu, n_batches: int = 10,
                scan: bool = True) -> SpinRecord:
    """Ensemble statistics at every sample time, projected on (theta, nu)."""
    T = len(result.times)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (T,))
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (T,))

    def means(s):
        jx, jy, jz, n, c, sn = s
        j_nu, _ = rotated_components(jx, jy, jz, 0.0, sn)
        return np.array([_nanmean(jx).real, _nanmean(jy).real, _nanmean(jz).real,
                         _nanmean(j_nu).real, _nanmean(n).real])

    def var(s):
        jx, jy, jz, n, c, sn = s
        return variance_with_commutator(jx, jy, jz, n, c, sn).real

    rows = {k: np.empty(T) for k in ("jx", "jy", "jz", "jnu", "n", "var")}
    errs = {k: np.empty(T) for k in rows}
    imag = np.empty((T, 4))
    scan_var = np.full((T, len(SCAN_ANGLES)), np.nan) if scan else None
    for i in range(T):
        jx, jy, jz, n = (result.jx[i], result.jy[i], result.jz[i], result.n_total[i])
        nu_t = nu[i]
        samples = (jx, jy, jz, n, np.full(jx.shape, theta[i]), np.full(jx.shape, nu_t))
        m = means(samples)
        e = batch_error_bars(samples, means, n_batches)
        for key, val, err in zip(("jx", "jy", "jz", "jnu", "n"), m, e):
            rows[key][i] = val
            errs[key][i] = err
        rows["var"][i] = var(samples)
        errs["var"][i] = batch_error_bars(samples, var, n_batches)
        imag[i] = [_nanmean(a).imag for a in (jx, jy, jz, n)]
        if scan:
            scan_var[i] = [variance_with_commutator(jx, jy, jz, n, a, nu_t).real
                           for a in SCAN_ANGLES]
    return SpinRecord(
        times=np.asarray(result.times), mean_jx=rows["jx"], mean_jy=rows["jy"],
        mean_jz=rows["jz"], mean_j_nu=rows["jnu"], var_j_theta=rows["var"],
        theta_used=np.array(theta), nu_used=np.array(nu),
        stderr_jx=errs["jx"], stderr_jy=errs["jy"], stderr_jz=errs["jz"],
        stderr_j_nu=errs["jnu"], stderr_var_j_theta=errs["var"],
        mean_n=rows["n"], stderr_n=errs["n"], imag_parts=imag,
        diverged_fraction=result.diverged_fraction, trusted=result.trusted,
        scan_theta=SCAN_ANGLES if scan else None, scan_var=scan_var)
