"""Experiment configuration, presets and the end-to-end run.

A run prepares the ground state, applies the pi/2 pulse, evolves the mean
field for the two-mode prediction, integrates the positive-P ensemble and
projects it on the predicted directions.  Configuration files are INI text
with one section per stage.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
from dataclasses import dataclass, field, fields
import json
import logging
from pathlib import Path

import numpy as np

from . import __version__
from .grid import SpatialGrid
from .gpe import TrapConfig, evolve_modes, ground_state, pi_half_pulse
from .observables import spin_record
from .posp import EnsembleConfig, run_ensemble
from .twomode import (CouplingSet, chi_thomas_fermi, coefficient_series, displaced_chi,
                      displaced_rho_nu, overlap_series, predict)

log = logging.getLogger(__name__)

TWO_MODE_MODELS = ("gpe", "thomas-fermi", "displaced-estimate")


class UsageError(ValueError):
    """Invalid configuration or command-line usage."""


# section of the INI file each key lives in
SECTIONS = {
    "physics": ("N", "g_aa", "g_ab", "g_bb", "x_offset_b"),
    "grid": ("n_points", "x_min", "x_max"),
    "gpe": ("gs_tol",),
    "twomode": ("two_mode_model",),
    "posp": ("t_final", "dt", "n_samples", "n_trajectories", "seed",
             "max_diverged_fraction", "noise_substeps", "divergence_factor"),
    "observables": ("n_batches", "theta_scan"),
    "output": ("output_dir", "dump_modes", "dump_raw"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment parameters in harmonic-oscillator units."""
    N: float = 2000.0
    g_aa: float = 5e-3
    g_ab: float = 2.5e-3
    g_bb: float = 5e-3
    x_offset_b: float = 0.0
    n_points: int = 256
    x_min: float = -12.0
    x_max: float = 12.0
    gs_tol: float = 1e-13
    two_mode_model: str = "gpe"
    t_final: float = np.pi
    dt: float = 1e-3
    n_samples: int = 40
    n_trajectories: int = 1000
    seed: int = 1
    max_diverged_fraction: float = 1e-3
    noise_substeps: int = 1
    divergence_factor: float = 1e3
    n_batches: int = 10
    theta_scan: bool = True
    output_dir: str = "squeezesim-output"
    dump_modes: bool = False
    dump_raw: bool = False
    preset: str | None = None

    @property
    def couplings(self) -> CouplingSet:
        return CouplingSet(self.g_aa, self.g_ab, self.g_bb)

    @property
    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.n_points, self.x_min, self.x_max)

    @property
    def trap(self) -> TrapConfig:
        return TrapConfig(1.0, 0.0, self.x_offset_b)

    @property
    def sample_times(self) -> np.ndarray:
        """Evenly spaced output times snapped to the integration step."""
        raw = np.linspace(0.0, self.t_final, self.n_samples + 1)
        steps = np.unique(np.round(raw / self.dt).astype(np.int64))
        return steps * self.dt

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **coerce(changes))

    # -- INI round trip ---------------------------------------------------
    def to_ini(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["experiment"] = {"preset": self.preset or ""}
        for section, keys in SECTIONS.items():
            cp[section] = {k: _format(getattr(self, k)) for k in keys}
        return cp

    def write(self, path, extra: dict | None = None):
        cp = self.to_ini()
        if extra:
            for section, values in extra.items():
                cp[section] = {k: str(v) for k, v in values.items()}
        with open(path, "w") as fh:
            cp.write(fh)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def coerce(values: dict) -> dict:
    """Convert string values to the field types of ExperimentConfig."""
    out = {}
    for key, value in values.items():
        if key not in _FIELD_TYPES:
            raise UsageError(f"unknown configuration key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if value is None or (key == "preset" and value == ""):
                out[key] = None if key == "preset" else value
            elif kind == "bool":
                out[key] = _parse_bool(value)
            elif kind == "int":
                out[key] = int(value)
            elif kind == "float":
                out[key] = float(value)
            else:
                out[key] = str(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {value!r}") from exc
    return out


PRESETS = {
    # 1D favorable couplings g_aa = g_bb = 2 g_ab
    "favorable-couplings": dict(
        N=2000.0, g_aa=1.0 * 5e-3, g_ab=0.5 * 5e-3, g_bb=1.0 * 5e-3,
        x_offset_b=0.0, t_final=float(np.pi), two_mode_model="thomas-fermi",
        dt=2e-3, n_samples=40),
    # Rb-87 like ratios with the b trap displaced by 3 a0
    "displaced-traps": dict(
        N=2000.0, g_aa=1.03 * 5e-3, g_ab=1.00 * 5e-3, g_bb=0.97 * 5e-3,
        x_offset_b=3.0, t_final=float(2 * np.pi), two_mode_model="gpe",
        x_min=-16.0, x_max=16.0, dt=2e-3, n_samples=40),
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return ExperimentConfig(preset=name, **PRESETS[name])


def load_config(path=None, preset_name: str | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Resolve preset, then file values, then explicit overrides."""
    values: dict = {}
    if path is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(path):
            raise UsageError(f"cannot read config file {path}")
        for section in cp.sections():
            for key, value in cp[section].items():
                values[key] = value
        preset_name = preset_name or values.pop("preset", None) or None
        values.pop("preset", None)
        # manifest bookkeeping sections are not configuration
        for key in list(values):
            if key not in _FIELD_TYPES:
                if any(key in cp[s] for s in cp.sections() if s in SECTIONS or s == "experiment"):
                    raise UsageError(f"unknown configuration key {key!r}")
                values.pop(key)
    base = preset(preset_name) if preset_name else ExperimentConfig()
    values.update(overrides or {})
    return base.replace(**values)


# -- validation -----------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    level: str      # "error" or "warning"
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


def thomas_fermi_radius(gN: float) -> tuple[float, float]:
    """(chemical potential, radius) of the 1D Thomas-Fermi profile."""
    if gN <= 0:
        return 0.5, 1.0
    mu = (3 * gN / (4 * np.sqrt(2))) ** (2 / 3)
    return mu, float(np.sqrt(2 * mu))


def _tail_amplitude(distance: float, radius: float) -> float:
    """WKB decay of the mode amplitude at ``distance`` from the trap center."""
    if distance <= radius:
        return 1.0
    d, R = distance, radius
    s = np.sqrt(d * d - R * R)
    action = 0.5 * d * s - 0.5 * R * R * np.log((d + s) / R)
    return float(np.exp(-action))


def validate(config: ExperimentConfig) -> list[Finding]:
    """Check geometry, time step and sampling parameters; never raises."""
    out: list[Finding] = []
    try:
        grid = config.grid
    except ValueError as exc:
        return [Finding("error", str(exc))]
    for name in ("N", "dt", "t_final"):
        if not getattr(config, name) > 0:
            out.append(Finding("error", f"{name} must be positive"))
    if config.g_aa < 0:
        out.append(Finding("error", "g_aa must be non-negative for the ground state"))
    if config.n_trajectories < max(2, config.n_batches):
        out.append(Finding("error", f"n_trajectories={config.n_trajectories} cannot form "
                                    f"{config.n_batches} batches"))
    if config.n_batches < 5:
        out.append(Finding("error", "n_batches must be at least 5"))
    if config.two_mode_model not in TWO_MODE_MODELS:
        out.append(Finding("error", f"two_mode_model must be one of {TWO_MODE_MODELS}"))
    if config.two_mode_model == "thomas-fermi" and not (
            np.isclose(config.g_aa, config.g_bb) and config.x_offset_b == 0):
        out.append(Finding("warning", "thomas-fermi two-mode model assumes g_aa = g_bb "
                                      "and identical traps"))
    if out and any(f.level == "error" for f in out):
        return out

    g_max = max(abs(config.g_aa), abs(config.g_bb), abs(config.g_ab))
    mu, radius = thomas_fermi_radius(config.g_aa * config.N)
    # the b cloud starts at 0 and swings to twice the trap offset
    reach = max(0.0, 2 * config.x_offset_b), min(0.0, 2 * config.x_offset_b)
    half_right = config.x_max - reach[0]
    half_left = reach[1] - config.x_min
    room = min(half_right, half_left)
    if room <= radius:
        out.append(Finding("error", f"condensate (radius {radius:.2f}, excursion up to "
                                    f"{2 * config.x_offset_b:.2f}) leaves the grid "
                                    f"[{config.x_min}, {config.x_max}]"))
    else:
        tail = _tail_amplitude(room, radius)
        if tail > 1e-8:
            out.append(Finding("warning", f"mode amplitude at the boundary ~{tail:.1e} of "
                                          "peak exceeds 1e-8; widen the grid"))
    if config.n_points > 1 and grid.dx > 0.5 / np.sqrt(max(mu, 0.5)):
        out.append(Finding("warning", f"dx={grid.dx:.3f} does not resolve the healing length"))
    phase = config.dt * mu
    if phase > 0.1:
        out.append(Finding("warning", f"nonlinear phase per step {phase:.2f} rad exceeds 0.1; "
                                      "reduce dt"))
    if config.n_points > 1:
        kick = g_max * config.dt / grid.dx
        if kick > 1e-2:
            out.append(Finding("warning", f"positive-P noise variance per step {kick:.1e} "
                                          "is large; reduce dt"))
    if config.n_samples < 1:
        out.append(Finding("error", "n_samples must be at least 1"))
    return out


# -- running --------------------------------------------------------------

@dataclass
class RunResult:
    config: ExperimentConfig
    prediction: object
    coefficients: object
    record: object
    ensemble: object
    evolution: object
    summary: dict
    output_dir: Path | None = None
    findings: list = field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return not bool(np.all(self.record.trusted))


def two_mode_prediction(config: ExperimentConfig, evolution, coefficients):
    times = evolution.times
    N = config.N
    g = config.couplings
    model = config.two_mode_model
    if model == "gpe":
        ov = overlap_series(evolution)
        return predict(times, coefficients.chi, np.unwrap(np.angle(ov)), np.abs(ov), N,
                       rotation_rate=coefficients.k + coefficients.D * N)
    if model == "thomas-fermi":
        chi = chi_thomas_fermi(config.g_aa, N)
        return predict(times, np.full(times.shape, chi), 0.0, 1.0, N)
    rho, nu = displaced_rho_nu(config.x_offset_b, times)
    return predict(times, displaced_chi(g, config.x_offset_b, times), nu, rho, N)


def compare(prediction, record) -> dict:
    """Largest two-mode vs positive-P gap over trusted times, in error bars."""
    ok = record.trusted & (record.times > 0)
    out = {}
    for name, model, data, err in (
            ("var_j_theta", prediction.variance, record.var_j_theta, record.stderr_var_j_theta),
            ("mean_j_nu", prediction.mean_spin, record.mean_j_nu, record.stderr_j_nu)):
        gap = np.abs(model - data)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(err > 0, gap / err, np.where(gap > 0, np.inf, 0.0))
        zt = z[ok]
        out[name] = {
            "max_gap_in_stderr": float(zt.max()) if zt.size else None,
            "t_at_max": float(record.times[ok][np.argmax(zt)]) if zt.size else None,
        }
    return out


def execute(config: ExperimentConfig, output_dir=None, write: bool = True) -> RunResult:
    findings = validate(config)
    errors = [f for f in findings if f.level == "error"]
    if errors:
        raise UsageError("; ".join(f.message for f in errors))
    grid, trap, g = config.grid, config.trap, config.couplings
    times = config.sample_times
    log.info("ground state for N=%g, g_aa=%g", config.N, g.g_aa)
    phi0 = ground_state(trap, g, config.N, grid, tol=config.gs_tol)
    modes = pi_half_pulse(phi0, config.N, grid)
    log.info("mean-field evolution to t=%g", times[-1])
    evolution = evolve_modes(modes, trap, g, config.dt, times)
    coeffs = coefficient_series(evolution, g)
    prediction = two_mode_prediction(config, evolution, coeffs)
    log.info("positive-P ensemble of %d trajectories", config.n_trajectories)
    ens_cfg = EnsembleConfig(
        n_trajectories=config.n_trajectories, seed=config.seed, dt=config.dt,
        sample_times=times,
        divergence_threshold=config.divergence_factor * np.sqrt(config.N / 2) * np.abs(phi0).max(),
        max_diverged_fraction=config.max_diverged_fraction,
        noise_substeps=config.noise_substeps)
    ensemble = run_ensemble(ens_cfg, modes, trap, g)
    record = spin_record(ensemble, prediction.theta, prediction.nu,
                         n_batches=config.n_batches, scan=config.theta_scan)
    untrusted = record.times[~record.trusted]
    summary = {
        "preset": config.preset,
        "two_mode_model": config.two_mode_model,
        "comparison": compare(prediction, record),
        "min_var_j_theta": (float(np.min(record.var_j_theta[record.trusted]))
                            if record.trusted.any() else None),
        "standard_quantum_limit": config.N / 4,
        "untrusted_from": float(untrusted[0]) if untrusted.size else None,
        "final_diverged_fraction": float(record.diverged_fraction[-1]),
        "warnings": [f.message for f in findings],
    }
    result = RunResult(config, prediction, coeffs, record, ensemble, evolution, summary,
                       findings=findings)
    if write:
        result.output_dir = write_outputs(result, output_dir or config.output_dir)
    return result


def write_outputs(result: RunResult, output_dir) -> Path:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    result.prediction.write_csv(out / "prediction.csv", result.coefficients)
    result.record.write_csv(out / "posp.csv")
    untrusted = result.record.times[~result.record.trusted]
    cfg.write(out / "manifest.ini", extra={"run": {
        "code_version": __version__,
        "seed": cfg.seed,
        "n_sample_times": len(result.record.times),
        "untrusted_times": " ".join(f"{t:.10g}" for t in untrusted),
    }})
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg.dump_modes:
        result.evolution.write_csv(out / "modes")
    if cfg.dump_raw:
        result.ensemble.write_raw_csv(out / "raw_trajectories.csv")
    return out


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Load one of the CSV artifacts back as named columns."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        if all(v in ("true", "false") for v in vals):
            cols[name] = np.array([v == "true" for v in vals])
        else:
            cols[name] = np.array(vals, dtype=float)
    return cols
