"""Spin squeezing in two-component condensates.

Mean-field modes, a projected two-mode model and a positive-P field
simulation, plus the plumbing to compare them.
"""
__version__ = "0.1.0"

from .grid import SpatialGrid, gaussian
from .gpe import TrapConfig, ModePair, ground_state, pi_half_pulse, evolve_modes
from .twomode import (CouplingSet, chi_integral, chi_thomas_fermi, two_mode_coefficients,
                      ueda_variance, ueda_angle, ueda_mean_spin, predict)
from .posp import EnsembleConfig, LangevinStepper, init_coherent, run_ensemble
from .observables import spin_record, variance_with_commutator, batch_error_bars

__all__ = [
    "SpatialGrid", "gaussian", "TrapConfig", "ModePair", "ground_state", "pi_half_pulse",
    "evolve_modes", "CouplingSet", "chi_integral", "chi_thomas_fermi",
    "two_mode_coefficients", "ueda_variance", "ueda_angle", "ueda_mean_spin", "predict",
    "EnsembleConfig", "LangevinStepper", "init_coherent", "run_ensemble", "spin_record",
    "variance_with_commutator", "batch_error_bars",
]
