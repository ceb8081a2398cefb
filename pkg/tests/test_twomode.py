import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import min_transverse_variance, projected_interaction, two_mode_ops
from squeezesim.grid import SpatialGrid, gaussian
from squeezesim.gpe import ModePair
from squeezesim.twomode import (CouplingSet, chi_integral, chi_thomas_fermi,
                                coefficients_from_integrals, displaced_chi, displaced_overlap,
                                displaced_rho_nu, is_degenerate, predict, two_mode_coefficients,
                                ueda_angle, ueda_mean_spin, ueda_variance)


def fock_expansion(c, a, b):
    """e N + k Sz + E N^2 + D N Sz + chi Sz^2 as an operator."""
    n = a.conj().T @ a + b.conj().T @ b
    sz = 0.5 * (b.conj().T @ b - a.conj().T @ a)
    return c.e * n + c.k * sz + c.E * n @ n + c.D * n @ sz + c.chi * sz @ sz


@pytest.mark.parametrize("seed", range(5))
def test_coefficients_match_fock_space(seed):
    rng = np.random.default_rng(seed)
    Ia, Ib, Iab = rng.uniform(0.1, 0.6, 3)
    g = CouplingSet(*rng.uniform(-0.01, 0.02, 3))
    N = rng.uniform(1, 3000)
    a, b = two_mode_ops(6)
    H = projected_interaction(a, b, Ia, Ib, Iab, g.as_tuple(), N)
    c = coefficients_from_integrals(Ia, Ib, Iab, g, N)
    model = fock_expansion(c, a, b)
    # compare on total atom number <= 6
    n_tot = np.add.outer(np.arange(7), np.arange(7)).ravel()
    keep = n_tot <= 6
    diff = (H - model)[np.ix_(keep, keep)]
    scale = np.abs(H[np.ix_(keep, keep)]).max()
    assert np.abs(diff).max() <= 1e-12 * scale


def test_two_mode_coefficients_from_modes():
    grid = SpatialGrid()
    f = gaussian(grid)
    modes = ModePair(f, f, 2000, grid)
    g = CouplingSet(5e-3, 2.5e-3, 5e-3)
    c = two_mode_coefficients(modes, g)
    I = 1 / np.sqrt(2 * np.pi)
    assert c.chi == pytest.approx(0.5 * (5e-3 + 5e-3 - 2 * 2.5e-3) * I, rel=1e-12)
    assert c.D == pytest.approx(0.0, abs=1e-18)
    assert chi_integral(modes, g) == pytest.approx(c.chi, rel=1e-12)


def test_chi_thomas_fermi_value():
    assert chi_thomas_fermi(0.005, 2000) == pytest.approx(6.1e-4, abs=0.05e-4)
    # closed form (3/2)^(2/3)/5 g^(2/3) N^(-1/3)
    assert chi_thomas_fermi(0.005, 2000) == pytest.approx(6.0822019955734e-4, rel=1e-12)
    with pytest.raises(ValueError):
        chi_thomas_fermi(0.0, 2000)


@pytest.mark.parametrize("S", [1, 2, 5, 10])
@pytest.mark.parametrize("mu", [0.02, 0.1, 0.3, 1.0])
def test_ueda_against_dicke_space(S, mu):
    var, sx = min_transverse_variance(2 * S, mu)
    assert ueda_variance(mu, S) == pytest.approx(var, rel=1e-10, abs=1e-12)
    assert ueda_mean_spin(mu, S) == pytest.approx(sx, rel=1e-10, abs=1e-12)


def test_ueda_frozen_values():
    # brute-force Dicke-space values (oracles.min_transverse_variance)
    assert ueda_variance(0.05, 100) == pytest.approx(2.015166987300865, rel=1e-10)
    assert ueda_variance(0.1, 100) == pytest.approx(2.5588850655832216, rel=1e-10)
    assert ueda_variance(0.01, 100) == pytest.approx(19.15785975269184, rel=1e-10)


def test_ueda_limits():
    assert ueda_variance(0.0, 100) == pytest.approx(50.0)
    assert ueda_angle(0.0, 100) == pytest.approx(np.pi / 2)
    assert ueda_mean_spin(0.0, 100) == pytest.approx(100.0)
    assert is_degenerate(0.0)
    with pytest.raises(ValueError):
        ueda_variance(0.1, 0.25)
    # no underflow for large spin and angle
    assert np.isfinite(ueda_variance(0.5, 1e6))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 0.5), st.integers(2, 5000))
def test_ueda_bounds(mu, S):
    v = ueda_variance(mu, S)
    assert 0 < v <= S / 2 + 1e-9
    assert 0 <= ueda_mean_spin(mu, S) <= S


# trapezoid integral of chi over one period for the displaced-traps couplings
FROZEN_DISPLACED_TWIST = 8.930716247793947e-3


def test_displaced_estimates():
    # Gaussian overlap exp(-x0^2 (1 - cos t)/2) is exp(-9) at half period for x0 = 3
    rho, nu = displaced_rho_nu(3.0, np.pi)
    assert rho == pytest.approx(np.exp(-9), rel=1e-12)
    assert displaced_overlap(3.0, 2 * np.pi) * np.sqrt(2 * np.pi) == pytest.approx(1.0)
    g = CouplingSet(1.03 * 5e-3, 5e-3, 0.97 * 5e-3)
    t = np.linspace(0, 2 * np.pi, 2001)
    chi = displaced_chi(g, 3.0, t)
    twist = np.sum(0.5 * (chi[1:] + chi[:-1]) * np.diff(t))
    assert twist == pytest.approx(FROZEN_DISPLACED_TWIST, rel=1e-6)


def test_predict_constant_chi():
    t = np.linspace(0, 1, 11)
    p = predict(t, 1e-3, 0.0, 1.0, 200)
    assert np.allclose(p.mu, 2e-3 * t)
    assert np.allclose(p.variance, ueda_variance(2e-3 * t, 100))
    with pytest.raises(ValueError):
        predict(t, np.ones(3), 0.0, 1.0, 200)
