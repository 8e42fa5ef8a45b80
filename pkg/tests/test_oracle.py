"""Finite-coupling oracle: contact integrals, diagonalization, slope fits."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gammaln

import tonks.oracle as oracle
from tonks.oracle import (
    EDConfig,
    SlopeFit,
    delta_tensor,
    diagonalize,
    slope_fit,
    two_body_reference,
    two_body_slope,
)
from tonks.sectors import ComponentSpec

GAMMA_2 = math.sqrt(2.0 / math.pi)


def _phi(n, x):
    log_norm = -0.25 * math.log(math.pi) - 0.5 * (n * math.log(2.0) + gammaln(n + 1.0))
    from numpy.polynomial.hermite import hermval

    c = np.zeros(n + 1)
    c[n] = 1.0
    return math.exp(log_norm) * hermval(x, c) * np.exp(-0.5 * x * x)


def test_delta_tensor_anchor():
    t = delta_tensor(4)
    # all four particles in the ground orbital: integral of phi_0^4
    assert t[0, 0, 0, 0] == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-14)


def test_delta_tensor_parity_and_symmetry():
    t = delta_tensor(6)
    idx = np.indices(t.shape).sum(axis=0)
    assert np.all(t[idx % 2 == 1] == 0.0)
    for perm in ((1, 0, 2, 3), (2, 3, 0, 1), (3, 2, 1, 0)):
        np.testing.assert_allclose(t.transpose(perm), t, atol=1e-15)


def test_delta_tensor_matches_quadrature():
    t = delta_tensor(9)
    rng = np.random.default_rng(16)
    for _ in range(4):
        a, b, c, d = rng.integers(0, 9, size=4)
        ref, _ = quad(lambda x: _phi(a, x) * _phi(b, x) * _phi(c, x) * _phi(d, x), -12, 12)
        assert t[a, b, c, d] == pytest.approx(ref, abs=1e-12)


def test_delta_tensor_cap():
    with pytest.raises(ValueError):
        delta_tensor(oracle.DELTA_MODE_CAP + 1)


def test_config_validation():
    with pytest.raises(ValueError):
        EDConfig(n_particles=4, n_modes=10, g_values=(1.0,))
    with pytest.raises(ValueError):
        EDConfig(n_particles=3, n_modes=4, g_values=(1.0,))
    with pytest.raises(ValueError):
        EDConfig(n_particles=2, n_modes=10, g_values=(2.0, 1.0))
    with pytest.raises(ValueError):
        EDConfig(n_particles=2, n_modes=10, g_values=(-1.0,))
    with pytest.raises(ValueError):
        EDConfig(n_particles=2, n_modes=10, g_values=(1.0,), n_states=0)
    with pytest.raises(ValueError):
        EDConfig(n_particles=2, n_modes=10, g_values=(1.0,), components=ComponentSpec((3,)))


def test_two_body_reference_limits():
    # weak coupling rises from the free even state; strong coupling
    # approaches the fermionized value from below
    assert two_body_reference(1e-8) == pytest.approx(1.0, abs=1e-6)
    assert two_body_reference(1e8) == pytest.approx(2.0, abs=1e-6)
    assert two_body_reference(1e8, branch=1) == pytest.approx(4.0, abs=1e-6)
    couplings = [0.5, 1.0, 5.0, 40.0]
    energies = [two_body_reference(g) for g in couplings]
    assert all(b > a for a, b in zip(energies, energies[1:]))
    with pytest.raises(ValueError):
        two_body_reference(-2.0)


def test_two_body_slope_limit():
    # the running slope g^2 dE/dg approaches K = 2 gamma_2
    assert two_body_slope(200.0) == pytest.approx(2.0 * GAMMA_2, rel=0.01)
    assert two_body_slope(2000.0) == pytest.approx(2.0 * GAMMA_2, rel=0.001)


@pytest.fixture(scope="module")
def ed_two():
    cfg = EDConfig(n_particles=2, n_modes=40, g_values=(20.0, 50.0, 100.0), n_states=4)
    return diagonalize(cfg)


def test_ed_matches_two_body_reference(ed_two):
    # truncated energies sit above the exact values but within the
    # truncation error of a 40-mode basis
    for gi, g in enumerate(ed_two.config.g_values):
        exact = two_body_reference(g)
        approx = ed_two.energies[gi, 0]
        assert exact < approx < exact + 0.08


def test_ed_tracking_quality(ed_two):
    assert ed_two.tracked.shape == (3, 4)
    assert ed_two.track_quality.shape == (3, 4)
    assert np.min(ed_two.track_quality) > 0.99
    assert np.all(np.diff(ed_two.tracked[:, 0]) > 0)


def test_ed_fermionic_state_flat(ed_two):
    # one tracked column is the odd (fermionized) state: energy 2 at
    # every coupling and vanishing contact expectation
    flat = np.where(np.max(np.abs(ed_two.tracked - 2.0), axis=0) < 1e-9)[0]
    assert len(flat) == 1
    assert np.max(np.abs(ed_two.interaction[:, flat[0]])) < 1e-12


def test_slope_fit_two_body(ed_two):
    fit = slope_fit(ed_two, 0)
    assert isinstance(fit, SlopeFit)
    k_exact = 2.0 * GAMMA_2
    assert abs(fit.k_value - k_exact) / k_exact < 0.05
    assert abs(fit.k_value - k_exact) < 3.0 * fit.uncertainty + 1e-6
    assert fit.intercept == pytest.approx(2.0, abs=0.08)
    flat = int(np.where(np.max(np.abs(ed_two.tracked - 2.0), axis=0) < 1e-9)[0][0])
    assert abs(slope_fit(ed_two, flat).k_value) < 1e-6


def test_slope_fit_needs_three_couplings():
    cfg = EDConfig(n_particles=2, n_modes=10, g_values=(5.0, 10.0), n_states=1)
    with pytest.raises(ValueError, match="three"):
        slope_fit(diagonalize(cfg), 0)
    with pytest.raises(ValueError, match="state index"):
        slope_fit(diagonalize(EDConfig(2, 10, (5.0, 10.0, 20.0), n_states=1)), 1)


def test_identical_pair_has_no_contact():
    cfg = EDConfig(n_particles=2, n_modes=12, g_values=(5.0, 10.0),
                   n_states=2, components=ComponentSpec((2,)))
    res = diagonalize(cfg)
    assert res.basis_dim == 12 * 11 // 2
    np.testing.assert_allclose(res.energies[0], res.energies[1], atol=1e-10)
    assert np.max(np.abs(res.interaction)) < 1e-10


def test_component_spectrum_nested_in_full():
    g_values = (8.0,)
    full = diagonalize(EDConfig(3, 8, g_values, n_states=12))
    part = diagonalize(EDConfig(3, 8, g_values, n_states=4, components=ComponentSpec((2, 1))))
    assert part.basis_dim == 8 * 8 * 7 // 2
    for e in part.energies[0]:
        assert np.min(np.abs(full.energies[0] - e)) < 1e-8


def test_interaction_is_energy_derivative():
    # Hellmann-Feynman check inside the truncated model itself
    cfg = EDConfig(n_particles=2, n_modes=30, g_values=(4.975, 5.0, 5.025), n_states=1)
    res = diagonalize(cfg)
    fd = (res.tracked[2, 0] - res.tracked[0, 0]) / 0.05
    hf = res.interaction[1, 0]
    assert abs(fd - hf) / abs(hf) < 1e-4


def test_sparse_matches_dense(monkeypatch):
    cfg = EDConfig(n_particles=3, n_modes=10, g_values=(10.0,), n_states=6)
    dense = diagonalize(cfg)
    monkeypatch.setattr(oracle, "DENSE_DIM_CAP", 10)
    sparse = diagonalize(cfg)
    np.testing.assert_allclose(sparse.energies, dense.energies, atol=1e-8)
    np.testing.assert_allclose(sparse.interaction, dense.interaction, atol=1e-6)
    again = diagonalize(cfg)
    np.testing.assert_array_equal(again.energies, sparse.energies)
