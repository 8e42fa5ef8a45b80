"""Boundary weights: closed-form anchors, estimator agreement, determinism."""

import math

import numpy as np
import pytest

from tonks.slater import make_level
from tonks.traps import HarmonicBasis
from tonks.weights import BoundaryWeight, IntegrationConfig, ToleranceError, all_gammas, gamma

GAMMA_2 = math.sqrt(2.0 / math.pi)
GAMMA_3 = 27.0 / (8.0 * math.sqrt(2.0 * math.pi))


@pytest.fixture(scope="module")
def basis():
    return HarmonicBasis()


@pytest.fixture(scope="module")
def state2(basis):
    return make_level(basis, 2)


@pytest.fixture(scope="module")
def state3(basis):
    return make_level(basis, 3)


def test_two_body_anchor(state2):
    w = gamma(state2, 1)
    assert w.method == "quadrature"
    assert w.value == pytest.approx(GAMMA_2, abs=1e-12)
    assert w.error < 1e-10


def test_three_body_anchor(state3):
    for k in (1, 2):
        w = gamma(state3, k)
        assert w.value == pytest.approx(GAMMA_3, abs=1e-10)
        assert w.error < 1e-10


def test_boundary_index_range(state3):
    with pytest.raises(ValueError):
        gamma(state3, 0)
    with pytest.raises(ValueError):
        gamma(state3, 3)


def test_jump_form_matches_gradient(state3):
    a = gamma(state3, 1, IntegrationConfig(form="gradient"))
    b = gamma(state3, 1, IntegrationConfig(form="jump"))
    assert b.value == pytest.approx(a.value, abs=1e-10)


def test_parity_shortcut(state3):
    full = all_gammas(state3, IntegrationConfig(), use_parity=False)
    mirrored = all_gammas(state3, IntegrationConfig(), use_parity=True)
    for a, b in zip(full, mirrored):
        assert b.value == pytest.approx(a.value, abs=1e-10)


def test_excited_state_weights_positive(basis):
    s = make_level(basis, 3, level=1)
    for w in all_gammas(s):
        assert w.value > 0
        assert w.error < 1e-8


def test_config_validation():
    with pytest.raises(ValueError, match="method"):
        IntegrationConfig(method="exact")
    with pytest.raises(ValueError, match="form"):
        IntegrationConfig(form="square")
    with pytest.raises(ValueError):
        IntegrationConfig(samples=10, strata=64, shards=16)
    with pytest.raises(ValueError):
        IntegrationConfig(max_doublings=0)


def test_tolerance_error_carries_best(state3):
    cfg = IntegrationConfig(tol=1e-16, max_doublings=1)
    with pytest.raises(ToleranceError) as info:
        gamma(state3, 1, cfg)
    best = info.value.best
    assert isinstance(best, BoundaryWeight)
    assert best.value == pytest.approx(GAMMA_3, rel=1e-6)
    assert best.error > 1e-16


@pytest.fixture(scope="module")
def mc_pair(state3):
    cfg = IntegrationConfig(method="monte-carlo", samples=400_000, seed=3)
    return cfg, all_gammas(state3, cfg)


def test_monte_carlo_matches_quadrature(state3, mc_pair):
    _, mc = mc_pair
    for k, w in enumerate(mc, start=1):
        assert w.method == "monte-carlo"
        exact = gamma(state3, k)
        assert w.error < 0.02
        assert abs(w.value - exact.value) < 3.0 * (w.error + exact.error)


def test_monte_carlo_deterministic(state3, mc_pair):
    cfg, first = mc_pair
    again = all_gammas(state3, cfg)
    for a, b in zip(first, again):
        assert b.value == a.value
        assert b.error == a.error


def test_monte_carlo_thread_invariant(state3, mc_pair):
    cfg, serial = mc_pair
    threaded = all_gammas(state3, replace_threads(cfg, 4))
    for a, b in zip(serial, threaded):
        assert b.value == a.value
        assert b.error == a.error


def replace_threads(cfg, threads):
    from dataclasses import replace

    return replace(cfg, threads=threads)


def test_monte_carlo_target_unreachable(state3):
    cfg = IntegrationConfig(method="monte-carlo", samples=200_000, seed=1, mc_target=1e-9)
    with pytest.raises(ToleranceError) as info:
        gamma(state3, 1, cfg)
    assert info.value.best.value == pytest.approx(GAMMA_3, rel=0.1)


def test_four_body_symmetry():
    # Parity maps boundary 1 onto boundary 3, so the estimates must agree
    # within combined statistical errors.
    s4 = make_level(HarmonicBasis(), 4)
    ws = all_gammas(s4, IntegrationConfig(samples=2_000_000, seed=2), use_parity=False)
    w1, w2, w3 = ws
    assert abs(w1.value - w3.value) < 3.0 * math.hypot(w1.error, w3.error)
    for w in ws:
        assert w.value > 0
        assert w.error < 0.05 * w.value
