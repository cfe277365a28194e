import numpy as np
import pytest
from conftest import random_stable_chain

from cavity_trio.model import NonPositiveWavelength, ResonatorChain, build_dynamical_matrix, pump_amplitude_from_power
from cavity_trio.noise import DefectiveMatrix, diagonalizer, noise_floor_power, noise_photon_estimates

FIG1B = ResonatorChain.from_rates([10.0, 0.195, 5.0], [20.0, 1.0])


def test_fig1b_worked_example():
    est = noise_photon_estimates(FIG1B, 5.195, 5.0)
    assert est.selected_value == pytest.approx(3.6e-2, rel=0.15)
    assert abs(est.eigenvalues[est.selected]) == pytest.approx(19.97, rel=0.01)
    assert abs(est.projections[est.selected]) == pytest.approx(abs(0.707 - 0.186j), rel=0.01)
    assert est.selected_value in est.per_mode
    assert np.all(est.per_mode >= 0)


def test_zero_gain():
    est = noise_photon_estimates(FIG1B, 0.0, 0.0)
    assert np.all(est.per_mode == 0)


def test_decoupled_chain_leaves_mode_one_quiet():
    chain = ResonatorChain.from_rates([10.0, 0.2, 5.0], [1e-9, 1e-9])
    est = noise_photon_estimates(chain, 0.2)
    assert est.selected_value < 1e-15


def test_scales_with_gain_squared():
    # same matrix (effective gain 0.195), gross gain doubled
    a = noise_photon_estimates(FIG1B, 5.195, 5.0)
    b = noise_photon_estimates(FIG1B, 10.39, 10.195)
    np.testing.assert_allclose(b.per_mode / a.per_mode, 4.0, rtol=1e-12)


def test_invariant_under_eigenvector_phases():
    m = build_dynamical_matrix(FIG1B, 0.195)
    w, v, c = diagonalizer(m)
    rng = np.random.default_rng(0)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    c_rotated = np.linalg.inv(v * phases)
    np.testing.assert_allclose(np.abs(c_rotated[:, 1]), np.abs(c[:, 1]), rtol=1e-12)


def test_diagonalizer_normalisation():
    m = build_dynamical_matrix(FIG1B, 0.195)
    w, v, c = diagonalizer(m)
    np.testing.assert_allclose(np.linalg.norm(v, axis=0), 1.0, rtol=1e-12)
    lead = v[np.argmax(np.abs(v), axis=0), np.arange(3)]
    np.testing.assert_allclose(lead.imag, 0.0, atol=1e-15)
    assert np.all(lead.real > 0)
    np.testing.assert_allclose(v @ np.diag(w) @ c, m, atol=1e-12)


def test_exceptional_point_is_defective():
    chain = ResonatorChain.from_rates([1.0, 1.0], [1.0])
    with pytest.raises(DefectiveMatrix):
        noise_photon_estimates(chain, 1.0)


def test_needs_active_resonator():
    with pytest.raises(ValueError):
        noise_photon_estimates(ResonatorChain.from_rates([1.0, 2.0], [1.0], active=None), 1.0)


def test_finite_for_stable_chains():
    rng = np.random.default_rng(31)
    for _ in range(50):
        chain = random_stable_chain(rng)
        est = noise_photon_estimates(chain, chain.rates[1] + 1.0, 1.0)
        assert np.isfinite(est.selected_value) and est.selected_value >= 0


def test_floor_power():
    assert noise_floor_power(1550e-9) == pytest.approx(1.28e-19, rel=0.01)
    assert noise_floor_power(775e-9) == pytest.approx(2 * noise_floor_power(1550e-9), rel=1e-12)
    with pytest.raises(NonPositiveWavelength):
        noise_floor_power(-1.0)


def test_floor_power_round_trip():
    # 1 sqrt(Hz) is 1e-3 sqrt(MHz)
    assert pump_amplitude_from_power(noise_floor_power(1550e-9), 1550e-9) == pytest.approx(1e-3, rel=1e-9)
