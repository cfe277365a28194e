import math

import numpy as np
import pytest
import scipy.linalg
from conftest import random_stable_chain, rel_err

from cavity_trio.analytic import steady_state_exact
from cavity_trio.dynamics import (
    Diverged,
    NotStabilized,
    Trajectory,
    default_window,
    detect_steady,
    evolve,
    final_photon_numbers,
)
from cavity_trio.model import ConstantGain, PumpDrive, ResonatorChain, SaturatingGain, build_dynamical_matrix


def exact_trajectory(chain, pump, t):
    """a(t) = exp(M t) (a0 - a_s) + a_s from vacuum, with a_s the steady state."""
    m = build_dynamical_matrix(chain, omega_p=pump.omega_p)
    v = np.zeros(chain.size, dtype=complex)
    v[0] = pump.drive(chain)
    a_s = np.linalg.solve(m, -v)
    return scipy.linalg.expm(m * t) @ (-a_s) + a_s


def test_inset_endpoint_is_dark(inset_chain, resonant_pump):
    traj = evolve(inset_chain, ConstantGain(0.2), resonant_pump, 200.0)
    assert abs(traj.amplitudes[-1, 0]) < 1e-8
    np.testing.assert_allclose(
        traj.amplitudes[-1], steady_state_exact(inset_chain, resonant_pump).amplitudes, atol=1e-8
    )
    assert traj.stabilized_at is not None
    assert traj.final.transmission == pytest.approx(1.0, abs=1e-8)


def test_undriven_passive_chain_stays_empty():
    chain = ResonatorChain.from_rates([1.0, 2.0, 3.0], [1.0, 1.0], active=None)
    traj = evolve(chain, ConstantGain(0.0), PumpDrive(0.0, 0.0), 10.0, window=1.0)
    assert np.all(traj.amplitudes == 0)
    assert traj.stabilized_at == 0.0
    assert math.isnan(traj.final.susceptibility.real)


def test_zero_duration_keeps_initial_row(fig1b):
    chain, gain, pump = fig1b
    traj = evolve(chain, gain, pump, 0.0)
    assert traj.times.tolist() == [0.0]
    assert np.all(traj.amplitudes == 0)
    assert traj.gain_trace[0] == 0.2


def test_negative_duration(fig1b):
    with pytest.raises(ValueError):
        evolve(*fig1b, -1.0)


def test_initial_state_shape(inset_chain, resonant_pump):
    with pytest.raises(ValueError):
        evolve(inset_chain, ConstantGain(0.2), resonant_pump, 1.0, initial=[0, 0])


def test_random_endpoints_match_closed_form():
    rng = np.random.default_rng(50)
    for _ in range(10):
        chain = random_stable_chain(rng, margin=0.1)
        pump = PumpDrive(0.0, 1.0)
        traj = evolve(chain, ConstantGain(chain.rates[1]), pump, 300.0, rel_tol=1e-10)
        exact = steady_state_exact(chain, pump).amplitudes
        assert rel_err(traj.amplitudes[-1], exact) < 1e-8


def test_transient_matches_matrix_exponential(inset_chain, resonant_pump):
    t = np.linspace(0, 3, 7)
    traj = evolve(inset_chain, ConstantGain(0.2), resonant_pump, 3.0, rel_tol=1e-11, t_eval=t)
    for ti, a in zip(t, traj.amplitudes):
        np.testing.assert_allclose(a, exact_trajectory(inset_chain, resonant_pump, ti), atol=1e-9)


def test_integrator_error_shrinks_with_tolerance(inset_chain, resonant_pump):
    t_end = 2.0
    exact = exact_trajectory(inset_chain, resonant_pump, t_end)
    errs = []
    for tol in (1e-5, 1e-5 / 16):
        traj = evolve(inset_chain, ConstantGain(0.2), resonant_pump, t_end, rel_tol=tol, abs_tol=1e-14)
        errs.append(np.max(np.abs(traj.amplitudes[-1] - exact)))
    assert errs[0] / errs[1] >= 4.0


def test_saturating_gain_never_exceeds_unsaturated(fig1b):
    chain, gain, pump = fig1b
    traj = evolve(chain, gain, pump, 10.0)
    assert np.all(traj.gain_trace <= gain.unsaturated)
    n2 = np.abs(traj.amplitudes[:, 1]) ** 2
    rising = np.diff(n2) > 0
    assert np.all(np.diff(traj.gain_trace)[rising] < 0)


def test_gamma2_offsets_effective_gain():
    chain = ResonatorChain.from_rates([10.0, 0.2, 5.0], [20.0, 1.0])
    a = evolve(chain, SaturatingGain(0.2, 1e8), PumpDrive(0.0, 1e4), 5.0, t_eval=[5.0])
    b = evolve(chain, SaturatingGain(5.2, 1e8 * 26, gamma2=5.0), PumpDrive(0.0, 1e4), 5.0, t_eval=[5.0])
    # same unsaturated gain, different saturation curves
    assert a.gain_trace[0] != pytest.approx(b.gain_trace[0], rel=1e-6)
    assert b.gain_trace[0] <= 0.2


def test_fig1b_saturated_gain(fig1b):
    traj = evolve(*fig1b, 30.0)
    assert traj.final_gain == pytest.approx(0.195, abs=0.005)


def test_larger_j1_suppresses_pumped_field():
    k20 = 0.1
    gain = SaturatingGain(k20, 1e7)
    pump = PumpDrive(0.0, 1e4)
    ends = []
    for j1 in (2.0, 4.0, 8.0):
        chain = ResonatorChain.from_rates([2.0, k20, 1.0], [j1, math.sqrt(k20)])
        traj = evolve(chain, gain, pump, 300.0)
        assert traj.stabilized_at is not None
        ends.append(abs(traj.amplitudes[-1, 0]))
    assert ends[0] > ends[1] > ends[2]


def test_unstable_run_never_settles():
    chain = ResonatorChain.from_rates([20.0, 0.06, 6.0], [1.0, 0.2])
    traj = evolve(chain, ConstantGain(0.06), PumpDrive(0.0, 1.0), 50.0)
    assert traj.stabilized_at is None
    with pytest.raises(NotStabilized):
        final_photon_numbers(traj)


def test_divergence_guard():
    chain = ResonatorChain.from_rates([1.0, 3.0, 1.0], [0.1, 0.1])
    with pytest.raises(Diverged) as err:
        evolve(chain, ConstantGain(3.0), PumpDrive(0.0, 1.0), 100.0)
    assert 0 < err.value.time < 100.0


def test_constant_trajectory_is_steady_from_start(inset_chain, resonant_pump):
    times = np.linspace(0, 10, 11)
    amps = np.ones((11, 3), dtype=complex)
    traj = Trajectory(times, amps, np.full(11, 0.2), None, inset_chain, resonant_pump, ConstantGain(0.2))
    assert detect_steady(traj, 5.0) == 0.0
    assert detect_steady(traj, 20.0) is None


def test_dark_mode_photon_number():
    chain = ResonatorChain.from_rates([10.0, 0.2, 5.0], [2.0, 1.0])
    pump = PumpDrive(0.0, 3.0)
    traj = evolve(chain, ConstantGain(0.2), pump, 300.0)
    n = final_photon_numbers(traj)
    assert n[1] == pytest.approx(2 * 5.0 * (3.0 / 2.0) ** 2, rel=1e-6)
    assert 0.2 * n[1] == pytest.approx(5.0 * n[2], rel=1e-6)


def test_zero_drive_photon_numbers():
    chain = ResonatorChain.from_rates([10.0, 0.2, 5.0], [2.0, 1.0])
    traj = evolve(chain, ConstantGain(0.2), PumpDrive(0.0, 0.0), 5.0, window=1.0)
    assert np.all(final_photon_numbers(traj) == 0)


def test_default_window(inset_chain):
    slow = np.min(np.abs(np.linalg.eigvals(build_dynamical_matrix(inset_chain)).real))
    assert default_window(inset_chain, ConstantGain(0.2)) == pytest.approx(20.0 / slow)
