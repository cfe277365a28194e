import math

import numpy as np
import pytest

from cavity_trio.dynamics import evolve
from cavity_trio.model import ConstantGain, PumpDrive, ResonatorChain, SaturatingGain
from cavity_trio.tuning import (
    BracketExcluded,
    UnstableRegion,
    find_transparency_j2,
    saturated_fixed_point,
    saturated_state,
    scan_transmission_vs_j2,
)


def test_tuning_under_saturation(saturated_case):
    res = find_transparency_j2(*saturated_case)
    assert res.value == pytest.approx(0.099, abs=0.001)
    assert res.residual < 1e-8
    assert res.parameter_name == "j2"
    # the tuned point satisfies the shifted condition J2^2 = kappa2_s kappa3
    assert res.value**2 == pytest.approx(res.saturated_gain * 1.0, rel=1e-9)


def test_constant_gain_is_analytic(inset_chain, resonant_pump):
    res = find_transparency_j2(inset_chain, ConstantGain(0.2), resonant_pump)
    assert res.value == pytest.approx(1.0, rel=1e-15)
    assert res.residual < 1e-12


def test_constant_gain_random_pairs():
    rng = np.random.default_rng(21)
    for _ in range(50):
        k2, k3 = 10 ** rng.uniform(-2, 2, 2)
        chain = ResonatorChain.from_rates([5.0, k2, k3], [1.0, 1.0])
        res = find_transparency_j2(chain, ConstantGain(k2), PumpDrive(0.0, 1.0))
        assert res.value == pytest.approx(math.sqrt(k2 * k3), rel=1e-10)


def test_no_saturation_limit(saturated_case):
    chain, _, pump = saturated_case
    res = find_transparency_j2(chain, SaturatingGain(0.01, 1e30), pump, tol=1e-13)
    assert res.value == pytest.approx(math.sqrt(0.01 * 1.0), abs=1e-12)


def test_saturation_lowers_the_tuned_coupling():
    for k20, i_s in [(0.01, 1e8), (0.1, 1e7), (0.05, 1e9)]:
        chain = ResonatorChain.from_rates([2.0, k20, 1.0], [10.0, 0.1])
        res = find_transparency_j2(chain, SaturatingGain(k20, i_s), PumpDrive(0.0, 1e4))
        assert res.value <= math.sqrt(k20 * 1.0)


def test_depth_is_unimodal_in_bracket(saturated_case):
    chain, gain, pump = saturated_case
    js = np.linspace(0.08, 0.1, 41)
    depth = [abs(saturated_state(chain.with_coupling(1, j), gain, pump).amplitudes[0]) for j in js]
    k = int(np.argmin(depth))
    assert np.all(np.diff(depth[: k + 1]) < 0)
    assert np.all(np.diff(depth[k:]) > 0)
    assert js[k] == pytest.approx(find_transparency_j2(chain, gain, pump).value, abs=js[1] - js[0])


def test_bracket_without_root(saturated_case):
    with pytest.raises(BracketExcluded):
        find_transparency_j2(*saturated_case, bracket=(0.05, 0.08))
    with pytest.raises(ValueError):
        find_transparency_j2(*saturated_case, bracket=(0.1, 0.05))


def test_unstable_candidate():
    # Fig4 rates: J2 below sqrt(0.06) is unstable
    chain = ResonatorChain.from_rates([20.0, 0.06, 6.0], [1.0, 0.6])
    with pytest.raises(UnstableRegion):
        find_transparency_j2(chain, SaturatingGain(0.06, 1e8), PumpDrive(0.0, 1.0), bracket=(0.05, 0.2))


def test_needs_resonant_pump(saturated_case):
    chain, gain, _ = saturated_case
    with pytest.raises(ValueError):
        find_transparency_j2(chain, gain, PumpDrive(0.1, 1e4))


def test_fixed_point_fig1b(fig1b):
    state = saturated_fixed_point(*fig1b)
    assert state.effective_gain == pytest.approx(0.195, abs=0.005)
    traj = evolve(*fig1b, 30.0)
    assert state.g2s == pytest.approx(traj.final_gain, rel=1e-6)


def test_fixed_point_without_saturation(fig1b):
    chain, _, pump = fig1b
    assert saturated_fixed_point(chain, SaturatingGain(0.2, 1e30), pump).g2s == pytest.approx(0.2, rel=1e-12)
    assert saturated_fixed_point(chain, SaturatingGain(0.2, 1e8), PumpDrive(0.0, 0.0)).g2s == 0.2


def test_fixed_point_requires_stable_start():
    chain = ResonatorChain.from_rates([20.0, 0.06, 6.0], [1.0, 0.2])
    with pytest.raises(UnstableRegion):
        saturated_fixed_point(chain, SaturatingGain(0.06, 1e8), PumpDrive(0.0, 1.0))


def test_saturated_state_constant_gain(inset_chain, resonant_pump):
    state = saturated_state(inset_chain, ConstantGain(0.2), resonant_pump)
    assert state.g2s == 0.2 and state.iterations == 0
    assert state.amplitudes[0] == 0


def test_fig4_scan():
    chain = ResonatorChain.from_rates([20.0, 0.06, 6.0], [1.0, 0.6])
    rows = scan_transmission_vs_j2(chain, ConstantGain(0.06), PumpDrive(0.0, 1.0), [0.2, 0.45, 0.6, 0.75])
    assert [r.label for r in rows] == ["Unstable", "Stable", "Stable", "Stable"]
    assert rows[0].t0_sq is None
    assert rows[1].t0_sq > 1.0
    assert rows[2].t0_sq == pytest.approx(1.0, abs=1e-12)
    assert rows[3].t0_sq < 1.0
    for r in rows[1:]:
        assert r.t_min_sq <= r.t0_sq <= r.t_max_sq


def test_scan_flips_at_boundary():
    chain = ResonatorChain.from_rates([20.0, 0.06, 6.0], [1.0, 0.6])
    rows = scan_transmission_vs_j2(chain, ConstantGain(0.06), PumpDrive(0.0, 1.0), np.linspace(0.2, 0.3, 11))
    labels = [r.label for r in rows]
    first_stable = labels.index("Stable")
    assert set(labels[:first_stable]) == {"Unstable"}
    assert set(labels[first_stable:]) == {"Stable"}
    assert rows[first_stable - 1].j2 < math.sqrt(0.06) < rows[first_stable].j2


def test_passive_chains_never_amplify():
    rng = np.random.default_rng(22)
    for _ in range(10):
        rates = rng.uniform(0.1, 5, 3)
        chain = ResonatorChain.from_rates(rates, rng.uniform(0.1, 3, 2), active=None)
        rows = scan_transmission_vs_j2(chain, ConstantGain(0.0), PumpDrive(0.0, 1.0), np.linspace(0.1, 3, 7))
        for r in rows:
            assert r.t_max_sq <= 1.0 + 1e-12


def test_scan_threads_match(monkeypatch):
    chain = ResonatorChain.from_rates([20.0, 0.06, 6.0], [1.0, 0.6])
    grid = np.linspace(0.2, 1.0, 9)
    serial = scan_transmission_vs_j2(chain, ConstantGain(0.06), PumpDrive(0.0, 1.0), grid)
    monkeypatch.setenv("CAVITY_TRIO_THREADS", "3")
    assert scan_transmission_vs_j2(chain, ConstantGain(0.06), PumpDrive(0.0, 1.0), grid) == serial


def test_scan_rejects_bad_grid(inset_chain, resonant_pump):
    with pytest.raises(ValueError):
        scan_transmission_vs_j2(inset_chain, ConstantGain(0.2), resonant_pump, [0.0, 1.0])
