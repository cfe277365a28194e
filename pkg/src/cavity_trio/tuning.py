"""
Locating complete-transparency operating points, with or without gain saturation.

With a saturating medium the effective gain depends on the photon number in
the active resonator, which in turn depends on the couplings. The saturated
steady state is found as a fixed point of

    g2 <- kappa20 / (1 + |a2(g2 - gamma2)|^2 / I_S)

where a2(kappa2) is the linear steady state at constant gain kappa2. The
transparency coupling then solves kappa2_s(J2) = J2^2 / kappa3 on resonance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .analytic import SingularDenominator, steady_state, susceptibility
from .dynamics import Diverged, evolve
from .model import (
    ConstantGain,
    GainModel,
    PumpDrive,
    ResonatorChain,
    SaturatingGain,
    validate_chain,
)
from .stability import Regime, classify_stability, parallel_map


class BracketExcluded(ValueError):
    """The bracket holds no interior transparency point."""


class UnstableRegion(ValueError):
    pass


class IterationDiverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class SaturatedState:
    g2s: float  # gross saturated gain [MHz]
    amplitudes: NDArray[np.complex128]
    iterations: int
    gamma2: float = 0.0

    @property
    def effective_gain(self) -> float:
        return self.g2s - self.gamma2


@dataclass(frozen=True)
class TuneResult:
    parameter_name: str
    value: float
    residual: float
    iterations: int
    saturated_gain: float


@dataclass(frozen=True)
class ScanRow:
    j2: float
    label: str
    t0_sq: Optional[float] = None
    t_min_sq: Optional[float] = None
    t_max_sq: Optional[float] = None
    saturated_gain: Optional[float] = None


def _require_stable(chain: ResonatorChain, gain: float) -> None:
    report = classify_stability(chain, gain)
    if not report.stable:
        raise UnstableRegion(
            f"unstable at J = {chain.couplings} with gain {gain:g} MHz "
            f"(max Re lambda = {report.max_real_part:.3e} MHz)"
        )


def saturated_fixed_point(
    chain: ResonatorChain,
    gain_model: SaturatingGain,
    pump: PumpDrive,
    tol: float = 1e-10,
    relaxation: float = 0.5,
    max_iter: int = 500,
) -> SaturatedState:
    """
    Self-consistent saturated gain and fields, by damped iteration.

    ``tol`` applies to successive gain values relative to kappa20. Raises
    :class:`IterationDiverged` when the map fails to settle; callers then fall
    back to time integration.
    """
    validate_chain(chain)
    _require_stable(chain, gain_model.unsaturated)
    k = chain.active_index
    g = gain_model.kappa20
    for it in range(1, max_iter + 1):
        try:
            a = steady_state(chain, pump, g - gain_model.gamma2).amplitudes
        except SingularDenominator as exc:
            raise IterationDiverged(str(exc)) from exc
        target = gain_model.gross(abs(a[k]) ** 2)
        if not math.isfinite(target):
            raise IterationDiverged("non-finite gain")
        if abs(target - g) <= tol * gain_model.kappa20:
            a = steady_state(chain, pump, target - gain_model.gamma2).amplitudes
            return SaturatedState(float(target), a, it, gain_model.gamma2)
        g = (1.0 - relaxation) * g + relaxation * target
    raise IterationDiverged(f"no convergence in {max_iter} iterations")


def saturated_state(
    chain: ResonatorChain, gain_model: GainModel, pump: PumpDrive, t_end: Optional[float] = None
) -> SaturatedState:
    """Fixed point, or the long-time end of a trajectory if the iteration stalls."""
    if isinstance(gain_model, ConstantGain):
        a = steady_state(chain, pump, gain_model.kappa2).amplitudes
        return SaturatedState(gain_model.kappa2, a, 0)
    try:
        return saturated_fixed_point(chain, gain_model, pump)
    except IterationDiverged:
        if t_end is None:
            m = classify_stability(chain, gain_model.unsaturated)
            slow = min(abs(w.real) for w in m.eigenvalues if w.real != 0)
            t_end = 200.0 / slow
        try:
            traj = evolve(chain, gain_model, pump, t_end)
        except Diverged as exc:
            raise UnstableRegion(str(exc)) from exc
        a = traj.amplitudes[-1]
        g = float(gain_model.gross(abs(a[chain.active_index]) ** 2))
        return SaturatedState(g, a, 0, gain_model.gamma2)


def _check_resonant(chain: ResonatorChain, pump: PumpDrive) -> None:
    if chain.size != 3 or chain.active_index != 1:
        raise ValueError("J2 tuning needs a passive-active-passive chain")
    if not chain.is_degenerate or pump.omega_p != chain.resonators[0].omega:
        raise ValueError("J2 tuning needs a resonant pump and degenerate resonators")


def _golden_min(f, a: float, b: float, tol: float) -> tuple[float, float, int]:
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
        n += 1
    return a, b, n


def find_transparency_j2(
    chain: ResonatorChain,
    gain_model: GainModel,
    pump: PumpDrive,
    bracket: Optional[tuple[float, float]] = None,
    tol: float = 1e-12,
) -> TuneResult:
    """
    Coupling J2 that empties the pumped resonator.

    Constant gain gives sqrt(kappa2 kappa3) directly. For a saturating medium
    |A1|(J2) is first narrowed by golden-section search, then the signed
    residual kappa2_s(J2) - J2^2 / kappa3 is bisected to ``tol`` [MHz]. The
    default bracket runs from 5% of to the unsaturated value
    sqrt((kappa20 - gamma2) kappa3), which bounds the saturated answer.
    """
    validate_chain(chain)
    _check_resonant(chain, pump)
    k3 = chain.rates[2]
    v = pump.drive(chain)

    def residual_of(c: ResonatorChain, gain: float) -> float:
        a1 = steady_state(c, pump, gain).amplitudes[0]
        return abs(a1) / v if v > 0 else 0.0

    if isinstance(gain_model, ConstantGain):
        k2 = gain_model.kappa2
        if k2 <= 0:
            raise BracketExcluded("no transparency coupling without net gain")
        j = math.sqrt(k2 * k3)
        tuned = chain.with_coupling(1, j)
        return TuneResult("j2", j, residual_of(tuned, k2), 0, k2)

    unsat = gain_model.unsaturated
    if unsat <= 0:
        raise BracketExcluded("no transparency coupling without net gain")
    j_const = math.sqrt(unsat * k3)
    lo, hi = bracket if bracket is not None else (0.05 * j_const, j_const)
    if not 0 < lo < hi:
        raise ValueError(f"bad bracket ({lo}, {hi})")

    cache: dict[float, SaturatedState] = {}

    def state(j2: float) -> SaturatedState:
        if j2 not in cache:
            c = chain.with_coupling(1, j2)
            _require_stable(c, unsat)
            cache[j2] = saturated_state(c, gain_model, pump)
        return cache[j2]

    def signed(j2: float) -> float:
        return state(j2).effective_gain - j2 * j2 / k3

    def depth(j2: float) -> float:
        return abs(state(j2).amplitudes[0])

    a, b, evals = _golden_min(depth, lo, hi, 1e-3 * (hi - lo))
    if signed(a) * signed(b) > 0:
        a, b = lo, hi
        if signed(a) * signed(b) > 0:
            raise BracketExcluded(f"no transparency point in [{lo}, {hi}] MHz")
    fa = signed(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = signed(m)
        evals += 1
        if fm == 0:
            a = b = m
            break
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    j = 0.5 * (a + b)
    s = state(j)
    return TuneResult("j2", j, abs(s.amplitudes[0]) / v if v > 0 else 0.0, evals, s.effective_gain)


def scan_transmission_vs_j2(
    chain: ResonatorChain,
    gain_model: GainModel,
    pump: PumpDrive,
    j2_grid: ArrayLike,
    x_window: Optional[tuple[float, float]] = None,
    points: int = 201,
    workers: Optional[int] = None,
) -> list[ScanRow]:
    """
    Centre transmission |t(x=0)|^2 and its range over a detuning window for
    each J2. Stability is checked at the unsaturated gain; unstable rows carry
    only their label.
    """
    validate_chain(chain, allow_passive=True)
    js = np.asarray(j2_grid, dtype=float)
    if np.any(js <= 0):
        raise ValueError("J2 grid must be positive")
    if x_window is None:
        w = 10.0 * chain.couplings[0] ** 2 / chain.kappa1
        x_window = (-w, w)
    xs = pump.omega_p + np.linspace(x_window[0], x_window[1], points)

    def row(j2: float) -> ScanRow:
        c = chain.with_coupling(1, j2)
        report = classify_stability(c, gain_model.unsaturated, pump)
        if report.regime is Regime.UNSTABLE:
            return ScanRow(float(j2), report.regime_label)
        gain = saturated_state(c, gain_model, pump).effective_gain
        t0 = abs(1.0 - complex(susceptibility(c, pump.omega_p, gain))) ** 2
        tt = np.abs(1.0 - susceptibility(c, xs, gain)) ** 2
        return ScanRow(float(j2), report.regime_label, t0, float(tt.min()), float(tt.max()), gain)

    return parallel_map(row, list(js), workers)
