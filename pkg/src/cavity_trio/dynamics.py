"""
Time evolution of the mean fields with constant or saturating gain.

The equations are integrated in the frame rotating at the pump frequency,

    da/dt = M(kappa2(t)) a + (sqrt(2 kappa_ex) eps_p, 0, ..., 0),

where the active resonator's effective gain follows the gain model. For a
saturating medium the photon number in the gain law is closed with the mean
field, <a2^dag a2> ~ |a2|^2, and the gain responds instantaneously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp

from .analytic import SteadySolution
from .model import (
    ConstantGain,
    GainModel,
    PumpDrive,
    ResonatorChain,
    SaturatingGain,
    build_dynamical_matrix,
    validate_chain,
)

DIVERGENCE_RATIO = 1e12


class Diverged(ArithmeticError):
    """The fields blew past the overflow guard: the configuration is unstable."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class ToleranceNotMet(ArithmeticError):
    pass


class NotStabilized(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: NDArray[np.float64]
    amplitudes: NDArray[np.complex128]  # shape (len(times), N)
    gain_trace: NDArray[np.float64]
    stabilized_at: Optional[float]
    chain: ResonatorChain = field(repr=False)
    pump: PumpDrive = field(repr=False)
    gain_model: GainModel = field(repr=False)

    @property
    def final(self) -> SteadySolution:
        a = self.amplitudes[-1]
        if self.pump.amplitude > 0:
            eps = math.sqrt(2.0 * self.chain.kappa_ex) * a[0] / self.pump.amplitude
        else:
            eps = complex("nan")
        return SteadySolution(a.copy(), complex(eps), self.pump.detuning(self.chain))

    @property
    def final_gain(self) -> float:
        return float(self.gain_trace[-1])

    def index_at(self, t: float) -> int:
        return int(np.searchsorted(self.times, t))


def _effective_gain(gain_model: GainModel, n2: float) -> float:
    return float(gain_model.effective(n2))


def default_window(chain: ResonatorChain, gain_model: GainModel) -> float:
    """Twenty slowest decay times of the unsaturated constant-gain matrix [us]."""
    m = build_dynamical_matrix(chain, gain_model.unsaturated)
    re = np.abs(np.linalg.eigvals(m).real)
    re = re[re > 0]
    return 20.0 / re.min() if re.size else 1.0


def evolve(
    chain: ResonatorChain,
    gain_model: GainModel,
    pump: PumpDrive,
    t_end: float,
    rel_tol: float = 1e-9,
    abs_tol: Optional[float] = None,
    steady_tol: float = 1e-8,
    window: Optional[float] = None,
    initial: Optional[ArrayLike] = None,
    t_eval: Optional[ArrayLike] = None,
) -> Trajectory:
    """
    Integrate the mean-field equations from ``initial`` (vacuum by default).

    Uses the Dormand-Prince 5(4) pair. The returned samples are the solver's
    accepted steps unless ``t_eval`` is given. ``stabilized_at`` is filled by
    :func:`detect_steady` with the given window and tolerance.

    Raises
    ------
    Diverged
        If any |a_k| exceeds 1e12 times the drive scale.
    ToleranceNotMet
        If the integrator cannot reach ``t_end`` at the requested tolerance.
    """
    validate_chain(chain, allow_passive=True)
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    n = chain.size
    active = chain.active_index
    v = pump.drive(chain)
    y0 = np.zeros(n, dtype=complex) if initial is None else np.asarray(initial, dtype=complex)
    if y0.shape != (n,):
        raise ValueError(f"initial state must have shape ({n},)")
    scale = max(v, float(np.max(np.abs(y0))) if n else 0.0)
    if abs_tol is None:
        abs_tol = 1e-12 * scale if scale > 0 else 1e-300
    guard = DIVERGENCE_RATIO * scale if scale > 0 else math.inf

    base = build_dynamical_matrix(chain, 0.0 if active is not None else None, pump.omega_p)
    drive = np.zeros(n, dtype=complex)
    drive[0] = v

    def gain_of(a: NDArray) -> float:
        if active is None:
            return 0.0
        return _effective_gain(gain_model, float(abs(a[active]) ** 2))

    if active is not None and isinstance(gain_model, ConstantGain):
        fixed = base.copy()
        fixed[active, active] += gain_model.kappa2

        def rhs(t, a):
            return fixed @ a + drive

    elif active is not None:

        def rhs(t, a):
            out = base @ a + drive
            out[active] += gain_of(a) * a[active]
            return out

    else:

        def rhs(t, a):
            return base @ a + drive

    def blowup(t, a):
        return guard - np.max(np.abs(a))

    blowup.terminal = True

    if t_end == 0:
        times = np.array([0.0])
        amps = y0[None, :].copy()
    else:
        sol = solve_ivp(
            rhs,
            (0.0, t_end),
            y0,
            method="RK45",
            rtol=rel_tol,
            atol=abs_tol,
            t_eval=None if t_eval is None else np.asarray(t_eval, dtype=float),
            events=blowup if math.isfinite(guard) else None,
        )
        if sol.status == 1:
            raise Diverged(
                f"field amplitude exceeded {DIVERGENCE_RATIO:g} x drive scale",
                float(sol.t_events[0][0]),
            )
        if sol.status != 0:
            raise ToleranceNotMet(sol.message)
        times = sol.t
        amps = sol.y.T.copy()
    gains = np.array([gain_of(a) for a in amps]) if active is not None else np.zeros(len(times))
    traj = Trajectory(times, amps, gains, None, chain, pump, gain_model)
    if window is None:
        window = default_window(chain, gain_model)
    t_star = detect_steady(traj, window, steady_tol)
    return Trajectory(times, amps, gains, t_star, chain, pump, gain_model)


def detect_steady(trajectory: Trajectory, window: float, steady_tol: float = 1e-8) -> Optional[float]:
    """
    Earliest sample time t* after which every field and the gain stay flat
    for ``window`` microseconds.

    Flatness is judged on the spread of each field (max - min of real and
    imaginary parts, which bounds every pairwise difference) over
    [t*, t* + window], relative to the largest field magnitude in the window
    plus a floor 1e-9 * sqrt(2 kappa_ex) eps_p. A nearly dark cavity carries
    integrator noise of order rel_tol times the drive, so each field is
    measured against the state norm rather than its own size. The gain
    spread must stay below steady_tol * kappa20.
    """
    t = trajectory.times
    a = trajectory.amplitudes
    g = trajectory.gain_trace
    if t.size == 0:
        raise ValueError("empty trajectory")
    floor = 1e-9 * trajectory.pump.drive(trajectory.chain)
    gm = trajectory.gain_model
    gain_scale = gm.kappa20 if isinstance(gm, SaturatingGain) else max(abs(gm.kappa2), 1.0)
    ends = np.searchsorted(t, t + window, side="right")
    for i in range(t.size):
        if t[i] + window > t[-1]:
            return None
        j = ends[i]
        seg = a[i:j]
        spread = np.hypot(np.ptp(seg.real, axis=0), np.ptp(seg.imag, axis=0))
        ref = np.max(np.abs(seg)) + floor
        if np.all(spread <= steady_tol * ref) and np.ptp(g[i:j]) <= steady_tol * gain_scale:
            return float(t[i])
    return None


def final_photon_numbers(trajectory: Trajectory) -> NDArray[np.float64]:
    """|a_k(t*)|^2 at the stabilization time."""
    if trajectory.stabilized_at is None:
        raise NotStabilized("trajectory never reached a steady state")
    i = trajectory.index_at(trajectory.stabilized_at)
    return np.abs(trajectory.amplitudes[i]) ** 2
