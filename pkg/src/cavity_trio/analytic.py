"""
Closed-form steady states and spectra of driven resonator chains.

Notation follows the coupled-mode matrix of :mod:`cavity_trio.model`. For each
resonator we write the "level term" d_k = -M_kk = kappa_k - i Delta_k for a
passive resonator and -kappa_2 - i Delta_2 for the active one. The response of
the pumped cavity is then the continued fraction

    A_1 = sqrt(2 kappa_ex) eps_p / (d_1 + J_1^2 / (d_2 + J_2^2 / (d_3 + ...)))

evaluated from the far end inward. Flipping the sign of the level-2 term gives
the familiar form ``kappa_1 - i Delta_1 - J_1^2 / (kappa_2 + i Delta_2 - ...)``;
both are the same arithmetic. Transparency is the point where the tail below
J_1^2 vanishes, so A_1 = 0 and the output equals the input (t = 1 - eps_T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .model import PumpDrive, ResonatorChain, validate_chain

_EPS = np.finfo(float).eps


class SingularDenominator(ArithmeticError):
    """The linear response has a pole: no bounded steady state exists."""


class SingularSubfraction(ArithmeticError):
    pass


class NonDegenerateFrequencies(ValueError):
    pass


class EqualRates(ValueError):
    pass


class NonPositiveRate(ValueError):
    pass


class ConditionsNotMet(ValueError):
    pass


class ZeroCoupling(ValueError):
    pass


class ZeroTransmission(ArithmeticError):
    pass


class NoDip(ValueError):
    pass


@dataclass(frozen=True)
class SteadySolution:
    """Driven steady state in the frame rotating at the pump."""

    amplitudes: NDArray[np.complex128]
    susceptibility: complex
    detuning_x: float

    @property
    def transmission(self) -> complex:
        return transmission(self)

    @property
    def photon_numbers(self) -> NDArray[np.float64]:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class TransparencyPoint:
    j2_star: float
    omega_p_star: float


@dataclass(frozen=True)
class DarkBrightBasis:
    """
    Dark and bright combinations of the active (a2) and far (a3) modes.

    ``dark_coeffs @ (A2, A3)`` vanishes on the dark state.
    """

    dark_coeffs: NDArray[np.complex128]
    bright_coeffs: NDArray[np.complex128]

    def apply_dark(self, a2: complex, a3: complex) -> complex:
        return complex(self.dark_coeffs @ np.array([a2, a3]))

    def apply_bright(self, a2: complex, a3: complex) -> complex:
        return complex(self.bright_coeffs @ np.array([a2, a3]))

    @property
    def overlap(self) -> complex:
        """Hermitian inner product <b, d>; equals kappa2 - kappa3."""
        return complex(np.vdot(self.bright_coeffs, self.dark_coeffs))


@dataclass(frozen=True)
class WindowWidth:
    fwhm: float
    approximation: float  # J1^2 / kappa1
    peak_left: float
    peak_right: float


def level_terms(
    chain: ResonatorChain, omega_p: ArrayLike = 0.0, gain: Optional[float] = None
) -> NDArray[np.complex128]:
    """
    d_k = -M_kk for every resonator, shape (N,) + shape(omega_p).
    """
    wp = np.asarray(omega_p, dtype=float)
    signed = chain.signed_rates(gain)
    omegas = chain.omegas
    shape = (chain.size,) + wp.shape
    d = np.empty(shape, dtype=complex)
    for k in range(chain.size):
        d[k] = -signed[k] - 1j * (wp - omegas[k])
    return d


def _tails(d: NDArray, couplings: Sequence[float]) -> list[NDArray]:
    """s_k = d_k + J_k^2 / s_{k+1}, innermost first; returns [s_2, ..., s_N]."""
    n = d.shape[0]
    s = d[n - 1]
    tails = [s]
    for k in range(n - 2, 0, -1):
        if np.any(s == 0):
            raise SingularSubfraction(f"subfraction at level {k + 2} vanishes")
        s = d[k] + couplings[k] ** 2 / s
        tails.append(s)
    tails.reverse()
    return tails


def _pumped_response(d: NDArray, couplings: Sequence[float]) -> NDArray:
    """
    1 / (d_1 + J_1^2 / s_2), i.e. A_1 per unit drive.

    Evaluated as s_2 / (d_1 s_2 + J_1^2): the same single division, but it
    cannot overflow when s_2 is subnormal and gives exactly 0 at s_2 = 0.
    """
    if d.shape[0] == 1:
        if np.any(d[0] == 0):
            raise SingularSubfraction("the pumped resonator has no damping")
        return 1.0 / d[0]
    s2 = _tails(d, couplings)[0]
    denom = d[0] * s2 + couplings[0] ** 2
    if np.any(denom == 0):
        raise SingularSubfraction("the outermost denominator vanishes")
    return s2 / denom


def steady_state_exact(
    chain: ResonatorChain, pump: PumpDrive, gain: Optional[float] = None
) -> SteadySolution:
    """
    Explicit steady amplitudes of a three-resonator chain.

    With eta = J2^2 (kappa1 - i Delta1) the common denominator is
    D = eta + [J1^2 - (kappa1 - i Delta1)(kappa2 + i Delta2)](kappa3 - i Delta3).
    """
    validate_chain(chain, allow_passive=True)
    if chain.size != 3:
        raise ValueError(f"expected a 3-resonator chain, got {chain.size}")
    d1, d2, d3 = level_terms(chain, pump.omega_p, gain)
    j1, j2 = chain.couplings
    # main-text sign: (kappa2 + i Delta2) = -d2
    eta = j2 * j2 * d1
    bracket = (j1 * j1 + d1 * d2) * d3
    denom = eta + bracket
    scale = abs(eta) + abs(j1 * j1 * d3) + abs(d1 * d2 * d3)
    if abs(denom) <= 4 * _EPS * scale:
        raise SingularDenominator("steady-state denominator vanishes (pole of the response)")
    v = pump.drive(chain)
    num1 = j2 * j2 + d2 * d3
    a = np.array(
        [v * num1 / denom, 1j * v * j1 * d3 / denom, -v * j1 * j2 / denom],
        dtype=complex,
    )
    eps_t = 2.0 * chain.kappa_ex * num1 / denom
    return SteadySolution(a, complex(eps_t), pump.detuning(chain))


def steady_state_continued_fraction(
    chain: ResonatorChain, pump: PumpDrive, gain: Optional[float] = None
) -> complex:
    """A_1 of a 2-, 3- or 4-resonator chain from the nested fraction."""
    validate_chain(chain, allow_passive=True)
    if not 2 <= chain.size <= 4:
        raise ValueError(f"continued fraction supports 2..4 resonators, got {chain.size}")
    d = level_terms(chain, pump.omega_p, gain)
    return complex(pump.drive(chain) * _pumped_response(d, chain.couplings))


def steady_state(
    chain: ResonatorChain, pump: PumpDrive, gain: Optional[float] = None
) -> SteadySolution:
    """
    Steady state of a chain of any length.

    Three-resonator chains use :func:`steady_state_exact`; other lengths use
    the continued-fraction back-substitution A_{k+1} = i J_k A_k / s_{k+1}.
    """
    if chain.size == 3:
        return steady_state_exact(chain, pump, gain)
    validate_chain(chain, allow_passive=True)
    d = level_terms(chain, pump.omega_p, gain)
    r1 = complex(_pumped_response(d, chain.couplings))
    v = pump.drive(chain)
    a = np.zeros(chain.size, dtype=complex)
    a[0] = v * r1
    if chain.size > 1:
        tails = _tails(d, chain.couplings)
        for k in range(1, chain.size):
            if k == 1 and tails[0] == 0:
                # transparency: A_2 = i v / J_1 regardless of the rest
                a[1] = 1j * v / chain.couplings[0]
            else:
                a[k] = 1j * chain.couplings[k - 1] * a[k - 1] / tails[k - 1]
    return SteadySolution(a, complex(2.0 * chain.kappa_ex * r1), pump.detuning(chain))


def susceptibility(
    chain: ResonatorChain, omega_p: ArrayLike, gain: Optional[float] = None
) -> NDArray[np.complex128]:
    """eps_T = sqrt(2 kappa_ex) A_1 / eps_p at each pump frequency."""
    d = level_terms(chain, omega_p, gain)
    return 2.0 * chain.kappa_ex * _pumped_response(d, chain.couplings)


def susceptibility_spectrum(
    chain: ResonatorChain, x_grid: ArrayLike, gain: Optional[float] = None
) -> NDArray[np.complex128]:
    """
    eps_T(x) for a chain whose resonators share one frequency omega_0.

    Re eps_T is the absorptive and Im eps_T the dispersive response. The chain's
    own J2 is used, so away from J2 = sqrt(kappa2 kappa3) this also gives the
    detuned-coupling curves.
    """
    validate_chain(chain, allow_passive=True)
    if not chain.is_degenerate:
        raise NonDegenerateFrequencies(
            "spectrum fast path needs equal resonance frequencies; use steady_state per point"
        )
    x = np.asarray(x_grid, dtype=float)
    return susceptibility(chain, chain.resonators[0].omega + x, gain)


def transmission(solution: SteadySolution) -> complex:
    """Output/input field ratio t = 1 - eps_T."""
    return 1.0 - solution.susceptibility


def transparency_condition_general(
    kappa2: float, kappa3: float, omega2: float, omega3: float
) -> TransparencyPoint:
    """Coupling and pump frequency that zero the level-2 subfraction."""
    if kappa2 <= 0 or kappa3 <= 0:
        raise NonPositiveRate("kappa2 and kappa3 must be positive")
    if kappa2 == kappa3:
        if omega2 != omega3:
            raise EqualRates("kappa2 == kappa3 with omega2 != omega3 has no finite solution")
        return TransparencyPoint(kappa2, omega2)
    dk = kappa2 - kappa3
    dw = omega2 - omega3
    j2 = math.sqrt(kappa2 * kappa3 * (dw * dw + dk * dk) / (dk * dk))
    wp = (omega3 * kappa2 - omega2 * kappa3) / dk
    return TransparencyPoint(j2, wp)


def transparency_residual(
    kappa2: float, kappa3: float, omega2: float, omega3: float, j2: float, omega_p: float
) -> complex:
    """kappa2 + i Delta2 - J2^2 / (kappa3 - i Delta3); zero at transparency."""
    return kappa2 + 1j * (omega_p - omega2) - j2 * j2 / (kappa3 - 1j * (omega_p - omega3))


def transparency_condition_four(
    kappa2: float, kappa3: float, kappa4: float, j3: float, omega0: float = 0.0
) -> TransparencyPoint:
    """Transparency coupling J2 for a four-resonator chain on resonance."""
    if min(kappa2, kappa3, kappa4, j3) <= 0:
        raise NonPositiveRate("rates and J3 must be positive")
    return TransparencyPoint(math.sqrt(kappa2 * (j3 * j3 + kappa3 * kappa4) / kappa4), omega0)


def dark_state(
    chain: ResonatorChain,
    pump: PumpDrive,
    gain: Optional[float] = None,
    rtol: float = 1e-9,
) -> NDArray[np.complex128]:
    """
    Intracavity fields at complete transparency:
    sqrt(2 kappa_ex) eps_p (0, i / J1, -sqrt(kappa2 / kappa3) / J1).
    """
    validate_chain(chain)
    if chain.size != 3 or chain.active_index != 1:
        raise ConditionsNotMet("dark state is defined for passive-active-passive chains")
    k2 = chain.signed_rates(gain)[1]
    k3 = chain.rates[2]
    j1, j2 = chain.couplings
    scale = max(chain.kappa1, abs(k2), k3, j1, j2)
    if np.max(np.abs(chain.detunings(pump.omega_p))) > rtol * scale:
        raise ConditionsNotMet("pump must be resonant with degenerate resonators")
    if k2 <= 0 or abs(j2 * j2 - k2 * k3) > rtol * k2 * k3:
        raise ConditionsNotMet("J2 must equal sqrt(kappa2 kappa3)")
    v = pump.drive(chain)
    return v * np.array([0.0, 1j / j1, -math.sqrt(k2 / k3) / j1], dtype=complex)


def dark_bright_basis(kappa2: float, kappa3: float) -> DarkBrightBasis:
    if kappa2 <= 0 or kappa3 <= 0:
        raise NonPositiveRate("kappa2 and kappa3 must be positive")
    r2, r3 = math.sqrt(kappa2), math.sqrt(kappa3)
    return DarkBrightBasis(
        dark_coeffs=np.array([-1j * r2, r3]),
        bright_coeffs=np.array([-1j * r2, -r3]),
    )


def imag_slope_at_resonance(kappa_ex: float, kappa2: float, kappa3: float, j1: float) -> float:
    """
    dIm(eps_T)/dx at x = 0 on transparency [MHz^-1 = us]. Its negative is the
    group delay of the transmitted field.
    """
    if j1 <= 0:
        raise ZeroCoupling("J1 must be positive")
    if kappa3 <= 0:
        raise NonPositiveRate("kappa3 must be positive")
    return 2.0 * kappa_ex * (kappa2 - kappa3) / (j1 * j1 * kappa3)


def _rate_scale(chain: ResonatorChain, gain: Optional[float]) -> float:
    vals = [abs(r) for r in chain.signed_rates(gain) if r != 0]
    if chain.size > 1 and chain.kappa1 > 0:
        vals.append(chain.couplings[0] ** 2 / chain.kappa1)
    return min(vals) if vals else 1.0


def group_delay(
    chain: ResonatorChain,
    pump: PumpDrive,
    gain: Optional[float] = None,
    d_omega: Optional[float] = None,
) -> float:
    """
    tau = d arg(t) / d omega_p [us] by a central difference.

    The default step is 1e-6 of the narrowest rate scale of the chain
    (including the window estimate J1^2 / kappa1).
    """
    if d_omega is None:
        d_omega = 1e-6 * _rate_scale(chain, gain)
    wp = pump.omega_p + np.array([-d_omega, d_omega])
    t = 1.0 - susceptibility(chain, wp, gain)
    if np.any(np.abs(t) == 0):
        raise ZeroTransmission("transmission vanishes on the stencil; phase undefined")
    dphi = float(np.angle(t[1] / t[0]))  # principal value, already wrapped to (-pi, pi]
    return dphi / (2.0 * d_omega)


def fwhm_transparency_window(
    chain: ResonatorChain, gain: Optional[float] = None, rel_tol: float = 1e-9
) -> WindowWidth:
    """
    Full width at half maximum of the Re(eps_T) dip centred on x = 0.

    Each side is handled separately: the neighbouring absorption peak is
    located by an outward geometric scan refined with golden-section search,
    and the half-level crossing is bracketed and bisected.
    """
    if chain.size < 2:
        raise ValueError("need at least two resonators")
    approx = chain.couplings[0] ** 2 / chain.kappa1

    def re_eps(x: float) -> float:
        return float(susceptibility_spectrum(chain, [x], gain)[0].real)

    w0 = approx if approx > 0 else _rate_scale(chain, gain)
    f0 = re_eps(0.0)
    h = 1e-3 * w0
    if not (re_eps(h) > f0 and re_eps(-h) > f0):
        raise NoDip("Re(eps_T) is not locally minimal at x = 0")

    def side(sign: float) -> tuple[float, float]:
        g = lambda u: re_eps(sign * u)
        prev_u, prev = h, g(h)
        u = 2 * h
        for _ in range(200):
            cur = g(u)
            if cur < prev:
                break
            prev_u, prev = u, cur
            u *= 2.0
        else:
            raise NoDip("no absorption peak found beside the window")
        lo, hi = prev_u / 2.0, u
        peak_u = _golden_max(g, lo, hi, rel_tol * hi)
        half = 0.5 * (f0 + g(peak_u))
        a, b = 0.0, peak_u
        while b - a > rel_tol * peak_u:
            m = 0.5 * (a + b)
            if g(m) < half:
                a = m
            else:
                b = m
        return 0.5 * (a + b), peak_u

    right, pr = side(1.0)
    left, pl = side(-1.0)
    return WindowWidth(right + left, approx, -pl, pr)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a: float, b: float, tol: float) -> float:
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def cooperativity_transmission(kappa1: float, kappa2: float, j1: float) -> float:
    """Centre transmission C^2 / (C + 1)^2 of two coupled passive resonators."""
    if min(kappa1, kappa2, j1) <= 0:
        raise NonPositiveRate("kappa1, kappa2 and J1 must be positive")
    c = j1 * j1 / (kappa1 * kappa2)
    return c * c / ((c + 1.0) ** 2)
