"""
Domain types and the coupled-mode matrix for a linear chain of resonators.

Units
-----
Every rate, coupling and frequency is in MHz (1 MHz = 1e6 s^-1, read as an
angular rate). Drive amplitudes are in sqrt(MHz) and times in microseconds, so
|a|^2 is a photon number.

The canonical frame rotates at the pump frequency: a driven steady state is a
fixed point there. The lab frame is available through ``frame="lab"``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

HBAR = 1.054571817e-34  # J s
C_VACUUM = 299792458.0  # m/s
MHZ = 1e6  # s^-1 per MHz


class InvalidChain(ValueError):
    """Base class for chain validation failures."""


class NegativeRate(InvalidChain):
    pass


class MissingActive(InvalidChain):
    pass


class MultipleActive(InvalidChain):
    pass


class CouplingCountMismatch(InvalidChain):
    pass


class NonPositiveCoupling(InvalidChain):
    pass


class ExternalExceedsTotal(InvalidChain):
    pass


class NonPositiveWavelength(ValueError):
    pass


class Role(enum.Enum):
    PASSIVE = "passive"
    ACTIVE = "active"


@dataclass(frozen=True)
class Resonator:
    """
    A single optical resonator.

    Parameters
    ----------
    omega : float
        Resonance (angular) frequency [MHz].
    role : Role
        Passive (damped) or active (carries gain).
    rate : float
        Damping rate for a passive resonator, or the constant effective gain
        rate for the active one [MHz].
    intrinsic_loss : float
        gamma_2 for the active resonator; kappa_in for the pumped one [MHz].
    """

    omega: float
    role: Role = Role.PASSIVE
    rate: float = 0.0
    intrinsic_loss: float = 0.0

    @property
    def is_active(self) -> bool:
        return self.role is Role.ACTIVE


@dataclass(frozen=True)
class ResonatorChain:
    """
    Resonators coupled one after another; index 0 is the pumped cavity.

    ``couplings[k]`` couples resonators ``k`` and ``k + 1``.
    """

    resonators: tuple[Resonator, ...]
    couplings: tuple[float, ...]
    kappa_ex: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "resonators", tuple(self.resonators))
        object.__setattr__(self, "couplings", tuple(float(j) for j in self.couplings))

    @classmethod
    def from_rates(
        cls,
        rates: Sequence[float],
        couplings: Sequence[float],
        kappa_ex: Optional[float] = None,
        active: Optional[int] = 1,
        omegas: Optional[Sequence[float]] = None,
        gamma2: float = 0.0,
    ) -> "ResonatorChain":
        """
        Build a chain from bare numbers.

        ``rates[active]`` is the effective gain of the active resonator and the
        rest are damping rates. ``active=None`` gives an all-passive chain.
        ``kappa_ex`` defaults to critical coupling, kappa_1 / 2.
        """
        n = len(rates)
        if omegas is None:
            omegas = [0.0] * n
        if kappa_ex is None:
            kappa_ex = rates[0] / 2.0
        resonators = []
        for k, (w, r) in enumerate(zip(omegas, rates)):
            if k == active:
                resonators.append(Resonator(float(w), Role.ACTIVE, float(r), float(gamma2)))
            else:
                loss = float(r) - float(kappa_ex) if k == 0 else 0.0
                resonators.append(Resonator(float(w), Role.PASSIVE, float(r), max(loss, 0.0)))
        return cls(tuple(resonators), tuple(couplings), float(kappa_ex))

    def __len__(self) -> int:
        return len(self.resonators)

    @property
    def size(self) -> int:
        return len(self.resonators)

    @property
    def active_index(self) -> Optional[int]:
        """Index of the (single) active resonator, or None for a passive chain."""
        for k, r in enumerate(self.resonators):
            if r.is_active:
                return k
        return None

    @property
    def rates(self) -> NDArray[np.float64]:
        return np.array([r.rate for r in self.resonators], dtype=float)

    @property
    def omegas(self) -> NDArray[np.float64]:
        return np.array([r.omega for r in self.resonators], dtype=float)

    @property
    def kappa1(self) -> float:
        return self.resonators[0].rate

    @property
    def kappa_in(self) -> float:
        return self.kappa1 - self.kappa_ex

    @property
    def is_degenerate(self) -> bool:
        w = self.omegas
        return bool(np.all(w == w[0]))

    def detunings(self, omega_p: float) -> NDArray[np.float64]:
        """Delta_k = omega_p - omega_k for every resonator."""
        return omega_p - self.omegas

    def signed_rates(self, gain: Optional[float] = None) -> NDArray[np.float64]:
        """
        Real parts of the diagonal of M: -kappa_k for passive resonators and
        +gain for the active one (its stored rate when ``gain`` is None).
        """
        out = -self.rates
        k = self.active_index
        if k is not None:
            out[k] = self.resonators[k].rate if gain is None else gain
        return out

    def with_coupling(self, index: int, value: float) -> "ResonatorChain":
        js = list(self.couplings)
        js[index] = float(value)
        return replace(self, couplings=tuple(js))

    def with_rate(self, index: int, value: float) -> "ResonatorChain":
        rs = list(self.resonators)
        rs[index] = replace(rs[index], rate=float(value))
        return replace(self, resonators=tuple(rs))

    def with_gain(self, value: float) -> "ResonatorChain":
        k = self.active_index
        if k is None:
            raise MissingActive("chain has no active resonator")
        return self.with_rate(k, value)


@dataclass(frozen=True)
class PumpDrive:
    """
    Coherent drive into resonator 0.

    ``amplitude`` is epsilon_p in sqrt(MHz); use :meth:`from_power` to build it
    from an optical power and wavelength.
    """

    omega_p: float = 0.0
    amplitude: float = 0.0

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError(f"pump amplitude must be non-negative, got {self.amplitude}")

    @classmethod
    def from_power(cls, omega_p: float, power: float, wavelength: float) -> "PumpDrive":
        return cls(omega_p, pump_amplitude_from_power(power, wavelength))

    def drive(self, chain: ResonatorChain) -> float:
        """Input rate sqrt(2 kappa_ex) * epsilon_p [sqrt(MHz) MHz]."""
        return math.sqrt(2.0 * chain.kappa_ex) * self.amplitude

    def detuning(self, chain: ResonatorChain) -> float:
        """x = omega_p - omega_0, measured from the pumped resonator."""
        return self.omega_p - chain.resonators[0].omega


@dataclass(frozen=True)
class ConstantGain:
    """Fixed effective gain rate kappa_2 [MHz]."""

    kappa2: float

    def effective(self, n2: float = 0.0) -> float:
        return self.kappa2

    @property
    def unsaturated(self) -> float:
        return self.kappa2


@dataclass(frozen=True)
class SaturatingGain:
    """
    Gain that saturates with the photon number n2 in the active resonator:
    effective rate g2(n2) - gamma2 with g2 = kappa20 / (1 + n2 / i_s).
    """

    kappa20: float
    i_s: float
    gamma2: float = 0.0

    def __post_init__(self) -> None:
        if self.kappa20 <= 0:
            raise ValueError(f"kappa20 must be positive, got {self.kappa20}")
        if self.i_s <= 0:
            raise ValueError(f"saturation intensity must be positive, got {self.i_s}")
        if self.gamma2 < 0:
            raise ValueError(f"gamma2 must be non-negative, got {self.gamma2}")

    def gross(self, n2):
        return self.kappa20 / (1.0 + n2 / self.i_s)

    def effective(self, n2):
        return self.gross(n2) - self.gamma2

    @property
    def unsaturated(self) -> float:
        """Effective gain of an empty active cavity, kappa20 - gamma2."""
        return self.kappa20 - self.gamma2


GainModel = ConstantGain | SaturatingGain


def validate_chain(chain: ResonatorChain, allow_passive: bool = False) -> None:
    """
    Check the chain invariants and raise on the first one violated.

    All-passive chains are rejected unless ``allow_passive`` is set; the
    numerical routines accept them as reference systems.
    """
    for k, r in enumerate(chain.resonators):
        if r.rate < 0 or r.intrinsic_loss < 0:
            raise NegativeRate(f"resonator {k + 1} has a negative rate")
    if chain.kappa_ex < 0:
        raise NegativeRate("kappa_ex is negative")
    n_active = sum(r.is_active for r in chain.resonators)
    if n_active > 1:
        raise MultipleActive(f"{n_active} active resonators; exactly one is supported")
    if n_active == 0 and not allow_passive:
        raise MissingActive("chain has no active resonator")
    if len(chain.couplings) != len(chain.resonators) - 1:
        raise CouplingCountMismatch(
            f"{len(chain.resonators)} resonators need {len(chain.resonators) - 1} "
            f"couplings, got {len(chain.couplings)}"
        )
    for k, j in enumerate(chain.couplings):
        if not j > 0:
            raise NonPositiveCoupling(f"J{k + 1} = {j} is not positive")
    if chain.resonators[0].is_active:
        return
    if chain.kappa_ex > chain.kappa1:
        raise ExternalExceedsTotal(
            f"kappa_ex = {chain.kappa_ex} exceeds kappa_1 = {chain.kappa1}"
        )


def build_dynamical_matrix(
    chain: ResonatorChain,
    gain: Optional[float] = None,
    omega_p: float = 0.0,
    frame: str = "rotating",
) -> NDArray[np.complex128]:
    """
    Coupled-mode matrix M of the chain, so that da/dt = M a + v_in.

    Rotating frame: diagonal -kappa_k + i Delta_k (the active one +gain + i
    Delta), off-diagonals i J_k. Lab frame replaces i Delta_k by -i omega_k.
    """
    validate_chain(chain, allow_passive=True)
    if frame == "rotating":
        phase = chain.detunings(omega_p)
    elif frame == "lab":
        phase = -chain.omegas
    else:
        raise ValueError(f"unknown frame {frame!r}")
    diag = chain.signed_rates(gain) + 1j * phase
    off = 1j * np.asarray(chain.couplings, dtype=float)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def pump_amplitude_from_power(power: float, wavelength: float) -> float:
    """Drive amplitude epsilon_p = sqrt(P / (hbar omega_p)) in sqrt(MHz)."""
    if wavelength <= 0:
        raise NonPositiveWavelength(f"wavelength must be positive, got {wavelength}")
    if power < 0:
        raise ValueError(f"power must be non-negative, got {power}")
    photon_energy = HBAR * 2.0 * math.pi * C_VACUUM / wavelength
    return math.sqrt(power / photon_energy / MHZ)


def power_from_amplitude(amplitude: float, wavelength: float) -> float:
    """Inverse of :func:`pump_amplitude_from_power` [W]."""
    if wavelength <= 0:
        raise NonPositiveWavelength(f"wavelength must be positive, got {wavelength}")
    photon_energy = HBAR * 2.0 * math.pi * C_VACUUM / wavelength
    return amplitude * amplitude * MHZ * photon_energy
