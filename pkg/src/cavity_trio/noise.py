"""
Gain-noise photon estimates for a stabilized chain.

Once the gain has saturated the fields obey linear equations, and the gain
noise entering the active resonator acts as an extra random drive. Its
contribution to cavity 1 is estimated mode by mode from the diagonalization
M = V diag(lambda) V^-1: with C = V^-1 (columns of V at unit norm), eigenmode k
picks up the noise through C[k, active] and responds with 1 / lambda_k, giving
|C[k, active] g2s / lambda_k|^2 extra photons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .model import HBAR, C_VACUUM, NonPositiveWavelength, ResonatorChain, build_dynamical_matrix
from .stability import NoConvergence

DEFECTIVE_COND = 1e12


class DefectiveMatrix(ArithmeticError):
    pass


@dataclass(frozen=True)
class NoiseEstimate:
    per_mode: NDArray[np.float64]
    eigenvalues: NDArray[np.complex128]
    selected: int  # index into per_mode / eigenvalues
    g2s: float
    projections: NDArray[np.complex128]  # C[k, active]

    @property
    def selected_value(self) -> float:
        return float(self.per_mode[self.selected])


def diagonalizer(m: NDArray[np.complex128]) -> tuple[NDArray, NDArray, NDArray]:
    """
    Eigenvalues w, unit-norm eigenvector columns V and C = V^-1.

    Each column's phase is fixed so that its largest component is real and
    positive. Eigenvalues follow :func:`cavity_trio.stability.eigenvalues`.
    """
    try:
        w, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    order = np.lexsort((-w.imag, -w.real))
    w = w[order]
    v = vecs[:, order]
    v = v / np.linalg.norm(v, axis=0)
    lead = np.argmax(np.abs(v), axis=0)
    v = v * np.exp(-1j * np.angle(v[lead, np.arange(v.shape[1])]))
    if np.linalg.cond(v) > DEFECTIVE_COND:
        raise DefectiveMatrix("eigenvector matrix is numerically singular")
    return w, v, np.linalg.inv(v)


def noise_photon_estimates(
    chain: ResonatorChain, g2s: float, gamma2: float = 0.0
) -> NoiseEstimate:
    """
    Extra photons in cavity 1 driven by gain noise, one candidate per eigenmode.

    ``g2s`` is the saturated gross gain; the matrix is built on resonance with
    effective gain g2s - gamma2. The reported value is the mode whose eigenvalue
    has the largest magnitude (first in eigenvalue order on ties).
    """
    k = chain.active_index
    if k is None:
        raise ValueError("noise estimate needs an active resonator")
    m = build_dynamical_matrix(chain, g2s - gamma2, chain.resonators[0].omega)
    w, _, c = diagonalizer(m)
    proj = c[:, k]
    per_mode = np.abs(proj * g2s / w) ** 2
    selected = int(np.argmax(np.round(np.abs(w), 12)))
    return NoiseEstimate(per_mode, w, selected, g2s, proj)


def noise_floor_power(wavelength: float) -> float:
    """Pump power [W] whose drive amplitude equals 1 sqrt(Hz): hbar (2 pi c / lambda) x 1 Hz."""
    if wavelength <= 0:
        raise NonPositiveWavelength(f"wavelength must be positive, got {wavelength}")
    return HBAR * 2.0 * math.pi * C_VACUUM / wavelength
