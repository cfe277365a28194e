"""
Linear stability of the coupled-mode matrix.

A chain with a fixed effective gain is dynamically stable when no eigenvalue of
M has a positive real part. For resonant three-resonator chains with
kappa2 < kappa3 the boundary is known in closed form: the system is stable
exactly when J1^2 kappa3 + J2^2 kappa1 >= kappa1 kappa2 kappa3.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .model import PumpDrive, ResonatorChain, build_dynamical_matrix

MARGINAL_TOL = 1e-6  # MHz


class NoConvergence(ArithmeticError):
    pass


class RegimeNotCovered(ValueError):
    pass


class NoSignChange(ValueError):
    pass


class Regime(enum.Enum):
    STABLE = "Stable"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: NDArray[np.complex128]
    max_real_part: float
    marginal_tol: float = MARGINAL_TOL

    @property
    def stable(self) -> bool:
        # "not positive" includes the marginal band
        return self.max_real_part <= self.marginal_tol

    @property
    def margin(self) -> float:
        return -self.max_real_part

    @property
    def regime(self) -> Regime:
        if abs(self.max_real_part) <= self.marginal_tol:
            return Regime.MARGINAL
        return Regime.STABLE if self.max_real_part < 0 else Regime.UNSTABLE

    @property
    def regime_label(self) -> str:
        return self.regime.value


@dataclass(frozen=True)
class Thresholds:
    """
    Closed-form stability thresholds at resonance for kappa2 < kappa3.

    ``min_j2`` / ``min_j1`` are the smallest stable couplings given the other
    one, or 0.0 when any value is stable. Only the one asked for is set.
    """

    sqrt_k1k2: float
    sqrt_k2k3: float
    min_j2: Optional[float] = None
    min_j1: Optional[float] = None


@dataclass(frozen=True)
class StabilityMap:
    j1: NDArray[np.float64]
    j2: NDArray[np.float64]
    max_real: NDArray[np.float64]  # shape (len(j1), len(j2))
    labels: NDArray[np.object_]
    boundary: Optional[NDArray[np.float64]]  # closed-form min J2 per J1, if covered
    thresholds: Optional[Thresholds]

    def rows(self):
        for i, a in enumerate(self.j1):
            for k, b in enumerate(self.j2):
                yield float(a), float(b), float(self.max_real[i, k]), str(self.labels[i, k])


def eigenvalues(m: ArrayLike) -> NDArray[np.complex128]:
    """Eigenvalues ordered by descending real part, then descending imaginary part."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if m.shape[0] > 8:
        raise ValueError("dense eigen-analysis is limited to N <= 8")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        w = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    order = np.lexsort((-w.imag, -w.real))
    return w[order]


def classify_stability(
    chain: ResonatorChain,
    gain: Optional[float] = None,
    pump: Optional[PumpDrive] = None,
    marginal_tol: float = MARGINAL_TOL,
) -> StabilityReport:
    omega_p = 0.0 if pump is None else pump.omega_p
    w = eigenvalues(build_dynamical_matrix(chain, gain, omega_p))
    return StabilityReport(w, float(w.real.max()), marginal_tol)


def max_real_part(chain: ResonatorChain, gain: Optional[float] = None) -> float:
    return float(np.linalg.eigvals(build_dynamical_matrix(chain, gain)).real.max())


def closed_form_thresholds(
    kappa1: float,
    kappa2: float,
    kappa3: float,
    j1: Optional[float] = None,
    j2: Optional[float] = None,
) -> Thresholds:
    if kappa2 >= kappa3:
        raise RegimeNotCovered("closed forms cover kappa2 < kappa3 only; classify numerically")
    if (j1 is None) == (j2 is None):
        raise ValueError("give exactly one of j1, j2")
    k1k2 = math.sqrt(kappa1 * kappa2) if kappa2 > 0 else 0.0
    k2k3 = math.sqrt(kappa2 * kappa3) if kappa2 > 0 else 0.0
    if j1 is not None:
        need = 0.0 if j1 >= k1k2 else math.sqrt((kappa1 * kappa2 * kappa3 - j1 * j1 * kappa3) / kappa1)
        return Thresholds(k1k2, k2k3, min_j2=need)
    need = 0.0 if j2 >= k2k3 else math.sqrt((kappa1 * kappa2 * kappa3 - j2 * j2 * kappa1) / kappa3)
    return Thresholds(k1k2, k2k3, min_j1=need)


def _workers(requested: Optional[int]) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("CAVITY_TRIO_THREADS")
    return max(1, int(env)) if env else 1


def parallel_map(fn: Callable, items: Sequence, workers: Optional[int] = None) -> list:
    """Order-preserving map, threaded when CAVITY_TRIO_THREADS (or ``workers``) > 1."""
    n = _workers(workers)
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def stability_map(
    chain: ResonatorChain,
    j1_grid: ArrayLike,
    j2_grid: ArrayLike,
    gain: Optional[float] = None,
    marginal_tol: float = MARGINAL_TOL,
    workers: Optional[int] = None,
) -> StabilityMap:
    """
    Regime of every (J1, J2) pair for a three-resonator chain.

    When kappa2 < kappa3 the closed-form minimum J2 for each J1 is attached
    for overlay.
    """
    if chain.size != 3:
        raise ValueError("stability maps are defined for three-resonator chains")
    j1s = np.asarray(j1_grid, dtype=float)
    j2s = np.asarray(j2_grid, dtype=float)
    if j1s.ndim != 1 or j2s.ndim != 1 or j1s.size == 0 or j2s.size == 0:
        raise ValueError("grids must be non-empty 1-D sequences")
    if np.any(j1s <= 0) or np.any(j2s <= 0) or not np.all(np.isfinite(j1s)) or not np.all(np.isfinite(j2s)):
        raise ValueError("grids must be finite and positive")

    def row(j1: float) -> NDArray[np.float64]:
        c = chain.with_coupling(0, j1)
        return np.array([max_real_part(c.with_coupling(1, j2), gain) for j2 in j2s])

    max_re = np.array(parallel_map(row, list(j1s), workers))
    labels = np.empty(max_re.shape, dtype=object)
    labels[np.abs(max_re) <= marginal_tol] = Regime.MARGINAL.value
    labels[max_re < -marginal_tol] = Regime.STABLE.value
    labels[max_re > marginal_tol] = Regime.UNSTABLE.value

    k1 = chain.kappa1
    k2 = float(chain.signed_rates(gain)[1]) if chain.active_index == 1 else -chain.rates[1]
    k3 = chain.rates[2]
    boundary = None
    thresholds = None
    if chain.active_index == 1 and 0 < k2 < k3:
        boundary = np.array([closed_form_thresholds(k1, k2, k3, j1=j).min_j2 for j in j1s])
        thresholds = closed_form_thresholds(k1, k2, k3, j1=float(j1s[0]))
    return StabilityMap(j1s, j2s, max_re, labels, boundary, thresholds)


def marginal_j1(
    kappa1: float,
    kappa2: float,
    kappa3: float,
    j2: Optional[float] = None,
    bracket: tuple[float, float] = (1e-3, 100.0),
    tol: float = 1e-4,
) -> float:
    """
    Coupling J1 at which the largest eigenvalue real part crosses zero, by
    bisection. ``j2`` defaults to sqrt(kappa2 kappa3).
    """
    if j2 is None:
        j2 = math.sqrt(kappa2 * kappa3)
    chain = ResonatorChain.from_rates([kappa1, kappa2, kappa3], [1.0, j2])

    def f(j1: float) -> float:
        return max_real_part(chain.with_coupling(0, j1))

    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NoSignChange(f"max Re(lambda) has the same sign at J1 = {lo} and {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
