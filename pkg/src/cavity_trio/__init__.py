"""Coupled active/passive resonator chains: steady states, dynamics, stability, tuning and noise."""

__version__ = "0.1.0"

from .analytic import (
    SteadySolution,
    dark_state,
    fwhm_transparency_window,
    group_delay,
    imag_slope_at_resonance,
    steady_state,
    steady_state_continued_fraction,
    steady_state_exact,
    susceptibility,
    susceptibility_spectrum,
    transmission,
)
from .dynamics import Trajectory, evolve, final_photon_numbers
from .model import (
    ConstantGain,
    PumpDrive,
    Resonator,
    ResonatorChain,
    Role,
    SaturatingGain,
    build_dynamical_matrix,
    validate_chain,
)
from .noise import noise_photon_estimates
from .stability import classify_stability, closed_form_thresholds, marginal_j1, stability_map
from .tuning import find_transparency_j2, saturated_state, scan_transmission_vs_j2

__all__ = [
    "ConstantGain",
    "PumpDrive",
    "Resonator",
    "ResonatorChain",
    "Role",
    "SaturatingGain",
    "SteadySolution",
    "Trajectory",
    "build_dynamical_matrix",
    "classify_stability",
    "closed_form_thresholds",
    "dark_state",
    "evolve",
    "final_photon_numbers",
    "find_transparency_j2",
    "fwhm_transparency_window",
    "group_delay",
    "imag_slope_at_resonance",
    "marginal_j1",
    "noise_photon_estimates",
    "saturated_state",
    "scan_transmission_vs_j2",
    "stability_map",
    "steady_state",
    "steady_state_continued_fraction",
    "steady_state_exact",
    "susceptibility",
    "susceptibility_spectrum",
    "transmission",
    "validate_chain",
]
