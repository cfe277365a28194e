"""
Scenario documents: parsing, validation, and the named figure presets.

A scenario is one YAML/JSON mapping. Units are spelled out in every key::

    resonators:
      - {omega_mhz: 0, role: passive, rate_mhz: 10}
      - {omega_mhz: 0, role: active, rate_mhz: 0.2, intrinsic_loss_mhz: 0}
      - {omega_mhz: 0, role: passive, rate_mhz: 5}
    couplings_mhz: [2, 1]
    kappa_ex_mhz: 5
    pump: {detuning_mhz: 0, amplitude_sqrt_mhz: 1}
    gain: {constant: {kappa2_mhz: 0.2}}

The pump takes either ``omega_p_mhz`` or ``detuning_mhz`` (from resonator 1),
and either ``amplitude_sqrt_mhz`` or ``power_watts`` plus ``wavelength_m``.
The gain is ``constant`` (defaults to the active resonator's rate) or
``saturating: {kappa20_mhz, i_s, gamma2_mhz}``. Optional command settings
live under ``run``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .model import (
    ConstantGain,
    GainModel,
    PumpDrive,
    Resonator,
    ResonatorChain,
    Role,
    SaturatingGain,
    pump_amplitude_from_power,
    validate_chain,
)


class ConfigError(ValueError):
    pass


_TOP_KEYS = {"name", "resonators", "couplings_mhz", "kappa_ex_mhz", "pump", "gain", "run", "noise"}
_RES_KEYS = {"omega_mhz", "role", "rate_mhz", "intrinsic_loss_mhz"}
_PUMP_KEYS = {"omega_p_mhz", "detuning_mhz", "amplitude_sqrt_mhz", "power_watts", "wavelength_m"}
_RUN_KEYS = {
    "x_range_mhz",
    "points",
    "t_end_us",
    "j1_grid",
    "j2_grid",
    "j2_list",
    "bracket_mhz",
    "tol",
    "parameter",
}
_NOISE_KEYS = {"gamma2_mhz"}


@dataclass(frozen=True)
class Scenario:
    name: str
    chain: ResonatorChain
    pump: PumpDrive
    gain: GainModel
    run: dict = field(default_factory=dict)
    noise_gamma2: Optional[float] = None
    wavelength: Optional[float] = None
    document: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def effective_gain(self) -> float:
        """Constant effective gain, or the unsaturated kappa20 - gamma2."""
        return self.gain.unsaturated


def _unknown(section: str, got: dict, allowed: set) -> None:
    extra = set(got) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(extra))}")


def _num(d: dict, key: str, section: str, default: Any = None) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"{section}: missing {key}")
        return default
    try:
        val = float(d[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key} must be a number, got {d[key]!r}") from exc
    if not math.isfinite(val):
        raise ConfigError(f"{section}.{key} must be finite")
    return val


def parse_scenario(doc: dict, name: Optional[str] = None) -> Scenario:
    """Build and validate a scenario; raises :class:`ConfigError` on any problem."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a mapping")
    _unknown("scenario", doc, _TOP_KEYS)
    res_docs = doc.get("resonators")
    if not isinstance(res_docs, list) or not res_docs:
        raise ConfigError("resonators must be a non-empty list")
    resonators = []
    for i, r in enumerate(res_docs, start=1):
        if not isinstance(r, dict):
            raise ConfigError(f"resonators[{i}] must be a mapping")
        _unknown(f"resonators[{i}]", r, _RES_KEYS)
        try:
            role = Role(str(r.get("role", "passive")).lower())
        except ValueError as exc:
            raise ConfigError(f"resonators[{i}].role must be passive or active") from exc
        resonators.append(
            Resonator(
                _num(r, "omega_mhz", f"resonators[{i}]", 0.0),
                role,
                _num(r, "rate_mhz", f"resonators[{i}]"),
                _num(r, "intrinsic_loss_mhz", f"resonators[{i}]", 0.0),
            )
        )
    couplings = doc.get("couplings_mhz", [])
    if not isinstance(couplings, list):
        raise ConfigError("couplings_mhz must be a list")
    try:
        couplings = [float(j) for j in couplings]
    except (TypeError, ValueError) as exc:
        raise ConfigError("couplings_mhz must hold numbers") from exc
    kappa_ex = _num(doc, "kappa_ex_mhz", "scenario")

    gain_doc = doc.get("gain", {"constant": {}})
    if not isinstance(gain_doc, dict) or len(gain_doc) != 1:
        raise ConfigError("gain must have exactly one of: constant, saturating")
    (kind, params), = gain_doc.items()
    params = params or {}
    active = [r for r in resonators if r.is_active]
    if kind == "constant":
        _unknown("gain.constant", params, {"kappa2_mhz"})
        default = active[0].rate if active else 0.0
        gain: GainModel = ConstantGain(_num(params, "kappa2_mhz", "gain.constant", default))
        if active:
            k = next(i for i, r in enumerate(resonators) if r.is_active)
            resonators[k] = Resonator(resonators[k].omega, Role.ACTIVE, gain.kappa2, resonators[k].intrinsic_loss)
    elif kind == "saturating":
        _unknown("gain.saturating", params, {"kappa20_mhz", "i_s", "gamma2_mhz"})
        try:
            gain = SaturatingGain(
                _num(params, "kappa20_mhz", "gain.saturating"),
                _num(params, "i_s", "gain.saturating"),
                _num(params, "gamma2_mhz", "gain.saturating", 0.0),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if active:
            k = next(i for i, r in enumerate(resonators) if r.is_active)
            resonators[k] = Resonator(resonators[k].omega, Role.ACTIVE, gain.unsaturated, gain.gamma2)
    else:
        raise ConfigError(f"unknown gain model {kind!r}")

    chain = ResonatorChain(tuple(resonators), tuple(couplings), kappa_ex)
    try:
        validate_chain(chain)
    except ValueError as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc

    pump_doc = doc.get("pump", {})
    if not isinstance(pump_doc, dict):
        raise ConfigError("pump must be a mapping")
    _unknown("pump", pump_doc, _PUMP_KEYS)
    if "omega_p_mhz" in pump_doc and "detuning_mhz" in pump_doc:
        raise ConfigError("pump: give omega_p_mhz or detuning_mhz, not both")
    if "omega_p_mhz" in pump_doc:
        omega_p = _num(pump_doc, "omega_p_mhz", "pump")
    else:
        omega_p = resonators[0].omega + _num(pump_doc, "detuning_mhz", "pump", 0.0)
    wavelength = None
    if "power_watts" in pump_doc:
        if "amplitude_sqrt_mhz" in pump_doc:
            raise ConfigError("pump: give amplitude_sqrt_mhz or power_watts, not both")
        wavelength = _num(pump_doc, "wavelength_m", "pump")
        try:
            amplitude = pump_amplitude_from_power(_num(pump_doc, "power_watts", "pump"), wavelength)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        amplitude = _num(pump_doc, "amplitude_sqrt_mhz", "pump", 1.0)
        if "wavelength_m" in pump_doc:
            wavelength = _num(pump_doc, "wavelength_m", "pump")
    if amplitude < 0:
        raise ConfigError("pump amplitude must be non-negative")

    run = dict(doc.get("run", {}) or {})
    _unknown("run", run, _RUN_KEYS)
    noise = dict(doc.get("noise", {}) or {})
    _unknown("noise", noise, _NOISE_KEYS)
    noise_gamma2 = _num(noise, "gamma2_mhz", "noise") if "gamma2_mhz" in noise else None
    return Scenario(
        name or str(doc.get("name", "scenario")),
        chain,
        PumpDrive(omega_p, amplitude),
        gain,
        run,
        noise_gamma2,
        wavelength,
        copy.deepcopy(doc),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(doc, name=path.stem)


def _chain_doc(rates, couplings, kappa_ex, active=1) -> dict:
    return {
        "resonators": [
            {
                "omega_mhz": 0.0,
                "role": "active" if k == active else "passive",
                "rate_mhz": r,
            }
            for k, r in enumerate(rates)
        ],
        "couplings_mhz": list(couplings),
        "kappa_ex_mhz": kappa_ex,
    }


def _preset(rates, couplings, kappa_ex, pump=1.0, gain=None, run=None, noise=None) -> dict:
    doc = _chain_doc(rates, couplings, kappa_ex)
    doc["pump"] = {"detuning_mhz": 0.0, "amplitude_sqrt_mhz": pump}
    doc["gain"] = gain or {"constant": {}}
    if run:
        doc["run"] = run
    if noise:
        doc["noise"] = noise
    return doc


def _saturating(k20, i_s, gamma2=0.0) -> dict:
    return {"saturating": {"kappa20_mhz": k20, "i_s": i_s, "gamma2_mhz": gamma2}}


PRESETS: dict[str, dict] = {
    # kappa_1=2kappa_ex=10, kappa_2=0.2, kappa_3=5, J_1=2, J_2=1 MHz.
    "Fig1-inset": _preset([10.0, 0.2, 5.0], [2.0, 1.0], 5.0, run={"x_range_mhz": [-3.0, 3.0]}),
    # eps_p=1e4 sqrt(MHz) (12.8 uW at 1550 nm), kappa_1=2kappa_ex=10,
    # kappa_{2,0}=0.2, I_S=1e8, kappa_3=5, J_1=20, J_2=1 MHz; gamma_2=5 MHz.
    "Fig1b": _preset(
        [10.0, 0.2, 5.0],
        [20.0, 1.0],
        5.0,
        pump=1e4,
        gain=_saturating(0.2, 1e8),
        run={"t_end_us": 30.0},
        noise={"gamma2_mhz": 5.0},
    ),
    # kappa_1=2kappa_ex=20, kappa_3=5, J_1=10 MHz; sqrt(kappa2 kappa3) and J2
    # are the scanned axes (here at 1 MHz each).
    "Fig2a": _preset([20.0, 0.2, 5.0], [10.0, 1.0], 10.0),
    # kappa_1=2kappa_ex=20, kappa_2=0.05, kappa_3=20, J_2=1 MHz; J1 is scanned.
    "Fig2b": _preset([20.0, 0.05, 20.0], [1.0, 1.0], 10.0, run={"x_range_mhz": [-3.0, 3.0]}),
    # kappa_1=2kappa_ex=20, kappa_2=0.01, kappa_3=20, J_1=0.01 MHz,
    # J_2=sqrt(kappa_2 kappa_3).
    "Fig3a": _preset(
        [20.0, 0.01, 20.0], [0.01, math.sqrt(0.01 * 20.0)], 10.0, run={"x_range_mhz": [-2e-5, 2e-5]}
    ),
    # kappa_1=2kappa_ex=10, kappa_2=1, kappa_3=0.1, J_1=4 MHz,
    # J_2=sqrt(kappa_2 kappa_3).
    "Fig3b": _preset([10.0, 1.0, 0.1], [4.0, math.sqrt(0.1)], 5.0, run={"x_range_mhz": [-2.0, 2.0]}),
    # kappa_1=2kappa_ex=20, kappa_2=0.06, kappa_3=6, J_1=1 MHz; unit transmission
    # at J_2=0.6 MHz, stability lost near J_2=0.2449 MHz.
    "Fig4": _preset(
        [20.0, 0.06, 6.0],
        [1.0, 0.6],
        10.0,
        run={
            "x_range_mhz": [-0.5, 0.5],
            "j2_list": [0.2, 0.2449, 0.25, 0.45, 0.6, 0.75],
            "j1_grid": [1.0, 1.0, 1],
            "j2_grid": [0.05, 1.0, 96],
        },
    ),
    # FigS1*: kappa_1=2kappa_ex=2, kappa_3=1 MHz, eps_p=1e4 sqrt(MHz),
    # J2 = sqrt(kappa_{2,0} kappa_3).
    # FigS1a: kappa_{2,0}=0.1, J_1=4 MHz; I_S varied.
    "FigS1a": _preset(
        [2.0, 0.1, 1.0], [4.0, math.sqrt(0.1)], 1.0, pump=1e4, gain=_saturating(0.1, 1e7), run={"t_end_us": 100.0}
    ),
    # FigS1b: I_S=1e7, J_1=4 MHz; kappa_{2,0} varied.
    "FigS1b": _preset(
        [2.0, 0.1, 1.0], [4.0, math.sqrt(0.1)], 1.0, pump=1e4, gain=_saturating(0.1, 1e7), run={"t_end_us": 100.0}
    ),
    # FigS1c: kappa_{2,0}=0.1 MHz, I_S=1e7; J1 varied.
    "FigS1c": _preset(
        [2.0, 0.1, 1.0], [2.0, math.sqrt(0.1)], 1.0, pump=1e4, gain=_saturating(0.1, 1e7), run={"t_end_us": 100.0}
    ),
    # kappa_1=2kappa_ex=40, kappa_2=0.001, kappa_3=10 MHz.
    "FigS2a": _preset(
        [40.0, 0.001, 10.0],
        [0.1, 0.05],
        20.0,
        run={"j1_grid": [0.004, 0.4, 100], "j2_grid": [0.002, 0.2, 100]},
    ),
    # kappa_1=2kappa_ex=10, kappa_3=0.1 MHz, J_2=sqrt(kappa_2 kappa_3); the
    # marginal J1 is 3.017 MHz at kappa_2=1 MHz.
    "FigS2b": _preset(
        [10.0, 1.0, 0.1],
        [4.0, math.sqrt(0.1)],
        5.0,
        run={"parameter": "j1_marginal", "bracket_mhz": [0.5, 10.0], "tol": 1e-4},
    ),
    # kappa_{2,0}=0.01, I_S=1e8, J_1=10, kappa_3=1, kappa_1=2kappa_ex=2 MHz,
    # eps_p=1e4 sqrt(MHz); the tuned J_2 is 0.099 MHz.
    "AppendixA-tuning": _preset(
        [2.0, 0.01, 1.0],
        [10.0, 0.1],
        1.0,
        pump=1e4,
        gain=_saturating(0.01, 1e8),
        run={"parameter": "j2", "bracket_mhz": [0.05, 0.1], "tol": 1e-12},
    ),
    # kappa_{2,0}=1e-3, I_S=1e8, J_1=10, kappa_1=2kappa_ex=2, kappa_3=1 MHz,
    # eps_p=1e4 sqrt(MHz), J2 = sqrt(kappa_{2,0} kappa_3); final <a1^dag a1> = 7.69e-6.
    "AppendixA-darkmode": _preset(
        [2.0, 1e-3, 1.0],
        [10.0, math.sqrt(1e-3)],
        1.0,
        pump=1e4,
        gain=_saturating(1e-3, 1e8),
        run={"t_end_us": 3000.0},
    ),
}


def preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return parse_scenario(copy.deepcopy(PRESETS[name]), name=name)
