"""
Command-line front end: ``cavity-trio <command> [--preset NAME | --config PATH]``.

Commands write CSV tables and JSON sidecars into ``--out`` (default ``.``),
plus SVG figures with ``--svg``. Exit codes: 0 success, 2 configuration
error, 3 unstable scenario, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .analytic import SingularDenominator, SingularSubfraction, ZeroTransmission, _rate_scale, susceptibility
from .config import PRESETS, ConfigError, Scenario, load_scenario, preset
from .dynamics import Diverged, ToleranceNotMet, evolve
from .model import ConstantGain
from .noise import DefectiveMatrix, noise_floor_power, noise_photon_estimates
from .stability import (
    NoConvergence,
    NoSignChange,
    RegimeNotCovered,
    classify_stability,
    closed_form_thresholds,
    marginal_j1,
    stability_map,
)
from .tuning import (
    BracketExcluded,
    IterationDiverged,
    UnstableRegion,
    find_transparency_j2,
    saturated_state,
    scan_transmission_vs_j2,
)

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_NUMERIC = 0, 2, 3, 4
MAX_ROWS = 10_000
DEFAULT_WAVELENGTH = 1550e-9


class Unstable(RuntimeError):
    pass


def fmt(x: float) -> str:
    """17 significant digits, scientific notation."""
    return f"{float(x):.16e}"


def _json_text(obj: Any, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + _json_text(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: Path, payload: dict) -> None:
    path.write_text(_json_text(payload) + "\n")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else fmt(c) for c in row))
    path.write_text("\n".join(lines) + "\n")


def sidecar(scenario: Scenario, command: str, results: dict) -> dict:
    return {
        "tool": "cavity-trio",
        "version": __version__,
        "command": command,
        "scenario": {"name": scenario.name, **scenario.document},
        "results": results,
    }


def _range(text: str, parts: int, what: str) -> tuple:
    bits = text.split(":")
    if len(bits) != parts:
        raise ConfigError(f"{what} must look like {':'.join(['X'] * parts)}, got {text!r}")
    try:
        vals = [float(b) for b in bits]
    except ValueError as exc:
        raise ConfigError(f"bad {what} {text!r}") from exc
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what} must be finite")
    return tuple(vals)


def _grid(text: Optional[str], fallback: Sequence[float], what: str) -> np.ndarray:
    if text is not None:
        lo, hi, n = _range(text, 3, what)
    else:
        lo, hi, n = fallback
    if n < 1 or n != int(n):
        raise ConfigError(f"{what}: N must be a positive integer")
    if lo <= 0 or hi < lo or (n > 1 and hi == lo):
        raise ConfigError(f"{what}: need 0 < LO < HI (or LO = HI with N = 1)")
    return np.linspace(lo, hi, int(n))


def _instability_message(scenario: Scenario) -> str:
    chain = scenario.chain
    report = classify_stability(chain, scenario.effective_gain, scenario.pump)
    msg = f"scenario is dynamically unstable: max Re(lambda) = {report.max_real_part:.6e} MHz"
    if chain.size == 3 and chain.active_index == 1:
        k1, k2, k3 = chain.kappa1, scenario.effective_gain, chain.rates[2]
        j1, j2 = chain.couplings
        try:
            th = closed_form_thresholds(k1, k2, k3, j1=j1)
        except RegimeNotCovered:
            return msg + " (kappa2 >= kappa3: no closed-form threshold)"
        msg += (
            f"; violated threshold J1^2 kappa3 + J2^2 kappa1 >= kappa1 kappa2 kappa3: "
            f"J2 = {j2:g} MHz is below the minimum stable J2 = {th.min_j2:.6g} MHz at J1 = {j1:g} MHz"
        )
    return msg


def _require_stable(scenario: Scenario) -> None:
    report = classify_stability(scenario.chain, scenario.effective_gain, scenario.pump)
    if not report.stable:
        raise Unstable(_instability_message(scenario))


def _svg_figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "cavity-trio"
    return plt


def _save_svg(plt, fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_spectrum(scenario: Scenario, args) -> dict:
    _require_stable(scenario)
    run = scenario.run
    if args.x_range is not None:
        lo, hi = _range(args.x_range, 2, "--x-range")
    elif "x_range_mhz" in run:
        lo, hi = map(float, run["x_range_mhz"])
    else:
        w = 10.0 * scenario.chain.couplings[0] ** 2 / scenario.chain.kappa1 if scenario.chain.size > 1 else 10.0
        lo, hi = -w, w
    points = args.points if args.points is not None else int(run.get("points", 401))
    if points < 1:
        raise ConfigError("--points must be at least 1")
    if hi < lo or (points > 1 and hi == lo):
        raise ConfigError("--x-range needs LO < HI")
    chain, gain = scenario.chain, scenario.effective_gain
    x = np.linspace(lo, hi, points)
    omega = scenario.pump.omega_p + x
    eps = susceptibility(chain, omega, gain)
    t = 1.0 - eps
    h = 1e-6 * _rate_scale(chain, gain)
    tp = 1.0 - susceptibility(chain, omega + h, gain)
    tm = 1.0 - susceptibility(chain, omega - h, gain)
    with np.errstate(divide="ignore", invalid="ignore"):
        delay = np.angle(tp / tm) / (2.0 * h)
    rows = zip(x, eps.real, eps.imag, np.abs(t), np.angle(t), delay)
    out = args.out
    write_csv(out / "spectrum.csv", ["x_mhz", "re_eps", "im_eps", "abs_t", "arg_t", "delay_us"], rows)
    centre = int(np.argmin(np.abs(x)))
    results = {
        "points": points,
        "x_range_mhz": [lo, hi],
        "center_x_mhz": float(x[centre]),
        "center_abs_t_sq": float(abs(t[centre]) ** 2),
        "center_re_eps": float(eps[centre].real),
        "center_delay_us": float(delay[centre]),
    }
    write_json(out / "spectrum.json", sidecar(scenario, "spectrum", results))
    if args.svg:
        plt = _svg_figure()
        fig, axes = plt.subplots(4, 1, figsize=(6, 8), sharex=True)
        series = [
            (eps.real, "Re eps_T"),
            (eps.imag, "Im eps_T"),
            (np.abs(t) ** 2, "|t|^2"),
            (delay, "delay [us]"),
        ]
        for ax, (y, label) in zip(axes, series):
            ax.plot(x, y, lw=1)
            ax.set_ylabel(label)
        axes[-1].set_xlabel("x [MHz]")
        fig.tight_layout()
        _save_svg(plt, fig, out / "spectrum.svg")
    return results


def _downsample(n: int, limit: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, limit).round().astype(int))


def cmd_evolve(scenario: Scenario, args) -> dict:
    t_end = args.t_end if args.t_end is not None else float(scenario.run.get("t_end_us", 100.0))
    if t_end < 0:
        raise ConfigError("t_end must be non-negative")
    traj = evolve(scenario.chain, scenario.gain, scenario.pump, t_end, rel_tol=args.tol or 1e-9)
    n = scenario.chain.size
    amps = traj.amplitudes
    if args.frame == "lab":
        amps = amps * np.exp(-1j * scenario.pump.omega_p * traj.times)[:, None]
    keep = _downsample(traj.times.size, args.max_rows)
    header = ["t_us"] + [f"{p}_a{k + 1}" for k in range(n) for p in ("re", "im")] + ["gain_mhz"]
    rows = []
    for i in keep:
        row = [traj.times[i]]
        for a in amps[i]:
            row += [a.real, a.imag]
        rows.append(row + [traj.gain_trace[i]])
    out = args.out
    write_csv(out / "trajectory.csv", header, rows)
    if traj.stabilized_at is not None:
        i = traj.index_at(traj.stabilized_at)
    else:
        i = traj.times.size - 1
    results = {
        "t_end_us": t_end,
        "frame": args.frame,
        "stabilized_at_us": traj.stabilized_at,
        "saturated_gain_mhz": float(traj.gain_trace[i]),
        "photon_numbers": [float(abs(a) ** 2) for a in traj.amplitudes[i]],
        "samples": int(traj.times.size),
        "rows_written": int(len(keep)),
    }
    write_json(out / "evolve.json", sidecar(scenario, "evolve", results))
    if args.svg:
        plt = _svg_figure()
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
        for k in range(n):
            ax1.semilogy(traj.times[keep], np.abs(traj.amplitudes[keep, k]) + 1e-300, lw=1, label=f"|a{k + 1}|")
        ax1.set_ylabel("|a_k| [sqrt(MHz)]")
        ax1.legend()
        ax2.plot(traj.times[keep], traj.gain_trace[keep], lw=1)
        ax2.set_ylabel("kappa2 [MHz]")
        ax2.set_xlabel("t [us]")
        fig.tight_layout()
        _save_svg(plt, fig, out / "trajectory.svg")
    return results


def cmd_stability_map(scenario: Scenario, args) -> dict:
    run = scenario.run
    chain = scenario.chain
    if chain.size != 3:
        raise ConfigError("stability maps need a three-resonator chain")
    # without a grid, span 2% to 200% of the scenario's own coupling
    j1_default = run.get("j1_grid", [0.02 * chain.couplings[0], 2.0 * chain.couplings[0], 50])
    j2_default = run.get("j2_grid", [0.02 * chain.couplings[1], 2.0 * chain.couplings[1], 50])
    j1 = _grid(args.j1_grid, j1_default, "--j1-grid")
    j2 = _grid(args.j2_grid, j2_default, "--j2-grid")
    smap = stability_map(chain, j1, j2, scenario.effective_gain)
    out = args.out
    write_csv(out / "stability_map.csv", ["j1_mhz", "j2_mhz", "max_re_lambda_mhz", "label"], smap.rows())
    labels, counts = np.unique(smap.labels.astype(str), return_counts=True)
    results = {
        "j1_points": int(j1.size),
        "j2_points": int(j2.size),
        "label_counts": {str(k): int(v) for k, v in zip(labels, counts)},
        "sqrt_k1k2_mhz": None if smap.thresholds is None else smap.thresholds.sqrt_k1k2,
        "sqrt_k2k3_mhz": None if smap.thresholds is None else smap.thresholds.sqrt_k2k3,
    }
    write_json(out / "stability_map.json", sidecar(scenario, "stability-map", results))
    if args.svg:
        plt = _svg_figure()
        fig, ax = plt.subplots(figsize=(6, 5))
        code = {"Stable": 0.0, "Marginal": 0.5, "Unstable": 1.0}
        z = np.vectorize(code.get)(smap.labels.astype(str)).astype(float)
        ax.pcolormesh(j1, j2, z.T, shading="auto", cmap="coolwarm", vmin=0, vmax=1)
        if smap.boundary is not None:
            ax.plot(j1, smap.boundary, "k-", lw=1.5, label="closed-form boundary")
            th = smap.thresholds
            ax.axvline(th.sqrt_k1k2, color="k", ls=":", lw=1)
            ax.axhline(th.sqrt_k2k3, color="k", ls=":", lw=1)
            ax.annotate(f"sqrt(k1k2) = {th.sqrt_k1k2:.3g}", (th.sqrt_k1k2, j2[-1]), fontsize=8, ha="left", va="top")
            ax.annotate(f"sqrt(k2k3) = {th.sqrt_k2k3:.3g}", (j1[-1], th.sqrt_k2k3), fontsize=8, ha="right", va="bottom")
            ax.legend(loc="lower right")
        ax.set_xlabel("J1 [MHz]")
        ax.set_ylabel("J2 [MHz]")
        ax.set_title("blue: stable, red: unstable")
        fig.tight_layout()
        _save_svg(plt, fig, out / "stability_map.svg")
    return results


def cmd_tune(scenario: Scenario, args) -> dict:
    run = scenario.run
    parameter = args.parameter or run.get("parameter", "j2")
    if args.bracket is not None:
        bracket = _range(args.bracket, 2, "--bracket")
    elif "bracket_mhz" in run:
        bracket = tuple(map(float, run["bracket_mhz"]))
    else:
        bracket = None
    if bracket is not None and not 0 < bracket[0] < bracket[1]:
        raise ConfigError("--bracket needs 0 < LO < HI")
    chain = scenario.chain
    if parameter == "j2":
        tol = args.tol if args.tol is not None else float(run.get("tol", 1e-12))
        res = find_transparency_j2(chain, scenario.gain, scenario.pump, bracket, tol)
        results = {
            "parameter": "j2",
            "value_mhz": res.value,
            "residual": res.residual,
            "iterations": res.iterations,
            "saturated_gain_mhz": res.saturated_gain,
            "tol": tol,
            "bracket_mhz": list(bracket) if bracket else None,
        }
    elif parameter == "j1_marginal":
        tol = args.tol if args.tol is not None else float(run.get("tol", 1e-4))
        if chain.size != 3 or chain.active_index != 1:
            raise ConfigError("j1_marginal needs a passive-active-passive chain")
        value = marginal_j1(
            chain.kappa1,
            scenario.effective_gain,
            chain.rates[2],
            j2=chain.couplings[1],
            bracket=bracket or (1e-3, 100.0),
            tol=tol,
        )
        results = {"parameter": "j1_marginal", "value_mhz": value, "tol": tol, "bracket_mhz": list(bracket or (1e-3, 100.0))}
    else:
        raise ConfigError(f"unknown tuning parameter {parameter!r}")
    write_json(args.out / "tune.json", sidecar(scenario, "tune", results))
    return results


def cmd_scan(scenario: Scenario, args) -> dict:
    run = scenario.run
    chain = scenario.chain
    if args.j2_grid is not None or "j2_list" not in run:
        j2 = _grid(args.j2_grid, run.get("j2_grid", [0.5 * chain.couplings[1], 1.5 * chain.couplings[1], 11]), "--j2-grid")
    else:
        j2 = np.asarray(run["j2_list"], dtype=float)
    x_window = _range(args.x_range, 2, "--x-range") if args.x_range is not None else run.get("x_range_mhz")
    points = args.points if args.points is not None else int(run.get("points", 201))
    table = scan_transmission_vs_j2(chain, scenario.gain, scenario.pump, j2, x_window, points)
    nan = float("nan")

    def cell(v):
        return "" if v is None else v

    write_csv(
        args.out / "scan.csv",
        ["j2_mhz", "label", "t0_sq", "t_min_sq", "t_max_sq", "saturated_gain_mhz"],
        ([r.j2, r.label, cell(r.t0_sq), cell(r.t_min_sq), cell(r.t_max_sq), cell(r.saturated_gain)] for r in table),
    )
    results = {
        "rows": [
            {"j2_mhz": r.j2, "label": r.label, "t0_sq": nan if r.t0_sq is None else r.t0_sq}
            for r in table
        ]
    }
    write_json(args.out / "scan.json", sidecar(scenario, "scan", results))
    return results


def cmd_noise(scenario: Scenario, args) -> dict:
    _require_stable(scenario)
    chain = scenario.chain
    if chain.active_index is None:
        raise ConfigError("noise estimate needs an active resonator")
    state = saturated_state(chain, scenario.gain, scenario.pump)
    gamma2 = scenario.noise_gamma2
    if gamma2 is None:
        gamma2 = 0.0 if isinstance(scenario.gain, ConstantGain) else scenario.gain.gamma2
    g2s = state.effective_gain + gamma2
    est = noise_photon_estimates(chain, g2s, gamma2)
    wavelength = scenario.wavelength or DEFAULT_WAVELENGTH
    results = {
        "g2s_mhz": g2s,
        "gamma2_mhz": gamma2,
        "per_mode": [float(p) for p in est.per_mode],
        "eigenvalues_re_mhz": [float(w.real) for w in est.eigenvalues],
        "eigenvalues_im_mhz": [float(w.imag) for w in est.eigenvalues],
        "selected": est.selected,
        "selected_value": est.selected_value,
        "wavelength_m": wavelength,
        "floor_power_w": noise_floor_power(wavelength),
    }
    write_json(args.out / "noise.json", sidecar(scenario, "noise", results))
    return results


COMMANDS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "stability-map": cmd_stability_map,
    "tune": cmd_tune,
    "scan": cmd_scan,
    "noise": cmd_noise,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavity-trio", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="scenario file (YAML or JSON)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="named figure scenario")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--svg", action="store_true", help="also write SVG figures")
    common.add_argument("--tol", type=float, help="solver tolerance")

    p = sub.add_parser("spectrum", parents=[common], help="transmission spectrum")
    p.add_argument("--points", type=int)
    p.add_argument("--x-range", metavar="LO:HI", help="detuning range [MHz]; write --x-range=-1:1 for negatives")

    p = sub.add_parser("evolve", parents=[common], help="time evolution")
    p.add_argument("--t-end", type=float, help="integration time [us]")
    p.add_argument("--frame", choices=["rotating", "lab"], default="rotating")
    p.add_argument("--max-rows", type=int, default=MAX_ROWS, help="downsample the CSV to this many rows")

    p = sub.add_parser("stability-map", parents=[common], help="regime map over (J1, J2)")
    p.add_argument("--j1-grid", metavar="LO:HI:N")
    p.add_argument("--j2-grid", metavar="LO:HI:N")

    p = sub.add_parser("tune", parents=[common], help="find J2 for transparency or the marginal J1")
    p.add_argument("--parameter", choices=["j2", "j1_marginal"])
    p.add_argument("--bracket", metavar="LO:HI")

    p = sub.add_parser("scan", parents=[common], help="centre transmission versus J2")
    p.add_argument("--j2-grid", metavar="LO:HI:N")
    p.add_argument("--x-range", metavar="LO:HI")
    p.add_argument("--points", type=int)

    sub.add_parser("noise", parents=[common], help="gain-noise photon estimate")
    sub.add_parser("presets", help="list preset names")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "presets":
        print("\n".join(PRESETS))
        return EXIT_OK
    try:
        scenario = preset(args.preset) if args.preset else load_scenario(args.config)
        if args.command == "evolve" and args.max_rows < 1:
            raise ConfigError("--max-rows must be at least 1")
        args.out.mkdir(parents=True, exist_ok=True)
        results = COMMANDS[args.command](scenario, args)
    except (ConfigError, BracketExcluded) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Unstable, UnstableRegion, Diverged) as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (
        SingularDenominator,
        SingularSubfraction,
        ZeroTransmission,
        ToleranceNotMet,
        IterationDiverged,
        NoConvergence,
        NoSignChange,
        DefectiveMatrix,
    ) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(_json_text(results))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
