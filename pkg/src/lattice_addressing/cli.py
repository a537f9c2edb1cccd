"""Command-line entry point.

    lattice-addressing CONFIG.json [--set key=value ...] [--output PATH]
                       [--format csv|json] [--seed N]

Exit codes: 0 success, 2 configuration error, 3 runtime or integration
error, 4 I/O error. Errors are also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from lattice_addressing import register as rp
from lattice_addressing.config import RunConfig, apply_overrides, parse_config
from lattice_addressing.errors import AddressingError, ConfigError
from lattice_addressing.geometry import (
    asymptotic_budget,
    commensurate_angle,
    max_angle_error,
    precision_budget,
    required_node_precision,
)
from lattice_addressing.pulses import stark_rotation_angle
from lattice_addressing.reporting import curve_to_csv, curve_to_json, table_to_csv, to_json, write_atomic
from lattice_addressing.stirap import fidelity_scan

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


def trial_rng(seed: int, *counter: int) -> np.random.Generator:
    """Independent Philox stream for one trial, keyed by ``(seed, counter)``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(counter))
    return np.random.Generator(np.random.Philox(ss))


# --- protocol scripts ------------------------------------------------------

_ADDRESSED = {"k", "L", "mode"}
PROTOCOL_OPS = {
    "quench": (_ADDRESSED, set()),
    "inverse_quench": (_ADDRESSED, set()),
    "rotate_z": (_ADDRESSED | {"angle"}, {"angle"}),
    "rotate_x": (_ADDRESSED | {"angle"}, {"angle"}),
    "hadamard": (set(), set()),
    "measure": (_ADDRESSED, set()),
    "cphase": (_ADDRESSED, set()),
    "controlled_rotation": (_ADDRESSED | {"angle"}, {"angle"}),
    "euler_rotation": (_ADDRESSED | {"alpha", "beta", "gamma"}, {"alpha", "beta", "gamma"}),
    "pump": ({"pump_mode", "pump_to"}, set()),
}


def validate_steps(steps: list[dict]) -> None:
    for i, step in enumerate(steps):
        op = step.get("op")
        if op not in PROTOCOL_OPS:
            raise ConfigError(f"protocol.steps.{i}.op: unknown operation {op!r}",
                              key=f"protocol.steps.{i}.op")
        allowed, required = PROTOCOL_OPS[op]
        args = set(step) - {"op"}
        extra = args - allowed
        if extra:
            raise ConfigError(f"protocol.steps.{i}: unexpected arguments {sorted(extra)} for {op}",
                              key=f"protocol.steps.{i}")
        missing = required - args
        if missing:
            raise ConfigError(f"protocol.steps.{i}: missing arguments {sorted(missing)} for {op}",
                              key=f"protocol.steps.{i}")
        for name in ("k", "L"):
            if name in step and not isinstance(step[name], int):
                raise ConfigError(f"protocol.steps.{i}.{name} must be an integer",
                                  key=f"protocol.steps.{i}.{name}")
        if "L" in step and step["L"] < 1:
            raise ConfigError(f"protocol.steps.{i}.L must satisfy L >= 1",
                              key=f"protocol.steps.{i}.L")


def run_protocol(cfg: RunConfig, reg: rp.LatticeRegister, steps: list[dict]):
    physics = cfg.quench_physics()
    outcomes = []
    for i, step in enumerate(steps):
        op = step["op"]
        k = step.get("k", cfg.lattice.target_site)
        L = step.get("L", cfg.lattice.reach)
        mode = step.get("mode", cfg.register.mode)
        if op == "quench":
            reg = rp.apply_quench(reg, k, L, mode, physics)
        elif op == "inverse_quench":
            reg = rp.apply_inverse_quench(reg, k, L, mode, physics)
        elif op == "rotate_z":
            reg = rp.rotate_z(reg, k, L, step["angle"], mode, physics)
        elif op == "rotate_x":
            reg = rp.rotate_x(reg, k, L, step["angle"], mode, physics)
        elif op == "hadamard":
            reg = rp.collective_hadamard(reg)
        elif op == "measure":
            outcome, reg = rp.measure_site(reg, k, L, trial_rng(cfg.seed, i), mode, physics)
            outcomes.append({"step": i, "site": k, "outcome": outcome})
        elif op == "cphase":
            reg = rp.collective_cphase(reg, k, L, mode, physics)
        elif op == "controlled_rotation":
            reg = rp.controlled_rotation(reg, k, L, step["angle"], mode, physics)
        elif op == "euler_rotation":
            u = (rp.rz_matrix(step["alpha"]) @ rp.rx_matrix(step["beta"])
                 @ rp.rz_matrix(step["gamma"]))
            reg = rp.arbitrary_rotation(reg, k, L, u, mode, physics)
        elif op == "pump":
            reg = rp.optical_pump(reg, trial_rng(cfg.seed, i), step.get("pump_mode", cfg.pump.mode),
                                  step.get("pump_to", cfg.pump.pump_to))
    return reg, outcomes


# --- scenarios -------------------------------------------------------------

def _initial_register(cfg: RunConfig) -> rp.LatticeRegister:
    pattern = cfg.register.pattern
    if isinstance(pattern, list):
        pattern = [p if isinstance(p, str) else list(p) for p in pattern]
    return rp.new_register(cfg.lattice.site_count, pattern, cfg.register.occupancy)


def _register_report(reg: rp.LatticeRegister, **extra) -> dict:
    pops = reg.site_populations()
    out = {"register": reg.to_dict(), "populations": pops.tolist(), "history": reg.history}
    out.update(extra)
    return out


def _register_csv(reg: rp.LatticeRegister) -> str:
    pops = reg.site_populations()
    rows = [[s, int(reg.occupancy[s]), float(p[0]), float(p[1]), float(p[2])]
            for s, p in enumerate(pops)]
    return table_to_csv(["site", "occupied", "pop_a", "pop_b", "pop_q"], rows)


def run_scenario(cfg: RunConfig, fmt: str | None = None) -> tuple[str, str]:
    """Execute the configured scenario; return ``(text, format)``."""
    fmt = fmt or cfg.output_format
    lat = cfg.lattice
    mode = cfg.register.mode
    physics = cfg.quench_physics()

    if cfg.scenario == "stirap-scan":
        fmt = fmt or "csv"
        s = cfg.scan
        curve = fidelity_scan(s.omega_min, s.omega_max, s.n_points, cfg.physics.delta_q,
                              cfg.gaussian_pair(), cfg.physics.gamma_q, cfg.integrator_config(),
                              n_jobs=s.n_jobs)
        return (curve_to_csv(curve) if fmt == "csv" else curve_to_json(curve)), fmt

    if cfg.scenario == "precision-budget":
        fmt = fmt or "json"
        b = cfg.budget
        theta = commensurate_angle(b.wavelength, 1.0, b.reach)
        exact = precision_budget(b.site_count, theta, b.angle_error, b.phase_error, b.reach)
        asym = asymptotic_budget(b.reach, b.site_count, b.angle_error, b.phase_error)
        report = {
            "site_count": b.site_count, "reach": b.reach,
            "angle_error": b.angle_error, "phase_error": b.phase_error,
            "feasible": asym.feasible,
            "asymptotic": {"lhs": asym.lhs, "bound": asym.bound, "margin": asym.margin,
                           "feasible": asym.feasible,
                           "max_angle_error": max_angle_error(b.reach, b.site_count, b.phase_error)},
            "exact": {**exact.to_dict(), "tilt_angle": theta, "wavelength": b.wavelength},
            "required_node_precision": required_node_precision(b.reach),
        }
        if fmt == "json":
            return to_json(report), fmt
        rows = [["feasible", str(asym.feasible)], ["asymptotic_lhs", asym.lhs],
                ["asymptotic_margin", asym.margin], ["exact_displacement", exact.node_displacement],
                ["exact_required", exact.required], ["exact_feasible", str(exact.feasible)]]
        return table_to_csv(["quantity", "value"], rows), fmt

    if cfg.scenario == "pattern-load":
        fmt = fmt or "json"
        probs = rp.pattern_load_probabilities(lat.site_count, lat.target_site, lat.reach,
                                              mode, physics)
        occupied = [s for s, p in enumerate(probs) if p >= 0.5]
        if fmt == "json":
            return to_json({"occupied": occupied, "retention_probability": probs}), fmt
        rows = [[s, int(s in occupied), p] for s, p in enumerate(probs)]
        return table_to_csv(["site", "occupied", "retention_probability"], rows), fmt

    reg = _initial_register(cfg)
    fmt = fmt or "json"
    if cfg.scenario == "measure":
        site = lat.target_site if cfg.measure.site is None else cfg.measure.site
        outcomes = []
        for i in range(cfg.measure.trials):
            outcome, _ = rp.measure_site(reg, site, lat.reach, trial_rng(cfg.seed, i), mode, physics)
            outcomes.append(outcome)
        bright = outcomes.count("bright")
        if fmt == "json":
            return to_json({"site": site, "trials": len(outcomes), "bright": bright,
                            "frequency": bright / len(outcomes)}), fmt
        return table_to_csv(["trial", "outcome"], [[i, o] for i, o in enumerate(outcomes)]), fmt

    extra = {}
    if cfg.scenario == "quench":
        reg = rp.apply_quench(reg, lat.target_site, lat.reach, mode, physics)
    elif cfg.scenario == "rotate":
        angle = cfg.rotate.angle
        if angle is None:
            angle = stark_rotation_angle(cfg.manipulation_beam())
        fn = rp.rotate_z if cfg.rotate.axis == "z" else rp.rotate_x
        reg = fn(reg, lat.target_site, lat.reach, angle, mode, physics)
        extra["angle"] = angle
    elif cfg.scenario == "cphase":
        reg = rp.collective_cphase(reg, lat.target_site, lat.reach, mode, physics)
    elif cfg.scenario == "protocol-script":
        steps = [s.model_dump() for s in cfg.protocol.steps]
        validate_steps(steps)
        reg, outcomes = run_protocol(cfg, reg, steps)
        extra["outcomes"] = outcomes
    return (to_json(_register_report(reg, **extra)) if fmt == "json" else _register_csv(reg)), fmt


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lattice-addressing",
                                description="Standing-wave single-atom addressing simulator.")
    p.add_argument("config", help="scenario configuration (JSON)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry by dotted key, e.g. lattice.reach=3")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", type=int)
    return p


def _fail(code: int, exc: BaseException, key: str | None = None) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if key:
        err["key"] = key
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    try:
        data = json.loads(text) if text.strip() else {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = apply_overrides(data, args.overrides)
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = parse_config(data)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, exc.key)
    except json.JSONDecodeError as exc:
        return _fail(EXIT_CONFIG, exc)

    try:
        out, _ = run_scenario(cfg, args.format)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, exc.key)
    except (AddressingError, ValueError, ArithmeticError) as exc:
        return _fail(EXIT_RUNTIME, exc)

    target = args.output or cfg.output_path
    try:
        if target:
            write_atomic(target, out)
        else:
            sys.stdout.write(out)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
