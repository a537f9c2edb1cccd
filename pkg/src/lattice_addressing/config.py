"""Run configuration: JSON schema, defaults and conversion to domain objects."""

from __future__ import annotations

import json
import math
import warnings
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from lattice_addressing.errors import ConfigError, GeometryError
from lattice_addressing.geometry import LatticeConfig, StandingWaveConfig, commensurate_angle
from lattice_addressing.pulses import GaussianPair, ManipulationBeam
from lattice_addressing.quantum_core import IntegratorConfig
from lattice_addressing.register import MAX_SITES, QuenchPhysics
from lattice_addressing.stirap import DEFAULT_DETUNING, REFERENCE_TRANSFER_PHASE

SCENARIOS = ("stirap-scan", "quench", "rotate", "measure", "cphase", "pattern-load",
             "precision-budget", "protocol-script")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LatticeSection(_Section):
    site_count: int = Field(5, ge=1, le=MAX_SITES)
    target_site: int = Field(2, ge=0)
    reach: int = 4
    lamb_dicke: float = Field(0.0, ge=0)
    spacing: float = Field(1.0, gt=0)

    @field_validator("reach")
    @classmethod
    def _reach(cls, v):
        if v < 1:
            raise ValueError(f"reach must satisfy L >= 1, got L = {v}")
        return v


class WaveSection(_Section):
    wavelength: float = Field(2.0, gt=0)
    # None: commensurate angle for the lattice's L
    tilt_angle: float | None = Field(None, ge=0, lt=math.pi / 2)
    relative_phase: float = 0.0
    peak_rabi: float | None = Field(None, ge=0)


class PulseSection(_Section):
    omega0: float = Field(20.0, ge=0)
    t1: float = 6.0
    t2: float = 0.0
    width: float = Field(5.0, gt=0)


class PhysicsSection(_Section):
    delta_q: float = DEFAULT_DETUNING
    gamma_q: float = Field(1.0, ge=0)
    neighbor_peak: float = Field(20.0, ge=0)
    technique: Literal["stirap", "raman"] = "stirap"
    flip_detuning: bool = True
    transfer_phase: float = REFERENCE_TRANSFER_PHASE


class IntegratorSection(_Section):
    method: Literal["fixed_rk4", "adaptive_rk45"] = "adaptive_rk45"
    rel_tol: float = Field(1e-8, gt=0)
    abs_tol: float = Field(1e-10, gt=0)
    max_step: float = Field(0.1, gt=0)
    step: float = Field(1e-3, gt=0)
    max_evaluations: int = Field(2_000_000, ge=1)


class ScanSection(_Section):
    omega_min: float = Field(0.0, ge=0)
    omega_max: float = Field(40.0, ge=0)
    n_points: int = Field(81, ge=2)
    n_jobs: int = Field(1, ge=1)


class BeamSection(_Section):
    rabi: float = 10.0
    detuning: float = 100.0
    decay: float = Field(1.0, ge=0)
    duration: float = Field(math.pi, ge=0)
    waist: float | None = Field(None, gt=0)


class RegisterSection(_Section):
    pattern: Union[str, list[Union[str, list[float]]]] = "+"
    occupancy: list[bool] | None = None
    mode: Literal["ideal", "simulated"] = "ideal"


class RotateSection(_Section):
    axis: Literal["x", "z"] = "z"
    # None: angle produced by the manipulation beam
    angle: float | None = None


class MeasureSection(_Section):
    trials: int = Field(1000, ge=1)
    site: int | None = None


class BudgetSection(_Section):
    site_count: int = Field(1000, ge=1)
    reach: int = 4
    angle_error: float = Field(1e-5, ge=0)
    phase_error: float = Field(0.0, ge=0)
    wavelength: float = Field(2.0, gt=0)

    @field_validator("reach")
    @classmethod
    def _reach(cls, v):
        if v < 1:
            raise ValueError(f"reach must satisfy L >= 1, got L = {v}")
        return v


class PumpSection(_Section):
    mode: Literal["deterministic", "trajectory"] = "deterministic"
    pump_to: Literal["a", "b"] = "a"


class ProtocolStep(BaseModel):
    model_config = ConfigDict(extra="allow", frozen=True)
    op: str


class ProtocolSection(_Section):
    steps: list[ProtocolStep] = Field(default_factory=list)


# "register" shadows ABCMeta.register on the model class; harmless here
warnings.filterwarnings("ignore", message='Field name "register"', category=UserWarning)


class RunConfig(_Section):
    scenario: Literal[SCENARIOS] = "stirap-scan"  # type: ignore[valid-type]
    seed: int = Field(0, ge=0, lt=2 ** 64)
    output_path: str | None = None
    output_format: Literal["csv", "json"] | None = None
    lattice: LatticeSection = LatticeSection()
    waves: tuple[WaveSection, WaveSection] | None = None
    pulses: PulseSection = PulseSection()
    physics: PhysicsSection = PhysicsSection()
    integrator: IntegratorSection = IntegratorSection()
    scan: ScanSection = ScanSection()
    beam: BeamSection = BeamSection()
    register: RegisterSection = RegisterSection()
    rotate: RotateSection = RotateSection()
    measure: MeasureSection = MeasureSection()
    budget: BudgetSection = BudgetSection()
    pump: PumpSection = PumpSection()
    protocol: ProtocolSection = ProtocolSection()

    # --- domain objects ---------------------------------------------------

    def lattice_config(self) -> LatticeConfig:
        s = self.lattice
        return LatticeConfig(s.site_count, s.target_site, s.reach, s.lamb_dicke, s.spacing)

    def wave_configs(self) -> tuple[StandingWaveConfig, StandingWaveConfig] | None:
        if self.waves is None:
            return None
        lat = self.lattice
        out = []
        for w in self.waves:
            theta = w.tilt_angle
            if theta is None:
                theta = commensurate_angle(w.wavelength, lat.spacing, lat.reach)
            peak = self.pulses.omega0 if w.peak_rabi is None else w.peak_rabi
            out.append(StandingWaveConfig(w.wavelength, theta, w.relative_phase, peak))
        return tuple(out)

    def gaussian_pair(self) -> GaussianPair:
        p = self.pulses
        return GaussianPair(p.omega0, p.t1, p.t2, p.width)

    def integrator_config(self) -> IntegratorConfig:
        i = self.integrator
        return IntegratorConfig(i.method, i.rel_tol, i.abs_tol, i.max_step, i.step, i.max_evaluations)

    def manipulation_beam(self) -> ManipulationBeam:
        b = self.beam
        return ManipulationBeam(b.rabi, b.detuning, b.duration, self.lattice.target_site,
                                self.lattice.reach, b.waist, b.decay)

    def quench_physics(self) -> QuenchPhysics:
        ph = self.physics
        return QuenchPhysics(
            neighbor_peak=ph.neighbor_peak,
            pulse_timing=self.gaussian_pair(),
            detuning=ph.delta_q,
            gamma=ph.gamma_q,
            lamb_dicke=self.lattice.lamb_dicke,
            integrator=self.integrator_config(),
            waves=self.wave_configs(),
            technique=ph.technique,
            flip_detuning=ph.flip_detuning,
            transfer_phase=ph.transfer_phase,
            beam_waist=self.beam.waist,
        )


def _loc(err: dict) -> str:
    return ".".join(str(p) for p in err["loc"])


def parse_config(text: str | bytes | dict) -> RunConfig:
    """Validate a JSON config and fill defaults.

    Raises :class:`ConfigError` whose ``key`` is the dotted path of the
    first offending entry.
    """
    if isinstance(text, dict):
        data = text
    else:
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = _loc(err)
        raise ConfigError(f"{key}: {err['msg']}", key=key) from None

    if cfg.lattice.target_site >= cfg.lattice.site_count:
        raise ConfigError("lattice.target_site must be < lattice.site_count",
                          key="lattice.target_site")
    lattice = cfg.lattice_config()
    try:
        cfg.wave_configs()
    except GeometryError as exc:
        raise ConfigError(f"waves: {exc}", key="waves") from None
    if cfg.register.occupancy is not None and len(cfg.register.occupancy) != lattice.site_count:
        raise ConfigError("register.occupancy length must equal lattice.site_count",
                          key="register.occupancy")
    if isinstance(cfg.register.pattern, list) and len(cfg.register.pattern) != lattice.site_count:
        raise ConfigError("register.pattern length must equal lattice.site_count",
                          key="register.pattern")
    if cfg.scan.omega_max < cfg.scan.omega_min:
        raise ConfigError("scan.omega_max must be >= scan.omega_min", key="scan.omega_max")
    return cfg


def _coerce(value: str) -> Any:
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key.path=value`` overrides; values are parsed as JSON when possible."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value", key=item)
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            if p.isdigit() and isinstance(node, list):
                node = node[int(p)]
                continue
            node = node.setdefault(p, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(f"cannot descend into non-object at {p!r}", key=key)
        last = parts[-1]
        if isinstance(node, list) and last.isdigit():
            node[int(last)] = _coerce(raw)
        else:
            node[last] = _coerce(raw)
    return data
