"""Standing-wave geometry, per-site couplings and alignment budgets.

Lengths are in units of the lattice spacing ``d_l`` and angles in radians.
A standing wave built from two plane waves tilted symmetrically by
``theta`` has period ``wavelength / cos(theta)`` along the trap axis; its
nodes must coincide with the addressed sublattice
``{k + (L + 1) n}`` and with no other site.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from lattice_addressing.errors import GeometryError

# Peak coupling at the nearest non-node site and the tolerated residual
# coupling at a node site, both in units of gamma_q.
REFERENCE_PEAK = 20.0
RESIDUAL_LIMIT = 1.0


@dataclass(frozen=True)
class StandingWaveConfig:
    wavelength: float
    tilt_angle: float = 0.0
    relative_phase: float = 0.0
    peak_rabi: float = 20.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise GeometryError(f"wavelength must be > 0, got {self.wavelength}")
        if not 0.0 <= self.tilt_angle < math.pi / 2:
            raise GeometryError(f"tilt_angle must lie in [0, pi/2), got {self.tilt_angle}")


@dataclass(frozen=True)
class LatticeConfig:
    site_count: int
    target_site: int = 0
    reach: int = 1
    lamb_dicke: float = 0.0
    spacing: float = 1.0

    def __post_init__(self):
        if self.site_count < 1:
            raise GeometryError("site_count must be >= 1")
        if self.reach < 1:
            raise GeometryError(f"reach L must be >= 1, got {self.reach}")
        if not 0 <= self.target_site < self.site_count:
            raise GeometryError(
                f"target_site {self.target_site} outside [0, {self.site_count})")
        if self.lamb_dicke < 0:
            raise GeometryError("lamb_dicke must be >= 0")

    @property
    def node_spacing(self) -> int:
        return self.reach + 1

    @property
    def debye_waller(self) -> float:
        return math.exp(-0.5 * self.lamb_dicke ** 2)

    def is_node(self, s: int) -> bool:
        return (s - self.target_site) % self.node_spacing == 0

    def sublattice(self) -> list[int]:
        """Sites of ``S_L^(k)`` inside the register."""
        start = self.target_site % self.node_spacing
        return list(range(start, self.site_count, self.node_spacing))

    def required_period(self) -> float:
        return 2.0 * self.node_spacing * self.spacing


@dataclass(frozen=True)
class PrecisionBudget:
    angle_error: float
    phase_error: float
    node_displacement: float
    required: float
    feasible: bool

    def __post_init__(self):
        if self.angle_error < 0 or self.phase_error < 0:
            raise ValueError("errors must be >= 0")

    @property
    def margin(self) -> float:
        return self.required - self.node_displacement

    def to_dict(self) -> dict:
        d = asdict(self)
        d["margin"] = self.margin
        return d


def spatial_period(wave: StandingWaveConfig) -> float:
    return wave.wavelength / math.cos(wave.tilt_angle)


def commensurate_angle(wavelength: float, spacing: float, reach: int) -> float:
    """Tilt angle making the standing-wave half-period equal ``(L + 1) d_l``."""
    if not wavelength > 0:
        raise GeometryError("wavelength must be > 0")
    ratio = wavelength / (2.0 * (reach + 1) * spacing)
    if ratio > 1.0:
        raise GeometryError(
            f"wavelength {wavelength} exceeds 2(L+1)d_l = {2 * (reach + 1) * spacing}; "
            "no real tilt angle")
    return math.acos(ratio)


def commensurate_wave(lattice: LatticeConfig, wavelength: float, peak_rabi: float = 20.0,
                      relative_phase: float = 0.0) -> StandingWaveConfig:
    theta = commensurate_angle(wavelength, lattice.spacing, lattice.reach)
    return StandingWaveConfig(wavelength, theta, relative_phase, peak_rabi)


def site_phase(s: int, lattice: LatticeConfig) -> float:
    return math.pi * (s - lattice.target_site) / lattice.node_spacing


def _sin_site_phase(s: int, lattice: LatticeConfig) -> float:
    # reduce to m in [0, L+1] with an explicit sign so node sites give an
    # exact 0 and s - k -> k - s flips the sign exactly
    n = lattice.node_spacing
    m = (s - lattice.target_site) % (2 * n)
    sign = 1.0
    if m > n:
        m, sign = 2 * n - m, -1.0
    if m == 0 or m == n:
        return 0.0
    return sign * math.sin(math.pi * m / n)


def site_factor(s: int, lattice: LatticeConfig) -> float:
    """Coupling of site ``s`` relative to the standing-wave peak amplitude."""
    return lattice.debye_waller * _sin_site_phase(s, lattice)


def effective_rabi(s: int, lattice: LatticeConfig, peak: float) -> float:
    return site_factor(s, lattice) * peak


def wave_site_factor(s: int, lattice: LatticeConfig, wave: StandingWaveConfig) -> float:
    """Coupling of site ``s`` for an actual, possibly misaligned, wave.

    Reduces to :func:`site_factor` when the wave is commensurate and its
    relative phase is zero.
    """
    period = spatial_period(wave)
    if (abs(period - lattice.required_period()) <= 1e-12 * period
            and wave.relative_phase == 0.0):
        return site_factor(s, lattice)
    x = (s - lattice.target_site) * lattice.spacing
    return lattice.debye_waller * math.sin(2 * math.pi * x / period + wave.relative_phase)


def peak_for_neighbor(lattice: LatticeConfig, neighbor_peak: float = REFERENCE_PEAK) -> float:
    """Standing-wave peak that gives site ``k+1`` the coupling ``neighbor_peak``."""
    f = abs(site_factor(lattice.target_site + 1, lattice))
    return neighbor_peak / f


@dataclass
class NodeReport:
    node_displacements: dict[int, float] = field(default_factory=dict)
    violations: list[dict] = field(default_factory=list)
    period_mismatch: float = 0.0
    phase_mismatch: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "node_displacements": {str(k): v for k, v in self.node_displacements.items()},
            "violations": self.violations,
            "period_mismatch": self.period_mismatch,
            "phase_mismatch": self.phase_mismatch,
        }


def _node_offset(s: int, lattice: LatticeConfig, wave: StandingWaveConfig) -> float:
    """Distance (in d_l) from site ``s`` to the nearest node of ``wave``."""
    period = spatial_period(wave)
    arg = 2 * math.pi * (s - lattice.target_site) * lattice.spacing / period + wave.relative_phase
    n = round(arg / math.pi)
    return abs(arg - n * math.pi) * period / (2 * math.pi) / lattice.spacing


def validate_node_condition(lattice: LatticeConfig, waves: tuple[StandingWaveConfig, StandingWaveConfig],
                            tolerance: float = 1e-9, rel_tol: float = 1e-9) -> NodeReport:
    """Check that both waves put nodes on ``S_L^(k)`` and nowhere else.

    ``tolerance`` is the allowed node displacement in units of ``d_l``.
    """
    if len(waves) != 2:
        raise ValueError("exactly two standing waves are required")
    report = NodeReport()
    target = lattice.required_period()
    periods = [spatial_period(w) for w in waves]
    report.period_mismatch = abs(periods[0] - periods[1]) / max(periods)
    report.phase_mismatch = abs(waves[0].relative_phase - waves[1].relative_phase)
    if report.period_mismatch > rel_tol:
        report.violations.append({"kind": "period_mismatch", "value": report.period_mismatch})
    if report.phase_mismatch > tolerance:
        report.violations.append({"kind": "phase_mismatch", "value": report.phase_mismatch})
    for i, p in enumerate(periods):
        if abs(p - target) > rel_tol * target:
            report.violations.append({"kind": "not_commensurate", "wave": i,
                                      "period": p, "required": target})

    for s in range(lattice.site_count):
        disp = max(_node_offset(s, lattice, w) for w in waves)
        if lattice.is_node(s):
            report.node_displacements[s] = disp
            if disp > tolerance:
                report.violations.append({"kind": "node_displaced", "site": s,
                                          "displacement": disp})
        else:
            for i, w in enumerate(waves):
                if abs(wave_site_factor(s, lattice, w)) <= tolerance:
                    report.violations.append({"kind": "spurious_node", "site": s, "wave": i})
    return report


def required_node_precision(reach: int) -> float:
    """Largest tolerable node displacement ``Delta d / d_l``.

    Sized so that a node site sees at most ``RESIDUAL_LIMIT`` when site
    ``k+1`` is driven at ``REFERENCE_PEAK``.
    """
    if reach < 1:
        raise ValueError("reach must be >= 1")
    x = math.pi / (reach + 1)
    return (RESIDUAL_LIMIT / REFERENCE_PEAK) * math.sin(x) / x


def worst_case_displacement(site_count: int, tilt_angle: float, angle_error: float,
                            phase_error: float, reach: int) -> float:
    """Node displacement (units of d_l) accumulated across the lattice.

    The angle term grows with the number of sites because a period error
    accumulates from node to node; the phase term shifts every node by the
    same amount.
    """
    if not tilt_angle < math.pi / 2:
        raise ValueError("tilt_angle must be < pi/2")
    return (site_count * math.tan(tilt_angle) * angle_error
            + (reach + 1) * phase_error / math.pi)


def precision_budget(site_count: int, tilt_angle: float, angle_error: float,
                     phase_error: float, reach: int) -> PrecisionBudget:
    disp = worst_case_displacement(site_count, tilt_angle, angle_error, phase_error, reach)
    req = required_node_precision(reach)
    return PrecisionBudget(angle_error, phase_error, disp, req, _leq(disp, req))


def _leq(lhs: float, rhs: float) -> bool:
    # boundary cases such as 5 * (1000 * 1e-5) == 0.05 must count as feasible
    return lhs <= rhs * (1 + 1e-12)


@dataclass(frozen=True)
class AsymptoticBudget:
    lhs: float
    bound: float
    feasible: bool

    @property
    def margin(self) -> float:
        return self.bound - self.lhs


def asymptotic_budget(reach: int, site_count: int, angle_error: float,
                      phase_error: float) -> AsymptoticBudget:
    """Large-``L`` budget, valid when the drive wavelength is about ``2 d_l``.

    In that regime ``tan(theta)`` is close to ``L + 1`` and the required
    precision tends to ``1/20``; picking the regime is up to the caller.
    """
    bound = RESIDUAL_LIMIT / REFERENCE_PEAK
    lhs = (reach + 1) * (site_count * angle_error + phase_error / math.pi)
    return AsymptoticBudget(lhs, bound, _leq(lhs, bound))


def max_angle_error(reach: int, site_count: int, phase_error: float = 0.0) -> float:
    """Largest tilt-angle error the asymptotic budget tolerates."""
    bound = RESIDUAL_LIMIT / REFERENCE_PEAK
    return (bound / (reach + 1) - phase_error / math.pi) / site_count


def residual_rabi_at_node(displacement: float, lattice: LatticeConfig,
                          neighbor_peak: float = REFERENCE_PEAK) -> float:
    """Coupling left at a node displaced by ``displacement`` (units of d_l).

    ``neighbor_peak`` is the coupling at site ``k+1`` of the ideal wave.
    """
    if abs(displacement) > 0.5 * lattice.spacing:
        raise ValueError("displacement must be within half a lattice spacing")
    n = lattice.node_spacing
    return neighbor_peak * abs(math.sin(math.pi * displacement / (n * lattice.spacing))) / math.sin(math.pi / n)


def site_factors(lattice: LatticeConfig) -> np.ndarray:
    return np.array([site_factor(s, lattice) for s in range(lattice.site_count)])
