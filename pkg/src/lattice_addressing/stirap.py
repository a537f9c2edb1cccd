"""Per-site STIRAP transfer, fidelity scans and the quench map.

A site whose standing-wave coupling peaks at ``Omega_q`` undergoes
``b -> q`` transfer once ``Omega_q`` exceeds a threshold of roughly
``20 gamma_q``; weakly driven sites are left alone. The quench map of a
site is the 3x3 block of its propagator restricted to ``(a, b, q)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from lattice_addressing.errors import ThresholdNotReached
from lattice_addressing.geometry import (
    REFERENCE_PEAK,
    LatticeConfig,
    StandingWaveConfig,
    site_factor,
    wave_site_factor,
)
from lattice_addressing.pulses import GaussianPair, raman_pi_pulse
from lattice_addressing.quantum_core import (
    B,
    Q,
    AtomState,
    IntegratorConfig,
    SiteHamiltonianSpec,
    evolve,
    fidelity,
    propagate,
)

DEFAULT_DETUNING = 100.0

# Phase of the q amplitude after a default forward transfer at a peak
# coupling of 20 gamma_q, from a fine-step Magnus reference integration.
REFERENCE_TRANSFER_PHASE = -0.0614981082

PSI_INITIAL = np.array([1, 1, 0, 0], dtype=complex) / math.sqrt(2)
PSI_TARGET = np.array([1, 0, 1, 0], dtype=complex) / math.sqrt(2)

Technique = Literal["stirap", "raman"]


@dataclass(frozen=True, eq=False)
class TransferResult:
    final_state: AtomState
    fidelity_initial: float
    fidelity_target: float
    leakage: float
    transfer_phase: float


@dataclass
class FidelityCurve:
    omega: list[float] = field(default_factory=list)
    fidelity_initial: list[float] = field(default_factory=list)
    fidelity_target: list[float] = field(default_factory=list)
    leakage: list[float] = field(default_factory=list)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.omega, self.omega[1:])):
            raise ValueError("omega samples must be strictly increasing")

    def __len__(self):
        return len(self.omega)

    def rows(self):
        return zip(self.omega, self.fidelity_initial, self.fidelity_target, self.leakage)

    @property
    def crossing(self) -> float | None:
        """First coupling where the target fidelity overtakes the initial one."""
        fi = np.asarray(self.fidelity_initial)
        ft = np.asarray(self.fidelity_target)
        diff = ft - fi
        idx = np.flatnonzero(diff >= 0)
        if idx.size == 0:
            return None
        i = int(idx[0])
        if i == 0:
            return self.omega[0]
        x0, x1 = self.omega[i - 1], self.omega[i]
        d0, d1 = diff[i - 1], diff[i]
        return float(x0 + (x1 - x0) * (-d0) / (d1 - d0))


def simulate_transfer(omega_peak: float, detuning: float = DEFAULT_DETUNING,
                      pulses: GaussianPair | None = None, initial: AtomState | None = None,
                      gamma: float = 1.0, cfg: IntegratorConfig | None = None,
                      targets: tuple[np.ndarray, np.ndarray] | None = None) -> TransferResult:
    """Run one STIRAP pulse pair on a site whose peak coupling is ``omega_peak``.

    Only the pulse timings of ``pulses`` are used; the amplitude is set to
    ``omega_peak``. Fidelities are taken against ``(|a>+|b>)/sqrt2`` and
    ``(|a>+|q>)/sqrt2`` unless ``targets`` overrides them.
    """
    if omega_peak < 0:
        raise ValueError("omega_peak must be >= 0")
    pulses = GaussianPair() if pulses is None else pulses
    pulses = GaussianPair(omega_peak, pulses.t1, pulses.t2, pulses.width)
    initial = AtomState(PSI_INITIAL) if initial is None else initial
    psi_i, psi_t = (PSI_INITIAL, PSI_TARGET) if targets is None else targets

    spec = SiteHamiltonianSpec(pulses, 1.0, detuning, gamma)
    final = evolve(initial, spec, cfg=cfg)
    b0 = initial["b"]
    qf = final["q"]
    phase = float(np.angle(qf) - np.angle(b0)) if abs(b0) > 0 and abs(qf) > 0 else float("nan")
    if not math.isnan(phase):
        phase = (phase + math.pi) % (2 * math.pi) - math.pi
    return TransferResult(
        final_state=final,
        fidelity_initial=fidelity(final, psi_i),
        fidelity_target=fidelity(final, psi_t),
        leakage=max(0.0, 1.0 - final.norm_squared),
        transfer_phase=phase,
    )


def _scan_point(args):
    omega, detuning, pulses, gamma, cfg = args
    r = simulate_transfer(omega, detuning, pulses, gamma=gamma, cfg=cfg)
    return r.fidelity_initial, r.fidelity_target, r.leakage


def fidelity_scan(omega_min: float = 0.0, omega_max: float = 40.0, n_points: int = 81,
                  detuning: float = DEFAULT_DETUNING, pulses: GaussianPair | None = None,
                  gamma: float = 1.0, cfg: IntegratorConfig | None = None,
                  n_jobs: int = 1) -> FidelityCurve:
    """Transfer fidelities on an evenly spaced grid of peak couplings.

    Points are independent; ``n_jobs > 1`` spreads them over processes
    without changing any value.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if omega_max < omega_min:
        raise ValueError("omega_max must be >= omega_min")
    grid = np.unique(np.linspace(omega_min, omega_max, n_points))
    pulses = GaussianPair() if pulses is None else pulses
    jobs = [(float(w), detuning, pulses, gamma, cfg) for w in grid]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_scan_point, jobs))
    else:
        results = [_scan_point(j) for j in jobs]
    fi, ft, lk = (list(col) for col in zip(*results))
    return FidelityCurve([float(w) for w in grid], fi, ft, lk)


def find_threshold(curve: FidelityCurve, target_fidelity: float) -> float:
    ft = curve.fidelity_target
    for i, f in enumerate(ft):
        if f >= target_fidelity:
            if i == 0:
                return curve.omega[0]
            x0, x1 = curve.omega[i - 1], curve.omega[i]
            f0 = ft[i - 1]
            return x0 + (x1 - x0) * (target_fidelity - f0) / (f - f0)
    raise ThresholdNotReached(
        f"fidelity {target_fidelity} not reached on [{curve.omega[0]}, {curve.omega[-1]}]")


@dataclass(frozen=True, eq=False)
class SiteMap:
    """Restriction of a site propagator to ``(a, b, q)``."""

    matrix: np.ndarray
    leakage: float
    transfer_phase: float

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(3)))


IDENTITY_MAP = SiteMap(np.eye(3, dtype=complex), 0.0, 0.0)


@lru_cache(maxsize=512)
def _site_map(f1: float, f2: float, schedule, detuning: float, gamma: float,
              cfg: IntegratorConfig | None) -> SiteMap:
    if f1 == 0.0 and f2 == 0.0:
        return IDENTITY_MAP
    spec = SiteHamiltonianSpec(schedule, f1, detuning, gamma, f2)
    t0, t1 = schedule.window()
    cols = np.eye(4, dtype=complex)[:, :3]
    out = propagate(cols, spec, t0, t1, cfg)
    m = out[:3, :].copy()
    m.setflags(write=False)
    leak = max(0.0, 1.0 - float(np.sum(np.abs(m[:, B]) ** 2)))
    return SiteMap(m, leak, float(np.angle(m[Q, B])))


def drive_schedule(lattice: LatticeConfig, pulses: GaussianPair, detuning: float,
                   technique: Technique = "stirap", inverse: bool = False,
                   flip_detuning: bool = True):
    """Pulse schedule and detuning for a forward or inverse quench.

    The inverse runs the pulses in mirrored order; with ``flip_detuning``
    the one-photon detuning is reversed too, which is the exact time
    reverse of the loss-free forward evolution.
    """
    if technique == "raman":
        schedule = raman_pi_pulse(lattice, pulses.omega0, detuning)
    elif technique == "stirap":
        schedule = pulses.reversed() if inverse else pulses
    else:
        raise ValueError(f"unknown quench technique {technique!r}")
    if inverse and flip_detuning:
        detuning = -detuning
    return schedule, detuning


def quench_site_map(s: int, lattice: LatticeConfig, pulses: GaussianPair,
                    waves: Sequence[StandingWaveConfig] | None = None,
                    detuning: float = DEFAULT_DETUNING, gamma: float = 1.0,
                    cfg: IntegratorConfig | None = None, inverse: bool = False,
                    technique: Technique = "stirap", flip_detuning: bool = True) -> SiteMap:
    """Simulated action of one (inverse) quench on site ``s``.

    ``pulses.omega0`` is the standing-wave peak amplitude; the site sees
    it scaled by its coupling factor. Node sites of ideal waves return the
    exact identity without integrating.
    """
    if waves is None:
        f1 = f2 = site_factor(s, lattice)
    else:
        f1 = wave_site_factor(s, lattice, waves[0])
        f2 = wave_site_factor(s, lattice, waves[1])
    if f1 == 0.0 and f2 == 0.0:
        return IDENTITY_MAP
    schedule, det = drive_schedule(lattice, pulses, detuning, technique, inverse, flip_detuning)
    return _site_map(float(f1), float(f2), schedule, float(det), float(gamma), cfg)


def pulses_for_neighbor_peak(lattice: LatticeConfig, neighbor_peak: float = REFERENCE_PEAK,
                             template: GaussianPair | None = None) -> GaussianPair:
    """Gaussian pair whose standing-wave peak gives site ``k+1`` ``neighbor_peak``."""
    template = GaussianPair() if template is None else template
    f = abs(site_factor(lattice.target_site + 1, lattice))
    return GaussianPair(neighbor_peak / f, template.t1, template.t2, template.width)
