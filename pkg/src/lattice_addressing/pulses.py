"""Drive schedules: the Gaussian STIRAP pair, square Raman pulses and the
focused manipulation beam."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from lattice_addressing.geometry import LatticeConfig, site_factor

TRUNCATION_WIDTHS = 4.0


@dataclass(frozen=True)
class GaussianPair:
    """Two Gaussian pulses ``Omega_i(t) = (-1)^i Omega_0 exp(-(t - t_i)^2 / width^2)``.

    Pulse 1 drives ``b <-> e_q`` and pulse 2 drives ``q <-> e_q``. The
    default timing is counterintuitive: pulse 2 peaks first, six decay
    times ahead of pulse 1. Each pulse is exactly zero beyond four widths
    from its centre.
    """

    omega0: float = 20.0
    t1: float = 6.0
    t2: float = 0.0
    width: float = 5.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"width must be > 0, got {self.width}")
        if self.omega0 < 0:
            raise ValueError(f"omega0 must be >= 0, got {self.omega0}")

    @property
    def counterintuitive(self) -> bool:
        return self.t2 < self.t1

    def _envelope(self, t: float, centre: float) -> float:
        dt = t - centre
        if abs(dt) > TRUNCATION_WIDTHS * self.width:
            return 0.0
        return math.exp(-(dt * dt) / (self.width * self.width))

    def sample(self, t: float) -> tuple[float, float]:
        return (-self.omega0 * self._envelope(t, self.t1),
                self.omega0 * self._envelope(t, self.t2))

    def window(self) -> tuple[float, float]:
        pad = TRUNCATION_WIDTHS * self.width
        return min(self.t1, self.t2) - pad, max(self.t1, self.t2) + pad

    def reversed(self) -> "GaussianPair":
        """Mirror the pulse order: the b-coupling pulse now comes first."""
        return replace(self, t1=self.t2, t2=self.t1)

    def scaled(self, factor: float) -> "GaussianPair":
        return replace(self, omega0=self.omega0 * factor)


def sample_pair(pulses: GaussianPair, t: float) -> tuple[float, float]:
    return pulses.sample(t)


@dataclass(frozen=True)
class SquarePair:
    """Constant-amplitude Raman pulse pair on ``[start, start + duration]``.

    Signs follow the same ``(-1)^i`` convention as :class:`GaussianPair`.
    """

    omega0: float
    duration: float
    start: float = 0.0

    def sample(self, t: float) -> tuple[float, float]:
        if self.start <= t <= self.start + self.duration:
            return -self.omega0, self.omega0
        return 0.0, 0.0

    def window(self) -> tuple[float, float]:
        return self.start, self.start + self.duration


def raman_effective_rabi(omega1: float, omega2: float, detuning: float) -> float:
    if detuning == 0:
        raise ValueError("Raman coupling needs a nonzero detuning")
    return omega1 * omega2 / detuning


def raman_pi_duration(omega1: float, omega2: float, detuning: float) -> float:
    """Square-pulse length that moves ``b`` fully into ``q``.

    The Raman coupling ``omega1 * omega2 / detuning`` enters the effective
    Hamiltonian as an off-diagonal matrix element, so population is fully
    transferred after a quarter period of ``2 * coupling``.
    """
    coupling = abs(raman_effective_rabi(omega1, omega2, detuning))
    if coupling == 0:
        raise ValueError("zero Raman coupling")
    return math.pi / (2.0 * coupling)


def raman_pi_pulse(lattice: LatticeConfig, omega0: float, detuning: float) -> SquarePair:
    """Raman pi-pulse that quenches every non-node site at once (``L <= 2``)."""
    if not raman_uniformity_check(lattice):
        raise ValueError(f"Raman shortcut needs uniform couplings; L = {lattice.reach} > 2")
    f = site_factor(lattice.target_site + 1, lattice)
    w = f * omega0
    return SquarePair(omega0, raman_pi_duration(w, w, detuning))


def raman_uniformity_check(lattice: LatticeConfig, tol: float = 1e-12) -> bool:
    """True when every non-node site sees the same Raman coupling."""
    k = lattice.target_site
    values = [site_factor(k + m, lattice) ** 2 for m in range(1, lattice.node_spacing)]
    return max(values) - min(values) <= tol


@dataclass(frozen=True)
class ManipulationBeam:
    """Focused, far-detuned beam on ``b <-> e_m`` centred on one site.

    ``rabi``, ``detuning`` and ``decay`` share a unit (that of ``gamma_m``).
    Only sites within ``cutoff`` of ``centre`` are illuminated; inside,
    the intensity envelope is Gaussian with waist ``waist`` (units of
    ``d_l``), defaulting to ``cutoff / 2``.
    """

    rabi: float
    detuning: float
    duration: float
    centre: int = 0
    cutoff: int = 1
    waist: float | None = None
    decay: float = 1.0

    @property
    def effective_waist(self) -> float:
        return self.cutoff / 2.0 if self.waist is None else self.waist

    @property
    def dispersive(self) -> bool:
        """Whether ``detuning >> |rabi| >> decay`` holds (factor 10 each)."""
        return abs(self.detuning) >= 10 * abs(self.rabi) and abs(self.rabi) >= 10 * self.decay


def stark_rotation_angle(beam: ManipulationBeam) -> float:
    if beam.detuning == 0:
        raise ValueError("AC Stark rotation needs a nonzero detuning")
    return abs(beam.rabi) ** 2 * beam.duration / beam.detuning


def beam_envelope(beam: ManipulationBeam, s: int) -> float:
    r = abs(s - beam.centre)
    if r > beam.cutoff:
        return 0.0
    w = beam.effective_waist
    return math.exp(-(r * r) / (w * w))
