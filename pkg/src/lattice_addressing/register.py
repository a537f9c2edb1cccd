"""Multi-site register built on the quench operation.

Each site holds one atom with ground levels ``(a, b, q)``; the register
state is a dense tensor of shape ``(3,) * N``. Every addressed operation
is wrapped in a quench / inverse-quench pair so that only the addressed
sublattice keeps population in ``b`` while the focused beam is on.

Operations come in two modes. ``ideal`` applies closed-form maps;
``simulated`` applies per-site quench maps obtained by integrating the
Lambda-system dynamics (lossy, slightly imperfect). The entangling
collision step and the collective Hadamard are ideal in both modes.

Operations return a new register and leave their input untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Sequence

import numpy as np

from lattice_addressing.errors import GeometryError
from lattice_addressing.geometry import LatticeConfig, StandingWaveConfig
from lattice_addressing.pulses import GaussianPair, ManipulationBeam, beam_envelope
from lattice_addressing.quantum_core import IntegratorConfig
from lattice_addressing.stirap import (
    DEFAULT_DETUNING,
    REFERENCE_TRANSFER_PHASE,
    pulses_for_neighbor_peak,
    quench_site_map,
)

MAX_SITES = 12
LABELS = "abq"
A, B, Q = 0, 1, 2

NAMED_STATES = {
    "a": (1, 0, 0),
    "b": (0, 1, 0),
    "q": (0, 0, 1),
    "+": (1 / math.sqrt(2), 1 / math.sqrt(2), 0),
    "-": (1 / math.sqrt(2), -1 / math.sqrt(2), 0),
}


class OperationMode(str, Enum):
    IDEAL = "ideal"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class QuenchPhysics:
    """Physical parameters shared by register operations.

    The standing-wave peak is chosen per operation so that site ``k+1``
    sees ``neighbor_peak``; ``pulse_timing`` only supplies the Gaussian
    centres and width.
    """

    neighbor_peak: float = 20.0
    pulse_timing: GaussianPair = field(default_factory=GaussianPair)
    detuning: float = DEFAULT_DETUNING
    gamma: float = 1.0
    lamb_dicke: float = 0.0
    integrator: IntegratorConfig | None = None
    waves: tuple[StandingWaveConfig, StandingWaveConfig] | None = None
    technique: str = "stirap"
    flip_detuning: bool = True
    transfer_phase: float = REFERENCE_TRANSFER_PHASE
    beam_waist: float | None = None


DEFAULT_PHYSICS = QuenchPhysics()


@dataclass(eq=False)
class LatticeRegister:
    amplitudes: np.ndarray
    occupancy: np.ndarray
    norm_deficit: float = 0.0
    history: list[dict] = field(default_factory=list)

    @property
    def site_count(self) -> int:
        return self.amplitudes.ndim

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "LatticeRegister":
        return LatticeRegister(self.amplitudes.copy(), self.occupancy.copy(),
                               self.norm_deficit, list(self.history))

    def vector(self) -> np.ndarray:
        """Flat amplitude vector; site 0 is the most significant digit."""
        return self.amplitudes.reshape(-1)

    def conditional_state(self) -> np.ndarray:
        """Amplitudes renormalized to unit norm (the no-loss conditional state)."""
        n = math.sqrt(self.norm_squared)
        if n == 0:
            raise ValueError("register has no remaining norm")
        return self.amplitudes / n

    def site_populations(self) -> np.ndarray:
        """``(N, 3)`` array of level populations, unnormalized."""
        p = np.abs(self.amplitudes) ** 2
        out = np.empty((self.site_count, 3))
        for s in range(self.site_count):
            axes = tuple(i for i in range(self.site_count) if i != s)
            out[s] = p.sum(axis=axes) if axes else p
        return out

    def reduced_density_matrix(self, site: int) -> np.ndarray:
        psi = np.moveaxis(self.amplitudes, site, 0).reshape(3, -1)
        return psi @ psi.conj().T

    def to_dict(self, threshold: float = 1e-9) -> dict:
        amps = []
        flat = self.vector()
        for idx in np.flatnonzero(np.abs(flat) > threshold):
            digits = np.unravel_index(idx, self.amplitudes.shape)
            label = "".join(LABELS[d] for d in digits)
            amps.append([label, float(flat[idx].real), float(flat[idx].imag)])
        return {
            "site_count": self.site_count,
            "amplitudes": amps,
            "occupancy": [bool(o) for o in self.occupancy],
            "norm_deficit": self.norm_deficit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeRegister":
        n = int(data["site_count"])
        amps = np.zeros((3,) * n, dtype=complex)
        for label, re, im in data["amplitudes"]:
            amps[tuple(LABELS.index(c) for c in label)] = complex(re, im)
        return cls(amps, np.array(data["occupancy"], dtype=bool), float(data["norm_deficit"]))


def _site_vector(spec) -> np.ndarray:
    if isinstance(spec, str):
        try:
            v = np.array(NAMED_STATES[spec], dtype=complex)
        except KeyError:
            raise ValueError(f"unknown site state {spec!r}; use one of {sorted(NAMED_STATES)}")
    else:
        v = np.asarray(spec, dtype=complex).reshape(-1)
        if v.shape == (2,):
            v = np.append(v, 0.0)
        if v.shape != (3,):
            raise ValueError("a site state needs 2 or 3 amplitudes")
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("site state must be nonzero")
    return v / n


def new_register(site_count: int, initial_pattern: Sequence | str | None = None,
                 occupancy: Sequence[bool] | None = None) -> LatticeRegister:
    """Product-state register.

    ``initial_pattern`` is one entry per site: a label from
    ``a, b, q, +, -`` or a 2/3-vector of amplitudes. A single label applies
    to every site. Unoccupied sites carry the fixed placeholder ``a``.
    """
    if not 1 <= site_count <= MAX_SITES:
        raise ValueError(f"site_count must be in [1, {MAX_SITES}], got {site_count}")
    if initial_pattern is None:
        initial_pattern = "a"
    if isinstance(initial_pattern, str):
        initial_pattern = [initial_pattern] * site_count
    if len(initial_pattern) != site_count:
        raise ValueError(f"pattern has {len(initial_pattern)} entries for {site_count} sites")
    occ = np.ones(site_count, dtype=bool) if occupancy is None else np.array(occupancy, dtype=bool)
    if occ.shape != (site_count,):
        raise ValueError("occupancy length must equal site_count")
    state = np.ones((), dtype=complex)
    for s, spec in enumerate(initial_pattern):
        v = _site_vector(spec) if occ[s] else np.array([1, 0, 0], dtype=complex)
        state = np.multiply.outer(state, v)
    return LatticeRegister(state, occ)


# --- local linear algebra -------------------------------------------------

def apply_local(psi: np.ndarray, site: int, op: np.ndarray) -> np.ndarray:
    out = np.tensordot(op, psi, axes=([1], [site]))
    return np.moveaxis(out, 0, site)


def _lattice(reg: LatticeRegister, k: int, reach: int, physics: QuenchPhysics) -> LatticeConfig:
    return LatticeConfig(reg.site_count, k, reach, physics.lamb_dicke)


def ideal_quench_operator(transfer_phase: float = REFERENCE_TRANSFER_PHASE) -> np.ndarray:
    """``|a><a| + e^{i chi}|q><b| + e^{-i chi}|b><q|``; its own inverse."""
    u = np.zeros((3, 3), dtype=complex)
    u[A, A] = 1.0
    u[Q, B] = np.exp(1j * transfer_phase)
    u[B, Q] = np.exp(-1j * transfer_phase)
    return u


def _quench(reg: LatticeRegister, k: int, reach: int, mode, physics: QuenchPhysics | None,
            inverse: bool) -> LatticeRegister:
    physics = physics or DEFAULT_PHYSICS
    mode = OperationMode(mode)
    lattice = _lattice(reg, k, reach, physics)
    out = reg.copy()
    psi = out.amplitudes
    before = out.norm_squared
    leaks = {}
    if mode is OperationMode.IDEAL:
        u = ideal_quench_operator(physics.transfer_phase)
        for s in range(reg.site_count):
            if reg.occupancy[s] and not lattice.is_node(s):
                psi = apply_local(psi, s, u)
    else:
        pulses = pulses_for_neighbor_peak(lattice, physics.neighbor_peak, physics.pulse_timing)
        for s in range(reg.site_count):
            if not reg.occupancy[s]:
                continue
            m = quench_site_map(s, lattice, pulses, physics.waves, physics.detuning,
                                physics.gamma, physics.integrator, inverse,
                                physics.technique, physics.flip_detuning)
            if m.is_identity:
                continue
            psi = apply_local(psi, s, m.matrix)
            leaks[s] = m.leakage
    out.amplitudes = psi
    lost = max(0.0, before - out.norm_squared)
    out.norm_deficit += lost
    out.history.append({"op": "inverse_quench" if inverse else "quench", "k": k, "L": reach,
                        "mode": mode.value, "lost": lost})
    return out


def apply_quench(reg: LatticeRegister, k: int, reach: int, mode="ideal",
                 physics: QuenchPhysics | None = None) -> LatticeRegister:
    """Move ``b`` into ``q`` on every occupied site outside ``S_L^(k)``."""
    return _quench(reg, k, reach, mode, physics, inverse=False)


def apply_inverse_quench(reg: LatticeRegister, k: int, reach: int, mode="ideal",
                         physics: QuenchPhysics | None = None) -> LatticeRegister:
    return _quench(reg, k, reach, mode, physics, inverse=True)


HADAMARD = np.array([[1, 1, 0], [1, -1, 0], [0, 0, math.sqrt(2)]], dtype=complex) / math.sqrt(2)


def collective_hadamard(reg: LatticeRegister) -> LatticeRegister:
    """Hadamard on the qubit subspace of every occupied site; ``q`` is untouched."""
    out = reg.copy()
    psi = out.amplitudes
    for s in range(reg.site_count):
        if reg.occupancy[s]:
            psi = apply_local(psi, s, HADAMARD)
    out.amplitudes = psi
    out.history.append({"op": "hadamard"})
    return out


def _focused_pulse(reg: LatticeRegister, k: int, reach: int, angle: float,
                   physics: QuenchPhysics) -> tuple[LatticeRegister, dict]:
    # Light shift on b, weighted by the beam envelope; site k also gets the
    # reference-frame phase that makes its action exactly R_z(angle).
    beam = ManipulationBeam(rabi=0.0, detuning=1.0, duration=0.0, centre=k, cutoff=reach,
                            waist=physics.beam_waist)
    out = reg.copy()
    psi = out.amplitudes
    pops = reg.site_populations()
    crosstalk = {}
    for s in range(reg.site_count):
        env = beam_envelope(beam, s)
        if env == 0.0 or not reg.occupancy[s]:
            continue
        if s == k:
            op = np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle), 1.0])
        else:
            op = np.diag([1.0, np.exp(1j * angle * env), 1.0])
            if pops[s, B] > 0:
                crosstalk[s] = float(pops[s, B])
        psi = apply_local(psi, s, op)
    out.amplitudes = psi
    return out, crosstalk


def rotate_z(reg: LatticeRegister, k: int, reach: int, angle: float, mode="ideal",
             physics: QuenchPhysics | None = None) -> LatticeRegister:
    """``R_z(angle) = exp(-i angle sigma_z / 2)`` on site ``k``, via quench, pulse, inverse quench.

    ``sigma_z = |a><a| - |b><b|``. Neighbours within the beam only pick up
    phase on whatever ``b`` population the quench left behind; that
    population is logged as ``neighbor_b_population``.
    """
    physics = physics or DEFAULT_PHYSICS
    r = apply_quench(reg, k, reach, mode, physics)
    r, crosstalk = _focused_pulse(r, k, reach, angle, physics)
    r = apply_inverse_quench(r, k, reach, mode, physics)
    r.history.append({"op": "rotate_z", "k": k, "angle": angle,
                      "neighbor_b_population": crosstalk})
    return r


def rotate_x(reg: LatticeRegister, k: int, reach: int, angle: float, mode="ideal",
             physics: QuenchPhysics | None = None) -> LatticeRegister:
    r = collective_hadamard(reg)
    r = rotate_z(r, k, reach, angle, mode, physics)
    return collective_hadamard(r)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _project(psi: np.ndarray, site: int, levels: Sequence[int]) -> np.ndarray:
    mask = np.zeros(3)
    mask[list(levels)] = 1.0
    return apply_local(psi, site, np.diag(mask).astype(complex))


def _rescale(psi: np.ndarray, target_norm_sq: float) -> np.ndarray:
    n = float(np.vdot(psi, psi).real)
    if n == 0:
        return psi
    return psi * math.sqrt(target_norm_sq / n)


def measure_site(reg: LatticeRegister, k: int, reach: int, seed=None, mode="ideal",
                 physics: QuenchPhysics | None = None) -> tuple[str, LatticeRegister]:
    """Fluorescence readout of site ``k`` between a quench pair.

    Returns ``"bright"`` (site ``k`` found in ``b``) or ``"dark"`` and the
    collapsed register, rescaled so its norm still balances
    ``norm_deficit``.
    """
    physics = physics or DEFAULT_PHYSICS
    if not reg.occupancy[k]:
        raise ValueError(f"site {k} is empty")
    rng = _rng(seed)
    r = apply_quench(reg, k, reach, mode, physics)
    total = r.norm_squared
    p_bright = float(r.site_populations()[k, B] / total) if total > 0 else 0.0
    bright = rng.random() < p_bright
    levels = (B,) if bright else (A, Q)
    r.amplitudes = _rescale(_project(r.amplitudes, k, levels), total)
    r.history.append({"op": "measure", "k": k, "p_bright": p_bright,
                      "outcome": "bright" if bright else "dark"})
    r = apply_inverse_quench(r, k, reach, mode, physics)
    return ("bright" if bright else "dark"), r


def _pair_phase(n: int, s: int) -> np.ndarray:
    # -1 where site s is in b and site s+1 in q
    p = np.ones((3, 3))
    p[B, Q] = -1.0
    shape = [1] * n
    shape[s] = shape[s + 1] = 3
    return p.reshape(shape)


def collision_phase(reg: LatticeRegister) -> LatticeRegister:
    """Ideal state-dependent collision: phase pi on every ``|b>_s |q>_{s+1}``."""
    out = reg.copy()
    psi = out.amplitudes
    n = reg.site_count
    for s in range(n - 1):
        if reg.occupancy[s] and reg.occupancy[s + 1]:
            psi = psi * _pair_phase(n, s)
    out.amplitudes = psi
    return out


def collective_cphase(reg: LatticeRegister, k: int, reach: int, mode="ideal",
                      physics: QuenchPhysics | None = None) -> LatticeRegister:
    """``C_L^(k)``: controlled-``sigma_z`` from each ``s`` in ``S_L^(k)`` onto ``s+1``."""
    physics = physics or DEFAULT_PHYSICS
    lattice = _lattice(reg, k, reach, physics)
    for s in lattice.sublattice():
        if s + 1 >= reg.site_count:
            raise GeometryError(f"sublattice site {s} has no right neighbour in a "
                                f"{reg.site_count}-site register")
    r = apply_quench(reg, k, reach, mode, physics)
    r = collision_phase(r)
    r = apply_inverse_quench(r, k, reach, mode, physics)
    r.history.append({"op": "cphase", "k": k, "L": reach})
    return r


def controlled_rotation(reg: LatticeRegister, k: int, reach: int, angle: float, mode="ideal",
                        physics: QuenchPhysics | None = None) -> LatticeRegister:
    """Controlled ``R_x(angle)`` from ``k`` onto ``k+1``, times ``R_x(-angle/2)`` on ``k+1``."""
    if k + 1 >= reg.site_count:
        raise GeometryError("controlled rotation needs site k+1 inside the register")
    r = collective_cphase(reg, k, reach, mode, physics)
    r = rotate_x(r, k + 1, reach, -angle / 2, mode, physics)
    return collective_cphase(r, k, reach, mode, physics)


def pattern_load(site_count: int, k: int, reach: int, mode="ideal",
                 physics: QuenchPhysics | None = None) -> list[int]:
    """Sites still holding an atom after quenching an all-``b`` lattice and
    releasing the ``q`` potential.

    Sites are independent here, so any lattice length works.
    """
    probs = pattern_load_probabilities(site_count, k, reach, mode, physics)
    return [s for s, p in enumerate(probs) if p >= 0.5]


def pattern_load_probabilities(site_count: int, k: int, reach: int, mode="ideal",
                               physics: QuenchPhysics | None = None) -> list[float]:
    physics = physics or DEFAULT_PHYSICS
    mode = OperationMode(mode)
    lattice = LatticeConfig(site_count, k, reach, physics.lamb_dicke)
    if mode is OperationMode.IDEAL:
        u = ideal_quench_operator(physics.transfer_phase)
        return [1.0 if lattice.is_node(s) else float(abs(u[B, B]) ** 2)
                for s in range(site_count)]
    pulses = pulses_for_neighbor_peak(lattice, physics.neighbor_peak, physics.pulse_timing)
    out = []
    for s in range(site_count):
        m = quench_site_map(s, lattice, pulses, physics.waves, physics.detuning, physics.gamma,
                            physics.integrator, False, physics.technique, physics.flip_detuning)
        out.append(float(abs(m.matrix[B, B]) ** 2))
    return out


def load_pattern_register(site_count: int, k: int, reach: int) -> LatticeRegister:
    """Register after ideal patterned loading: atoms in ``b`` on ``S_L^(k)`` only."""
    reg = new_register(site_count, "b")
    reg = apply_quench(reg, k, reach, "ideal")
    pops = reg.site_populations()
    occ = pops[:, Q] < 0.5
    return new_register(site_count, "b", occupancy=occ)


def optical_pump(reg: LatticeRegister, seed=None, mode: str = "deterministic",
                 pump_to: str = "a") -> LatticeRegister:
    """Clear residual ``q`` population with a global pumping field.

    ``deterministic`` drops the ``q`` amplitudes and books their weight in
    ``norm_deficit`` (also logged as ``leakage``). ``trajectory`` samples,
    site by site, whether a pumping event happened; if so the site is reset
    incoherently into ``pump_to``.
    """
    if pump_to not in ("a", "b"):
        raise ValueError("pump_to must be 'a' or 'b'")
    dest = LABELS.index(pump_to)
    out = reg.copy()
    psi = out.amplitudes
    n = reg.site_count
    if mode == "deterministic":
        before = out.norm_squared
        for s in range(n):
            if reg.occupancy[s]:
                psi = _project(psi, s, (A, B))
        out.amplitudes = psi
        leak = max(0.0, before - out.norm_squared)
        out.norm_deficit += leak
        out.history.append({"op": "pump", "mode": mode, "leakage": leak})
        return out
    if mode != "trajectory":
        raise ValueError(f"unknown pump mode {mode!r}")
    rng = _rng(seed)
    pumped = []
    for s in range(n):
        if not reg.occupancy[s]:
            continue
        total = float(np.vdot(psi, psi).real)
        if total == 0:
            break
        p_q = float(np.sum(np.abs(np.take(psi, Q, axis=s)) ** 2) / total)
        if p_q == 0:
            continue
        if rng.random() < p_q:
            # incoherent reset: keep the rest of the register conditioned on q
            move = np.zeros((3, 3), dtype=complex)
            move[dest, Q] = 1.0
            psi = _rescale(apply_local(psi, s, move), total)
            pumped.append(s)
        else:
            psi = _rescale(_project(psi, s, (A, B)), total)
    out.amplitudes = psi
    out.history.append({"op": "pump", "mode": mode, "pumped_sites": pumped})
    return out


# --- arbitrary single-qubit rotations --------------------------------------

def rz_matrix(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def rx_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def euler_zxz(u: np.ndarray) -> tuple[float, float, float, float]:
    """Angles with ``u = e^{i phase} R_z(alpha) R_x(beta) R_z(gamma)``.

    Returns ``(alpha, beta, gamma, phase)``.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not np.allclose(u.conj().T @ u, np.eye(2), atol=1e-9):
        raise ValueError("expected a 2x2 unitary")
    det = np.linalg.det(u)
    phase = 0.5 * np.angle(det)
    v = u * np.exp(-1j * phase)
    beta = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[0, 0]) < 1e-12:
        total, diff = 0.0, 2 * (np.angle(v[1, 0]) + math.pi / 2)
    elif abs(v[1, 0]) < 1e-12:
        total, diff = 2 * np.angle(v[1, 1]), 0.0
    else:
        total = 2 * np.angle(v[1, 1])
        diff = 2 * (np.angle(v[1, 0]) + math.pi / 2)
    alpha = 0.5 * (total + diff)
    gamma = 0.5 * (total - diff)
    return float(alpha), float(beta), float(gamma), float(phase)


def _is_zero_angle(x: float, tol: float = 1e-12) -> bool:
    r = math.remainder(x, 4 * math.pi)
    return abs(r) < tol


def arbitrary_rotation(reg: LatticeRegister, k: int, reach: int, unitary: np.ndarray,
                       mode="ideal", physics: QuenchPhysics | None = None) -> LatticeRegister:
    """Apply any single-qubit unitary to site ``k`` (up to global phase).

    Uses the Z-X-Z decomposition; each non-trivial stage costs one quench
    pair, so at most three pairs are used. The count is logged as
    ``quench_pairs``.
    """
    alpha, beta, gamma, _ = euler_zxz(unitary)
    r = reg
    pairs = 0
    for axis, angle in (("z", gamma), ("x", beta), ("z", alpha)):
        if _is_zero_angle(angle):
            continue
        r = (rotate_z if axis == "z" else rotate_x)(r, k, reach, angle, mode, physics)
        pairs += 1
    if r is reg:
        r = reg.copy()
    r.history.append({"op": "arbitrary_rotation", "k": k, "quench_pairs": pairs})
    return r


def entanglement_entropy(reg: LatticeRegister, sites: Sequence[int]) -> float:
    """Von Neumann entropy (nats) of ``sites`` against the rest of the register."""
    n = reg.site_count
    rest = [s for s in range(n) if s not in sites]
    psi = np.transpose(reg.conditional_state(), list(sites) + rest)
    mat = psi.reshape(3 ** len(sites), -1)
    sv = np.linalg.svd(mat, compute_uv=False) ** 2
    sv = sv[sv > 1e-15]
    return float(-np.sum(sv * np.log(sv)))


def schmidt_rank(reg: LatticeRegister, cut: int, tol: float = 1e-10) -> int:
    mat = reg.amplitudes.reshape(3 ** cut, -1)
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > tol * max(sv.max(), 1e-300)))


def basis_labels(site_count: int) -> list[str]:
    return ["".join(p) for p in product(LABELS, repeat=site_count)]
