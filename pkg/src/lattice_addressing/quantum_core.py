"""Single-site Lambda-system dynamics with a non-Hermitian decay term.

Levels are ordered ``(a, b, q, e_q)``. Frequencies are in units of the
excited-state decay rate of the reference transition and times in its
inverse, so the default ``gamma = 1``.

The excited level ``e_q`` decays with rate ``gamma``; decayed population
is simply lost from the state vector, so the squared norm of an evolved
state is the probability that no photon was scattered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Protocol

import numpy as np
from scipy.integrate import solve_ivp

from lattice_addressing.errors import IntegrationError

LEVELS = ("a", "b", "q", "e_q")
A, B, Q, E = range(4)

NORM_SLACK = 1e-6


class DriveSchedule(Protocol):
    """Anything that returns the pair of peak-normalized drive amplitudes."""

    def sample(self, t: float) -> tuple[float, float]: ...

    def window(self) -> tuple[float, float]: ...


@dataclass(frozen=True, eq=False)
class AtomState:
    """Complex amplitudes of one atom over ``(a, b, q, e_q)``.

    The vector is not renormalized after evolution: lost norm is the
    spontaneous-emission probability.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (4,):
            raise ValueError(f"AtomState needs 4 amplitudes, got {amps.shape[0]}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("AtomState amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_ground(cls, a: complex = 0.0, b: complex = 0.0, q: complex = 0.0,
                    normalize: bool = True) -> "AtomState":
        amps = np.array([a, b, q, 0.0], dtype=complex)
        if normalize:
            n = np.linalg.norm(amps)
            if n == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / n
        return cls(amps)

    @classmethod
    def basis(cls, level: str) -> "AtomState":
        amps = np.zeros(4, dtype=complex)
        amps[LEVELS.index(level)] = 1.0
        return cls(amps)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __getitem__(self, level: str) -> complex:
        return complex(self.amplitudes[LEVELS.index(level)])


@dataclass(frozen=True)
class SiteHamiltonianSpec:
    """Parameters of the rotating-frame Hamiltonian for one lattice site.

    ``site_factor`` multiplies both drive amplitudes; it is the
    Lamb-Dicke-reduced standing-wave amplitude at the site. A separate
    ``site_factor_2`` may be given for the q-coupling field when the two
    standing waves are misregistered.
    """

    pulses: DriveSchedule
    site_factor: float = 1.0
    detuning: float = 100.0
    gamma: float = 1.0
    site_factor_2: float | None = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        for f in (self.site_factor, self.second_factor):
            if abs(f) > 1.0 + 1e-12:
                raise ValueError(f"|site_factor| must be <= 1, got {f}")

    @property
    def second_factor(self) -> float:
        return self.site_factor if self.site_factor_2 is None else self.site_factor_2


@dataclass(frozen=True)
class IntegratorConfig:
    method: Literal["fixed_rk4", "adaptive_rk45"] = "adaptive_rk45"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 0.1
    # only used by fixed_rk4
    step: float = 1e-3
    # adaptive mode gives up after this many right-hand-side calls; the
    # default pulse pair needs ~2e4
    max_evaluations: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("fixed_rk4", "adaptive_rk45"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        for name in ("rel_tol", "abs_tol", "max_step", "step", "max_evaluations"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


def build_hamiltonian(spec: SiteHamiltonianSpec, t: float) -> np.ndarray:
    """Return the 4x4 non-Hermitian Hamiltonian at time ``t``."""
    om1, om2 = spec.pulses.sample(t)
    c1 = spec.site_factor * om1
    c2 = spec.second_factor * om2
    h = np.zeros((4, 4), dtype=complex)
    h[E, E] = spec.detuning - 0.5j * spec.gamma
    h[E, B] = c1
    h[B, E] = np.conj(c1)
    h[E, Q] = c2
    h[Q, E] = np.conj(c2)
    return h


def _rhs_factory(spec: SiteHamiltonianSpec) -> Callable[[float, np.ndarray], np.ndarray]:
    f1, f2 = spec.site_factor, spec.second_factor
    diag = spec.detuning - 0.5j * spec.gamma
    sample = spec.pulses.sample

    # only b, q, e_q couple; written out to avoid a 4x4 matmul per call
    def rhs(t, y):
        om1, om2 = sample(t)
        c1 = f1 * om1
        c2 = f2 * om2
        dy = np.empty_like(y)
        dy[A] = 0.0
        dy[B] = -1j * np.conj(c1) * y[E]
        dy[Q] = -1j * np.conj(c2) * y[E]
        dy[E] = -1j * (c1 * y[B] + c2 * y[Q] + diag * y[E])
        return dy

    return rhs


class _Budget(Exception):
    pass


def _rk4(rhs, y0: np.ndarray, t0: float, t1: float, step: float) -> np.ndarray:
    n = max(1, int(np.ceil((t1 - t0) / step - 1e-9)))
    h = (t1 - t0) / n
    y = y0.copy()
    t = t0
    for i in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (i + 1) * h
    return y


def propagate(y0: np.ndarray, spec: SiteHamiltonianSpec, t_start: float, t_end: float,
              cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Integrate ``i dy/dt = H(t) y`` for a vector or a 4xM block of columns.

    The ``a`` row is copied through untouched since that level is
    uncoupled.
    """
    cfg = cfg or IntegratorConfig()
    if t_end < t_start:
        raise ValueError("t_end must be >= t_start")
    y0 = np.asarray(y0, dtype=complex)
    if y0.shape[0] != 4:
        raise ValueError("state block must have 4 rows")
    if t_end == t_start:
        return y0.copy()

    shape = y0.shape
    rhs = _rhs_factory(spec)
    if cfg.method == "fixed_rk4":
        out = _rk4(rhs, y0, t_start, t_end, cfg.step)
    else:
        calls = 0

        def fun(t, y):
            nonlocal calls
            calls += 1
            if calls > cfg.max_evaluations:
                raise _Budget(t)
            return rhs(t, y.reshape(shape)).reshape(-1)

        try:
            sol = solve_ivp(fun, (t_start, t_end), y0.reshape(-1), method="RK45",
                            rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step)
        except _Budget as exc:
            raise IntegrationError(
                f"step size collapsed near t = {exc.args[0]:.6g}: more than "
                f"{cfg.max_evaluations} evaluations (stiff or ill-conditioned drive)") from None
        if sol.status != 0:
            raise IntegrationError(f"adaptive integration failed: {sol.message}")
        out = sol.y[:, -1].reshape(shape)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("integration produced non-finite amplitudes")
    out[A] = y0[A]
    return out


def evolve(state: AtomState, spec: SiteHamiltonianSpec, t_start: float | None = None,
           t_end: float | None = None, cfg: IntegratorConfig | None = None) -> AtomState:
    """Evolve one site state across ``[t_start, t_end]``.

    When either bound is omitted the pulse schedule's own window is used.
    """
    if state.norm_squared > 1.0 + NORM_SLACK:
        raise ValueError("input state norm exceeds 1")
    w0, w1 = spec.pulses.window()
    t_start = w0 if t_start is None else t_start
    t_end = w1 if t_end is None else t_end
    return AtomState(propagate(state.amplitudes, spec, t_start, t_end, cfg))


def fidelity(state, target) -> float:
    """Overlap ``|<target|psi>|^2`` of a possibly unnormalized state.

    Either argument may be an :class:`AtomState` or a plain amplitude
    vector; a 3-vector target over ``(a, b, q)`` is padded with a zero
    ``e_q`` entry when compared against a 4-level state.
    """
    psi = state.amplitudes if isinstance(state, AtomState) else np.asarray(state, dtype=complex)
    tgt = target.amplitudes if isinstance(target, AtomState) else np.asarray(target, dtype=complex)
    if tgt.shape != psi.shape:
        if tgt.shape == (3,) and psi.shape == (4,):
            tgt = np.append(tgt, 0.0)
        elif tgt.shape == (4,) and psi.shape == (3,):
            if abs(tgt[E]) > 0:
                raise ValueError("target has e_q weight but state is ground-only")
            tgt = tgt[:3]
        else:
            raise ValueError(f"shape mismatch: state {psi.shape}, target {tgt.shape}")
    if abs(np.vdot(tgt, tgt).real - 1.0) > 1e-9:
        raise ValueError("target state must be normalized")
    return float(abs(np.vdot(tgt, psi)) ** 2)


def survival_probability(state: AtomState) -> float:
    return state.norm_squared
