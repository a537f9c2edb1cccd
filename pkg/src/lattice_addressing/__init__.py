"""Simulation of standing-wave single-atom addressing in optical lattices."""

from lattice_addressing.errors import (
    AddressingError,
    ConfigError,
    GeometryError,
    IntegrationError,
    ThresholdNotReached,
)
from lattice_addressing.geometry import LatticeConfig, PrecisionBudget, StandingWaveConfig
from lattice_addressing.pulses import GaussianPair, ManipulationBeam
from lattice_addressing.quantum_core import AtomState, IntegratorConfig, SiteHamiltonianSpec
from lattice_addressing.register import LatticeRegister, OperationMode, QuenchPhysics
from lattice_addressing.stirap import FidelityCurve, TransferResult

__version__ = "0.1.0"

__all__ = [
    "AddressingError", "ConfigError", "GeometryError", "IntegrationError", "ThresholdNotReached",
    "LatticeConfig", "PrecisionBudget", "StandingWaveConfig", "GaussianPair", "ManipulationBeam",
    "AtomState", "IntegratorConfig", "SiteHamiltonianSpec", "LatticeRegister", "OperationMode",
    "QuenchPhysics", "FidelityCurve", "TransferResult",
]
