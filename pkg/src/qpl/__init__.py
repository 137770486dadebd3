"""Constructive Anderson localization for quasiperiodic Schrödinger operators.

(Hu)_n = u_{n+1} + u_{n-1} + lambda v(theta + n alpha) u_n with an even
cosine-type potential v and Diophantine frequency alpha.
"""

from .arithmetic import DiophantineParams, Frequency, expand_continued_fraction, phase_dc_check
from .eigen import LocalizedEigenpair, energy_for_phase, limit_critical_point
from .errors import ConfigError, QPLError
from .potential import PotentialSpec, validate_cosine_type

__all__ = [
    "ConfigError",
    "DiophantineParams",
    "Frequency",
    "LocalizedEigenpair",
    "PotentialSpec",
    "QPLError",
    "energy_for_phase",
    "expand_continued_fraction",
    "limit_critical_point",
    "phase_dc_check",
    "validate_cosine_type",
]

__version__ = "0.1.0"
