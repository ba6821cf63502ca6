"""Two-electron co-tunneling through a three-port quantum dot.

Fourth-order resolvent amplitudes, their closed forms, and an exact
time-evolution oracle for the two-particle sector.
"""

from .closedform import path_closed_form, set_sum_closed_form, total_singlet_closed_form
from .errors import ConfigError, CotunnelError, NumericError, PoleError, RegimeError, SectorLeakError
from .model import OPPOSITE, SAME, EnergyConfig, SpinPair, validate_config
from .perturbation import PathLabel, enumerate_orderings, group_into_paths, spin_decompose, total_output

__all__ = [
    "ConfigError",
    "CotunnelError",
    "EnergyConfig",
    "NumericError",
    "OPPOSITE",
    "PathLabel",
    "PoleError",
    "RegimeError",
    "SAME",
    "SectorLeakError",
    "SpinPair",
    "enumerate_orderings",
    "group_into_paths",
    "path_closed_form",
    "set_sum_closed_form",
    "spin_decompose",
    "total_output",
    "total_singlet_closed_form",
    "validate_config",
]

__version__ = "0.1.0"
