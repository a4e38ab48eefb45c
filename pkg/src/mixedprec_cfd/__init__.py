"""Mixed-precision finite-difference solver for compressible flow.

Explicit fourth-order central differences on a periodic structured grid,
split convective forms, a low-storage three-stage Runge-Kutta scheme and
per-class storage precision (binary64, binary32 or emulated binary16) for
the conservatives, Runge-Kutta temporaries, residuals and work arrays.
"""
from .errors import ComparisonError, ConfigurationError, HaloStaleError, RegistryError
from .integrate import StepConfig, WILLIAMSON3, advance
from .mesh import FieldRegistry, GridSpec, comm_volume_report, memory_report
from .physics import FlowParams, ResidualStrategy, allocate_state, residual, split_preset
from .precision import (EmulationMode, PrecisionConfig, PrecisionKind, decode_b16, encode_b16,
                        resolve_preset)
from .tgv import compare_series, diagnostics, init_tgv

__version__ = "0.1.0"

__all__ = [
    "ComparisonError",
    "ConfigurationError",
    "HaloStaleError",
    "RegistryError",
    "StepConfig",
    "WILLIAMSON3",
    "advance",
    "FieldRegistry",
    "GridSpec",
    "comm_volume_report",
    "memory_report",
    "FlowParams",
    "ResidualStrategy",
    "allocate_state",
    "residual",
    "split_preset",
    "EmulationMode",
    "PrecisionConfig",
    "PrecisionKind",
    "decode_b16",
    "encode_b16",
    "resolve_preset",
    "compare_series",
    "diagnostics",
    "init_tgv",
]
