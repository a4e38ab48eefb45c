"""Precision kinds, binary16 codec, rounding and precision-class presets.

Binary16 values are handled through binary64 carriers: every binary16
value is exactly representable in binary64, so ``decode_b16`` is an exact
widening and ``encode_b16`` is the only place where rounding happens.
Rounding is always round-to-nearest, ties to even.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "PrecisionKind",
    "EmulationMode",
    "PrecisionConfig",
    "ARRAY_CLASSES",
    "PRESET_NAMES",
    "encode_b16",
    "decode_b16",
    "round_to",
    "resolve_preset",
    "emulated_op",
    "parse_kind",
]


class PrecisionKind(enum.IntEnum):
    """Storage/arithmetic precision; the value is the width in bits."""

    B16 = 16
    B32 = 32
    B64 = 64

    @property
    def byte_width(self) -> int:
        return self.value // 8

    @property
    def dtype(self) -> np.dtype:
        return np.dtype({16: np.float16, 32: np.float32, 64: np.float64}[self.value])


class EmulationMode(enum.Enum):
    """Where reduced-precision rounding happens inside a kernel.

    ``STRICT`` rounds every arithmetic result to the kernel's compute
    precision.  ``STORE_ROUND`` carries arithmetic in at least binary32 and
    rounds only when a value is stored into a field.
    """

    STRICT = "strict"
    STORE_ROUND = "storeround"


ARRAY_CLASSES = ("q_vector", "rk_arrays", "residuals", "wk_arrays")

_KIND_ALIASES = {
    "B16": PrecisionKind.B16, "HALF": PrecisionKind.B16, "HP": PrecisionKind.B16,
    "B32": PrecisionKind.B32, "SINGLE": PrecisionKind.B32, "SP": PrecisionKind.B32,
    "FLOAT": PrecisionKind.B32,
    "B64": PrecisionKind.B64, "DOUBLE": PrecisionKind.B64, "DP": PrecisionKind.B64,
}


def parse_kind(text: str) -> PrecisionKind:
    try:
        return _KIND_ALIASES[text.strip().upper()]
    except KeyError:
        raise ConfigurationError(f"unknown precision kind {text!r}") from None


@dataclass(frozen=True)
class PrecisionConfig:
    q_vector: PrecisionKind = PrecisionKind.B64
    rk_arrays: PrecisionKind = PrecisionKind.B64
    residuals: PrecisionKind = PrecisionKind.B64
    wk_arrays: PrecisionKind = PrecisionKind.B64
    custom_overrides: Mapping[str, PrecisionKind] = field(default_factory=dict)
    emulation: EmulationMode = EmulationMode.STRICT

    def kind_for(self, array_class: str, name: str | None = None) -> PrecisionKind:
        """Storage precision of a field; a custom override wins over its class."""
        if name is not None and name in self.custom_overrides:
            return self.custom_overrides[name]
        if array_class == "diagnostics":
            return PrecisionKind.B64
        if array_class not in ARRAY_CLASSES:
            raise ConfigurationError(f"unknown array class {array_class!r}")
        return getattr(self, array_class)

    def with_class(self, array_class: str, kind: PrecisionKind) -> "PrecisionConfig":
        if array_class not in ARRAY_CLASSES:
            raise ConfigurationError(f"unknown array class {array_class!r}")
        return replace(self, **{array_class: kind})

    def with_override(self, name: str, kind: PrecisionKind) -> "PrecisionConfig":
        overrides = dict(self.custom_overrides)
        overrides[name] = kind
        return replace(self, custom_overrides=overrides)

    def classes(self) -> dict:
        return {c: getattr(self, c) for c in ARRAY_CLASSES}


_B16, _B32, _B64 = PrecisionKind.B16, PrecisionKind.B32, PrecisionKind.B64

# (q_vector, rk_arrays, residuals, wk_arrays)
_PRESETS = {
    "DP": (_B64, _B64, _B64, _B64),
    "SP": (_B32, _B32, _B32, _B32),
    "HP": (_B16, _B16, _B16, _B16),
    "SPDP": (_B64, _B64, _B32, _B32),
    "SPDP-wk": (_B64, _B64, _B64, _B32),
    "SPDP-res": (_B64, _B64, _B32, _B64),
    "SPDP-res+wk": (_B64, _B64, _B32, _B32),
    "HPSP": (_B32, _B32, _B16, _B16),
    "HPSP-wk": (_B32, _B32, _B32, _B16),
    "HPSP-res": (_B32, _B32, _B16, _B32),
    "HPSP-res+wk": (_B32, _B32, _B16, _B16),
}

PRESET_NAMES = tuple(_PRESETS)


def resolve_preset(name: str, emulation: EmulationMode = EmulationMode.STRICT) -> PrecisionConfig:
    """Map a preset name such as ``"SPDP"`` or ``"HPSP-wk"`` to a config."""
    try:
        q, rk, res, wk = _PRESETS[name.strip()]
    except KeyError:
        raise ConfigurationError(
            f"unknown precision preset {name!r}; expected one of {', '.join(PRESET_NAMES)}",
            field="precision",
        ) from None
    return PrecisionConfig(q, rk, res, wk, {}, emulation)


def _double_bits(value: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", value))[0]


def encode_b16(value: float) -> int:
    """Return the binary16 bit pattern nearest to ``value`` (ties to even)."""
    bits = _double_bits(float(value))
    sign = (bits >> 48) & 0x8000
    biased = (bits >> 52) & 0x7FF
    frac = bits & ((1 << 52) - 1)
    if biased == 0x7FF:
        return sign | (0x7E00 if frac else 0x7C00)
    if biased == 0:
        # binary64 subnormals are far below half the smallest binary16 subnormal
        return sign
    mant = frac | (1 << 52)
    exp = biased - 1023                 # value = mant * 2**(exp - 52)
    quantum = -24 if exp < -14 else exp - 10
    shift = quantum - (exp - 52)
    q = mant >> shift
    rem = mant & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    if exp < -14:
        # q == 1024 lands exactly on the smallest normal pattern 0x0400
        return sign | q
    if q == 2048:
        exp += 1
        q = 1024
    if exp > 15:
        return sign | 0x7C00
    return sign | ((exp + 15) << 10) | (q - 1024)


def decode_b16(bits: int) -> float:
    """Exact binary64 value of a binary16 bit pattern."""
    bits &= 0xFFFF
    sign = -1.0 if bits & 0x8000 else 1.0
    exp = (bits >> 10) & 0x1F
    frac = bits & 0x3FF
    if exp == 0:
        return sign * math.ldexp(frac, -24)
    if exp == 31:
        return math.copysign(math.inf if frac == 0 else math.nan, sign)
    return sign * math.ldexp(frac + 1024, exp - 25)


def round_to(kind: PrecisionKind, value: float) -> float:
    """Round ``value`` to the grid of ``kind`` and widen back to binary64."""
    value = float(value)
    if kind == PrecisionKind.B64:
        return value
    if kind == PrecisionKind.B32:
        with np.errstate(over="ignore"):
            return float(np.float32(value))
    return decode_b16(encode_b16(value))


_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: _ieee_div(a, b),
}


def _ieee_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def emulated_op(mode: EmulationMode, compute: PrecisionKind, op: str, a: float, b: float) -> float:
    """One scalar arithmetic operation under an emulation policy.

    Strict mode rounds the exact binary64 result to ``compute``; binary64
    holds the exact sum/product of two binary16 or binary32 operands except
    for +/- with a wide exponent gap, where double rounding is still
    innocuous since 53 >= 2*24 + 2.  StoreRound returns the binary64
    result and leaves rounding to the field store.
    """
    try:
        fn = _OPS[{"−": "-", "×": "*", "÷": "/"}.get(op, op)]
    except KeyError:
        raise ConfigurationError(f"unknown operation {op!r}") from None
    result = fn(float(a), float(b))
    if mode is EmulationMode.STRICT:
        return round_to(compute, result)
    return result
