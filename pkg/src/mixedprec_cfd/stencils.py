"""Fourth-order central differences on halo-padded fields.

All operators return carrier arrays (float64 for binary64 arithmetic,
float32 otherwise) covering the interior, optionally widened by a margin.
Directions are ``x``/``y``/``z`` or ``0``/``1``/``2``; arrays are laid out
``(z, y, x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple, Union

import numpy as np

from . import kernels
from .errors import HaloStaleError
from .mesh import Field
from .precision import EmulationMode, PrecisionKind

__all__ = [
    "StencilCoefficients",
    "axis_of",
    "ddx1",
    "ddx2",
    "ddx1_nested",
]

Direction = Union[int, str]


@dataclass(frozen=True)
class StencilCoefficients:
    """Weights at offsets ``-2..2`` before the ``1/h`` or ``1/h**2`` scaling."""

    first: Tuple[Fraction, ...] = tuple(Fraction(w, 12) for w in (1, -8, 0, 8, -1))
    second: Tuple[Fraction, ...] = tuple(Fraction(w, 12) for w in (-1, 16, -30, 16, -1))
    offsets: Tuple[int, ...] = (-2, -1, 0, 1, 2)

    @staticmethod
    def first_scale(h: float) -> float:
        """Reciprocal folded into one multiply: ``1/(12h)``."""
        return 1.0 / (12.0 * h)

    @staticmethod
    def second_scale(h: float) -> float:
        return 1.0 / (12.0 * h * h)


COEFFS = StencilCoefficients()

_DIRS = {"x": 0, "y": 1, "z": 2}


def axis_of(direction: Direction) -> int:
    """Array axis for a direction; ``x`` is the last (contiguous) axis."""
    if isinstance(direction, str):
        try:
            direction = _DIRS[direction.lower()]
        except KeyError:
            raise ValueError(f"unknown direction {direction!r}") from None
    if direction not in (0, 1, 2):
        raise ValueError(f"unknown direction {direction!r}")
    return 2 - int(direction)


def _check(f: Field):
    if not f.halos_fresh:
        raise HaloStaleError(
            f"field {f.name!r} written at generation {f.generation} but halos are from "
            f"generation {f.halo_generation}")


def ddx1(f: Field, direction: Direction, compute: PrecisionKind = PrecisionKind.B64,
         mode: EmulationMode = EmulationMode.STRICT, margin: int = 0, threads: int = 1) -> np.ndarray:
    """First derivative along ``direction`` at ``compute`` precision."""
    _check(f)
    arith = kernels.arith_for(compute, mode)
    return kernels.d1(f.load(arith, halo=True), axis_of(direction),
                      COEFFS.first_scale(f.grid.h), arith, f.grid.halo_depth,
                      margin=margin, threads=threads)


def ddx2(f: Field, direction: Direction, compute: PrecisionKind = PrecisionKind.B64,
         mode: EmulationMode = EmulationMode.STRICT, margin: int = 0, threads: int = 1) -> np.ndarray:
    """Second derivative along ``direction`` at ``compute`` precision."""
    _check(f)
    arith = kernels.arith_for(compute, mode)
    return kernels.d2(f.load(arith, halo=True), axis_of(direction),
                      COEFFS.second_scale(f.grid.h), arith, f.grid.halo_depth,
                      margin=margin, threads=threads)


def ddx1_nested(f: Field, d1: Direction, d2: Direction, compute: PrecisionKind = PrecisionKind.B64,
                mode: EmulationMode = EmulationMode.STRICT, threads: int = 1) -> np.ndarray:
    """``ddx1`` along ``d2`` of ``ddx1`` along ``d1`` without storing the inner result.

    The inner derivative is evaluated over the interior plus two layers,
    kept at compute precision, and differentiated again.
    """
    _check(f)
    arith = kernels.arith_for(compute, mode)
    c = COEFFS.first_scale(f.grid.h)
    inner = kernels.d1(f.load(arith, halo=True), axis_of(d1), c, arith,
                       f.grid.halo_depth, margin=2, threads=threads)
    return kernels.d1(inner, axis_of(d2), c, arith, 2, margin=0, threads=threads)
