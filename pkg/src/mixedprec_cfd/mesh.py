"""Periodic structured grid, precision-tagged fields and reductions.

Arrays are stored ``(z, y, x)`` with ``x`` contiguous and padded by a halo
of depth :data:`HALO` on every side.  Kernels write interiors only; halos
are refreshed by periodic copy through :func:`fill_halos_periodic`.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import ConfigurationError, RegistryError
from .precision import ARRAY_CLASSES, PrecisionConfig, PrecisionKind

__all__ = [
    "HALO",
    "FIELD_CLASSES",
    "GridSpec",
    "Field",
    "FieldRegistry",
    "allocate_field",
    "fill_halos_periodic",
    "reduce_sum",
    "MemoryReport",
    "memory_report",
    "CommReport",
    "comm_volume_report",
    "default_exchanges",
    "write_snapshot",
    "read_snapshot",
]

HALO = 4
FIELD_CLASSES = ARRAY_CLASSES + ("diagnostics",)


@dataclass(frozen=True)
class GridSpec:
    """Cubic periodic grid with points at ``i*h`` for ``i`` in ``[0, n)``.

    Parameters
    ----------
    n : int
        Points per dimension.
    domain_length : float
        Period in each dimension, ``2*pi`` by default.
    halo_depth : int
        Ghost layers on each side; fixed at 4.
    """

    n: int
    domain_length: float = 2.0 * math.pi
    halo_depth: int = HALO

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 5:
            raise ConfigurationError(f"grid needs n >= 5 points, got {self.n}", field="n")
        if not self.domain_length > 0:
            raise ConfigurationError("domain length must be positive", field="domain_length")
        if self.halo_depth != HALO:
            raise ConfigurationError(f"halo depth is fixed at {HALO}", field="halo_depth")

    @property
    def h(self) -> float:
        return self.domain_length / self.n

    @property
    def volume(self) -> float:
        return self.domain_length ** 3

    @property
    def padded(self) -> int:
        return self.n + 2 * self.halo_depth

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n,) * 3

    @property
    def padded_shape(self) -> Tuple[int, int, int]:
        return (self.padded,) * 3

    @property
    def interior(self) -> Tuple[slice, slice, slice]:
        s = slice(self.halo_depth, self.halo_depth + self.n)
        return (s, s, s)

    def coordinates(self) -> np.ndarray:
        """Node coordinates ``i*h`` along one axis (binary64)."""
        return np.arange(self.n, dtype=np.float64) * self.h

    def mesh(self):
        """Broadcastable ``(z, y, x)`` coordinate arrays for the interior."""
        c = self.coordinates()
        return c[:, None, None], c[None, :, None], c[None, None, :]


class Field:
    """A halo-padded 3D scalar field stored at one precision.

    ``generation`` counts interior writes; ``halo_generation`` records the
    generation the halos were last filled from.  Stencils refuse to read a
    field whose halos are stale.
    """

    def __init__(self, name: str, array_class: str, storage: PrecisionKind, grid: GridSpec):
        if array_class not in FIELD_CLASSES:
            raise ConfigurationError(f"unknown array class {array_class!r}")
        self.name = name
        self.array_class = array_class
        self.storage = PrecisionKind(storage)
        self.grid = grid
        self.data = np.zeros(grid.padded_shape, dtype=self.storage.dtype)
        self.generation = 0
        self.halo_generation = 0
        self._cache: Dict[Tuple[int, bool], np.ndarray] = {}

    def __repr__(self):
        return (f"Field({self.name!r}, {self.array_class}, {self.storage.name}, "
                f"n={self.grid.n})")

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    @property
    def interior(self) -> np.ndarray:
        """View of the authoritative interior cells (do not write through it)."""
        return self.data[self.grid.interior]

    @property
    def halos_fresh(self) -> bool:
        return self.halo_generation == self.generation

    def _touch(self):
        self.generation += 1
        self._cache.clear()

    def store(self, values: np.ndarray) -> None:
        """Write interior values, rounding to the storage precision."""
        values = np.asarray(values)
        if values.shape != self.grid.shape:
            values = np.broadcast_to(values, self.grid.shape)
        kernels.store(values, self.data[self.grid.interior])
        self._touch()

    def store_padded(self, values: np.ndarray, halos_valid: bool = False) -> None:
        """Write the whole padded array.

        ``halos_valid`` asserts that the halo part of ``values`` already
        holds the periodic images (true for pointwise functions of fields
        with fresh halos); otherwise the halos are marked stale.
        """
        kernels.store(values, self.data)
        self._touch()
        if halos_valid:
            self.halo_generation = self.generation

    def set_interior(self, values) -> None:
        """Write interior values given in binary64 (or anything castable)."""
        values = np.asarray(values, dtype=np.float64)
        self.store(np.broadcast_to(values, self.grid.shape))

    def fill(self, value: float) -> None:
        self.set_interior(np.full(self.grid.shape, value, dtype=np.float64))

    def values(self) -> np.ndarray:
        """Interior widened to binary64 (exact)."""
        return self.interior.astype(np.float64)

    def load(self, arith: int, halo: bool = False) -> np.ndarray:
        """Contiguous carrier at ``arith``; cached until the next write.

        With ``halo=True`` the whole padded array is returned, and when the
        storage already is the carrier type no copy is made.  Callers must
        treat the result as read-only.
        """
        key = (arith, halo)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if halo and arith != kernels.H16 and self.data.dtype == kernels.carrier_dtype(arith):
            out = self.data
        else:
            out = kernels.load(self.data if halo else self.interior, arith)
        self._cache[key] = out
        return out


class FieldRegistry:
    """Ordered collection of fields, the basis of memory and traffic reports."""

    def __init__(self, grid: Optional[GridSpec] = None):
        self.grid = grid
        self._fields: Dict[str, Field] = {}

    def add(self, f: Field) -> Field:
        if f.name in self._fields:
            raise RegistryError(f"field {f.name!r} already registered")
        if self.grid is None:
            self.grid = f.grid
        self._fields[f.name] = f
        return f

    def __getitem__(self, name: str) -> Field:
        try:
            return self._fields[name]
        except KeyError:
            raise RegistryError(f"no field named {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._fields

    def __iter__(self) -> Iterator[Field]:
        return iter(self._fields.values())

    def __len__(self) -> int:
        return len(self._fields)

    def names(self):
        return list(self._fields)

    def by_class(self, array_class: str):
        return [f for f in self if f.array_class == array_class]

    def census(self) -> Dict[str, Dict[str, int]]:
        """``{class: {"count": k, "bytes": b}}`` for every class present."""
        out: Dict[str, Dict[str, int]] = {}
        for f in self:
            entry = out.setdefault(f.array_class, {"count": 0, "bytes": 0})
            entry["count"] += 1
            entry["bytes"] += f.nbytes
        return out


def allocate_field(registry: FieldRegistry, name: str, array_class: str,
                   grid: GridSpec, config: PrecisionConfig) -> Field:
    """Create a zeroed field at the precision ``config`` assigns and register it."""
    if name in registry:
        raise RegistryError(f"field {name!r} already registered")
    kind = config.kind_for(array_class, name)
    return registry.add(Field(name, array_class, kind, grid))


def fill_halos_periodic(f: Field) -> Field:
    """Refresh halos by periodic copy, one axis after another.

    Copying axis by axis over the full extent of the previously filled
    axes fills edges and corners by composition.
    """
    d = f.data
    h, n = f.grid.halo_depth, f.grid.n
    for axis in range(3):
        lo = [slice(None)] * 3
        src = [slice(None)] * 3
        lo[axis], src[axis] = slice(0, h), slice(n, n + h)
        d[tuple(lo)] = d[tuple(src)]
        lo[axis], src[axis] = slice(n + h, n + 2 * h), slice(h, 2 * h)
        d[tuple(lo)] = d[tuple(src)]
    f.halo_generation = f.generation
    f._cache.pop((kernels.F64, True), None)
    f._cache.pop((kernels.F32, True), None)
    f._cache.pop((kernels.H16, True), None)
    return f


def _pairwise(x: np.ndarray) -> float:
    # x has power-of-two length
    while x.size > 1:
        x = x[0::2] + x[1::2]
    return float(x[0])


def reduce_sum(values, threads: int = 1) -> float:
    """Deterministic binary64 sum over a field interior or an array.

    The values are flattened in C order, zero-padded to a power of two and
    summed by a fixed balanced pairwise tree.  Workers each reduce an
    aligned subtree, so the association (and hence the result) never
    depends on ``threads``.
    """
    if isinstance(values, Field):
        values = values.interior
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        return 0.0
    size = 1 << (x.size - 1).bit_length()
    if size != x.size:
        x = np.concatenate([x, np.zeros(size - x.size)])
    workers = 1
    while workers * 2 <= max(1, int(threads)) and workers * 2 <= size:
        workers *= 2
    if workers == 1:
        return _pairwise(x)
    chunk = size // workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda k: _pairwise(x[k * chunk:(k + 1) * chunk]), range(workers)))
    return _pairwise(np.array(parts))


@dataclass
class MemoryReport:
    """Bytes per class, including halo padding."""

    per_class: Dict[str, int]
    counts: Dict[str, int]
    total_bytes: int
    baseline_bytes: int

    @property
    def gain(self) -> float:
        return self.baseline_bytes / self.total_bytes if self.total_bytes else 1.0

    def as_dict(self) -> dict:
        return {"per_class": dict(self.per_class), "counts": dict(self.counts),
                "total_bytes": self.total_bytes, "baseline_bytes": self.baseline_bytes,
                "gain": self.gain}


def memory_report(registry: FieldRegistry) -> MemoryReport:
    """Census of ``registry`` and its gain over storing everything in binary64."""
    per_class: Dict[str, int] = {}
    counts: Dict[str, int] = {}
    total = baseline = 0
    for f in registry:
        cells = f.data.size
        per_class[f.array_class] = per_class.get(f.array_class, 0) + f.nbytes
        counts[f.array_class] = counts.get(f.array_class, 0) + 1
        total += f.nbytes
        baseline += cells * PrecisionKind.B64.byte_width
    return MemoryReport(per_class, counts, total, baseline)


def default_exchanges(storesome: bool = False) -> Dict[str, int]:
    """Halo exchanges per iteration for each class under the default model.

    Q is exchanged once per substep; stored work arrays (primitives and
    derivatives) once per substep unless the strategy recomputes them inline.
    """
    return {"q_vector": 3, "rk_arrays": 0, "residuals": 0, "wk_arrays": 0 if storesome else 3}


@dataclass
class CommReport:
    """Modelled halo-exchange bytes per process per iteration."""

    per_class: Dict[str, int]
    process_grid: Tuple[int, int, int]
    exchange_depth: int

    @property
    def total_bytes(self) -> int:
        return sum(self.per_class.values())

    def as_dict(self) -> dict:
        return {"per_class": dict(self.per_class), "process_grid": list(self.process_grid),
                "exchange_depth": self.exchange_depth, "total_bytes": self.total_bytes}


def comm_volume_report(registry: FieldRegistry, process_grid: Sequence[int] = (4, 1, 1),
                       exchanges_per_iteration: Optional[Mapping[str, int]] = None,
                       exchange_depth: int = 2) -> CommReport:
    """Analytic halo traffic for a block decomposition of the grid.

    ``process_grid`` is ``(px, py, pz)``.  Every partitioned dimension
    contributes two faces of the local block; each face moves
    ``exchange_depth`` layers in both directions.
    """
    grid = registry.grid
    if grid is None:
        raise ConfigurationError("registry has no grid")
    pg = tuple(int(p) for p in process_grid)
    if len(pg) != 3 or min(pg) < 1:
        raise ConfigurationError(f"process grid must be three positive ints, got {process_grid}",
                                 field="process_grid")
    for p in pg:
        if grid.n % p:
            raise ConfigurationError(f"n={grid.n} is not divisible by process grid {pg}",
                                     field="process_grid")
    if exchanges_per_iteration is None:
        exchanges_per_iteration = default_exchanges()
    local = [grid.n // p for p in pg]  # x, y, z extents
    face_cells = 0
    for d in range(3):
        if pg[d] > 1:
            others = [local[k] for k in range(3) if k != d]
            face_cells += others[0] * others[1]
    per_class: Dict[str, int] = {}
    for f in registry:
        count = int(exchanges_per_iteration.get(f.array_class, 0))
        vol = 2 * exchange_depth * face_cells * f.storage.byte_width * count
        per_class[f.array_class] = per_class.get(f.array_class, 0) + vol
    return CommReport(per_class, pg, exchange_depth)


def write_snapshot(path, fields: Iterable[Field]) -> None:
    """Raw dump: int32 header ``(n, n, n, count)`` then binary64 interiors, x fastest."""
    fields = list(fields)
    if not fields:
        raise ValueError("no fields to write")
    n = fields[0].grid.n
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4i", n, n, n, len(fields)))
        for f in fields:
            fh.write(np.ascontiguousarray(f.values(), dtype="<f8").tobytes())


def read_snapshot(path) -> np.ndarray:
    """Inverse of :func:`write_snapshot`; returns ``(count, n, n, n)`` binary64."""
    with open(path, "rb") as fh:
        nz, ny, nx, count = struct.unpack("<4i", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(count, nz, ny, nx).astype(np.float64)
