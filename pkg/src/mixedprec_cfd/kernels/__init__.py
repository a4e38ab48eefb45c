"""Kernel layer: stencils, elementwise ops and precision conversions.

The compiled extension ``_ccore`` is used when it imports; otherwise the
numpy implementation in ``_npcore`` takes over.  Set
``MIXEDPREC_CFD_BACKEND=python`` to force the fallback.  Both backends
follow the same operation order and produce bitwise-identical results.

Arithmetic codes: ``F64`` and ``F32`` are native IEEE arithmetic, ``H16``
is binary16 arithmetic emulated on float32 carriers.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from ..precision import EmulationMode, PrecisionKind, round_to
from . import _npcore

F64, F32, H16 = 0, 1, 2
ARITH_NAMES = {F64: "f64", F32: "f32", H16: "h16"}

_impl = _npcore
BACKEND = "python"
if os.environ.get("MIXEDPREC_CFD_BACKEND", "").lower() not in ("python", "numpy"):
    try:
        from . import _ccore as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _npcore

_BACKENDS = {"python": _npcore}
if BACKEND == "compiled":
    _BACKENDS["compiled"] = _impl


def available_backends():
    return tuple(_BACKENDS)


def use_backend(name: str):
    """Switch the active backend; returns the previous backend name."""
    global _impl, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} is not available ({', '.join(_BACKENDS)})")
    previous = BACKEND
    _impl, BACKEND = _BACKENDS[name], name
    return previous


def arith_for(kind: PrecisionKind, mode: EmulationMode = EmulationMode.STRICT) -> int:
    """Arithmetic used by a kernel whose output is stored at ``kind``."""
    if kind == PrecisionKind.B64:
        return F64
    if kind == PrecisionKind.B32:
        return F32
    return H16 if mode is EmulationMode.STRICT else F32


def arith_kind(arith: int) -> PrecisionKind:
    return {F64: PrecisionKind.B64, F32: PrecisionKind.B32, H16: PrecisionKind.B16}[arith]


def carrier_dtype(arith: int) -> np.dtype:
    return np.dtype(np.float64) if arith == F64 else np.dtype(np.float32)


@lru_cache(maxsize=4096)
def const(value: float, arith: int) -> float:
    """A binary64 constant converted to the compute precision at use."""
    return round_to(arith_kind(arith), value)


def empty(shape, arith: int) -> np.ndarray:
    return np.empty(shape, dtype=carrier_dtype(arith))


def load(arr: np.ndarray, arith: int) -> np.ndarray:
    """Convert stored values into a fresh contiguous carrier (rounding if narrower)."""
    arr = np.ascontiguousarray(arr)
    src = arr.dtype
    out = np.empty(arr.shape, dtype=carrier_dtype(arith))
    with np.errstate(all="ignore"):
        if src == np.float16:
            bits = arr.view(np.uint16)
            if arith == F64:
                _impl.half_bits_to_float64(bits, out)
            else:
                _impl.half_bits_to_float32(bits, out)
        elif arith == F64:
            out[...] = arr
        elif arith == F32:
            out[...] = arr  # numpy casts with round-to-nearest-even
        elif src == np.float64:
            _impl.float64_to_half_carrier(arr, out)
        else:
            out[...] = arr
            _impl.round_half_inplace(out)
    return out


def store(values: np.ndarray, dest: np.ndarray) -> None:
    """Write carrier ``values`` into ``dest`` (any view), rounding to its dtype."""
    values = np.ascontiguousarray(values)
    with np.errstate(all="ignore"):
        if dest.dtype == np.float16:
            bits = np.empty(values.shape, dtype=np.uint16)
            if values.dtype == np.float64:
                _impl.float64_to_half_bits(values, bits)
            else:
                _impl.float32_to_half_bits(values, bits)
            dest.view(np.uint16)[...] = bits
        else:
            dest[...] = values


def round_half(values: np.ndarray) -> np.ndarray:
    """Round a float32 or float64 array to binary16 values (float32 carrier)."""
    values = np.ascontiguousarray(values)
    out = np.empty(values.shape, dtype=np.float32)
    with np.errstate(all="ignore"):
        if values.dtype == np.float64:
            _impl.float64_to_half_carrier(values, out)
        else:
            out[...] = values
            _impl.round_half_inplace(out)
    return out


def _stencil(order, src, axis, coef, arith, src_halo, margin, out, threads):
    if src.dtype != carrier_dtype(arith) or not src.flags.c_contiguous:
        raise TypeError("stencil input must be a contiguous carrier array")
    if src.ndim != 3 or not src.shape[0] == src.shape[1] == src.shape[2]:
        raise ValueError("stencil input must be a cube")
    n = src.shape[0] - 2 * src_halo
    if margin > src_halo - 2:
        raise ValueError(f"margin {margin} needs a halo of at least {margin + 2}")
    shape = (n + 2 * margin,) * 3
    if out is None:
        out = empty(shape, arith)
    elif out.shape != shape:
        raise ValueError(f"output shape {out.shape} != {shape}")
    _check(arith, out)
    _impl.stencil(order, src, n, src_halo, axis, const(coef, arith), arith, out, margin, threads)
    return out


def d1(src, axis, coef, arith, src_halo, margin=0, out=None, threads=1):
    """First derivative stencil; ``coef`` is 1/(12h), converted to compute precision."""
    return _stencil(1, src, axis, coef, arith, src_halo, margin, out, threads)


def d2(src, axis, coef, arith, src_halo, margin=0, out=None, threads=1):
    """Second derivative stencil; ``coef`` is 1/(12h^2)."""
    return _stencil(2, src, axis, coef, arith, src_halo, margin, out, threads)


def _check(arith, *arrays):
    dt = carrier_dtype(arith)
    present = [x for x in arrays if x is not None]
    size = present[0].size if present else 0
    for x in present:
        if x.dtype != dt or not x.flags.c_contiguous or x.size != size:
            raise TypeError(f"expected contiguous {dt} carriers of size {size}")


def binop(op, a, b, arith, out=None, threads=1):
    """``a op b`` rounded at ``arith``; ``op`` is add, sub, mul or div."""
    if out is None:
        out = empty(a.shape, arith)
    _check(arith, out, a, b)
    _impl.binop(op, a, b, arith, out, threads)
    return out


def scale(a, c, arith, out=None, threads=1):
    if out is None:
        out = empty(a.shape, arith)
    _check(arith, out, a)
    _impl.scale(a, const(c, arith), arith, out, threads)
    return out


def accumulate(acc, coef, a, b=None, arith=F64, threads=1):
    """In place ``acc = acc + coef*(a*b)`` (or ``coef*a``), each op rounded."""
    _check(arith, acc, a, b)
    _impl.accumulate(acc, const(coef, arith), a, b, arith, threads)
    return acc


def axpby(ca, a, cb, b, arith, out=None, threads=1):
    """``ca*a + cb*b`` with each op rounded; ``a=None`` drops the first term."""
    if out is None:
        out = empty(b.shape, arith)
    _check(arith, out, a, b)
    _impl.axpby(const(ca, arith), a, const(cb, arith), b, arith, out, threads)
    return out


def convective(acc, weights, rho, mj, uj, phi, rphi, gjj, gphi, axis, coef, arith,
               src_halo, threads=1, grad_halo=0):
    """Add the seven weighted split-form convective terms along ``axis`` to ``acc``.

    ``weights`` are binary64 and converted to compute precision here;
    ``phi=None`` stands for the constant 1.  Padded inputs: ``rho, mj, uj,
    phi, rphi``.  ``gjj, gphi`` are optional staged derivatives of ``uj``
    and ``phi`` with halo ``grad_halo``.
    """
    n = rho.shape[0] - 2 * src_halo
    if src_halo < 2:
        raise ValueError("convective terms need a halo of at least 2")
    _check(arith, rho, mj, uj, phi, rphi)
    _check(arith, acc)
    _check(arith, gjj, gphi)
    if acc.shape != (n, n, n):
        raise ValueError("accumulator must cover the interior")
    gshape = (n + 2 * grad_halo,) * 3
    for g in (gjj, gphi):
        if g is not None and g.shape != gshape:
            raise ValueError("staged derivative does not match grad_halo")
    w = [const(float(x), arith) for x in weights]
    _impl.convective(acc, w, rho, mj, uj, phi, rphi, gjj, gphi, grad_halo,
                     n, src_halo, axis, const(coef, arith), arith, threads)
    return acc


def primitives(rho, m0, m1, m2, rhoE, gm1, gamma_m2, arith, threads=1):
    """``(u, v, w, p, T)`` from conservative carriers, pointwise and fully rounded.

    ``u_i = m_i/rho``; ``e = rhoE/rho - 0.5*|u|^2``; ``p = gm1*(rho*e)``;
    ``T = (gamma_m2*p)/rho``.  Works on any array shape (padded arrays
    give periodic halos for free).
    """
    _check(arith, rho, m0, m1, m2, rhoE)
    outs = [empty(rho.shape, arith) for _ in range(5)]
    _impl.primitives(rho, m0, m1, m2, rhoE, const(0.5, arith), const(gm1, arith),
                     const(gamma_m2, arith), *outs, arith, threads)
    return outs


def viscous(accs, u, T, grads, tgrads, inv_re, kappa, h, arith, src_halo, threads=1):
    """Add viscous stress and heat-flux terms to ``accs = (m0, m1, m2, E)``.

    ``u`` (three velocities) and ``T`` are padded carriers.  ``grads``
    (nine padded ``du_i/dx_j`` in row-major ``(i, j)`` order) and
    ``tgrads`` (three padded ``dT/dx_j``) are used when given; with
    ``None`` every derivative is evaluated inline.
    """
    if src_halo < 4:
        raise ValueError("inline nested derivatives need a halo of at least 4")
    n = u[0].shape[0] - 2 * src_halo
    _check(arith, *u, T)
    _check(arith, *accs)
    if accs[0].shape != (n, n, n):
        raise ValueError("accumulators must cover the interior")
    if (grads is None) != (tgrads is None):
        raise ValueError("staged velocity and temperature gradients go together")
    if grads is not None:
        _check(arith, u[0], *grads, *tgrads)
    c1 = const(1.0 / (12.0 * h), arith)
    c2 = const(1.0 / (12.0 * h * h), arith)
    _impl.viscous(list(accs), u[0], u[1], u[2], T, grads, tgrads, n, src_halo, c1, c2,
                  const(inv_re, arith), const(1.0 / 3.0, arith), const(2.0 / 3.0, arith),
                  const(kappa, arith), arith, threads)
    return accs
