import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mixedprec_cfd import kernels
from mixedprec_cfd.mesh import Field, GridSpec, fill_halos_periodic
from mixedprec_cfd.precision import EmulationMode, PrecisionKind
from mixedprec_cfd.stencils import COEFFS, axis_of, ddx1, ddx1_nested, ddx2

B64 = PrecisionKind.B64


def periodic_field(n, fn, kind=B64):
    g = GridSpec(n)
    f = Field("f", "wk_arrays", kind, g)
    z, y, x = g.mesh()
    f.set_interior(np.broadcast_to(fn(x, y, z), g.shape))
    fill_halos_periodic(f)
    return f, g


def observed_orders(errors):
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


@pytest.mark.parametrize("direction", ["x", "y", "z"])
def test_first_derivative_order(direction):
    errs = []
    for n in (16, 32, 64):
        k = {"x": 0, "y": 1, "z": 2}[direction]
        f, g = periodic_field(n, lambda x, y, z: np.sin((x, y, z)[k]) + 0 * (x + y + z))
        exact = np.broadcast_to(np.cos(g.mesh()[2 - k]), g.shape)
        errs.append(np.max(np.abs(ddx1(f, direction) - exact)))
    for p in observed_orders(errs):
        assert abs(p - 4.0) < 0.2


@pytest.mark.parametrize("direction", ["x", "y", "z"])
def test_second_derivative_order(direction):
    errs = []
    for n in (16, 32, 64):
        k = {"x": 0, "y": 1, "z": 2}[direction]
        f, g = periodic_field(n, lambda x, y, z: np.sin((x, y, z)[k]) + 0 * (x + y + z))
        exact = np.broadcast_to(-np.sin(g.mesh()[2 - k]), g.shape)
        errs.append(np.max(np.abs(ddx2(f, direction) - exact)))
    for p in observed_orders(errs):
        assert abs(p - 4.0) < 0.2


def _poly_block(deg, h, axis):
    # values x**deg on a non-periodic 12^3 block with halo 4, x = (i - 4) * h + 0.25
    idx = (np.arange(12) - 4) * h + 0.25
    shape = [1, 1, 1]
    shape[axis] = 12
    x = idx.reshape(shape)
    return np.ascontiguousarray(np.broadcast_to(x ** deg, (12, 12, 12))), idx[4:8]


@pytest.mark.parametrize("deg", range(5))
@pytest.mark.parametrize("axis", [0, 1, 2])
def test_d1_exact_for_quartics(deg, axis):
    h = 0.5
    src, x = _poly_block(deg, h, axis)
    d = kernels.d1(src, axis, COEFFS.first_scale(h), kernels.F64, 4)
    want = deg * x ** (deg - 1) if deg else 0 * x
    shape = [1, 1, 1]
    shape[axis] = 4
    assert np.max(np.abs(d - want.reshape(shape))) < 1e-12


@pytest.mark.parametrize("deg", range(6))
def test_d2_exact_for_quintics(deg):
    h = 0.5
    src, x = _poly_block(deg, h, 2)
    d = kernels.d2(src, 2, COEFFS.second_scale(h), kernels.F64, 4)
    want = deg * (deg - 1) * x ** (deg - 2) if deg >= 2 else 0 * x
    assert np.max(np.abs(d - want[None, None, :])) < 1e-12


def test_coefficients():
    from fractions import Fraction
    assert sum(COEFFS.first) == 0
    assert sum(COEFFS.second) == 0
    assert sum(w * o for w, o in zip(COEFFS.first, COEFFS.offsets)) == 1
    assert sum(w * o * o for w, o in zip(COEFFS.second, COEFFS.offsets)) == 2
    assert COEFFS.first[3] == Fraction(2, 3)


def test_axis_mapping():
    assert [axis_of(d) for d in ("x", "y", "z", 0, 1, 2)] == [2, 1, 0, 2, 1, 0]
    with pytest.raises(ValueError):
        axis_of("w")


@given(arrays(np.float64, (8, 8, 8), elements=st.floats(-100, 100)))
def test_constant_and_antisymmetry(vals):
    g = GridSpec(8)
    f = Field("f", "wk_arrays", B64, g)
    f.set_interior(vals)
    fill_halos_periodic(f)
    d = ddx1(f, "x")
    # mirror i -> -i (mod n) reverses the sign of the first derivative bitwise
    mirror = np.roll(vals[:, :, ::-1], 1, axis=2)
    fm = Field("m", "wk_arrays", B64, g)
    fm.set_interior(mirror)
    fill_halos_periodic(fm)
    dm = ddx1(fm, "x")
    assert np.array_equal(dm, -np.roll(d[:, :, ::-1], 1, axis=2))
    c = Field("c", "wk_arrays", B64, g)
    c.fill(float(vals[0, 0, 0]))
    fill_halos_periodic(c)
    assert not np.any(ddx1(c, "y")) and not np.any(ddx2(c, "z"))


@pytest.mark.parametrize("kind,mode", [(PrecisionKind.B64, EmulationMode.STRICT),
                                       (PrecisionKind.B32, EmulationMode.STRICT),
                                       (PrecisionKind.B16, EmulationMode.STRICT),
                                       (PrecisionKind.B16, EmulationMode.STORE_ROUND)])
def test_nested_equals_staged_at_compute_precision(kind, mode):
    f, g = periodic_field(12, lambda x, y, z: np.sin(x) * np.cos(2 * y) + np.sin(z))
    nested = ddx1_nested(f, "x", "y", kind, mode)
    arith = kernels.arith_for(kind, mode)
    inner = ddx1(f, "x", kind, mode)
    pad = np.pad(inner, 4, mode="wrap")
    staged = kernels.d1(pad, axis_of("y"), COEFFS.first_scale(g.h), arith, 4)
    assert np.array_equal(nested, staged)


def test_reduced_precision_derivative_is_close():
    f, g = periodic_field(32, lambda x, y, z: np.sin(x) + 0 * (y + z))
    d64 = ddx1(f, "x")
    d16 = ddx1(f, "x", PrecisionKind.B16)
    assert d16.dtype == np.float32
    assert np.max(np.abs(d16 - d64)) < 0.05
