"""Residual evaluation: split forms, dual routes, strategies and conservation."""
import contextlib
import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixedprec_cfd import kernels
from mixedprec_cfd.errors import ConfigurationError, HaloStaleError
from mixedprec_cfd.mesh import Field, GridSpec, fill_halos_periodic, reduce_sum
from mixedprec_cfd.physics import (SPLIT_NAMES, FlowParams, ResidualEvaluator, SplitCoefficients,
                                   convective_split, primitives_from_conservatives, residual,
                                   field_names, split_preset)
from mixedprec_cfd.precision import EmulationMode, PrecisionKind, resolve_preset
from mixedprec_cfd.tgv import init_tgv, init_uniform

B64 = PrecisionKind.B64


@contextlib.contextmanager
def backend(name):
    prev = kernels.use_backend(name)
    try:
        yield
    finally:
        kernels.use_backend(prev)


def perturbed_state(preset, n=12, seed=0, mode=EmulationMode.STRICT, params=None):
    params = params or FlowParams()
    st_ = init_tgv(GridSpec(n), params, resolve_preset(preset, mode))
    rng = np.random.default_rng(seed)
    for f in st_.Q:
        v = f.values()
        f.set_interior(v * (1 + 0.02 * rng.standard_normal(v.shape)))
    st_.fill_halos()
    return st_, params


def residual_bits(state, params, split, strategy, fused=True):
    ev = ResidualEvaluator(state, params, split_preset(split), strategy, fused=fused)
    ev.evaluate()
    return [f.data.copy() for f in state.R]


def test_flow_params():
    p = FlowParams(M=0.5, Re=800, Pr=0.72, gamma=1.4)
    assert p.gamma_m2 == pytest.approx(0.35)
    assert p.conductivity == pytest.approx(1 / (0.4 * 0.25 * 800 * 0.72))
    for bad in (dict(M=0), dict(Re=-1), dict(Pr=0), dict(gamma=1.0)):
        with pytest.raises(ConfigurationError):
            FlowParams(**bad)
    FlowParams(Re=0, viscous=False)


@pytest.mark.parametrize("name", SPLIT_NAMES)
def test_split_presets_are_consistent(name):
    s = split_preset(name)
    assert s.consistency_sums() == (1.0, 1.0, 1.0)
    assert split_preset(name.upper()) == s


@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=7, max_size=7))
def test_consistency_sums_detect_bad_weights(w):
    s = SplitCoefficients(*w)
    ok = all(abs(x - 1.0) <= 1e-12 for x in s.consistency_sums())
    if ok:
        assert s.validate() is s
    else:
        with pytest.raises(ConfigurationError):
            s.validate()


def test_unknown_split():
    with pytest.raises(ConfigurationError):
        split_preset("skew")


def _conv_inputs(n):
    g = GridSpec(n)
    z, y, x = g.mesh()
    vals = {
        "rho": 1.0 + 0.2 * np.sin(x) * np.cos(y),
        "u0": np.sin(x) * np.cos(z) + 0 * y,
        "u1": np.cos(y) * np.sin(x) + 0 * z,
        "u2": 0.5 * np.sin(z) + 0 * x * y,
    }
    vals["m0"], vals["m1"], vals["m2"] = (vals["rho"] * vals[k] for k in ("u0", "u1", "u2"))
    out = {}
    for k, v in vals.items():
        f = Field(k, "wk_arrays", B64, g)
        f.set_interior(np.broadcast_to(v, g.shape))
        fill_halos_periodic(f)
        out[k] = f
    return out, vals, g


@pytest.mark.parametrize("phi", ["1", "u"])
def test_all_splits_approximate_the_same_derivative(phi):
    # d(rho u_x phi)/dx against a spectral-accurate reference
    errs = {}
    for n in (16, 32):
        inputs, vals, g = _conv_inputs(n)
        flux = vals["rho"] * vals["u0"] * (vals["u0"] if phi == "u" else 1.0)
        flux = np.broadcast_to(flux, g.shape)
        k = np.fft.fftfreq(n, d=1.0 / n)
        exact = np.real(np.fft.ifft(1j * k * np.fft.fft(flux, axis=2), axis=2))
        for name in SPLIT_NAMES:
            got = convective_split(0, phi, split_preset(name), inputs)
            errs.setdefault(name, []).append(np.max(np.abs(got - exact)))
    for name, (e16, e32) in errs.items():
        assert e32 < 0.02, name
        assert np.log2(e16 / e32) > 3.5, name


@pytest.mark.parametrize("name", SPLIT_NAMES)
@pytest.mark.parametrize("kind", list(PrecisionKind))
def test_convective_split_fused_equals_composed(name, kind):
    inputs, _, _ = _conv_inputs(12)
    for phi, d in itertools.product(("1", "u", "v", "w"), range(3)):
        a = convective_split(d, phi, split_preset(name), inputs, kind, fused=True)
        b = convective_split(d, phi, split_preset(name), inputs, kind, fused=False)
        assert np.array_equal(a, b)


def test_convective_split_checks():
    inputs, _, _ = _conv_inputs(8)
    with pytest.raises(ConfigurationError):
        convective_split(0, "q", split_preset("KGP"), inputs)
    inputs["rho"].fill(1.0)
    with pytest.raises(HaloStaleError):
        convective_split(0, "1", split_preset("KGP"), inputs)


@pytest.mark.parametrize("preset", ["DP", "SP", "HP", "SPDP", "HPSP"])
@pytest.mark.parametrize("strategy", ["default", "storesome"])
@pytest.mark.parametrize("split", ["Blaisdell", "KGP", "Feiereisen"])
def test_fused_route_equals_composed_route(preset, strategy, split):
    bits = []
    for fused in (True, False):
        state, params = perturbed_state(preset, seed=1)
        bits.append(residual_bits(state, params, split, strategy, fused))
    for a, b in zip(*bits):
        assert np.array_equal(a.view(np.uint8), b.view(np.uint8))


@pytest.mark.parametrize("preset", ["DP", "HPSP"])
@pytest.mark.parametrize("mode", list(EmulationMode))
def test_backends_give_identical_residuals(preset, mode):
    if len(kernels.available_backends()) < 2:
        pytest.skip("only one backend")
    out = []
    for name in kernels.available_backends():
        with backend(name):
            state, params = perturbed_state(preset, seed=2, mode=mode)
            out.append(residual_bits(state, params, "KGP", "default"))
    for a, b in zip(*out):
        assert np.array_equal(a.view(np.uint8), b.view(np.uint8))


@pytest.mark.parametrize("preset", ["DP", "HP", "SP"])
def test_strategies_agree_when_work_and_compute_precision_match(preset):
    # with wk storage equal to the compute precision, staging loses nothing
    a = residual_bits(*perturbed_state(preset, seed=3), "Blaisdell", "default")
    b = residual_bits(*perturbed_state(preset, seed=3), "Blaisdell", "storesome")
    for x, y in zip(a, b):
        assert np.array_equal(x.view(np.uint8), y.view(np.uint8))


def test_strategies_differ_under_store_round_hpsp():
    mode = EmulationMode.STORE_ROUND
    a = residual_bits(*perturbed_state("HPSP", seed=3, mode=mode), "Blaisdell", "default")
    b = residual_bits(*perturbed_state("HPSP", seed=3, mode=mode), "Blaisdell", "storesome")
    assert any(not np.array_equal(x, y) for x, y in zip(a, b))


@pytest.mark.parametrize("preset", ["DP", "SP", "HP", "HPSP"])
@pytest.mark.parametrize("strategy", ["default", "storesome"])
@pytest.mark.parametrize("split", SPLIT_NAMES)
def test_uniform_state_has_zero_residual(preset, strategy, split):
    params = FlowParams()
    state = init_uniform(GridSpec(8), params, resolve_preset(preset), velocity=(0.3, -0.2, 0.1))
    residual(state, params, split_preset(split), strategy)
    for f in state.R:
        assert not np.any(f.values())


@pytest.mark.parametrize("viscous", [False, True])
def test_divergence_split_conserves_mass_and_momentum(viscous):
    params = FlowParams(viscous=viscous)
    state, _ = perturbed_state("DP", n=16, seed=4, params=params)
    residual(state, params, split_preset("Divergence"))
    for k in range(4):
        r = state.R[k].values()
        assert abs(reduce_sum(r)) < 1e-12 * np.max(np.abs(r)) * r.size
    if not viscous:
        r = state.R[4].values()
        assert abs(reduce_sum(r)) < 1e-12 * np.max(np.abs(r)) * r.size


def test_tgv_initial_density_rate_matches_analytic():
    # div u = 0 initially, so d(rho)/dt = -(u d(rho)/dx + v d(rho)/dy)
    params = FlowParams()
    errs = []
    for n in (16, 32):
        state = init_tgv(GridSpec(n), params, resolve_preset("DP"))
        residual(state, params, split_preset("Blaisdell"))
        z, y, x = state.grid.mesh()
        g = params.gamma_m2
        u = np.sin(x) * np.cos(y) * np.cos(z)
        v = -np.cos(x) * np.sin(y) * np.cos(z)
        rx = g * (-2 * np.sin(2 * x)) * (2 + np.cos(2 * z)) / 16
        ry = g * (-2 * np.sin(2 * y)) * (2 + np.cos(2 * z)) / 16
        exact = -(u * rx + v * ry)
        errs.append(np.max(np.abs(state.R[0].values() - exact)) / np.max(np.abs(exact)))
    assert errs[1] < 5e-3
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_residual_requires_fresh_halos_and_matching_config():
    params = FlowParams()
    state = init_tgv(GridSpec(8), params, resolve_preset("DP"))
    with pytest.raises(ConfigurationError):
        residual(state, params, split_preset("KGP"), config=resolve_preset("SP"))
    state.Q[0].fill(1.0)
    with pytest.raises(HaloStaleError):
        residual(state, params, split_preset("KGP"))


def test_primitives_from_conservatives():
    params = FlowParams()
    state = init_tgv(GridSpec(8), params, resolve_preset("DP"))
    prim = primitives_from_conservatives(state, params)
    g = state.grid
    z, y, x = g.mesh()
    assert np.allclose(prim["u"], np.sin(x) * np.cos(y) * np.cos(z), atol=1e-14)
    p = 1 / 0.35 + (np.cos(2 * x) + np.cos(2 * y)) * (2 + np.cos(2 * z)) / 16
    assert np.allclose(prim["p"], p, rtol=1e-13)
    assert np.allclose(prim["T"], 0.35 * p / (0.35 * p), rtol=1e-13)


def test_field_names_cover_every_allocation():
    p = FlowParams(M=0.5, Re=800)
    state = init_tgv(GridSpec(8), p, resolve_preset("HPSP"))
    residual(state, p, split_preset("KGP"), "default")
    residual(state, p, split_preset("KGP"), "storesome")
    assert set(state.registry._fields) == set(field_names())
