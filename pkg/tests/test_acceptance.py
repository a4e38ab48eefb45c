"""Acceptance criteria 1-12.

Each test records one PASS/FAIL line, printed in the terminal summary.
Long simulations go through :func:`harness.cached_run`, so runs shared
between criteria are computed once per session (and reused across
sessions when ``MIXEDPREC_CFD_RUN_CACHE`` is set).
"""
import dataclasses
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import record_acceptance
from mixedprec_cfd import harness
from mixedprec_cfd.harness import SimConfig
from mixedprec_cfd.integrate import integrate_scalar
from mixedprec_cfd.mesh import Field, GridSpec, fill_halos_periodic
from mixedprec_cfd.physics import FlowParams
from mixedprec_cfd.precision import PrecisionKind, decode_b16, encode_b16, resolve_preset
from mixedprec_cfd.stencils import ddx1, ddx2
from mixedprec_cfd.tgv import compare_series, init_tgv, kinetic_energy, solenoidal_dissipation

import kernels_poly  # noqa: F401  (polynomial helpers live next to this file)

SPLITS = ("Divergence", "Feiereisen", "Blaisdell", "Kok", "KGP")


def D(cfg: SimConfig, ref: SimConfig) -> float:
    """Mean |eps_S - eps_S(ref)| over the 0.5-time samples."""
    return compare_series(harness.cached_run(cfg).records,
                          harness.cached_run(ref).records).mean_abs_diff


# 1 ---------------------------------------------------------------------------

def test_criterion_01_binary16_codec():
    t0 = time.perf_counter()
    bad = 0
    for bits in range(1 << 16):
        v = decode_b16(bits)
        if math.isnan(v):
            bad += not math.isnan(decode_b16(encode_b16(v)))
        else:
            bad += encode_b16(v) != bits
    fixed = (encode_b16(65520.0), encode_b16(2.0 ** -25), encode_b16(0.1))
    dt = time.perf_counter() - t0
    ok = bad == 0 and fixed == (0x7C00, 0x0000, 0x2E66) and dt < 1.0
    record_acceptance(1, ok, f"round-trip failures={bad}, encode(65520,2^-25,0.1)="
                      f"({fixed[0]:#06x},{fixed[1]:#06x},{fixed[2]:#06x}), {dt:.2f}s")
    assert ok


# 2 ---------------------------------------------------------------------------

def _sin_field(n, k):
    g = GridSpec(n)
    f = Field("f", "wk_arrays", PrecisionKind.B64, g)
    c = g.mesh()[2 - k]
    f.set_interior(np.broadcast_to(np.sin(c), g.shape))
    fill_halos_periodic(f)
    return f, np.broadcast_to(np.cos(c), g.shape), np.broadcast_to(-np.sin(c), g.shape)


def test_criterion_02_spatial_order():
    t0 = time.perf_counter()
    orders = []
    for k in range(3):
        e1, e2 = [], []
        for n in (16, 32, 64):
            f, d1x, d2x = _sin_field(n, k)
            e1.append(np.max(np.abs(ddx1(f, k) - d1x)))
            e2.append(np.max(np.abs(ddx2(f, k) - d2x)))
        for e in (e1, e2):
            orders += [math.log2(a / b) for a, b in zip(e, e[1:])]
    poly_err = kernels_poly.max_polynomial_error()
    dt = time.perf_counter() - t0
    ok = all(abs(p - 4.0) <= 0.2 for p in orders) and poly_err <= 1e-12 and dt < 10
    record_acceptance(2, ok, f"orders {min(orders):.3f}..{max(orders):.3f}, "
                      f"polynomial error {poly_err:.1e}, {dt:.2f}s")
    assert ok


# 3 ---------------------------------------------------------------------------

STATED_ONE_STEP = 0.9048320


def _one_step():
    return integrate_scalar(lambda y: -y, 1.0, 0.1, 1)[-1][0]


def _rational_one_step():
    # hand evaluation of the three low-storage updates in exact arithmetic
    A = (Fraction(0), Fraction(-5, 9), Fraction(-153, 128))
    B = (Fraction(1, 3), Fraction(15, 16), Fraction(8, 15))
    h, q, qt = Fraction(1, 10), Fraction(1), Fraction(0)
    for a, b in zip(A, B):
        qt = a * qt - h * q
        q = q + b * qt
    return float(q)


def test_criterion_03_temporal_order():
    t0 = time.perf_counter()
    errs = []
    for dt in (0.1, 0.05, 0.025):
        q = integrate_scalar(lambda y: -y, 1.0, dt, round(1 / dt))[-1][0]
        errs.append(abs(q - math.exp(-1)))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    y1, oracle = _one_step(), _rational_one_step()
    elapsed = time.perf_counter() - t0
    order_ok = all(abs(p - 3.0) <= 0.1 for p in orders)
    oracle_ok = abs(y1 - oracle) <= 1e-6
    stated_ok = abs(y1 - STATED_ONE_STEP) <= 1e-6
    record_acceptance(3, order_ok and oracle_ok and stated_ok and elapsed < 1,
                      f"orders {orders[0]:.3f},{orders[1]:.3f}; one step {y1:.8f} "
                      f"(hand oracle {oracle:.8f}, stated {STATED_ONE_STEP:.7f}, "
                      f"|diff| {abs(y1 - STATED_ONE_STEP):.2e}); {elapsed:.3f}s")
    assert order_ok and oracle_ok and elapsed < 1


@pytest.mark.xfail(strict=True, reason="stated 0.9048320 is 1.3e-6 off the third-order "
                                       "stability polynomial; see notes")
def test_criterion_03_stated_one_step_value():
    assert abs(_one_step() - STATED_ONE_STEP) <= 1e-6


# 4 ---------------------------------------------------------------------------

def test_criterion_04_initial_diagnostics():
    t0 = time.perf_counter()
    p = FlowParams(M=0.5, Re=800)
    k0 = kinetic_energy(init_tgv(GridSpec(32), p, resolve_preset("DP")))
    rel = {}
    for n in (32, 64):
        eps, _ = solenoidal_dissipation(init_tgv(GridSpec(n), p, resolve_preset("DP")), p)
        rel[n] = abs(eps - 9.375e-4) / 9.375e-4
    dt = time.perf_counter() - t0
    ok = abs(k0 - 0.125) <= 1e-12 and all(r <= 1e-4 for r in rel.values()) and dt < 5
    record_acceptance(4, ok, f"K(0)-0.125={k0 - 0.125:.1e}, eps_S(0) rel err n=32 "
                      f"{rel[32]:.2e}, n=64 {rel[64]:.2e}, {dt:.2f}s")
    assert ok


# 5-7, 12: viscous n=32 runs ------------------------------------------------------

BASE = SimConfig()   # n=32, M=0.5, Re=800, dt=0.005, t_end=20, Blaisdell, default, strict


def cfg(precision="DP", **kw):
    return dataclasses.replace(BASE, precision=precision, **kw)


@pytest.mark.slow
def test_criterion_05_viscous_tgv():
    res = harness.cached_run(cfg("DP"))
    recs = res.records
    ts = [r.t for r in recs]
    late = [r for r in recs if r.t >= 5 - 1e-9]
    mono = all(b.kinetic_energy <= a.kinetic_energy + 1e-10 for a, b in zip(late, late[1:]))
    peak = max(recs, key=lambda r: r.solenoidal_dissipation)
    ok = (not res.diverged and len(recs) == 41 and abs(ts[-1] - 20) < 1e-9 and mono
          and 5 < peak.t < 15)
    record_acceptance(5, ok, f"diverged={res.diverged}, samples={len(recs)}, K monotone on "
                      f"[5,20]={mono}, eps_S peak {peak.solenoidal_dissipation:.4e} at "
                      f"t={peak.t:g}, K(20)={recs[-1].kinetic_energy:.5f}")
    assert ok


@pytest.mark.slow
def test_criterion_06_precision_ordering():
    ref = cfg("DP")
    d = {p: D(cfg(p), ref) for p in ("HP", "HPSP", "SP", "SPDP")}
    ok = d["HP"] > 10 * d["HPSP"] and d["HPSP"] > d["SP"] > d["SPDP"] > 0
    record_acceptance(6, ok, "D " + ", ".join(f"{k}={v:.3e}" for k, v in d.items())
                      + f", HP/HPSP={d['HP'] / d['HPSP']:.1f}")
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="binary16 storage of the five Storesome primitives costs "
                                       "~18x D(SP) at n=32; see notes")
def test_criterion_07_storesome_accuracy():
    # binary16 storage with binary32 arithmetic: under strict emulation with
    # residual and work arrays both binary16 the two strategies coincide bitwise
    sr = dict(emulation="storeround")
    ref = cfg("DP", strategy="storesome")
    d_sp = D(cfg("SP", strategy="storesome"), ref)
    d_ss = D(cfg("HPSP", strategy="storesome", **sr), ref)
    d_def = D(cfg("HPSP", strategy="default", **sr), cfg("DP"))
    ok = d_ss <= 5 * d_sp and d_def > d_ss
    record_acceptance(7, ok, f"D(SP)={d_sp:.3e}, D_storesome(HPSP)={d_ss:.3e} "
                      f"(ratio {d_ss / d_sp:.2f}), D_default(HPSP)={d_def:.3e}")
    assert ok


# 8 ---------------------------------------------------------------------------

INVISCID = SimConfig(n=64, M=0.4, dt=0.004, t_end=20.0, viscous=False, strategy="storesome")


def _survival(res):
    return res.advance.divergence.t if res.diverged else math.inf


def _split_study(base, precision, emulation):
    out = {}
    for s in SPLITS:
        c = dataclasses.replace(base, split=s, precision=precision, emulation=emulation)
        out[s] = harness.cached_run(c)
    return out


def _k_drift(res):
    return max(abs(r.ke_normalized - 1) for r in res.records)


@pytest.mark.slow
def test_criterion_08_inviscid_split_forms():
    dp = _split_study(INVISCID, "DP", "strict")
    hp = _split_study(INVISCID, "HPSP", "storeround")
    small = dataclasses.replace(INVISCID, n=32)
    dp32 = _split_study(small, "DP", "strict")
    hp32 = _split_study(small, "HPSP", "strict")
    checks = []
    for name, study in (("DP64", dp), ("HPSP64", hp)):
        surv = {s: _survival(r) for s, r in study.items()}
        checks.append(surv["Divergence"] < 20)
        checks.append(not study["KGP"].diverged and _k_drift(study["KGP"]) < 0.05)
        checks += [surv[s] > surv["Divergence"] for s in ("Feiereisen", "Blaisdell", "Kok")]
    cls = {k: tuple(v[s].diverged for s in SPLITS)
           for k, v in (("DP64", dp), ("HPSP64", hp), ("DP32", dp32), ("HPSP32", hp32))}
    checks.append(cls["DP64"] == cls["HPSP64"])
    checks.append(cls["DP32"] == cls["HPSP32"])
    ok = all(checks)

    def fmt(study):
        return " ".join(f"{s}:{_survival(r):g}" for s, r in study.items())

    record_acceptance(8, ok, f"survival DP64[{fmt(dp)}] HPSP64-storeround[{fmt(hp)}] "
                      f"DP32[{fmt(dp32)}] HPSP32-strict[{fmt(hp32)}]; KGP |K/K0-1| DP "
                      f"{_k_drift(dp['KGP']):.2e} HPSP {_k_drift(hp['KGP']):.2e}")
    assert ok


# 9-10 ------------------------------------------------------------------------

# bytes per cell from field counts (q, rk, res: 5 each; wk: 17 default, 5 storesome)
def _hand_gain(preset, strategy):
    widths = {"DP": (8, 8, 8, 8), "SP": (4, 4, 4, 4), "HP": (2, 2, 2, 2), "SPDP": (8, 8, 4, 4),
              "HPSP": (4, 4, 2, 2), "SPDP-wk": (8, 8, 8, 4), "HPSP-res": (4, 4, 2, 4)}[preset]
    counts = (5, 5, 5, 17 if strategy == "default" else 5)
    return 8 * sum(counts) / sum(c * w for c, w in zip(counts, widths))


def test_criterion_09_memory_report():
    gains = {}
    ok = True
    for p in ("DP", "SP", "HP", "SPDP", "HPSP", "SPDP-wk", "HPSP-res"):
        for s in ("default", "storesome"):
            rep = harness.report(SimConfig(precision=p, strategy=s))
            gains[p, s] = rep["memory"]["gain"]
            ok &= gains[p, s] == _hand_gain(p, s)
            if s == "storesome":
                ok &= rep["memory"]["total_bytes"] < harness.report(
                    SimConfig(precision=p))["memory"]["total_bytes"]
    ok &= f"{gains['HP', 'default']:.2f}" == "4.00" and gains["SP", "storesome"] == 2.0
    record_acceptance(9, ok, f"gain HP={gains['HP', 'default']:.2f} SP={gains['SP', 'default']:.2f} "
                      f"SPDP={gains['SPDP', 'default']:.4f}/{gains['SPDP', 'storesome']:.4f} "
                      f"HPSP={gains['HPSP', 'default']:.4f}/{gains['HPSP', 'storesome']:.4f} "
                      "(default/storesome)")
    assert ok


def test_criterion_10_comm_model():
    vols = {p: harness.report(SimConfig(precision=p))["communication"]["per_class"]
            for p in ("DP", "SP", "HP")}
    ratios_ok = all(vols["DP"][c] == 2 * vols["SP"][c] == 4 * vols["HP"][c]
                    for c in vols["DP"])
    d = harness.report(SimConfig(precision="SPDP"))["communication"]["per_class"]
    s = harness.report(SimConfig(precision="SPDP", strategy="storesome"))["communication"][
        "per_class"]
    ok = ratios_ok and s["wk_arrays"] < d["wk_arrays"]
    record_acceptance(10, ok, f"DP:SP:HP q_vector bytes {vols['DP']['q_vector']}:"
                      f"{vols['SP']['q_vector']}:{vols['HP']['q_vector']}; wk bytes default "
                      f"{d['wk_arrays']} vs storesome {s['wk_arrays']}")
    assert ok


# 11 --------------------------------------------------------------------------

def test_criterion_11_determinism():
    configs = [
        SimConfig(n=16, t_end=0.5, dt=0.01, precision="DP"),
        SimConfig(n=16, t_end=0.5, dt=0.01, precision="HPSP", split="KGP"),
        SimConfig(n=16, t_end=0.5, dt=0.01, precision="HP", strategy="storesome"),
        SimConfig(n=16, t_end=0.5, dt=0.01, precision="HPSP", emulation="storeround",
                  strategy="storesome", viscous=False, split="Kok"),
    ]
    ok = True
    for c in configs:
        a = harness.run(c).csv()
        b = harness.run(c).csv()
        m = harness.run(dataclasses.replace(c, threads=4)).csv()
        ok &= a == b == m
    record_acceptance(11, ok, f"{len(configs)} configs: repeat and 1 vs 4 threads identical={ok}")
    assert ok


# 12 --------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the DP reference diverges at M=1.0 on n=32 with the "
                                       "Blaisdell split; see notes")
def test_criterion_12_sweep_properties():
    spec = harness.load_sweep("n = 32\nsweep.dt = 0.005, 0.0025\nsweep.M = 0.25, 0.5, 1.0\n"
                              "sweep.precisions = SPDP, HP, SP\n")
    res = harness.sweep(spec, harness.cached_run)
    bad = [c for c in spec.cells() if res.reference_diverged[c]]
    cells = [c for c in spec.cells() if c not in bad]
    spdp = [res.metric[c + ("SPDP",)] for c in cells]
    spread = max(spdp) / min(spdp) if spdp else math.nan
    hp_gt_sp = all(res.metric[c + ("HP",)] > res.metric[c + ("SP",)] for c in cells)
    ok = not bad and spread < 10 and hp_gt_sp
    table = " ".join(f"[dt={dt} M={m}: " + ",".join(f"{p}={res.metric[dt, m, p]:.2e}"
                                                      for p in spec.precisions) + "]"
                     for dt, m in cells)
    record_acceptance(12, ok, f"SPDP spread {spread:.2f}x over {len(cells)} usable cells, HP>SP "
                      f"in every usable cell={hp_gt_sp}; cells with diverged DP reference: "
                      f"{', '.join(f'dt={dt} M={m}' for dt, m in bad) or 'none'}; {table}")
    assert ok
