"""Taylor-Green vortex setup, diagnostics and run comparison.

Diagnostics are always evaluated in binary64 from the stored
conservatives, so differences between runs reflect the solver state only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ComparisonError, ConfigurationError
from .mesh import HALO, GridSpec, reduce_sum
from .physics import FlowParams, State, allocate_state
from .precision import PrecisionConfig
from .stencils import COEFFS

__all__ = [
    "DiagnosticsRecord",
    "ComparisonReport",
    "init_tgv",
    "init_uniform",
    "kinetic_energy",
    "solenoidal_dissipation",
    "diagnostics",
    "compare_series",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    kinetic_energy: float
    enstrophy: float
    solenoidal_dissipation: float
    ke_normalized: float
    diverged: bool = False


@dataclass
class ComparisonReport:
    """Sample-wise ``|eps_S(candidate) - eps_S(reference)|``."""

    times: List[float]
    abs_diff: List[float]
    mean_abs_diff: float
    max_abs_diff: float
    candidate_diverged: bool = False

    def as_dict(self) -> dict:
        return {"times": list(self.times), "abs_diff": list(self.abs_diff),
                "mean_abs_diff": self.mean_abs_diff, "max_abs_diff": self.max_abs_diff,
                "candidate_diverged": self.candidate_diverged}


def _assemble(state: State, rho, u, v, w, p, params: FlowParams):
    rhoE = p / params.gm1 + 0.5 * rho * (u * u + v * v + w * w)
    for f, vals in zip(state.Q, (rho, rho * u, rho * v, rho * w, rhoE)):
        f.set_interior(vals)
    state.fill_halos()
    return state


def init_tgv(grid: GridSpec, params: FlowParams, config: PrecisionConfig,
             registry=None) -> State:
    """Taylor-Green vortex in the ``(2 pi)^3`` periodic box.

    Fields are evaluated in binary64 and rounded once into storage.
    """
    if abs(grid.domain_length - 2.0 * math.pi) > 1e-12:
        raise ConfigurationError("the Taylor-Green setup needs a 2*pi periodic box",
                                 field="domain_length")
    state = allocate_state(grid, config, registry)
    z, y, x = grid.mesh()
    u = np.sin(x) * np.cos(y) * np.cos(z)
    v = -np.cos(x) * np.sin(y) * np.cos(z)
    w = np.zeros(grid.shape)
    p = 1.0 / params.gamma_m2 + (np.cos(2 * x) + np.cos(2 * y)) * (2.0 + np.cos(2 * z)) / 16.0
    rho = params.gamma_m2 * p
    return _assemble(state, rho, u, v, w, p, params)


def init_uniform(grid: GridSpec, params: FlowParams, config: PrecisionConfig,
                 velocity=(0.0, 0.0, 0.0), rho: float = 1.0, p: Optional[float] = None,
                 registry=None) -> State:
    """Uniform state; ``p`` defaults to ``1/(gamma M^2)`` so that ``T = 1``."""
    state = allocate_state(grid, config, registry)
    p = 1.0 / params.gamma_m2 if p is None else p
    ones = np.ones(grid.shape)
    return _assemble(state, rho * ones, velocity[0] * ones, velocity[1] * ones,
                     velocity[2] * ones, p * ones, params)


def _velocities(state: State):
    rho = state.Q[0].values()
    return [state.Q[k].values() / rho for k in (1, 2, 3)], rho


def kinetic_energy(state: State, weighting: str = "plain", threads: int = 1) -> float:
    """Volume-averaged ``1/2 |u|^2`` (``plain``) or ``1/2 rho |u|^2`` (``density``)."""
    grid = state.grid
    with np.errstate(all="ignore"):
        (u, v, w), rho = _velocities(state)
        k = 0.5 * (u * u + v * v + w * w)
        if weighting == "density":
            k = rho * k
        elif weighting != "plain":
            raise ConfigurationError(f"unknown kinetic-energy weighting {weighting!r}",
                                     field="ke_weighting")
    return reduce_sum(k, threads) * grid.h ** 3 / grid.volume


def _ddx(a: np.ndarray, direction: int, h: float) -> np.ndarray:
    pad = np.pad(a, HALO, mode="wrap")
    return kernels.d1(pad, 2 - direction, COEFFS.first_scale(h), kernels.F64, HALO)


def solenoidal_dissipation(state: State, params: FlowParams, threads: int = 1):
    """``(eps_S, enstrophy)`` with enstrophy the volume average of ``w.w``."""
    grid = state.grid
    h = grid.h
    with np.errstate(all="ignore"):
        (u, v, w), _ = _velocities(state)
        wx = _ddx(w, 1, h) - _ddx(v, 2, h)
        wy = _ddx(u, 2, h) - _ddx(w, 0, h)
        wz = _ddx(v, 0, h) - _ddx(u, 1, h)
        ens = reduce_sum(wx * wx + wy * wy + wz * wz, threads) * h ** 3 / grid.volume
    return ens / params.Re, ens


def diagnostics(state: State, params: FlowParams, k0: Optional[float] = None,
                weighting: str = "plain", threads: int = 1) -> DiagnosticsRecord:
    k = kinetic_energy(state, weighting, threads)
    eps, ens = solenoidal_dissipation(state, params, threads)
    k0 = k if k0 is None else k0
    kn = k / k0 if k0 else math.nan
    diverged = not all(math.isfinite(x) for x in (k, ens))
    return DiagnosticsRecord(state.t, k, ens, eps, kn, diverged)


def compare_series(candidate: Sequence[DiagnosticsRecord],
                   reference: Sequence[DiagnosticsRecord],
                   atol_time: float = 1e-9) -> ComparisonReport:
    """Compare solenoidal dissipation sample by sample.

    A candidate that diverged (a flagged or non-finite sample, or a series
    that stops early) scores ``inf``.  Otherwise the two series must share
    their sample times.
    """
    cand, ref = list(candidate), list(reference)
    if not ref:
        raise ComparisonError("reference series is empty")
    if any(r.diverged for r in ref):
        raise ComparisonError("reference series diverged")
    diverged = any(c.diverged for c in cand) or len(cand) < len(ref)
    if diverged:
        n = min(len(cand), len(ref))
        for c, r in zip(cand[:n], ref[:n]):
            if not c.diverged and abs(c.t - r.t) > atol_time:
                raise ComparisonError(f"sample times differ: {c.t!r} vs {r.t!r}")
        return ComparisonReport([r.t for r in ref], [math.inf] * len(ref), math.inf, math.inf,
                                True)
    if len(cand) != len(ref):
        raise ComparisonError(f"sample counts differ: {len(cand)} vs {len(ref)}")
    diffs = []
    for c, r in zip(cand, ref):
        if abs(c.t - r.t) > atol_time:
            raise ComparisonError(f"sample times differ: {c.t!r} vs {r.t!r}")
        diffs.append(abs(c.solenoidal_dissipation - r.solenoidal_dissipation))
    mean = math.fsum(diffs) / len(diffs)
    return ComparisonReport([r.t for r in ref], diffs, mean, max(diffs), False)
