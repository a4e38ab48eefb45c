"""Low-storage three-stage Runge-Kutta advancement.

Each substep ``i`` performs::

    Qt = A[i] * Qt + dt * R      (rk_arrays precision)
    Q  = Q + B[i] * Qt           (q_vector precision)

with every operation rounded at the precision of the field being written.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .mesh import fill_halos_periodic
from .physics import FlowParams, ResidualEvaluator, ResidualStrategy, SplitCoefficients, State
from .precision import PrecisionConfig

__all__ = [
    "RKScheme",
    "WILLIAMSON3",
    "StepConfig",
    "KernelPlan",
    "kernel_plan",
    "rk_substep",
    "Divergence",
    "check_state",
    "AdvanceResult",
    "advance",
    "integrate_scalar",
]


@dataclass(frozen=True)
class RKScheme:
    A: Tuple[float, ...] = (0.0, -5.0 / 9.0, -153.0 / 128.0)
    B: Tuple[float, ...] = (1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0)

    @property
    def stages(self) -> int:
        return len(self.A)


WILLIAMSON3 = RKScheme()


@dataclass(frozen=True)
class StepConfig:
    """``dt``, iteration count and diagnostics sampling interval (iterations)."""

    dt: float
    n_iterations: int
    diagnostics_interval: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("time step must be positive", field="dt")
        if self.n_iterations < 0:
            raise ConfigurationError("iteration count must be >= 0", field="n_iterations")
        if self.diagnostics_interval < 1:
            raise ConfigurationError("diagnostics interval must be >= 1",
                                     field="diagnostics_interval")


@dataclass(frozen=True)
class KernelPlan:
    """Arithmetic code of each update kernel and the storage it reads."""

    rk_update: int
    q_update: int
    residual_storage: int
    rk_storage: int


def kernel_plan(config: PrecisionConfig) -> KernelPlan:
    return KernelPlan(
        rk_update=kernels.arith_for(config.rk_arrays, config.emulation),
        q_update=kernels.arith_for(config.q_vector, config.emulation),
        residual_storage=int(config.residuals),
        rk_storage=int(config.rk_arrays),
    )


def rk_substep(i: int, state: State, scheme: RKScheme, dt: float, threads: int = 1) -> None:
    """Apply substep ``i`` using the residual already stored in ``state.R``.

    The updates are pointwise, so they run over the whole padded arrays;
    halo contents are irrelevant and are marked stale afterwards.
    """
    mode = state.config.emulation
    a_i, b_i = scheme.A[i], scheme.B[i]
    for q, qt, r in zip(state.Q, state.Qtilde, state.R):
        ark = kernels.arith_for(qt.storage, mode)
        prev = None if a_i == 0.0 else qt.load(ark, halo=True)
        qt.store_padded(kernels.axpby(a_i, prev, dt, r.load(ark, halo=True), ark,
                                      threads=threads))
        aq = kernels.arith_for(q.storage, mode)
        acc = q.load(aq, halo=True).copy()
        kernels.accumulate(acc, b_i, qt.load(aq, halo=True), None, aq, threads)
        q.store_padded(acc)


@dataclass
class Divergence:
    """First detection of a non-finite or non-physical state."""

    iteration: int
    substep: int
    t: float
    field: str
    reason: str


def check_state(state: State) -> Optional[Tuple[str, str]]:
    """Cheap guard: non-finite values anywhere in Q, or nonpositive density."""
    with np.errstate(all="ignore"):
        for f in state.Q:
            x = f.interior
            hi, lo = x.max(), x.min()
            if not (np.isfinite(hi) and np.isfinite(lo)):
                return f.name, "non-finite value"
        if not state.Q[0].interior.min() > 0:
            return state.Q[0].name, "nonpositive density"
    return None


@dataclass
class AdvanceResult:
    samples: List = field(default_factory=list)
    divergence: Optional[Divergence] = None
    iterations: int = 0
    wall_time: float = 0.0

    @property
    def diverged(self) -> bool:
        return self.divergence is not None


def advance(state: State, params: FlowParams, split: SplitCoefficients, step: StepConfig,
            strategy=ResidualStrategy.DEFAULT, scheme: RKScheme = WILLIAMSON3,
            sample: Optional[Callable[[State, int], object]] = None,
            on_divergence: Optional[Callable[[State, Divergence], object]] = None,
            threads: int = 1) -> AdvanceResult:
    """Advance ``step.n_iterations`` iterations from ``state``.

    ``sample(state, it)`` is called at iteration 0, every
    ``diagnostics_interval`` iterations and at the end; its return values
    are collected.  On divergence the loop stops, ``on_divergence`` may add
    a final sample, and the event is returned rather than raised.
    """
    ev = ResidualEvaluator(state, params, split, strategy, threads)
    out = AdvanceResult()
    t0 = time.perf_counter()
    t_start = state.t
    if sample is not None:
        out.samples.append(sample(state, 0))
    for it in range(1, step.n_iterations + 1):
        for i in range(scheme.stages):
            state.fill_halos()
            ev.evaluate()
            rk_substep(i, state, scheme, step.dt, threads)
            bad = check_state(state)
            if bad is not None:
                state.t = t_start + it * step.dt
                out.divergence = Divergence(it, i, state.t, bad[0], bad[1])
                break
        out.iterations = it
        state.t = t_start + it * step.dt
        if out.divergence is not None:
            if on_divergence is not None:
                out.samples.append(on_divergence(state, out.divergence))
            break
        if sample is not None and (it % step.diagnostics_interval == 0 or it == step.n_iterations):
            out.samples.append(sample(state, it))
    out.wall_time = time.perf_counter() - t0
    return out


def integrate_scalar(f: Callable[[float], float], y0: float, dt: float, steps: int,
                     scheme: RKScheme = WILLIAMSON3) -> List[Tuple[float, float]]:
    """Run the scheme on a scalar ODE ``y' = f(y)`` in binary64.

    Returns ``(q, qt)`` after every substep; used for order checks.
    """
    q, qt = float(y0), 0.0
    history = []
    for _ in range(steps):
        for a, b in zip(scheme.A, scheme.B):
            qt = a * qt + dt * f(q)
            q = q + b * qt
            history.append((q, qt))
    return history
