"""Configuration, orchestration and reporting for Taylor-Green runs.

Config files are line based::

    # comment
    n = 32
    precision = SPDP
    precision.wk_arrays = B16        # per-class override
    precision.field.wk_T = B32       # per-field override
    split = KGP

Sweep files use the same keys plus ``sweep.dt``, ``sweep.M``,
``sweep.precisions`` (comma-separated lists) and ``sweep.reference``.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import math
import os
from pathlib import Path
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import ConfigurationError
from .integrate import AdvanceResult, Divergence, StepConfig, advance
from .mesh import (CommReport, GridSpec, MemoryReport, comm_volume_report, default_exchanges,
                   memory_report, write_snapshot)
from .physics import (FlowParams, ResidualEvaluator, ResidualStrategy, allocate_state,
                      field_names, split_preset)
from .precision import (ARRAY_CLASSES, EmulationMode, PrecisionConfig, parse_kind,
                        resolve_preset)
from .tgv import (ComparisonReport, DiagnosticsRecord, compare_series, diagnostics, init_tgv,
                  init_uniform)

__all__ = [
    "CSV_HEADER",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_DIVERGED",
    "SimConfig",
    "SweepSpec",
    "RunResult",
    "SweepResult",
    "load_config",
    "load_config_file",
    "load_sweep",
    "run",
    "cached_run",
    "compare",
    "sweep",
    "report",
    "write_csv",
    "read_csv",
    "format_csv",
    "summary_json",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2

CSV_HEADER = ("t", "kinetic_energy", "enstrophy", "solenoidal_dissipation", "ke_normalized",
              "diverged")

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """One simulation.  Defaults are a desk-scale Taylor-Green run.

    ``diagnostics_interval`` and ``snapshot_times`` are in time units.
    ``precision_classes`` and ``precision_fields`` hold ``(name, kind)``
    overrides applied on top of the ``precision`` preset.
    """

    n: int = 32
    M: float = 0.5
    Re: float = 800.0
    Pr: float = 0.72
    gamma: float = 1.4
    dt: float = 0.005
    t_end: Optional[float] = 20.0
    n_iterations: Optional[int] = None
    precision: str = "DP"
    precision_classes: Tuple[Tuple[str, str], ...] = ()
    precision_fields: Tuple[Tuple[str, str], ...] = ()
    emulation: str = "strict"
    split: str = "Blaisdell"
    strategy: str = "default"
    viscous: bool = True
    ke_weighting: str = "plain"
    diagnostics_interval: float = 0.5
    output: Optional[str] = None
    threads: int = 1
    snapshot_times: Tuple[float, ...] = ()
    snapshot_prefix: str = "snapshot"
    process_grid: Tuple[int, int, int] = (4, 1, 1)
    initial: str = "tgv"

    def __post_init__(self):
        self.validate()

    def validate(self) -> "SimConfig":
        if self.n < 8:
            raise ConfigurationError("grid needs at least 8 points per dimension", field="n")
        if not self.dt > 0:
            raise ConfigurationError("time step must be positive", field="dt")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1", field="threads")
        if self.initial not in ("tgv", "uniform"):
            raise ConfigurationError(f"unknown initial condition {self.initial!r}",
                                     field="initial")
        if self.ke_weighting not in ("plain", "density"):
            raise ConfigurationError(f"unknown weighting {self.ke_weighting!r}",
                                     field="ke_weighting")
        self.flow_params()
        known = field_names()
        for name, _ in self.precision_fields:
            if name not in known:
                raise ConfigurationError(f"unknown field {name!r} in per-field override",
                                         field=f"precision.field.{name}")
        self.precision_config()
        split_preset(self.split)
        ResidualStrategy.parse(self.strategy)
        self.iterations()
        self.sample_every()
        for t in self.snapshot_times:
            self._iteration_at(t, "snapshot_times")
        return self

    # -- derived objects -------------------------------------------------
    def flow_params(self) -> FlowParams:
        return FlowParams(M=self.M, Re=self.Re, Pr=self.Pr, gamma=self.gamma,
                          viscous=self.viscous)

    def emulation_mode(self) -> EmulationMode:
        try:
            return EmulationMode(self.emulation.strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown emulation mode {self.emulation!r}; expected "
                                     "strict or storeround", field="emulation") from None

    def precision_config(self) -> PrecisionConfig:
        cfg = resolve_preset(self.precision, self.emulation_mode())
        for cls, kind in self.precision_classes:
            if cls not in ARRAY_CLASSES:
                raise ConfigurationError(f"unknown array class {cls!r}",
                                         field=f"precision.{cls}")
            cfg = cfg.with_class(cls, parse_kind(kind))
        for name, kind in self.precision_fields:
            cfg = cfg.with_override(name, parse_kind(kind))
        return cfg

    def iterations(self) -> int:
        if self.n_iterations is None and self.t_end is None:
            raise ConfigurationError("give t_end or n_iterations", field="t_end")
        if self.n_iterations is not None:
            if self.n_iterations < 0:
                raise ConfigurationError("must be >= 0", field="n_iterations")
            if self.t_end is not None and abs(self.n_iterations * self.dt - self.t_end) > self.dt:
                raise ConfigurationError(
                    f"n_iterations*dt = {self.n_iterations * self.dt!r} does not match "
                    f"t_end = {self.t_end!r} within one dt", field="n_iterations")
            return int(self.n_iterations)
        if self.t_end < 0:
            raise ConfigurationError("must be >= 0", field="t_end")
        return int(round(self.t_end / self.dt))

    def _iteration_at(self, t: float, name: str) -> int:
        k = int(round(t / self.dt))
        if k < 0 or abs(k * self.dt - t) > _TIME_TOL * max(1.0, abs(t)):
            raise ConfigurationError(f"{t!r} is not a nonnegative multiple of dt={self.dt!r}",
                                     field=name)
        return k

    def sample_every(self) -> int:
        k = self._iteration_at(self.diagnostics_interval, "diagnostics_interval")
        if k < 1:
            raise ConfigurationError("must be at least one time step",
                                     field="diagnostics_interval")
        return k

    def key(self) -> "SimConfig":
        """The config with output-only settings cleared (for caching)."""
        return dataclasses.replace(self, output=None, snapshot_times=(),
                                   snapshot_prefix="snapshot")


# -- config text ------------------------------------------------------------

def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _str_list(text: str) -> Tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _int_triple(text: str) -> Tuple[int, int, int]:
    parts = tuple(int(x) for x in text.replace("x", ",").split(",") if x.strip())
    if len(parts) != 3:
        raise ValueError("expected three integers")
    return parts


_SCALAR_KEYS: Dict[str, Callable[[str], object]] = {
    "n": int,
    "M": float,
    "Re": float,
    "Pr": float,
    "gamma": float,
    "dt": float,
    "t_end": float,
    "n_iterations": int,
    "precision": str.strip,
    "emulation": str.strip,
    "split": str.strip,
    "strategy": str.strip,
    "viscous": _to_bool,
    "ke_weighting": str.strip,
    "diagnostics_interval": float,
    "output": str.strip,
    "threads": int,
    "snapshot_times": _float_list,
    "snapshot_prefix": str.strip,
    "process_grid": _int_triple,
    "initial": str.strip,
}

_SWEEP_KEYS: Dict[str, Callable[[str], object]] = {
    "sweep.dt": _float_list,
    "sweep.M": _float_list,
    "sweep.precisions": _str_list,
    "sweep.reference": str.strip,
    "sweep.output": str.strip,
}


def _parse_lines(text: str, extra: Optional[Dict[str, Callable]] = None):
    """``(values, extras)`` parsed from ``key = value`` lines."""
    values: Dict[str, object] = {}
    extras: Dict[str, object] = {}
    classes: Dict[str, str] = {}
    fields: Dict[str, str] = {}
    seen: Dict[str, int] = {}
    extra = extra or {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, val = (s.strip() for s in line.partition("="))
        if not key:
            raise ConfigurationError("missing key", line=lineno)
        if key in seen:
            raise ConfigurationError(f"duplicate key (first set on line {seen[key]})",
                                     field=key, line=lineno)
        seen[key] = lineno
        try:
            if key in _SCALAR_KEYS:
                values[key] = _SCALAR_KEYS[key](val)
            elif key in extra:
                extras[key] = extra[key](val)
            elif key.startswith("precision.field."):
                name = key[len("precision.field."):]
                if not name:
                    raise ValueError("missing field name")
                parse_kind(val)
                fields[name] = val.strip().upper()
            elif key.startswith("precision."):
                cls = key[len("precision."):]
                if cls not in ARRAY_CLASSES:
                    raise ValueError(f"unknown array class {cls!r}")
                parse_kind(val)
                classes[cls] = val.strip().upper()
            else:
                raise ConfigurationError("unknown key", field=key, line=lineno)
        except ConfigurationError as exc:
            if exc.line is None:
                raise ConfigurationError(str(exc), field=None, line=lineno) from None
            raise
        except ValueError as exc:
            raise ConfigurationError(str(exc), field=key, line=lineno) from None
    if classes:
        values["precision_classes"] = tuple(sorted(classes.items()))
    if fields:
        values["precision_fields"] = tuple(sorted(fields.items()))
    return values, extras


def _build(values: Dict[str, object]) -> SimConfig:
    if "n_iterations" in values and "t_end" not in values:
        values = dict(values, t_end=None)
    return SimConfig(**values)


def load_config(text: str) -> SimConfig:
    """Parse config text; missing keys take the :class:`SimConfig` defaults."""
    values, _ = _parse_lines(text)
    return _build(values)


def load_config_file(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


# -- diagnostics CSV ----------------------------------------------------------

def format_csv(records: Sequence[DiagnosticsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([repr(float(r.t)), repr(float(r.kinetic_energy)), repr(float(r.enstrophy)),
                    repr(float(r.solenoidal_dissipation)), repr(float(r.ke_normalized)),
                    "true" if r.diverged else "false"])
    return buf.getvalue()


def write_csv(records: Sequence[DiagnosticsRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(records))


def read_csv(path) -> List[DiagnosticsRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ConfigurationError(f"{path}: not a diagnostics CSV")
    out = []
    for k, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            t, ke, ens, eps, kn = (float(x) for x in row[:5])
            out.append(DiagnosticsRecord(t, ke, ens, eps, kn, _to_bool(row[5])))
        except (ValueError, IndexError) as exc:
            raise ConfigurationError(f"{path}: bad row: {exc}", line=k) from None
    return out


# -- run -------------------------------------------------------------------

@dataclass
class RunResult:
    config: SimConfig
    records: List[DiagnosticsRecord]
    advance: AdvanceResult
    memory: MemoryReport
    comm: CommReport

    @property
    def diverged(self) -> bool:
        return self.advance.diverged

    @property
    def exit_code(self) -> int:
        return EXIT_DIVERGED if self.diverged else EXIT_OK

    def csv(self) -> str:
        return format_csv(self.records)

    def summary(self) -> dict:
        adv = self.advance
        div = adv.divergence
        return {
            "iterations": adv.iterations,
            "wall_time_s": adv.wall_time,
            "wall_time_per_iteration_s": adv.wall_time / adv.iterations if adv.iterations else 0.0,
            "samples": len(self.records),
            "diverged": self.diverged,
            "divergence_time": div.t if div else None,
            "divergence": dataclasses.asdict(div) if div else None,
            "memory": self.memory.as_dict(),
            "communication": self.comm.as_dict(),
        }


def _exchanges(strategy: ResidualStrategy) -> Dict[str, int]:
    return default_exchanges(strategy is ResidualStrategy.STORESOME)


def run(config: SimConfig, output: Optional[str] = None) -> RunResult:
    """Advance the configured case and sample diagnostics in binary64.

    Samples are taken at t = 0, every ``diagnostics_interval`` and at the
    end.  A divergence stops the run after one final sample flagged as
    diverged.  The CSV goes to ``output`` (or ``config.output``) if set.
    """
    config.validate()
    params = config.flow_params()
    prec = config.precision_config()
    strategy = ResidualStrategy.parse(config.strategy)
    split = split_preset(config.split)
    grid = GridSpec(config.n)
    if config.initial == "tgv":
        state = init_tgv(grid, params, prec)
    else:
        state = init_uniform(grid, params, prec)
    every = config.sample_every()
    n_it = config.iterations()
    snaps = {config._iteration_at(t, "snapshot_times"): t for t in config.snapshot_times}
    th = config.threads
    k0 = []

    def measure(st, diverged=False):
        rec = diagnostics(st, params, k0[0] if k0 else None, config.ke_weighting, th)
        if not k0:
            k0.append(rec.kinetic_energy)
        if diverged and not rec.diverged:
            rec = dataclasses.replace(rec, diverged=True)
        return rec

    def sample(st, it):
        if it in snaps:
            write_snapshot(f"{config.snapshot_prefix}_t{snaps[it]:g}.bin", st.Q)
        if it % every == 0 or it == n_it:
            return measure(st)
        return None

    adv = advance(state, params, split, StepConfig(config.dt, n_it, 1), strategy,
                  sample=sample, on_divergence=lambda st, d: measure(st, True), threads=th)
    records = [r for r in adv.samples if r is not None]
    result = RunResult(config, records, adv, memory_report(state.registry),
                       comm_volume_report(state.registry, config.process_grid,
                                          _exchanges(strategy)))
    path = output or config.output
    if path:
        write_csv(records, path)
    return result


_NOT_NUMERIC = ("cli.py", "__init__.py")


@functools.lru_cache(maxsize=None)
def code_fingerprint() -> str:
    """Hash of the package sources and compiled extension, for cache keys."""
    h = hashlib.sha256()
    root = Path(__file__).resolve().parent
    for p in sorted(root.rglob("*")):
        if p.suffix in (".py", ".pyx", ".h", ".so") and p.is_file() \
                and p.relative_to(root).as_posix() not in _NOT_NUMERIC:
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    from . import kernels
    h.update(kernels.BACKEND.encode())
    return h.hexdigest()[:16]


def _cache_path(directory, config: SimConfig) -> Path:
    key = hashlib.sha256(repr(config.key()).encode()).hexdigest()[:24]
    return Path(directory) / f"{code_fingerprint()}-{key}.json"


def _dump(result: RunResult) -> dict:
    adv = result.advance
    return {
        "config": repr(result.config.key()),
        "records": [dataclasses.astuple(r) for r in result.records],
        "divergence": dataclasses.asdict(adv.divergence) if adv.divergence else None,
        "iterations": adv.iterations,
        "wall_time": adv.wall_time,
        "memory": [result.memory.per_class, result.memory.counts, result.memory.total_bytes,
                   result.memory.baseline_bytes],
        "comm": [result.comm.per_class, list(result.comm.process_grid),
                 result.comm.exchange_depth],
    }


def _restore(config: SimConfig, d: dict) -> RunResult:
    records = [DiagnosticsRecord(*r) for r in d["records"]]
    div = Divergence(**d["divergence"]) if d["divergence"] else None
    adv = AdvanceResult(list(records), div, d["iterations"], d["wall_time"])
    per, counts, total, base = d["memory"]
    cper, pg, depth = d["comm"]
    return RunResult(config, records, adv, MemoryReport(per, counts, total, base),
                     CommReport(cper, tuple(pg), depth))


@functools.lru_cache(maxsize=None)
def _cached(key: SimConfig) -> RunResult:
    directory = os.environ.get("MIXEDPREC_CFD_RUN_CACHE")
    if directory:
        path = _cache_path(directory, key)
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                return _restore(key, json.load(fh))
    res = run(key)
    if directory:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(_dump(res), fh)
        os.replace(tmp, path)
    return res


def cached_run(config: SimConfig) -> RunResult:
    """:func:`run` memoised on the config (output settings ignored).

    If ``MIXEDPREC_CFD_RUN_CACHE`` names a directory, results are also kept
    there, keyed by the config and a fingerprint of the package code.
    """
    return _cached(config.key())


def compare(candidate, reference) -> ComparisonReport:
    """Compare two diagnostics CSV files (or record lists) on solenoidal dissipation."""
    cand = read_csv(candidate) if isinstance(candidate, (str, os.PathLike)) else candidate
    ref = read_csv(reference) if isinstance(reference, (str, os.PathLike)) else reference
    return compare_series(cand, ref)


# -- sweep -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    dts: Tuple[float, ...]
    machs: Tuple[float, ...]
    precisions: Tuple[str, ...]
    reference: str = "DP"
    output: Optional[str] = None

    def cells(self) -> List[Tuple[float, float]]:
        return [(dt, m) for dt in self.dts for m in self.machs]

    def cell_config(self, dt: float, mach: float, precision: str) -> SimConfig:
        t_end = self.base.t_end
        if t_end is None:
            t_end = self.base.iterations() * self.base.dt
        return dataclasses.replace(self.base, dt=dt, M=mach, t_end=t_end, n_iterations=None,
                                   precision=precision, precision_classes=(),
                                   precision_fields=(), output=None, snapshot_times=())


def load_sweep(text: str) -> SweepSpec:
    values, extras = _parse_lines(text, _SWEEP_KEYS)
    base = _build(values)
    precisions = extras.get("sweep.precisions")
    if not precisions:
        raise ConfigurationError("a sweep needs at least one precision", field="sweep.precisions")
    for p in precisions:
        resolve_preset(p)
    reference = extras.get("sweep.reference", "DP")
    resolve_preset(reference)
    spec = SweepSpec(base, extras.get("sweep.dt", (base.dt,)), extras.get("sweep.M", (base.M,)),
                     precisions, reference, extras.get("sweep.output"))
    for dt, m in spec.cells():
        for p in (reference,) + precisions:
            spec.cell_config(dt, m, p)
    return spec


@dataclass
class SweepResult:
    spec: SweepSpec
    metric: Dict[Tuple[float, float, str], float] = field(default_factory=dict)
    diverged: Dict[Tuple[float, float, str], bool] = field(default_factory=dict)
    reference_diverged: Dict[Tuple[float, float], bool] = field(default_factory=dict)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        pre = self.spec.precisions
        w.writerow(["dt", "M"] + list(pre) + [f"{p}_diverged" for p in pre]
                   + ["reference_diverged"])
        flag = {True: "true", False: "false"}
        for dt, m in self.spec.cells():
            w.writerow([repr(dt), repr(m)] + [repr(self.metric[dt, m, p]) for p in pre]
                       + [flag[self.diverged[dt, m, p]] for p in pre]
                       + [flag[self.reference_diverged[dt, m]]])
        return buf.getvalue()


def sweep(spec: SweepSpec, runner: Callable[[SimConfig], RunResult] = run) -> SweepResult:
    """Mean absolute eps_S difference of each preset against the reference, per cell.

    A diverged candidate scores ``inf`` and is flagged.  When the reference
    itself diverges every preset in that cell scores ``inf`` and the cell
    carries ``reference_diverged``.
    """
    out = SweepResult(spec)
    for dt, m in spec.cells():
        ref = runner(spec.cell_config(dt, m, spec.reference))
        out.reference_diverged[dt, m] = ref.diverged
        for p in spec.precisions:
            res = runner(spec.cell_config(dt, m, p))
            if ref.diverged:
                out.metric[dt, m, p] = math.inf
                out.diverged[dt, m, p] = res.diverged
                continue
            rep = compare_series(res.records, ref.records)
            out.metric[dt, m, p] = rep.mean_abs_diff
            out.diverged[dt, m, p] = res.diverged or rep.candidate_diverged
    if spec.output:
        with open(spec.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(out.csv())
    return out


# -- report ----------------------------------------------------------------

def report(config: SimConfig) -> dict:
    """Memory census and modelled halo traffic, without running.

    Fields are allocated but never written, so the operating system does
    not commit their pages.
    """
    config.validate()
    params = config.flow_params()
    strategy = ResidualStrategy.parse(config.strategy)
    state = allocate_state(GridSpec(config.n), config.precision_config())
    ResidualEvaluator(state, params, split_preset(config.split), strategy, config.threads)
    mem = memory_report(state.registry)
    comm = comm_volume_report(state.registry, config.process_grid, _exchanges(strategy))
    baseline = allocate_state(GridSpec(config.n), resolve_preset("DP"))
    ResidualEvaluator(baseline, params, split_preset(config.split), strategy, config.threads)
    comm_dp = comm_volume_report(baseline.registry, config.process_grid, _exchanges(strategy))
    return {
        "precision": config.precision_config().classes(),
        "strategy": strategy.value,
        "memory": mem.as_dict(),
        "communication": comm.as_dict(),
        "communication_gain": (comm_dp.total_bytes / comm.total_bytes
                               if comm.total_bytes else 1.0),
    }


def summary_json(obj) -> str:
    def enc(x):
        if hasattr(x, "name"):
            return x.name
        raise TypeError(type(x).__name__)
    return json.dumps(obj, indent=2, sort_keys=True, default=enc)
