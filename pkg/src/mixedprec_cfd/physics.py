"""Compressible Navier-Stokes residual with split convective forms.

Non-dimensional ideal-gas equations with constant viscosity.  The
convective term ``d(rho u_j phi)/dx_j`` for ``phi`` in ``(1, u, v, w, E)``
is expanded into seven weighted derivative products (see
:class:`SplitCoefficients`); pressure, viscous and heat-flux terms stay in
divergence form.

Every kernel computes at the storage precision of the field it writes
(the widest one if it writes several).  Inputs are converted on load.
Two staging strategies are offered:

``default``
    primitives and all velocity/temperature gradients are stored in
    work arrays, so they are rounded to the work-array precision;
``storesome``
    only ``u, v, w, p, T`` are stored and every derivative is evaluated
    inside the residual kernel at its compute precision.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import ConfigurationError, HaloStaleError
from .mesh import Field, FieldRegistry, GridSpec, allocate_field, fill_halos_periodic
from .precision import EmulationMode, PrecisionConfig, PrecisionKind
from .stencils import COEFFS, ddx1

__all__ = [
    "FlowParams",
    "SplitCoefficients",
    "SPLIT_NAMES",
    "split_preset",
    "ResidualStrategy",
    "State",
    "Q_NAMES",
    "allocate_state",
    "primitives_from_conservatives",
    "convective_split",
    "ResidualEvaluator",
    "residual",
]


@dataclass(frozen=True)
class FlowParams:
    """Reference parameters of the non-dimensional equations.

    Parameters
    ----------
    M : float
        Reference Mach number.
    Re : float
        Reynolds number.
    Pr : float
        Prandtl number.
    gamma : float
        Ratio of specific heats.
    viscous : bool
        Include viscous stress and heat conduction.
    """

    M: float = 0.5
    Re: float = 800.0
    Pr: float = 0.72
    gamma: float = 1.4
    viscous: bool = True

    def __post_init__(self):
        if not self.M > 0:
            raise ConfigurationError("Mach number must be positive", field="M")
        if self.viscous and not self.Re > 0:
            raise ConfigurationError("Reynolds number must be positive", field="Re")
        if not self.Pr > 0:
            raise ConfigurationError("Prandtl number must be positive", field="Pr")
        if not self.gamma > 1:
            raise ConfigurationError("gamma must exceed 1", field="gamma")

    @property
    def gm1(self) -> float:
        return self.gamma - 1.0

    @property
    def gamma_m2(self) -> float:
        return self.gamma * self.M * self.M

    @property
    def inv_re(self) -> float:
        return 1.0 / self.Re

    @property
    def conductivity(self) -> float:
        """Heat-flux coefficient ``1/((gamma-1) M^2 Re Pr)``."""
        return 1.0 / (self.gm1 * self.M * self.M * self.Re * self.Pr)


_TERM_NAMES = ("alpha", "beta_rho", "beta_u", "beta_phi", "gamma_rho", "gamma_u", "gamma_phi")


@dataclass(frozen=True)
class SplitCoefficients:
    """Weights of the seven-term expansion of ``d(rho u phi)/dx``.

    ``alpha d(rho u phi) + beta_rho rho d(u phi) + beta_u u d(rho phi)
    + beta_phi phi d(rho u) + gamma_rho u phi d(rho) + gamma_u rho phi d(u)
    + gamma_phi rho u d(phi)``, for each direction.
    """

    alpha: float = 1.0
    beta_rho: float = 0.0
    beta_u: float = 0.0
    beta_phi: float = 0.0
    gamma_rho: float = 0.0
    gamma_u: float = 0.0
    gamma_phi: float = 0.0
    name: str = "custom"

    def consistency_sums(self) -> Tuple[float, float, float]:
        """Weights seen by the ``d rho``, ``d u`` and ``d phi`` parts; each must be 1."""
        return (self.alpha + self.beta_u + self.beta_phi + self.gamma_rho,
                self.alpha + self.beta_rho + self.beta_phi + self.gamma_u,
                self.alpha + self.beta_rho + self.beta_u + self.gamma_phi)

    def validate(self) -> "SplitCoefficients":
        sums = self.consistency_sums()
        if any(abs(s - 1.0) > 1e-12 for s in sums):
            raise ConfigurationError(f"inconsistent split coefficients: sums {sums}", field="split")
        return self

    def terms(self) -> Tuple[float, ...]:
        return tuple(getattr(self, t) for t in _TERM_NAMES)


_SPLITS = {
    "divergence": SplitCoefficients(alpha=1.0, name="Divergence"),
    "feiereisen": SplitCoefficients(alpha=0.5, beta_phi=0.5, gamma_phi=0.5, name="Feiereisen"),
    "blaisdell": SplitCoefficients(alpha=0.5, beta_u=0.5, gamma_u=0.5, name="Blaisdell"),
    "kok": SplitCoefficients(alpha=0.5, beta_rho=0.5, gamma_rho=0.5, name="Kok"),
    "kgp": SplitCoefficients(*([0.25] * 7), name="KGP"),
}
SPLIT_NAMES = tuple(s.name for s in _SPLITS.values())


def split_preset(name: str) -> SplitCoefficients:
    """Named split form: Divergence, Feiereisen, Blaisdell, Kok or KGP."""
    try:
        return _SPLITS[name.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"unknown split form {name!r}; expected one of "
                                 f"{', '.join(SPLIT_NAMES)}", field="split") from None


class ResidualStrategy(enum.Enum):
    DEFAULT = "default"
    STORESOME = "storesome"

    @classmethod
    def parse(cls, text) -> "ResidualStrategy":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown strategy {text!r}; expected default or storesome",
                                     field="strategy") from None


Q_NAMES = ("rho", "rhou", "rhov", "rhow", "rhoE")


@dataclass
class State:
    """Conservatives ``Q``, Runge-Kutta temporaries and residuals."""

    grid: GridSpec
    config: PrecisionConfig
    registry: FieldRegistry
    Q: List[Field]
    Qtilde: List[Field]
    R: List[Field]
    t: float = 0.0
    _evaluators: Dict = field(default_factory=dict, repr=False)

    def fill_halos(self):
        for f in self.Q:
            fill_halos_periodic(f)


def allocate_state(grid: GridSpec, config: PrecisionConfig,
                   registry: Optional[FieldRegistry] = None) -> State:
    registry = registry if registry is not None else FieldRegistry(grid)
    Q = [allocate_field(registry, n, "q_vector", grid, config) for n in Q_NAMES]
    Qt = [allocate_field(registry, "qt_" + n, "rk_arrays", grid, config) for n in Q_NAMES]
    R = [allocate_field(registry, "res_" + n, "residuals", grid, config) for n in Q_NAMES]
    return State(grid, config, registry, Q, Qt, R)


def _arith(fields: Sequence[Field], mode: EmulationMode) -> int:
    return kernels.arith_for(max(f.storage for f in fields), mode)


def _primitive_arrays(rho, m, rhoE, params: FlowParams, arith: int, threads: int = 1):
    """Primitive variables from conservative carriers, every operation rounded."""
    op = kernels.binop
    out = {}
    u = [op("div", mi, rho, arith, threads=threads) for mi in m]
    q2 = op("mul", u[0], u[0], arith, threads=threads)
    q2 = op("add", q2, op("mul", u[1], u[1], arith, threads=threads), arith, out=q2, threads=threads)
    q2 = op("add", q2, op("mul", u[2], u[2], arith, threads=threads), arith, out=q2, threads=threads)
    E = op("div", rhoE, rho, arith, threads=threads)
    e = op("sub", E, kernels.scale(q2, 0.5, arith, threads=threads), arith, threads=threads)
    p = kernels.scale(op("mul", rho, e, arith, threads=threads), params.gm1, arith, threads=threads)
    T = op("div", kernels.scale(p, params.gamma_m2, arith, threads=threads), rho, arith,
           threads=threads)
    out.update(u=u[0], v=u[1], w=u[2], p=p, T=T, e=e, E=E)
    return out


def primitives_from_conservatives(Q: Sequence[Field], params: FlowParams,
                                  compute: PrecisionKind = PrecisionKind.B64,
                                  mode: EmulationMode = EmulationMode.STRICT) -> Dict[str, np.ndarray]:
    """Interior ``u, v, w, p, T, e`` (and ``E``) as carriers at ``compute``.

    Nonpositive density is not an error here: it yields non-finite or
    negative values that the divergence monitor reports.
    """
    if isinstance(Q, State):
        Q = Q.Q
    arith = kernels.arith_for(compute, mode)
    rho, m0, m1, m2, rhoE = (f.load(arith) for f in Q)
    return _primitive_arrays(rho, (m0, m1, m2), rhoE, params, arith)


class _Workspace:
    """Per-evaluation cache of padded inputs, products and derivatives.

    Names: ``rho m0 m1 m2 rhoE`` (conservatives), ``u0 u1 u2 p T E``
    (primitives) and ``a*b`` for products.
    """

    def __init__(self, grid: GridSpec, arith: int, threads: int = 1):
        self.grid = grid
        self.arith = arith
        self.threads = threads
        self.halo = grid.halo_depth
        self.c1 = COEFFS.first_scale(grid.h)
        self.c2 = COEFFS.second_scale(grid.h)
        self.padded: Dict[str, np.ndarray] = {}
        self._inner: Dict[str, np.ndarray] = {}
        self._d: Dict[tuple, np.ndarray] = {}
        self.grad: Dict[Tuple[int, int], np.ndarray] = {}
        self.grad_padded: Dict[Tuple[int, int], np.ndarray] = {}

    def put(self, name: str, padded: np.ndarray):
        self.padded[name] = padded

    def inner(self, name: str) -> np.ndarray:
        a = self._inner.get(name)
        if a is None:
            h, n = self.halo, self.grid.n
            a = np.ascontiguousarray(self.padded[name][h:h + n, h:h + n, h:h + n])
            self._inner[name] = a
        return a

    def product(self, a: str, b: str) -> str:
        a, b = sorted((a, b))  # multiplication commutes bitwise
        name = f"{a}*{b}"
        if name not in self.padded:
            self.padded[name] = kernels.binop("mul", self.padded[a], self.padded[b], self.arith,
                                              threads=self.threads)
        return name

    def d1(self, name: str, j: int, margin: int = 0) -> np.ndarray:
        key = (1, name, j, margin)
        d = self._d.get(key)
        if d is None:
            d = kernels.d1(self.padded[name], 2 - j, self.c1, self.arith, self.halo,
                           margin=margin, threads=self.threads)
            self._d[key] = d
        return d

    def d2(self, name: str, j: int) -> np.ndarray:
        key = (2, name, j, 0)
        d = self._d.get(key)
        if d is None:
            d = kernels.d2(self.padded[name], 2 - j, self.c2, self.arith, self.halo,
                           threads=self.threads)
            self._d[key] = d
        return d

    def nested(self, name: str, j_inner: int, j_outer: int) -> np.ndarray:
        inner = self.d1(name, j_inner, margin=2)
        return kernels.d1(inner, 2 - j_outer, self.c1, self.arith, 2, threads=self.threads)

    def dvel(self, i: int, j: int) -> np.ndarray:
        """``du_i/dx_j``: the staged gradient if one was provided, else inline."""
        g = self.grad.get((i, j))
        return g if g is not None else self.d1(f"u{i}", j)

    def dphi(self, phi: str, j: int) -> np.ndarray:
        if phi.startswith("u"):
            return self.dvel(int(phi[1]), j)
        return self.d1(phi, j)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.grid.shape, dtype=kernels.carrier_dtype(self.arith))


_RHO_PHI = {"1": "rho", "u0": "m0", "u1": "m1", "u2": "m2", "E": "rhoE"}
_PHI_ALIASES = {"1": "1", "one": "1", "u": "u0", "v": "u1", "w": "u2",
                "u0": "u0", "u1": "u1", "u2": "u2", "e": "E", "E": "E"}


def _convective_direction(ws: _Workspace, c: SplitCoefficients, phi: str, j: int,
                          acc: np.ndarray, sign: float = 1.0) -> None:
    """Add ``sign`` times the direction-``j`` split terms for ``phi`` to ``acc``.

    Terms are added in the fixed order alpha, beta_rho, beta_u, beta_phi,
    gamma_rho, gamma_u, gamma_phi; zero weights are skipped.
    """
    one = phi == "1"
    uj, mj = f"u{j}", f"m{j}"
    rho_phi = _RHO_PHI[phi]
    ar, th = ws.arith, ws.threads

    def add(coef, a, b):
        if coef:
            kernels.accumulate(acc, sign * coef, a, b, ar, th)

    if c.alpha:
        add(c.alpha, ws.d1(mj if one else ws.product(mj, phi), j), None)
    if c.beta_rho:
        add(c.beta_rho, ws.inner("rho"), ws.d1(uj if one else ws.product(uj, phi), j))
    if c.beta_u:
        add(c.beta_u, ws.inner(uj), ws.d1(rho_phi, j))
    if c.beta_phi:
        if one:
            add(c.beta_phi, ws.d1(mj, j), None)
        else:
            add(c.beta_phi, ws.inner(phi), ws.d1(mj, j))
    if c.gamma_rho:
        add(c.gamma_rho, ws.inner(uj if one else ws.product(uj, phi)), ws.d1("rho", j))
    if c.gamma_u:
        add(c.gamma_u, ws.inner(rho_phi), ws.dvel(j, j))
    if c.gamma_phi and not one:
        add(c.gamma_phi, ws.inner(mj), ws.dphi(phi, j))


def _convective_fused(ws: _Workspace, c: SplitCoefficients, phi: str, j: int,
                      acc: np.ndarray, sign: float = 1.0) -> None:
    """Same terms and per-point operation order as :func:`_convective_direction`,
    evaluated by one fused kernel call."""
    one = phi == "1"
    g = ws.grad_padded if ws.grad_padded else ws.grad
    gh = ws.halo if ws.grad_padded else 0
    gjj = g.get((j, j))
    gphi = g.get((int(phi[1]), j)) if phi.startswith("u") else None
    weights = [sign * t for t in c.terms()]
    uj, mj = f"u{j}", f"m{j}"
    kernels.convective(acc, weights, ws.padded["rho"], ws.padded[mj], ws.padded[uj],
                       None if one else ws.padded[phi], ws.padded[_RHO_PHI[phi]], gjj, gphi,
                       2 - j, ws.c1, ws.arith, ws.halo, ws.threads, grad_halo=gh)


def convective_split(direction: int, phi: str, coeffs: SplitCoefficients,
                     inputs: Mapping[str, Field], compute: PrecisionKind = PrecisionKind.B64,
                     mode: EmulationMode = EmulationMode.STRICT, fused: bool = True) -> np.ndarray:
    """Direction-``direction`` contribution to ``d(rho u_j phi)/dx_j`` on the interior.

    ``inputs`` maps ``rho``, ``m0..m2`` (momenta), ``u0..u2`` and, for
    ``phi='E'``, ``rhoE`` to halo-filled fields.  ``E`` is formed inline as
    ``rhoE/rho``.  The result is a carrier array at ``compute``.  ``fused``
    selects the single-kernel evaluation; the alternative composes the
    elementary kernels term by term and gives identical bits.
    """
    coeffs.validate()
    phi = _PHI_ALIASES.get(phi, phi)
    if phi not in _RHO_PHI:
        raise ConfigurationError(f"unknown transported quantity {phi!r}")
    arith = kernels.arith_for(compute, mode)
    grid = next(iter(inputs.values())).grid
    ws = _Workspace(grid, arith)
    for name, f in inputs.items():
        if not f.halos_fresh:
            raise HaloStaleError(f"field {f.name!r} has stale halos")
        ws.put(name, f.load(arith, halo=True))
    if phi == "E" and "E" not in ws.padded:
        ws.put("E", kernels.binop("div", ws.padded["rhoE"], ws.padded["rho"], arith))
    acc = ws.zeros()
    (_convective_fused if fused else _convective_direction)(ws, coeffs, phi, int(direction), acc)
    return acc


_VEL = ("u", "v", "w")
_DIRS = ("x", "y", "z")


def field_names() -> Tuple[str, ...]:
    """Every field a state may allocate (valid per-field override names)."""
    wk = ["u", "v", "w", "p", "T"] + [f"d{a}d{b}" for a in _VEL for b in _DIRS] \
        + [f"dTd{b}" for b in _DIRS]
    return Q_NAMES + tuple(p + n for p in ("qt_", "res_") for n in Q_NAMES) \
        + tuple("wk_" + n for n in wk)
_PHIS = ("1", "u0", "u1", "u2", "E")


class ResidualEvaluator:
    """Evaluates ``R(Q)`` into ``state.R`` with a fixed split and strategy.

    Work-array fields are registered in the state's registry (shared by
    name if already present) so memory reports see them.
    """

    def __init__(self, state: State, params: FlowParams, split: SplitCoefficients,
                 strategy=ResidualStrategy.DEFAULT, threads: int = 1, fused: bool = True):
        self.state = state
        self.fused = fused
        self.params = params
        self.split = split.validate()
        self.strategy = ResidualStrategy.parse(strategy)
        self.threads = max(1, int(threads))
        self.mode = state.config.emulation
        self.prim = {k: self._wk(k) for k in ("u", "v", "w", "p", "T")}
        self.grads: Dict[Tuple[int, int], Field] = {}
        self.tgrads: List[Field] = []
        if self.strategy is ResidualStrategy.DEFAULT:
            for i in range(3):
                for j in range(3):
                    self.grads[(i, j)] = self._wk(f"d{_VEL[i]}d{_DIRS[j]}")
            self.tgrads = [self._wk(f"dTd{_DIRS[j]}") for j in range(3)]

    def _wk(self, name: str) -> Field:
        reg = self.state.registry
        full = "wk_" + name
        if full in reg:
            return reg[full]
        return allocate_field(reg, full, "wk_arrays", self.state.grid, self.state.config)

    @property
    def work_fields(self) -> List[Field]:
        return list(self.prim.values()) + list(self.grads.values()) + self.tgrads

    def _stage_primitives(self):
        # pointwise, so evaluating over the padded arrays yields periodic halos
        Q = self.state.Q
        outs = list(self.prim.values())
        aw = _arith(outs, self.mode)
        rho, m0, m1, m2, rhoE = (f.load(aw, halo=True) for f in Q)
        if self.fused:
            outs = kernels.primitives(rho, m0, m1, m2, rhoE, self.params.gm1,
                                      self.params.gamma_m2, aw, self.threads)
            vals = dict(zip(("u", "v", "w", "p", "T"), outs))
        else:
            vals = _primitive_arrays(rho, (m0, m1, m2), rhoE, self.params, aw, self.threads)
        for key, f in self.prim.items():
            f.store_padded(vals[key], halos_valid=True)

    def _stage_gradients(self):
        vel = [self.prim[k] for k in _VEL]
        for (i, j), f in self.grads.items():
            f.store(ddx1(vel[i], j, f.storage, self.mode, threads=self.threads))
            fill_halos_periodic(f)
        if self.params.viscous:
            for j, f in enumerate(self.tgrads):
                f.store(ddx1(self.prim["T"], j, f.storage, self.mode, threads=self.threads))
                fill_halos_periodic(f)

    def evaluate(self) -> List[Field]:
        st = self.state
        for f in st.Q:
            if not f.halos_fresh:
                raise HaloStaleError(f"conservative {f.name!r} has stale halos")
        self._stage_primitives()
        default = self.strategy is ResidualStrategy.DEFAULT
        if default:
            self._stage_gradients()
        ar = _arith(st.R, self.mode)
        ws = _Workspace(st.grid, ar, self.threads)
        for name, f in zip(("rho", "m0", "m1", "m2", "rhoE"), st.Q):
            ws.put(name, f.load(ar, halo=True))
        for name, key in zip(("u0", "u1", "u2", "p", "T"), ("u", "v", "w", "p", "T")):
            ws.put(name, self.prim[key].load(ar, halo=True))
        ws.put("E", kernels.binop("div", ws.padded["rhoE"], ws.padded["rho"], ar,
                                  threads=self.threads))
        if default:
            for ij, f in self.grads.items():
                if self.fused:
                    ws.grad_padded[ij] = f.load(ar, halo=True)
                else:
                    ws.grad[ij] = f.load(ar)

        accs = [ws.zeros() for _ in range(5)]
        conv = _convective_fused if self.fused else _convective_direction
        for eq, phi in enumerate(_PHIS):
            for j in range(3):
                conv(ws, self.split, phi, j, accs[eq], -1.0)
        if self.fused:
            self._pressure_fused(ws, accs)
        else:
            for i in range(3):
                kernels.accumulate(accs[1 + i], -1.0, ws.d1("p", i), None, ar, self.threads)
            for j in range(3):
                kernels.accumulate(accs[4], -1.0, ws.d1(ws.product("p", f"u{j}"), j), None,
                                   ar, self.threads)
        if self.params.viscous:
            if self.fused:
                self._viscous_fused(ws, accs, default)
            else:
                self._viscous(ws, accs, default)
        for f, acc in zip(st.R, accs):
            f.store(acc)
        return st.R

    def _pressure_fused(self, ws: _Workspace, accs):
        # -d(p)/dx_i and -d(p u_j)/dx_j as divergence-only convective calls
        w = (-1.0,) + (0.0,) * 6
        P, rho = ws.padded["p"], ws.padded["rho"]
        for i in range(3):
            kernels.convective(accs[1 + i], w, rho, P, P, None, rho, None, None, 2 - i, ws.c1,
                               ws.arith, ws.halo, ws.threads)
        for j in range(3):
            u = ws.padded[f"u{j}"]
            kernels.convective(accs[4], w, rho, P, u, u, rho, None, None, 2 - j, ws.c1,
                               ws.arith, ws.halo, ws.threads)

    def _viscous_fused(self, ws: _Workspace, accs, default: bool):
        grads = tgrads = None
        if default:
            grads = [ws.grad_padded[(i, j)] for i in range(3) for j in range(3)]
            tgrads = [f.load(ws.arith, halo=True) for f in self.tgrads]
        u = [ws.padded[f"u{i}"] for i in range(3)]
        kernels.viscous((accs[1], accs[2], accs[3], accs[4]), u, ws.padded["T"], grads, tgrads,
                        self.params.inv_re, self.params.conductivity, ws.grid.h, ws.arith,
                        ws.halo, ws.threads)

    def _cross(self, ws: _Workspace, i: int, j: int, default: bool) -> np.ndarray:
        """``d/dx_i (du_j/dx_j)`` for ``i != j``."""
        if default:
            f = self.grads[(j, j)]
            return kernels.d1(f.load(ws.arith, halo=True), 2 - i, ws.c1, ws.arith, ws.halo,
                              threads=ws.threads)
        return ws.nested(f"u{j}", j, i)

    def _heat(self, ws: _Workspace, j: int, default: bool) -> np.ndarray:
        """``d/dx_j (dT/dx_j)``."""
        if default:
            f = self.tgrads[j]
            return kernels.d1(f.load(ws.arith, halo=True), 2 - j, ws.c1, ws.arith, ws.halo,
                              threads=ws.threads)
        return ws.nested("T", j, j)

    def _viscous(self, ws: _Workspace, accs, default: bool):
        ar, th = ws.arith, ws.threads
        op = kernels.binop
        p = self.params
        g = ws.dvel
        div = op("add", g(0, 0), g(1, 1), ar, threads=th)
        div = op("add", div, g(2, 2), ar, out=div, threads=th)
        visc = []
        for i in range(3):
            d2s = [ws.d2(f"u{i}", j) for j in range(3)]
            lap = op("add", d2s[0], d2s[1], ar, threads=th)
            lap = op("add", lap, d2s[2], ar, out=lap, threads=th)
            xs = [d2s[i] if j == i else self._cross(ws, i, j, default) for j in range(3)]
            sx = op("add", xs[0], xs[1], ar, threads=th)
            sx = op("add", sx, xs[2], ar, out=sx, threads=th)
            t = op("add", lap, kernels.scale(sx, 1.0 / 3.0, ar, threads=th), ar, threads=th)
            v = kernels.scale(t, p.inv_re, ar, out=t, threads=th)
            kernels.accumulate(accs[1 + i], 1.0, v, None, ar, th)
            visc.append(v)
        accE = accs[4]
        for i in range(3):
            kernels.accumulate(accE, 1.0, ws.inner(f"u{i}"), visc[i], ar, th)
        tdiv = kernels.scale(div, 2.0 / 3.0, ar, threads=th)
        for i in range(3):
            for j in range(3):
                s = op("add", g(i, j), g(j, i), ar, threads=th)
                if i == j:
                    s = op("sub", s, tdiv, ar, out=s, threads=th)
                kernels.accumulate(accE, p.inv_re, s, g(i, j), ar, th)
        for j in range(3):
            kernels.accumulate(accE, p.conductivity, self._heat(ws, j, default), None, ar, th)


def residual(state: State, params: FlowParams, split: SplitCoefficients,
             strategy=ResidualStrategy.DEFAULT, config: Optional[PrecisionConfig] = None,
             threads: int = 1) -> List[Field]:
    """Evaluate ``R(Q)`` into ``state.R`` (Q halos must be filled).

    ``config`` defaults to the state's; it must match the precision the
    state was allocated with.
    """
    if config is not None and config != state.config:
        raise ConfigurationError("precision config differs from the one the state was built with")
    strategy = ResidualStrategy.parse(strategy)
    key = (params, split, strategy, threads)
    ev = state._evaluators.get(key)
    if ev is None:
        ev = ResidualEvaluator(state, params, split, strategy, threads)
        state._evaluators[key] = ev
    return ev.evaluate()
