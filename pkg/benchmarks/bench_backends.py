"""Compare the compiled kernel backend with the pure numpy fallback.

Usage::

    python benchmarks/bench_backends.py [--n 32] [--repeat 5]

Times single kernels (first derivative, split convective term) and a full
residual evaluation for a few precision presets, under each available
backend, and prints the speedup of the compiled core.
"""
import argparse
import timeit

import numpy as np

from mixedprec_cfd import kernels
from mixedprec_cfd.mesh import GridSpec
from mixedprec_cfd.physics import FlowParams, residual, split_preset
from mixedprec_cfd.precision import resolve_preset
from mixedprec_cfd.tgv import init_tgv

ARITHS = {"f64": kernels.F64, "f32": kernels.F32, "h16": kernels.H16}


def _padded(n, arith, seed=0):
    rng = np.random.default_rng(seed)
    return kernels.round_half(rng.standard_normal((n + 8,) * 3)) if arith == kernels.H16 \
        else rng.standard_normal((n + 8,) * 3).astype(kernels.carrier_dtype(arith))


def cases(n):
    out = {}
    for name, ar in ARITHS.items():
        src = _padded(n, ar)
        out[f"d1 {name}"] = lambda src=src, ar=ar: kernels.d1(src, 2, 1.0, ar, 4)
        fields = [_padded(n, ar, s) for s in range(5)]
        acc = np.zeros((n,) * 3, dtype=kernels.carrier_dtype(ar))
        w = (0.25,) * 7
        out[f"convective {name}"] = (lambda f=fields, acc=acc, ar=ar:
                                     kernels.convective(acc, w, *f, None, None, 2, 1.0, ar, 4))
    p = FlowParams(M=0.5, Re=800)
    for preset in ("DP", "HP", "HPSP"):
        state = init_tgv(GridSpec(n), p, resolve_preset(preset))
        out[f"residual {preset}"] = (lambda s=state: residual(s, p, split_preset("Blaisdell")))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"n={args.n}, best of {args.repeat}, ms per call")
    print(f"{'case':<18}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    results = {}
    for b in backends:
        kernels.use_backend(b)
        for name, fn in cases(args.n).items():
            fn()
            results[b, name] = 1e3 * min(timeit.repeat(fn, number=1, repeat=args.repeat))
    for name in cases(args.n):
        row = [results[b, name] for b in backends]
        speed = f"{row[0] / row[-1]:10.1f}x" if len(row) > 1 else ""
        print(f"{name:<18}" + "".join(f"{t:12.2f}" for t in row) + speed)


if __name__ == "__main__":
    main()
