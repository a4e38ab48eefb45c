"""Pure-numpy kernel backend.

Mirrors ``fdcore.h`` operation for operation so both backends give
bitwise-identical results.  binary16 arithmetic is emulated on float32
carriers by rounding through numpy's float16 after every operation.
Thread counts are accepted and ignored: each output element is computed
independently, so results never depend on them.
"""
import numpy as np

_F32 = np.float32


def _r16(x):
    return x.astype(np.float16).astype(np.float32)


def _ident(x):
    return x


def _rounder(arith):
    return _r16 if arith == 2 else _ident


def _scalar(c, arith):
    return np.float64(c) if arith == 0 else _F32(c)


def half_bits_to_float32(src, dst):
    dst[...] = src.view(np.float16).astype(np.float32)


def half_bits_to_float64(src, dst):
    dst[...] = src.view(np.float16).astype(np.float64)


def float32_to_half_bits(src, dst):
    dst[...] = src.astype(np.float16).view(np.uint16)


def float64_to_half_bits(src, dst):
    dst[...] = src.astype(np.float16).view(np.uint16)


def round_half_inplace(x):
    x[...] = _r16(x)


def float64_to_half_carrier(src, dst):
    dst[...] = src.astype(np.float16).astype(np.float32)


def _window(src, n, hs, ho, axis, shift):
    off = hs - ho
    no = n + 2 * ho
    idx = [slice(off, off + no)] * 3
    idx[axis] = slice(off + shift, off + shift + no)
    return src[tuple(idx)]


def stencil(order, src, n, hs, axis, c, arith, dst, ho, threads):
    R = _rounder(arith)
    c = _scalar(c, arith)
    w = lambda s: _window(src, n, hs, ho, axis, s)  # noqa: E731
    with np.errstate(all="ignore"):
        _stencil_body(order, w, R, c, arith, dst)


def _stencil_body(order, w, R, c, arith, dst):
    if order == 1:
        a = R(w(1) - w(-1))
        b = R(w(2) - w(-2))
        t = R(R(_scalar(8, arith) * a) - b)
    else:
        a = R(w(1) + w(-1))
        b = R(w(2) + w(-2))
        t = R(R(_scalar(16, arith) * a) - b)
        t = R(t - R(_scalar(30, arith) * w(0)))
    dst[...] = R(t * c)


_UFUNCS = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide}


def binop(op, a, b, arith, out, threads):
    with np.errstate(all="ignore"):
        out[...] = _rounder(arith)(_UFUNCS[op](a, b))


def scale(a, c, arith, out, threads):
    with np.errstate(all="ignore"):
        out[...] = _rounder(arith)(_scalar(c, arith) * a)


def accumulate(acc, coef, a, b, arith, threads):
    R = _rounder(arith)
    coef = _scalar(coef, arith)
    with np.errstate(all="ignore"):
        if b is None:
            acc[...] = R(acc + R(coef * a))
        else:
            acc[...] = R(acc + R(coef * R(a * b)))


def axpby(ca, a, cb, b, arith, out, threads):
    R = _rounder(arith)
    with np.errstate(all="ignore"):
        if a is None:
            out[...] = R(_scalar(cb, arith) * b)
        else:
            out[...] = R(R(_scalar(ca, arith) * a) + R(_scalar(cb, arith) * b))


def convective(acc, weights, rho, mj, uj, phi, rphi, gjj, gphi, gh, n, hs, axis, c, arith,
               threads):
    R = _rounder(arith)
    c = _scalar(c, arith)
    w = [_scalar(x, arith) for x in weights]
    eight = _scalar(8, arith)

    def at(a, s=0):
        return _window(a, n, hs, 0, axis, s)

    def d1(f):
        return R(R(R(eight * R(f(1) - f(-1))) - R(f(2) - f(-2))) * c)

    def prod(a, b):
        return lambda s: R(at(a, s) * at(b, s))

    def plain(a):
        return lambda s: at(a, s)

    def add1(k, d):
        acc[...] = R(acc + R(w[k] * d))

    def add2(k, pre, d):
        acc[...] = R(acc + R(w[k] * R(pre * d)))

    def inner(g):
        if g is None or gh == 0:
            return g
        return g[gh:gh + n, gh:gh + n, gh:gh + n]

    one = phi is None
    gjj, gphi = inner(gjj), inner(gphi)
    with np.errstate(all="ignore"):
        if w[0] != 0:
            add1(0, d1(plain(mj) if one else prod(mj, phi)))
        if w[1] != 0:
            add2(1, at(rho), d1(plain(uj) if one else prod(uj, phi)))
        if w[2] != 0:
            add2(2, at(uj), d1(plain(rphi)))
        if w[3] != 0:
            if one:
                add1(3, d1(plain(mj)))
            else:
                add2(3, at(phi), d1(plain(mj)))
        if w[4] != 0:
            add2(4, at(uj) if one else R(at(uj) * at(phi)), d1(plain(rho)))
        if w[5] != 0:
            add2(5, at(rphi), gjj if gjj is not None else d1(plain(uj)))
        if w[6] != 0 and not one:
            add2(6, at(mj), gphi if gphi is not None else d1(plain(phi)))


def primitives(rho, m0, m1, m2, rhoE, half, gm1, gm2, u0, u1, u2, p, T, arith, threads):
    R = _rounder(arith)
    half, gm1, gm2 = (_scalar(x, arith) for x in (half, gm1, gm2))
    with np.errstate(all="ignore"):
        u0[...] = R(m0 / rho)
        u1[...] = R(m1 / rho)
        u2[...] = R(m2 / rho)
        q2 = R(u0 * u0)
        q2 = R(q2 + R(u1 * u1))
        q2 = R(q2 + R(u2 * u2))
        e = R(R(rhoE / rho) - R(half * q2))
        p[...] = R(gm1 * R(rho * e))
        T[...] = R(R(gm2 * p) / rho)


def viscous(accs, u0, u1, u2, T, grads, tgrads, n, hs, c1, c2, inv_re, third, two_thirds,
            kappa, arith, threads):
    R = _rounder(arith)
    c1, c2, inv_re, third, two_thirds, kappa, one = (
        _scalar(x, arith) for x in (c1, c2, inv_re, third, two_thirds, kappa, 1.0))
    eight, sixteen, thirty = (_scalar(x, arith) for x in (8, 16, 30))
    U = (u0, u1, u2)

    def d1w(f):
        return R(R(R(eight * R(f(1) - f(-1))) - R(f(2) - f(-2))) * c1)

    def d1(a, axis, ho=0, h=hs):
        return d1w(lambda s: _window(a, n, h, ho, axis, s))

    def d2(a, axis):
        w = lambda s: _window(a, n, hs, 0, axis, s)  # noqa: E731
        t = R(R(sixteen * R(w(1) + w(-1))) - R(w(2) + w(-2)))
        return R(R(t - R(thirty * w(0))) * c2)

    def nest(a, outer, inner):
        return d1(d1(a, 2 - inner, ho=2), 2 - outer, h=2)

    with np.errstate(all="ignore"):
        if grads is not None:
            gv = [[_window(grads[3 * a + d], n, hs, 0, 0, 0) for d in range(3)]
                  for a in range(3)]
            cross = lambda a, d: d1(grads[4 * d], 2 - a)  # noqa: E731
            heat = lambda d: d1(tgrads[d], 2 - d)  # noqa: E731
        else:
            gv = [[d1(U[a], 2 - d) for d in range(3)] for a in range(3)]
            cross = lambda a, d: nest(U[d], a, d)  # noqa: E731
            heat = lambda d: nest(T, d, d)  # noqa: E731
        dv = R(R(gv[0][0] + gv[1][1]) + gv[2][2])
        vi = []
        for a in range(3):
            d2s = [d2(U[a], 2 - d) for d in range(3)]
            xs = [d2s[a] if d == a else cross(a, d) for d in range(3)]
            lap = R(R(d2s[0] + d2s[1]) + d2s[2])
            sx = R(R(xs[0] + xs[1]) + xs[2])
            vi.append(R(inv_re * R(lap + R(third * sx))))
            accs[a][...] = R(accs[a] + R(one * vi[a]))
        e = accs[3]
        for a in range(3):
            e = R(e + R(one * R(_window(U[a], n, hs, 0, 0, 0) * vi[a])))
        td = R(two_thirds * dv)
        for a in range(3):
            for d in range(3):
                s = R(gv[a][d] + gv[d][a])
                if a == d:
                    s = R(s - td)
                e = R(e + R(inv_re * R(s * gv[a][d])))
        for d in range(3):
            e = R(e + R(kappa * heat(d)))
        accs[3][...] = e
