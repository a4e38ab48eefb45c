# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernel backend.

Thin wrappers around ``fdcore.h``.  Arrays must be C-contiguous carriers
(float64 for arithmetic code 0, float32 for codes 1 and 2); callers in
:mod:`mixedprec_cfd.kernels` take care of that.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint16_t

cnp.import_array()

cdef extern from "fdcore.h" nogil:
    void fd_h2f(const uint16_t *src, float *dst, long n)
    void fd_h2d(const uint16_t *src, double *dst, long n)
    void fd_f2h(const float *src, uint16_t *dst, long n)
    void fd_d2h(const double *src, uint16_t *dst, long n)
    void fd_round_half_inplace(float *x, long n)
    void fd_d2hcarrier(const double *src, float *dst, long n)

    void fd_d1_f64(const double *src, long n, long hs, int axis, double c, double *dst, long ho, int nt)
    void fd_d1_f32(const float *src, long n, long hs, int axis, float c, float *dst, long ho, int nt)
    void fd_d1_h16(const float *src, long n, long hs, int axis, float c, float *dst, long ho, int nt)
    void fd_d2_f64(const double *src, long n, long hs, int axis, double c, double *dst, long ho, int nt)
    void fd_d2_f32(const float *src, long n, long hs, int axis, float c, float *dst, long ho, int nt)
    void fd_d2_h16(const float *src, long n, long hs, int axis, float c, float *dst, long ho, int nt)

    void fd_binop_f64(int op, const double *a, const double *b, double *out, long n, int nt)
    void fd_binop_f32(int op, const float *a, const float *b, float *out, long n, int nt)
    void fd_binop_h16(int op, const float *a, const float *b, float *out, long n, int nt)
    void fd_scale_f64(const double *a, double c, double *out, long n, int nt)
    void fd_scale_f32(const float *a, float c, float *out, long n, int nt)
    void fd_scale_h16(const float *a, float c, float *out, long n, int nt)
    void fd_acc_f64(double *acc, double coef, const double *a, const double *b, long n, int nt)
    void fd_acc_f32(float *acc, float coef, const float *a, const float *b, long n, int nt)
    void fd_acc_h16(float *acc, float coef, const float *a, const float *b, long n, int nt)
    void fd_axpby_f64(double ca, const double *a, double cb, const double *b, double *out, long n, int nt)
    void fd_axpby_f32(float ca, const float *a, float cb, const float *b, float *out, long n, int nt)
    void fd_axpby_h16(float ca, const float *a, float cb, const float *b, float *out, long n, int nt)

    void fd_conv_f64(const double *rho, const double *mj, const double *uj, const double *phi,
                     const double *rphi, const double *gjj, const double *gphi, long gh,
                     long n, long hs,
                     int axis, double c, const double *w, double *acc, int nt)
    void fd_conv_f32(const float *rho, const float *mj, const float *uj, const float *phi,
                     const float *rphi, const float *gjj, const float *gphi, long gh,
                     long n, long hs,
                     int axis, float c, const float *w, float *acc, int nt)
    void fd_conv_h16(const float *rho, const float *mj, const float *uj, const float *phi,
                     const float *rphi, const float *gjj, const float *gphi, long gh,
                     long n, long hs,
                     int axis, float c, const float *w, float *acc, int nt)
    void fd_prim_f64(const double *rho, const double *m0, const double *m1, const double *m2,
                     const double *rhoE, double half, double gm1, double gm2, double *u0, double *u1, double *u2,
                     double *p, double *T, long n, int nt)
    void fd_visc_f64(const double *u0, const double *u1, const double *u2, const double *T,
                     const double **g, const double **dT, long n, long hs, double c1, double c2,
                     double inv_re, double third, double two_thirds, double kappa, double *am0, double *am1,
                     double *am2, double *aE, int nt)
    void fd_prim_f32(const float *rho, const float *m0, const float *m1, const float *m2,
                     const float *rhoE, float half, float gm1, float gm2, float *u0, float *u1, float *u2,
                     float *p, float *T, long n, int nt)
    void fd_visc_f32(const float *u0, const float *u1, const float *u2, const float *T,
                     const float **g, const float **dT, long n, long hs, float c1, float c2,
                     float inv_re, float third, float two_thirds, float kappa, float *am0, float *am1,
                     float *am2, float *aE, int nt)
    void fd_prim_h16(const float *rho, const float *m0, const float *m1, const float *m2,
                     const float *rhoE, float half, float gm1, float gm2, float *u0, float *u1, float *u2,
                     float *p, float *T, long n, int nt)
    void fd_visc_h16(const float *u0, const float *u1, const float *u2, const float *T,
                     const float **g, const float **dT, long n, long hs, float c1, float c2,
                     float inv_re, float third, float two_thirds, float kappa, float *am0, float *am1,
                     float *am2, float *aE, int nt)

_OPS = {"add": 0, "sub": 1, "mul": 2, "div": 3}


cdef inline double* _dp(cnp.ndarray a):
    return <double*> cnp.PyArray_DATA(a)


cdef inline float* _fp(cnp.ndarray a):
    return <float*> cnp.PyArray_DATA(a)


cdef inline uint16_t* _hp(cnp.ndarray a):
    return <uint16_t*> cnp.PyArray_DATA(a)


def half_bits_to_float32(cnp.ndarray src, cnp.ndarray dst):
    fd_h2f(_hp(src), _fp(dst), src.size)


def half_bits_to_float64(cnp.ndarray src, cnp.ndarray dst):
    fd_h2d(_hp(src), _dp(dst), src.size)


def float32_to_half_bits(cnp.ndarray src, cnp.ndarray dst):
    fd_f2h(_fp(src), _hp(dst), src.size)


def float64_to_half_bits(cnp.ndarray src, cnp.ndarray dst):
    fd_d2h(_dp(src), _hp(dst), src.size)


def round_half_inplace(cnp.ndarray x):
    fd_round_half_inplace(_fp(x), x.size)


def float64_to_half_carrier(cnp.ndarray src, cnp.ndarray dst):
    fd_d2hcarrier(_dp(src), _fp(dst), src.size)


def stencil(int order, cnp.ndarray src, long n, long hs, int axis, double c,
            int arith, cnp.ndarray dst, long ho, int threads):
    if order == 1:
        if arith == 0:
            fd_d1_f64(_dp(src), n, hs, axis, c, _dp(dst), ho, threads)
        elif arith == 1:
            fd_d1_f32(_fp(src), n, hs, axis, <float>c, _fp(dst), ho, threads)
        else:
            fd_d1_h16(_fp(src), n, hs, axis, <float>c, _fp(dst), ho, threads)
    else:
        if arith == 0:
            fd_d2_f64(_dp(src), n, hs, axis, c, _dp(dst), ho, threads)
        elif arith == 1:
            fd_d2_f32(_fp(src), n, hs, axis, <float>c, _fp(dst), ho, threads)
        else:
            fd_d2_h16(_fp(src), n, hs, axis, <float>c, _fp(dst), ho, threads)


def binop(str op, cnp.ndarray a, cnp.ndarray b, int arith, cnp.ndarray out,
          int threads):
    cdef int code = _OPS[op]
    if arith == 0:
        fd_binop_f64(code, _dp(a), _dp(b), _dp(out), a.size, threads)
    elif arith == 1:
        fd_binop_f32(code, _fp(a), _fp(b), _fp(out), a.size, threads)
    else:
        fd_binop_h16(code, _fp(a), _fp(b), _fp(out), a.size, threads)


def scale(cnp.ndarray a, double c, int arith, cnp.ndarray out, int threads):
    if arith == 0:
        fd_scale_f64(_dp(a), c, _dp(out), a.size, threads)
    elif arith == 1:
        fd_scale_f32(_fp(a), <float>c, _fp(out), a.size, threads)
    else:
        fd_scale_h16(_fp(a), <float>c, _fp(out), a.size, threads)


def accumulate(cnp.ndarray acc, double coef, cnp.ndarray a, object b,
               int arith, int threads):
    cdef cnp.ndarray bb
    if arith == 0:
        if b is None:
            fd_acc_f64(_dp(acc), coef, _dp(a), NULL, acc.size, threads)
        else:
            bb = b
            fd_acc_f64(_dp(acc), coef, _dp(a), _dp(bb), acc.size, threads)
    elif arith == 1:
        if b is None:
            fd_acc_f32(_fp(acc), <float>coef, _fp(a), NULL, acc.size, threads)
        else:
            bb = b
            fd_acc_f32(_fp(acc), <float>coef, _fp(a), _fp(bb), acc.size, threads)
    else:
        if b is None:
            fd_acc_h16(_fp(acc), <float>coef, _fp(a), NULL, acc.size, threads)
        else:
            bb = b
            fd_acc_h16(_fp(acc), <float>coef, _fp(a), _fp(bb), acc.size, threads)


def axpby(double ca, object a, double cb, cnp.ndarray b, int arith,
          cnp.ndarray out, int threads):
    cdef cnp.ndarray aa
    if arith == 0:
        if a is None:
            fd_axpby_f64(ca, NULL, cb, _dp(b), _dp(out), b.size, threads)
        else:
            aa = a
            fd_axpby_f64(ca, _dp(aa), cb, _dp(b), _dp(out), b.size, threads)
    elif arith == 1:
        if a is None:
            fd_axpby_f32(<float>ca, NULL, <float>cb, _fp(b), _fp(out), b.size, threads)
        else:
            aa = a
            fd_axpby_f32(<float>ca, _fp(aa), <float>cb, _fp(b), _fp(out), b.size, threads)
    else:
        if a is None:
            fd_axpby_h16(<float>ca, NULL, <float>cb, _fp(b), _fp(out), b.size, threads)
        else:
            aa = a
            fd_axpby_h16(<float>ca, _fp(aa), <float>cb, _fp(b), _fp(out), b.size, threads)


cdef inline void* _opt(object a):
    if a is None:
        return NULL
    return cnp.PyArray_DATA(<cnp.ndarray> a)


def convective(cnp.ndarray acc, weights, cnp.ndarray rho, cnp.ndarray mj, cnp.ndarray uj,
               object phi, cnp.ndarray rphi, object gjj, object gphi, long gh, long n,
               long hs, int axis, double c, int arith, int threads):
    cdef double wd[7]
    cdef float wf[7]
    cdef int k
    for k in range(7):
        wd[k] = weights[k]
        wf[k] = <float> weights[k]
    if arith == 0:
        fd_conv_f64(_dp(rho), _dp(mj), _dp(uj), <double*> _opt(phi), _dp(rphi),
                    <double*> _opt(gjj), <double*> _opt(gphi), gh, n, hs, axis, c, wd,
                    _dp(acc), threads)
    elif arith == 1:
        fd_conv_f32(_fp(rho), _fp(mj), _fp(uj), <float*> _opt(phi), _fp(rphi),
                    <float*> _opt(gjj), <float*> _opt(gphi), gh, n, hs, axis, <float> c, wf,
                    _fp(acc), threads)
    else:
        fd_conv_h16(_fp(rho), _fp(mj), _fp(uj), <float*> _opt(phi), _fp(rphi),
                    <float*> _opt(gjj), <float*> _opt(gphi), gh, n, hs, axis, <float> c, wf,
                    _fp(acc), threads)


def primitives(cnp.ndarray rho, cnp.ndarray m0, cnp.ndarray m1, cnp.ndarray m2,
               cnp.ndarray rhoE, double half, double gm1, double gm2, cnp.ndarray u0,
               cnp.ndarray u1, cnp.ndarray u2, cnp.ndarray p, cnp.ndarray T, int arith,
               int threads):
    cdef long n = rho.size
    if arith == 0:
        fd_prim_f64(_dp(rho), _dp(m0), _dp(m1), _dp(m2), _dp(rhoE), half, gm1, gm2,
                    _dp(u0), _dp(u1), _dp(u2), _dp(p), _dp(T), n, threads)
    elif arith == 1:
        fd_prim_f32(_fp(rho), _fp(m0), _fp(m1), _fp(m2), _fp(rhoE), <float> half,
                    <float> gm1, <float> gm2, _fp(u0), _fp(u1), _fp(u2), _fp(p), _fp(T),
                    n, threads)
    else:
        fd_prim_h16(_fp(rho), _fp(m0), _fp(m1), _fp(m2), _fp(rhoE), <float> half,
                    <float> gm1, <float> gm2, _fp(u0), _fp(u1), _fp(u2), _fp(p), _fp(T),
                    n, threads)


def viscous(accs, cnp.ndarray u0, cnp.ndarray u1, cnp.ndarray u2, cnp.ndarray T,
            object grads, object tgrads, long n, long hs, double c1, double c2,
            double inv_re, double third, double two_thirds, double kappa, int arith,
            int threads):
    cdef const void *g[9]
    cdef const void *dt[3]
    cdef int k
    cdef const void **gp = NULL
    cdef const void **dtp = NULL
    if grads is not None:
        gp, dtp = g, dt
        for k in range(9):
            g[k] = _opt(grads[k])
        for k in range(3):
            dt[k] = _opt(tgrads[k])
    cdef cnp.ndarray a0 = accs[0], a1 = accs[1], a2 = accs[2], aE = accs[3]
    if arith == 0:
        fd_visc_f64(_dp(u0), _dp(u1), _dp(u2), _dp(T),
                    <const double **> gp,
                    <const double **> dtp, n, hs, c1, c2, inv_re, third,
                    two_thirds, kappa, _dp(a0), _dp(a1), _dp(a2), _dp(aE), threads)
    elif arith == 1:
        fd_visc_f32(_fp(u0), _fp(u1), _fp(u2), _fp(T),
                    <const float **> gp,
                    <const float **> dtp, n, hs, <float> c1, <float> c2,
                    <float> inv_re, <float> third, <float> two_thirds, <float> kappa,
                    _fp(a0), _fp(a1), _fp(a2), _fp(aE), threads)
    else:
        fd_visc_h16(_fp(u0), _fp(u1), _fp(u2), _fp(T),
                    <const float **> gp,
                    <const float **> dtp, n, hs, <float> c1, <float> c2,
                    <float> inv_re, <float> third, <float> two_thirds, <float> kappa,
                    _fp(a0), _fp(a1), _fp(a2), _fp(aE), threads)
