/*
 * Hot kernels for the mixed-precision finite-difference solver.
 *
 * Every kernel exists in three arithmetic variants:
 *   _f64  binary64 arithmetic
 *   _f32  binary32 arithmetic
 *   _h16  binary16 arithmetic emulated on binary32 carriers; every
 *         operation result is rounded to the nearest binary16 value
 *         (ties to even).  binary32 has 24 >= 2*11+2 significand bits,
 *         so op-then-round equals a correctly rounded binary16 op.
 *
 * Must be compiled with -ffp-contract=off and without -ffast-math: the
 * operation order below is the contract shared with the numpy backend.
 * -fno-trapping-math is fine (values are unaffected) and lets gcc vectorize.
 */
#ifndef FDCORE_H
#define FDCORE_H

#include <stddef.h>
#include <stdint.h>
#include <math.h>

typedef union { float f; uint32_t u; } fd_fbits;
typedef union { double f; uint64_t u; } fd_dbits;

#define FD_HALF_MIN_NORMAL 6.103515625e-05 /* 2^-14 */

/* Round a binary32 value to the nearest binary16 value (RNE).
 * Adding and subtracting 1.5 * 2^(e+13), with e the binary16 exponent of
 * |x| (clamped to the subnormal one below), leaves exactly the binary16
 * significand bits and lets the hardware do the tie-to-even rounding.
 * Branch-free so that loops calling it vectorize. */
static inline float fd_round_half(float x)
{
    fd_fbits v, a, c, r;
    uint32_t eb;
    v.f = x;
    a.u = v.u & 0x7fffffffu;
    eb = a.u & 0x7f800000u;
    eb = eb < 0x38800000u ? 0x38800000u : eb; /* below 2^-14: fixed quantum 2^-24 */
    eb = eb > 0x47000000u ? 0x47000000u : eb; /* keeps the magic constant finite */
    c.u = eb + 0x06c00000u;
    r.f = (a.f + c.f) - c.f;
    r.f = r.f >= 65536.0f ? (float)INFINITY : r.f; /* 65520 and up overflow */
    r.u |= v.u & 0x80000000u;
    return r.f;
}

/* Round a binary64 value directly to binary16 (no intermediate binary32). */
static inline float fd_round_half_d(double x)
{
    fd_dbits v, a, s, r;
    uint64_t m;
    v.f = x;
    a.u = v.u & 0x7fffffffffffffffull;
    r.u = (a.u + 0x1ffffffffffull + ((a.u >> 42) & 1ull)) & ~0x3ffffffffffull;
    s.f = (a.f + 402653184.0) - 402653184.0; /* 1.5 * 2^28: ulp 2^-24 */
    m = (a.u < 0x3f10000000000000ull) ? s.u : r.u;
    m = (m >= 0x40f0000000000000ull) ? 0x7ff0000000000000ull : m;
    m = (a.u > 0x7ff0000000000000ull) ? a.u : m;
    r.u = m | (v.u & 0x8000000000000000ull);
    return (float)r.f;
}

static inline float fd_half_to_float(uint16_t h)
{
    uint32_t em = (uint32_t)h & 0x7fffu;
    fd_fbits r, nrm, spc;
    r.f = (float)(em & 0x3ffu) * 5.9604644775390625e-08f;
    nrm.u = (em << 13) + 0x38000000u;
    spc.u = (em << 13) | 0x7f800000u;
    r.u = (em >= 0x0400u) ? nrm.u : r.u;
    r.u = (em >= 0x7c00u) ? spc.u : r.u;
    r.u |= ((uint32_t)h & 0x8000u) << 16;
    return r.f;
}

/* x must already be a binary16 value (output of fd_round_half*). */
static inline uint16_t fd_encode_half(float x)
{
    fd_fbits v, a;
    uint32_t h;
    v.f = x;
    a.u = v.u & 0x7fffffffu;
    if (a.f != a.f)
        h = 0x7e00u;
    else if (a.u >= 0x7f800000u)
        h = 0x7c00u;
    else if (a.f < (float)FD_HALF_MIN_NORMAL)
        h = (uint32_t)(a.f * 16777216.0f);
    else
        h = (a.u >> 13) - 0x1c000u;
    return (uint16_t)(h | ((v.u >> 16) & 0x8000u));
}

static void fd_h2f(const uint16_t *src, float *dst, long n)
{
    for (long i = 0; i < n; i++)
        dst[i] = fd_half_to_float(src[i]);
}

static void fd_h2d(const uint16_t *src, double *dst, long n)
{
    for (long i = 0; i < n; i++)
        dst[i] = (double)fd_half_to_float(src[i]);
}

static void fd_f2h(const float *src, uint16_t *dst, long n)
{
    for (long i = 0; i < n; i++)
        dst[i] = fd_encode_half(fd_round_half(src[i]));
}

static void fd_d2h(const double *src, uint16_t *dst, long n)
{
    for (long i = 0; i < n; i++)
        dst[i] = fd_encode_half(fd_round_half_d(src[i]));
}

static void fd_round_half_inplace(float *x, long n)
{
    for (long i = 0; i < n; i++)
        x[i] = fd_round_half(x[i]);
}

static void fd_d2hcarrier(const double *src, float *dst, long n)
{
    for (long i = 0; i < n; i++)
        dst[i] = fd_round_half_d(src[i]);
}

/* Kernel outputs never alias their inputs except element for element
 * (in-place updates), so loop-carried dependences can be ignored.
 * FD_EACH runs `body` for i in [0, n) in chunks shared out to threads. */
#define FD_IVDEP _Pragma("GCC ivdep")
#define FD_CHUNK 4096L
#define FD_EACH(n, nthreads, ...)                                                   \
    do {                                                                            \
        const long nc_ = ((n) + FD_CHUNK - 1) / FD_CHUNK;                           \
        long c_;                                                                    \
        _Pragma("omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)") \
        for (c_ = 0; c_ < nc_; c_++) {                                              \
            const long hi_ = (c_ + 1) * FD_CHUNK < (n) ? (c_ + 1) * FD_CHUNK : (n);  \
            FD_IVDEP                                                                \
            for (long i = c_ * FD_CHUNK; i < hi_; i++) __VA_ARGS__;                 \
        }                                                                           \
    } while (0)

#define FD_OP_ADD 0
#define FD_OP_SUB 1
#define FD_OP_MUL 2
#define FD_OP_DIV 3

#define FD_T double
#define FD_RND(x) (x)
#define FD_NAME(base) base##_f64
#include "fdcore_tmpl.h"
#undef FD_T
#undef FD_RND
#undef FD_NAME

#define FD_T float
#define FD_RND(x) (x)
#define FD_NAME(base) base##_f32
#include "fdcore_tmpl.h"
#undef FD_T
#undef FD_RND
#undef FD_NAME

#define FD_T float
#define FD_RND(x) fd_round_half(x)
#define FD_NAME(base) base##_h16
#include "fdcore_tmpl.h"
#undef FD_T
#undef FD_RND
#undef FD_NAME

#endif
