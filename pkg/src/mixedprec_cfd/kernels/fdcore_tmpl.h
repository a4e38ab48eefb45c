/* Instantiated by fdcore.h with FD_T, FD_RND and FD_NAME defined. */

/*
 * First derivative along `axis` (0=z, 1=y, 2=x; x is contiguous).
 * src: cube of edge n + 2*hs.  dst: cube of edge n + 2*ho, ho <= hs - 2.
 *   d = ((8*(f[+1]-f[-1])) - (f[+2]-f[-2])) * c
 */
static void FD_NAME(fd_d1)(const FD_T *src, long n, long hs, int axis, FD_T c,
                           FD_T *dst, long ho, int nthreads)
{
    const long ns = n + 2 * hs, no = n + 2 * ho, off = hs - ho;
    const long st = axis == 2 ? 1 : (axis == 1 ? ns : ns * ns);
    long k;
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
    for (k = 0; k < no; k++) {
        for (long j = 0; j < no; j++) {
            const FD_T *s = src + ((k + off) * ns + (j + off)) * ns + off;
            FD_T *d = dst + (k * no + j) * no;
            FD_IVDEP
            for (long i = 0; i < no; i++) {
                FD_T a = FD_RND(s[i + st] - s[i - st]);
                FD_T b = FD_RND(s[i + 2 * st] - s[i - 2 * st]);
                FD_T t = FD_RND(FD_RND((FD_T)8 * a) - b);
                d[i] = FD_RND(t * c);
            }
        }
    }
}

/*
 * Second derivative along `axis`:
 *   d = (((16*(f[+1]+f[-1])) - (f[+2]+f[-2])) - 30*f[0]) * c
 */
static void FD_NAME(fd_d2)(const FD_T *src, long n, long hs, int axis, FD_T c,
                           FD_T *dst, long ho, int nthreads)
{
    const long ns = n + 2 * hs, no = n + 2 * ho, off = hs - ho;
    const long st = axis == 2 ? 1 : (axis == 1 ? ns : ns * ns);
    long k;
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
    for (k = 0; k < no; k++) {
        for (long j = 0; j < no; j++) {
            const FD_T *s = src + ((k + off) * ns + (j + off)) * ns + off;
            FD_T *d = dst + (k * no + j) * no;
            FD_IVDEP
            for (long i = 0; i < no; i++) {
                FD_T a = FD_RND(s[i + st] + s[i - st]);
                FD_T b = FD_RND(s[i + 2 * st] + s[i - 2 * st]);
                FD_T t = FD_RND(FD_RND((FD_T)16 * a) - b);
                t = FD_RND(t - FD_RND((FD_T)30 * s[i]));
                d[i] = FD_RND(t * c);
            }
        }
    }
}

static void FD_NAME(fd_binop)(int op, const FD_T *a, const FD_T *b, FD_T *out,
                              long n, int nthreads)
{
    switch (op) {
    case FD_OP_ADD:
        FD_EACH(n, nthreads, out[i] = FD_RND(a[i] + b[i]));
        break;
    case FD_OP_SUB:
        FD_EACH(n, nthreads, out[i] = FD_RND(a[i] - b[i]));
        break;
    case FD_OP_MUL:
        FD_EACH(n, nthreads, out[i] = FD_RND(a[i] * b[i]));
        break;
    default:
        FD_EACH(n, nthreads, out[i] = FD_RND(a[i] / b[i]));
        break;
    }
}

static void FD_NAME(fd_scale)(const FD_T *a, FD_T c, FD_T *out, long n,
                              int nthreads)
{
    FD_EACH(n, nthreads, out[i] = FD_RND(c * a[i]));
}

/* acc += coef*(a*b), or acc += coef*a when b is NULL; each op rounded. */
static void FD_NAME(fd_acc)(FD_T *acc, FD_T coef, const FD_T *a,
                            const FD_T *b, long n, int nthreads)
{
    if (b) {
        FD_EACH(n, nthreads, acc[i] = FD_RND(acc[i] + FD_RND(coef * FD_RND(a[i] * b[i]))));
    } else {
        FD_EACH(n, nthreads, acc[i] = FD_RND(acc[i] + FD_RND(coef * a[i])));
    }
}

/* out = x*y + z*w style update used by the Runge-Kutta kernels:
 *   out = (ca*a) + (cb*b), or out = cb*b when a is NULL. */
static void FD_NAME(fd_axpby)(FD_T ca, const FD_T *a, FD_T cb, const FD_T *b,
                              FD_T *out, long n, int nthreads)
{
    if (a) {
        FD_EACH(n, nthreads, out[i] = FD_RND(FD_RND(ca * a[i]) + FD_RND(cb * b[i])));
    } else {
        FD_EACH(n, nthreads, out[i] = FD_RND(cb * b[i]));
    }
}

/*
 * Split convective terms of one transported quantity phi along one axis,
 * added into acc (interior cube of edge n).  w[0..6] are the signed
 * weights of alpha, beta_rho, beta_u, beta_phi, gamma_rho, gamma_u,
 * gamma_phi; zero weights are skipped.  phi == NULL means phi = 1.
 * rho, mj, uj, phi, rphi are padded cubes (halo hs).
 * gjj and gphi are optional staged derivatives of uj and phi (halo gh),
 * used by the gamma_u and gamma_phi terms.
 * Products are recomputed at each stencil point, which gives the same
 * values as differentiating a stored product array.
 */
#define FD_AT(p, q) (p)[b + i + (q) * st]
#define FD_PR(p, r, q) FD_RND(FD_AT(p, q) * FD_AT(r, q))
#define FD_D1OF(G) \
    FD_RND(FD_RND(FD_RND((FD_T)8 * FD_RND(G(1) - G(-1))) - FD_RND(G(2) - G(-2))) * c)
#define FD_ACC1(wk, d) A[i] = FD_RND(A[i] + FD_RND((wk) * (d)))
#define FD_ACC2(wk, pre, d) A[i] = FD_RND(A[i] + FD_RND((wk) * FD_RND((pre) * (d))))
#define FD_LOOP(stmt) do { FD_IVDEP for (i = 0; i < n; i++) stmt; } while (0)
#define G_RHO(q) FD_AT(rho, q)
#define G_MJ(q) FD_AT(mj, q)
#define G_UJ(q) FD_AT(uj, q)
#define G_PHI(q) FD_AT(phi, q)
#define G_RPHI(q) FD_AT(rphi, q)
#define G_MJPHI(q) FD_PR(mj, phi, q)
#define G_UJPHI(q) FD_PR(uj, phi, q)

static void FD_NAME(fd_conv)(const FD_T *rho, const FD_T *mj, const FD_T *uj,
                             const FD_T *phi, const FD_T *rphi,
                             const FD_T *gjj, const FD_T *gphi, long gh,
                             long n, long hs, int axis, FD_T c, const FD_T *w,
                             FD_T *acc, int nthreads)
{
    const long ns = n + 2 * hs, ng = n + 2 * gh;
    const long st = axis == 2 ? 1 : (axis == 1 ? ns : ns * ns);
    const FD_T w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3], w4 = w[4], w5 = w[5], w6 = w[6];
    long k;
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
    for (k = 0; k < n; k++) {
        for (long j = 0; j < n; j++) {
            const long b = ((k + hs) * ns + (j + hs)) * ns + hs;
            const long o = (k * n + j) * n;
            const long og = ((k + gh) * ng + (j + gh)) * ng + gh;
            FD_T *restrict A = acc + o;
            const FD_T *Gj = gjj ? gjj + og : NULL, *Gp = gphi ? gphi + og : NULL;
            long i;
            if (w0 != 0) {
                if (phi) FD_LOOP(FD_ACC1(w0, FD_D1OF(G_MJPHI)));
                else FD_LOOP(FD_ACC1(w0, FD_D1OF(G_MJ)));
            }
            if (w1 != 0) {
                if (phi) FD_LOOP(FD_ACC2(w1, FD_AT(rho, 0), FD_D1OF(G_UJPHI)));
                else FD_LOOP(FD_ACC2(w1, FD_AT(rho, 0), FD_D1OF(G_UJ)));
            }
            if (w2 != 0)
                FD_LOOP(FD_ACC2(w2, FD_AT(uj, 0), FD_D1OF(G_RPHI)));
            if (w3 != 0) {
                if (phi) FD_LOOP(FD_ACC2(w3, FD_AT(phi, 0), FD_D1OF(G_MJ)));
                else FD_LOOP(FD_ACC1(w3, FD_D1OF(G_MJ)));
            }
            if (w4 != 0) {
                if (phi) FD_LOOP(FD_ACC2(w4, FD_PR(uj, phi, 0), FD_D1OF(G_RHO)));
                else FD_LOOP(FD_ACC2(w4, FD_AT(uj, 0), FD_D1OF(G_RHO)));
            }
            if (w5 != 0) {
                if (Gj) FD_LOOP(FD_ACC2(w5, FD_AT(rphi, 0), Gj[i]));
                else FD_LOOP(FD_ACC2(w5, FD_AT(rphi, 0), FD_D1OF(G_UJ)));
            }
            if (w6 != 0 && phi) {
                if (Gp) FD_LOOP(FD_ACC2(w6, FD_AT(mj, 0), Gp[i]));
                else FD_LOOP(FD_ACC2(w6, FD_AT(mj, 0), FD_D1OF(G_PHI)));
            }
        }
    }
}

#undef FD_AT
#undef FD_PR
#undef FD_D1OF
#undef FD_ACC1
#undef FD_ACC2
#undef FD_LOOP
#undef G_RHO
#undef G_MJ
#undef G_UJ
#undef G_PHI
#undef G_RPHI
#undef G_MJPHI
#undef G_UJPHI

/*
 * Primitive variables from conservatives, pointwise over n values:
 *   u_i = m_i/rho, q2 = (u0*u0 + u1*u1) + u2*u2, E = rhoE/rho,
 *   e = E - half*q2, p = gm1*(rho*e), T = (gm2*p)/rho.
 */
static void FD_NAME(fd_prim)(const FD_T *rho, const FD_T *m0, const FD_T *m1,
                             const FD_T *m2, const FD_T *rhoE, FD_T half, FD_T gm1,
                             FD_T gm2, FD_T *u0, FD_T *u1, FD_T *u2, FD_T *p,
                             FD_T *T, long n, int nthreads)
{
    FD_EACH(n, nthreads, {
        const FD_T r = rho[i];
        const FD_T a = FD_RND(m0[i] / r), b = FD_RND(m1[i] / r), d = FD_RND(m2[i] / r);
        FD_T q2 = FD_RND(a * a);
        q2 = FD_RND(q2 + FD_RND(b * b));
        q2 = FD_RND(q2 + FD_RND(d * d));
        const FD_T e = FD_RND(FD_RND(rhoE[i] / r) - FD_RND(half * q2));
        const FD_T pp = FD_RND(gm1 * FD_RND(r * e));
        u0[i] = a;
        u1[i] = b;
        u2[i] = d;
        p[i] = pp;
        T[i] = FD_RND(FD_RND(gm2 * pp) / r);
    });
}

/*
 * Viscous stress and heat-flux contributions added into the interior
 * accumulators am0..am2 (momenta) and aE (energy).  u0..u2 and T are
 * padded cubes.  With g (9 padded velocity gradients, g[3*i+j] = du_i/dx_j)
 * and dT (3 padded temperature gradients) the staged values are used;
 * with NULL they are recomputed inline from u and T.
 *   visc_i = inv_re*(lap u_i + third*sum_j d/dx_i(du_j/dx_j)), with the
 *            j == i term taken as the second derivative
 *   aE += sum_i u_i*visc_i + inv_re*sum_ij (g_ij + g_ji - [i==j] two_thirds*div)*g_ij
 *         + kappa*sum_j d/dx_j(dT/dx_j)
 */
#define FD_D1P(P, x, s) \
    FD_RND(FD_RND(FD_RND((FD_T)8 * FD_RND((P)[(x) + (s)] - (P)[(x) - (s)])) \
                  - FD_RND((P)[(x) + 2 * (s)] - (P)[(x) - 2 * (s)])) * c1)
#define FD_D2P(P, x, s) \
    FD_RND(FD_RND(FD_RND(FD_RND((FD_T)16 * FD_RND((P)[(x) + (s)] + (P)[(x) - (s)])) \
                         - FD_RND((P)[(x) + 2 * (s)] + (P)[(x) - 2 * (s)])) \
                  - FD_RND((FD_T)30 * (P)[x])) * c2)
#define FD_NEST(P, x, so, si) \
    FD_RND(FD_RND(FD_RND((FD_T)8 * FD_RND(FD_D1P(P, (x) + (so), si) - FD_D1P(P, (x) - (so), si))) \
                  - FD_RND(FD_D1P(P, (x) + 2 * (so), si) - FD_D1P(P, (x) - 2 * (so), si))) * c1)
#define FD_UNROLL _Pragma("GCC unroll 3")
#define FD_VISC_POINT(GV, XC, HT)                                               \
    do {                                                                        \
        FD_T gv[3][3], vi[3];                                                   \
        FD_UNROLL for (int a = 0; a < 3; a++)                                             \
            FD_UNROLL for (int d = 0; d < 3; d++) gv[a][d] = GV(a, d);                    \
        const FD_T dv = FD_RND(FD_RND(gv[0][0] + gv[1][1]) + gv[2][2]);         \
        FD_UNROLL for (int a = 0; a < 3; a++) {                                           \
            FD_T d2s[3], xs[3];                                                 \
            FD_UNROLL for (int d = 0; d < 3; d++) d2s[d] = FD_D2P(FD_U(a), x, FD_S(d));         \
            FD_UNROLL for (int d = 0; d < 3; d++) xs[d] = d == a ? d2s[a] : XC(a, d);     \
            const FD_T lap = FD_RND(FD_RND(d2s[0] + d2s[1]) + d2s[2]);          \
            const FD_T sx = FD_RND(FD_RND(xs[0] + xs[1]) + xs[2]);              \
            vi[a] = FD_RND(inv_re * FD_RND(lap + FD_RND(third * sx)));          \
            FD_AM(a)[o + i] = FD_RND(FD_AM(a)[o + i] + FD_RND((FD_T)1 * vi[a]));      \
        }                                                                       \
        FD_T e = aE[o + i];                                                     \
        FD_UNROLL for (int a = 0; a < 3; a++)                                             \
            e = FD_RND(e + FD_RND((FD_T)1 * FD_RND(FD_U(a)[x] * vi[a])));          \
        const FD_T td = FD_RND(two_thirds * dv);                                \
        FD_UNROLL for (int a = 0; a < 3; a++)                                             \
            FD_UNROLL for (int d = 0; d < 3; d++) {                                       \
                FD_T s = FD_RND(gv[a][d] + gv[d][a]);                           \
                if (a == d) s = FD_RND(s - td);                                 \
                e = FD_RND(e + FD_RND(inv_re * FD_RND(s * gv[a][d])));          \
            }                                                                   \
        FD_UNROLL for (int d = 0; d < 3; d++) e = FD_RND(e + FD_RND(kappa * HT(d)));      \
        aE[o + i] = e;                                                          \
    } while (0)
/* selectors indexed by constants once the small loops are unrolled */
#define FD_U(a) ((a) == 0 ? u0 : (a) == 1 ? u1 : u2)
#define FD_AM(a) ((a) == 0 ? am0 : (a) == 1 ? am1 : am2)
#define FD_S(d) ((d) == 0 ? 1 : (d) == 1 ? ns : ns2)
#define FD_DT(d) ((d) == 0 ? t0 : (d) == 1 ? t1 : t2)
#define FD_G(q) ((q) < 3 ? ((q) == 0 ? g0 : (q) == 1 ? g1 : g2) \
                 : (q) < 6 ? ((q) == 3 ? g3 : (q) == 4 ? g4 : g5) \
                 : ((q) == 6 ? g6 : (q) == 7 ? g7 : g8))
#define GV_STAGED(a, d) FD_G(3 * (a) + (d))[x]
#define XC_STAGED(a, d) FD_D1P(FD_G(4 * (d)), x, FD_S(a))
#define HT_STAGED(d) FD_D1P(FD_DT(d), x, FD_S(d))
#define GV_INLINE(a, d) FD_D1P(FD_U(a), x, FD_S(d))
#define XC_INLINE(a, d) FD_NEST(FD_U(d), x, FD_S(a), FD_S(d))
#define HT_INLINE(d) FD_NEST(T, x, FD_S(d), FD_S(d))

static void FD_NAME(fd_visc)(const FD_T *u0, const FD_T *u1, const FD_T *u2,
                             const FD_T *T, const FD_T *const *g, const FD_T *const *dT,
                             long n, long hs, FD_T c1, FD_T c2, FD_T inv_re, FD_T third,
                             FD_T two_thirds, FD_T kappa, FD_T *am0, FD_T *am1,
                             FD_T *am2, FD_T *aE, int nthreads)
{
    const long ns = n + 2 * hs, ns2 = ns * ns;
    const int staged = g != NULL;
    const FD_T *g0 = NULL, *g1 = NULL, *g2 = NULL, *g3 = NULL, *g4 = NULL, *g5 = NULL,
               *g6 = NULL, *g7 = NULL, *g8 = NULL, *t0 = NULL, *t1 = NULL, *t2 = NULL;
    if (staged) {
        g0 = g[0]; g1 = g[1]; g2 = g[2]; g3 = g[3]; g4 = g[4];
        g5 = g[5]; g6 = g[6]; g7 = g[7]; g8 = g[8];
        t0 = dT[0]; t1 = dT[1]; t2 = dT[2];
    }
    long k;
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
    for (k = 0; k < n; k++) {
        for (long j = 0; j < n; j++) {
            const long b = ((k + hs) * ns + (j + hs)) * ns + hs;
            const long o = (k * n + j) * n;
            long i;
            if (staged) {
FD_IVDEP
                for (i = 0; i < n; i++) {
                    const long x = b + i;
                    FD_VISC_POINT(GV_STAGED, XC_STAGED, HT_STAGED);
                }
            } else {
FD_IVDEP
                for (i = 0; i < n; i++) {
                    const long x = b + i;
                    FD_VISC_POINT(GV_INLINE, XC_INLINE, HT_INLINE);
                }
            }
        }
    }
}

#undef FD_D1P
#undef FD_D2P
#undef FD_NEST
#undef FD_VISC_POINT
#undef FD_UNROLL
#undef FD_U
#undef FD_AM
#undef FD_S
#undef FD_DT
#undef FD_G
#undef GV_STAGED
#undef XC_STAGED
#undef HT_STAGED
#undef GV_INLINE
#undef XC_INLINE
#undef HT_INLINE
