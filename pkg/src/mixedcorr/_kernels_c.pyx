# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: concordance counting, normal CDFs, grid lookup.

Mirrors mixedcorr._kernels_py; the backend is picked in mixedcorr.kernels.
"""
from libc.math cimport asin, erfc, exp, fabs, sin, sqrt
from libc.math cimport INFINITY, M_PI, M_SQRT1_2

import numpy as np

BACKEND = "c"

# Gauss-Legendre rules are generated at import, not transcribed. The
# bivariate routine tiers 6/12/20 nodes by |r|; the 3-d/4-d integrators
# receive their rule per call.
cdef double _X6[6]
cdef double _W6[6]
cdef double _X12[12]
cdef double _W12[12]
cdef double _X20[20]
cdef double _W20[20]

_g6 = np.polynomial.legendre.leggauss(6)
_g12 = np.polynomial.legendre.leggauss(12)
_g20 = np.polynomial.legendre.leggauss(20)
for _i in range(6):
    _X6[_i] = _g6[0][_i]
    _W6[_i] = _g6[1][_i]
for _i in range(12):
    _X12[_i] = _g12[0][_i]
    _W12[_i] = _g12[1][_i]
for _i in range(20):
    _X20[_i] = _g20[0][_i]
    _W20[_i] = _g20[1][_i]
del _g6, _g12, _g20, _i


# ---------------------------------------------------------------------------
# univariate normal
# ---------------------------------------------------------------------------

cdef inline double phid(double x) nogil:
    return 0.5 * erfc(-x * M_SQRT1_2)


# ---------------------------------------------------------------------------
# bivariate normal (single-integral reduction, 20-node Gauss-Legendre)
# ---------------------------------------------------------------------------

cdef double bvnu(double dh, double dk, double r) nogil:
    """P(X > dh, Y > dk) for standard bivariate normal with correlation r.

    Moderate |r| uses the arcsine-substitution single integral; |r| above
    0.925 switches to the tail expansion with a quadrature correction.
    """
    cdef double h, k, hk, bvn, hs, asr, sn, a, b, aas, bs, c, d, xs, rs, sp, ep
    cdef int i
    if dh == INFINITY or dk == INFINITY:
        return 0.0
    if dh == -INFINITY:
        return 1.0 if dk == -INFINITY else phid(-dk)
    if dk == -INFINITY:
        return phid(-dh)
    if r > 1.0 - 1e-12:
        return phid(-(dh if dh > dk else dk))
    if r < -1.0 + 1e-12:
        b = phid(-dk) - phid(dh)
        return b if b > 0.0 else 0.0
    if r == 0.0:
        return phid(-dh) * phid(-dk)

    h = dh
    k = dk
    hk = h * k
    bvn = 0.0
    if fabs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * asin(r)
        if fabs(r) < 0.3:
            for i in range(6):
                sn = sin(asr * (1.0 + _X6[i]))
                bvn += _W6[i] * exp((sn * hk - hs) / (1.0 - sn * sn))
        elif fabs(r) < 0.75:
            for i in range(12):
                sn = sin(asr * (1.0 + _X12[i]))
                bvn += _W12[i] * exp((sn * hk - hs) / (1.0 - sn * sn))
        else:
            for i in range(20):
                sn = sin(asr * (1.0 + _X20[i]))
                bvn += _W20[i] * exp((sn * hk - hs) / (1.0 - sn * sn))
        return bvn * asr / (2.0 * M_PI) + phid(-h) * phid(-k)

    if r < 0.0:
        k = -k
        hk = -hk
    aas = (1.0 - r) * (1.0 + r)
    a = sqrt(aas)
    bs = (h - k) * (h - k)
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    asr = -0.5 * (bs / aas + hk)
    if asr > -100.0:
        bvn = a * exp(asr) * (1.0 - c * (bs - aas) * (1.0 - d * bs / 5.0) / 3.0
                              + c * d * aas * aas / 5.0)
    if -hk < 100.0:
        b = sqrt(bs)
        sp = 2.5066282746310002 * phid(-b / a)
        bvn -= exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
    a *= 0.5
    for i in range(20):
        xs = a * (1.0 + _X20[i])
        xs *= xs
        asr = -0.5 * (bs / xs + hk)
        if asr > -100.0:
            rs = sqrt(1.0 - xs)
            sp = 1.0 + c * xs * (1.0 + d * xs)
            ep = exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
            bvn += a * _W20[i] * exp(asr) * (ep - sp)
    bvn = -bvn / (2.0 * M_PI)
    if r > 0.0:
        bvn += phid(-(h if h > k else k))
    else:
        bvn = -bvn
        sp = phid(-h) - phid(-k)
        if sp > 0.0:
            bvn += sp
    if bvn < 0.0:
        bvn = 0.0
    elif bvn > 1.0:
        bvn = 1.0
    return bvn


def phi2_scalar(double x, double y, double r):
    return bvnu(-x, -y, r)


def phi2_batch(double[::1] x, double[::1] y, double[::1] r, double[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    with nogil:
        for i in range(n):
            out[i] = bvnu(-x[i], -y[i], r[i])


# ---------------------------------------------------------------------------
# trivariate / quadrivariate normal via conditioning on the first variable
# ---------------------------------------------------------------------------
#
# The conditional CDF is integrated over the conditioning variable in
# z-space, where the integrand is entire and Gauss-Legendre converges
# geometrically. A nearly-degenerate conditional argument (|r1j| close to
# 1) makes the integrand transition over a narrow window around
# z = b_j / r1j; those windows become segment endpoints, which restores
# fast convergence.

cdef double _ZCUT = 9.0
cdef double _INV_SQRT_2PI = 0.3989422804014327


cdef inline int _insert_point(double* pts, int npts, double zs,
                              double lo, double hi) nogil:
    cdef int i, j
    if not (zs > lo and zs < hi):
        return npts
    i = 0
    while i < npts and pts[i] < zs:
        i += 1
    if i < npts and pts[i] == zs:
        return npts
    j = npts
    while j > i:
        pts[j] = pts[j - 1]
        j -= 1
    pts[i] = zs
    return npts + 1


cdef inline int _add_split(double* pts, int npts, double zs, double width,
                           double lo, double hi) nogil:
    # Bracket a steep transition centered at zs with a +/- 8 width window
    # so it never straddles wide smooth segments (or hides at an endpoint).
    cdef double w8 = 8.0 * width
    if width * 20.0 >= hi - lo or zs + w8 <= lo or zs - w8 >= hi:
        return npts
    npts = _insert_point(pts, npts, zs - w8, lo, hi)
    return _insert_point(pts, npts, zs + w8, lo, hi)


cdef inline int _add_pair_split(double* pts, int npts,
                                double bj, double bk, double mj, double mk,
                                double rc, double lo, double hi) nogil:
    # Phi2(c_j(z), c_k(z); rc) develops a min/max crease as rc -> +/-1,
    # crossing where c_j = c_k (rc > 0) or c_j = -c_k (rc < 0).
    cdef double denom, zs, width
    if rc >= 0.0:
        denom = mj - mk
        width = sqrt(2.0 * (1.0 - rc))
        zs = bj - bk
    else:
        denom = mj + mk
        width = sqrt(2.0 * (1.0 + rc))
        zs = bj + bk
    if fabs(denom) < 1e-12:
        return npts
    return _add_split(pts, npts, zs / denom, width / fabs(denom), lo, hi)


cdef double phi3_point(double b1, double b2, double b3,
                       double r12, double r13, double r23,
                       double[::1] gx, double[::1] gw) nogil:
    cdef double s2, s3, rc, acc, z, lo, hi, p0, p1, half, mid
    cdef double splits[9]
    cdef double pts[11]
    cdef int nsp = 0, seg, k, kk = gx.shape[0], i
    hi = b1 if b1 < _ZCUT else _ZCUT
    lo = -_ZCUT
    if hi <= lo:
        return 0.0
    s2 = 1.0 - r12 * r12
    s3 = 1.0 - r13 * r13
    s2 = sqrt(s2 if s2 > 1e-24 else 1e-24)
    s3 = sqrt(s3 if s3 > 1e-24 else 1e-24)
    rc = (r23 - r12 * r13) / (s2 * s3)
    if rc > 1.0:
        rc = 1.0
    elif rc < -1.0:
        rc = -1.0
    if fabs(r12) > 1e-12:
        nsp = _add_split(splits, nsp, b2 / r12, s2 / fabs(r12), lo, hi)
    if fabs(r13) > 1e-12:
        nsp = _add_split(splits, nsp, b3 / r13, s3 / fabs(r13), lo, hi)
    nsp = _add_pair_split(splits, nsp, b2 / s2, b3 / s3,
                          r12 / s2, r13 / s3, rc, lo, hi)
    pts[0] = lo
    for i in range(nsp):
        pts[i + 1] = splits[i]
    pts[nsp + 1] = hi
    acc = 0.0
    for seg in range(nsp + 1):
        p0 = pts[seg]
        p1 = pts[seg + 1]
        half = 0.5 * (p1 - p0)
        mid = 0.5 * (p1 + p0)
        for k in range(kk):
            z = half * gx[k] + mid
            acc += half * gw[k] * _INV_SQRT_2PI * exp(-0.5 * z * z) * \
                bvnu(-(b2 - r12 * z) / s2, -(b3 - r13 * z) / s3, rc)
    return acc


def phi3_batch(double[:, ::1] b, double[::1] r12, double[::1] r13,
               double[::1] r23, double[::1] gx, double[::1] gw,
               double[::1] out):
    cdef Py_ssize_t i, n = b.shape[0]
    with nogil:
        for i in range(n):
            out[i] = phi3_point(b[i, 0], b[i, 1], b[i, 2],
                                r12[i], r13[i], r23[i], gx, gw)


cdef double phi4_point(double b1, double b2, double b3, double b4,
                       double r12, double r13, double r14,
                       double r23, double r24, double r34,
                       double[::1] gx_o, double[::1] gw_o,
                       double[::1] gx_i, double[::1] gw_i) nogil:
    cdef double s2, s3, s4, rc23, rc24, rc34, acc, z, lo, hi, p0, p1, half, mid
    cdef double splits[18]
    cdef double pts[20]
    cdef int nsp = 0, seg, k, kk = gx_o.shape[0], i
    hi = b1 if b1 < _ZCUT else _ZCUT
    lo = -_ZCUT
    if hi <= lo:
        return 0.0
    s2 = 1.0 - r12 * r12
    s3 = 1.0 - r13 * r13
    s4 = 1.0 - r14 * r14
    s2 = sqrt(s2 if s2 > 1e-24 else 1e-24)
    s3 = sqrt(s3 if s3 > 1e-24 else 1e-24)
    s4 = sqrt(s4 if s4 > 1e-24 else 1e-24)
    rc23 = (r23 - r12 * r13) / (s2 * s3)
    rc24 = (r24 - r12 * r14) / (s2 * s4)
    rc34 = (r34 - r13 * r14) / (s3 * s4)
    if rc23 > 1.0:
        rc23 = 1.0
    elif rc23 < -1.0:
        rc23 = -1.0
    if rc24 > 1.0:
        rc24 = 1.0
    elif rc24 < -1.0:
        rc24 = -1.0
    if rc34 > 1.0:
        rc34 = 1.0
    elif rc34 < -1.0:
        rc34 = -1.0
    if fabs(r12) > 1e-12:
        nsp = _add_split(splits, nsp, b2 / r12, s2 / fabs(r12), lo, hi)
    if fabs(r13) > 1e-12:
        nsp = _add_split(splits, nsp, b3 / r13, s3 / fabs(r13), lo, hi)
    if fabs(r14) > 1e-12:
        nsp = _add_split(splits, nsp, b4 / r14, s4 / fabs(r14), lo, hi)
    nsp = _add_pair_split(splits, nsp, b2 / s2, b3 / s3,
                          r12 / s2, r13 / s3, rc23, lo, hi)
    nsp = _add_pair_split(splits, nsp, b2 / s2, b4 / s4,
                          r12 / s2, r14 / s4, rc24, lo, hi)
    nsp = _add_pair_split(splits, nsp, b3 / s3, b4 / s4,
                          r13 / s3, r14 / s4, rc34, lo, hi)
    pts[0] = lo
    for i in range(nsp):
        pts[i + 1] = splits[i]
    pts[nsp + 1] = hi
    acc = 0.0
    for seg in range(nsp + 1):
        p0 = pts[seg]
        p1 = pts[seg + 1]
        half = 0.5 * (p1 - p0)
        mid = 0.5 * (p1 + p0)
        for k in range(kk):
            z = half * gx_o[k] + mid
            acc += half * gw_o[k] * _INV_SQRT_2PI * exp(-0.5 * z * z) * \
                phi3_point((b2 - r12 * z) / s2, (b3 - r13 * z) / s3,
                           (b4 - r14 * z) / s4, rc23, rc24, rc34, gx_i, gw_i)
    return acc


def phi4_batch(double[:, ::1] b,
               double[::1] r12, double[::1] r13, double[::1] r14,
               double[::1] r23, double[::1] r24, double[::1] r34,
               double[::1] gx_o, double[::1] gw_o,
               double[::1] gx_i, double[::1] gw_i,
               double[::1] out):
    cdef Py_ssize_t i, n = b.shape[0]
    with nogil:
        for i in range(n):
            out[i] = phi4_point(b[i, 0], b[i, 1], b[i, 2], b[i, 3],
                                r12[i], r13[i], r14[i],
                                r23[i], r24[i], r34[i],
                                gx_o, gw_o, gx_i, gw_i)


# ---------------------------------------------------------------------------
# Kendall tau-a concordance statistics
# ---------------------------------------------------------------------------

cdef long long _merge_count(double[::1] a, double[::1] buf,
                            Py_ssize_t n) nogil:
    """Bottom-up merge sort of a in place; returns the strict inversion count."""
    cdef long long inv = 0
    cdef Py_ssize_t width = 1, lo, mid, hi, i, j, k
    cdef bint from_a = True
    cdef double[::1] src, dst
    while width < n:
        if from_a:
            src = a
            dst = buf
        else:
            src = buf
            dst = a
        lo = 0
        while lo < n:
            mid = lo + width
            if mid > n:
                mid = n
            hi = lo + 2 * width
            if hi > n:
                hi = n
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[i] <= src[j]:
                    dst[k] = src[i]
                    i += 1
                else:
                    dst[k] = src[j]
                    j += 1
                    inv += mid - i
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
            lo = hi
        from_a = not from_a
        width *= 2
    if not from_a:
        for i in range(n):
            a[i] = buf[i]
    return inv


def kendall_sorted_stats(double[::1] xs, double[::1] ys):
    """Pair-tie counts and discordances for arrays lexsorted by (x, y).

    Returns (discordant, xtie_pairs, ytie_pairs, jointtie_pairs) where
    discordant is the strict inversion count of ys in x-order.
    """
    cdef Py_ssize_t n = xs.shape[0]
    cdef long long n1 = 0, n2 = 0, n3 = 0, disc
    cdef long long run_x = 1, run_xy = 1, run_y
    cdef Py_ssize_t i
    ybuf = np.empty(n, dtype=np.float64)
    ysort = np.array(ys, dtype=np.float64, copy=True)
    cdef double[::1] buf = ybuf
    cdef double[::1] yy = ysort
    with nogil:
        for i in range(1, n):
            if xs[i] == xs[i - 1]:
                run_x += 1
                if ys[i] == ys[i - 1]:
                    run_xy += 1
                else:
                    n3 += run_xy * (run_xy - 1) // 2
                    run_xy = 1
            else:
                n1 += run_x * (run_x - 1) // 2
                n3 += run_xy * (run_xy - 1) // 2
                run_x = 1
                run_xy = 1
        n1 += run_x * (run_x - 1) // 2
        n3 += run_xy * (run_xy - 1) // 2
        disc = _merge_count(yy, buf, n)
        run_y = 1
        for i in range(1, n):
            if yy[i] == yy[i - 1]:
                run_y += 1
            else:
                n2 += run_y * (run_y - 1) // 2
                run_y = 1
        n2 += run_y * (run_y - 1) // 2
    return disc, n1, n2, n3


# ---------------------------------------------------------------------------
# multilinear interpolation on a rectilinear grid (row-major values)
# ---------------------------------------------------------------------------

def interp_multilinear(double[::1] axes, long long[::1] offs,
                       long long[::1] shape, double[::1] values,
                       double[:, ::1] queries, double[::1] out):
    """Interpolate at each query row; coordinates are clamped to the hull.

    axes is the concatenation of the per-dimension node vectors, offs its
    prefix offsets (length d+1).
    """
    cdef Py_ssize_t d = shape.shape[0]
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t p, dim, corner, lo, hi, mid, base, m
    cdef long long[8] stride
    cdef Py_ssize_t[8] cell
    cdef double[8] frac
    cdef double q, w, acc
    cdef long long s = 1
    for dim in range(d - 1, -1, -1):
        stride[dim] = s
        s *= shape[dim]
    with nogil:
        for p in range(nq):
            for dim in range(d):
                base = offs[dim]
                m = shape[dim]
                q = queries[p, dim]
                if q <= axes[base]:
                    cell[dim] = 0
                    frac[dim] = 0.0
                elif q >= axes[base + m - 1]:
                    cell[dim] = m - 2
                    frac[dim] = 1.0
                else:
                    lo = 0
                    hi = m - 1
                    while hi - lo > 1:
                        mid = (lo + hi) >> 1
                        if axes[base + mid] <= q:
                            lo = mid
                        else:
                            hi = mid
                    cell[dim] = lo
                    frac[dim] = (q - axes[base + lo]) / \
                        (axes[base + lo + 1] - axes[base + lo])
            acc = 0.0
            for corner in range(1 << d):
                w = 1.0
                s = 0
                for dim in range(d):
                    if (corner >> dim) & 1:
                        w *= frac[dim]
                        s += (cell[dim] + 1) * stride[dim]
                    else:
                        w *= 1.0 - frac[dim]
                        s += cell[dim] * stride[dim]
                if w != 0.0:
                    acc += w * values[s]
            out[p] = acc
