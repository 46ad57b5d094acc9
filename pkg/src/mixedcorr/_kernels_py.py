"""Numpy fallback for the compiled kernels in mixedcorr._kernels_c.

Same functions, same math, same quadrature rules; selected at import time
by mixedcorr.kernels when the extension is unavailable.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtr

BACKEND = "python"

_GX6, _GW6 = np.polynomial.legendre.leggauss(6)
_GX12, _GW12 = np.polynomial.legendre.leggauss(12)
_GX20, _GW20 = np.polynomial.legendre.leggauss(20)

_TAIL_SPLIT = 0.925


def _bvnu_moderate_rule(h, k, r, gx, gw):
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = 0.5 * np.arcsin(r)
    sn = np.sin(asr[..., None] * (1.0 + gx))
    terms = np.exp((sn * hk[..., None] - hs[..., None]) / (1.0 - sn * sn))
    return (terms @ gw) * asr / (2.0 * np.pi) + ndtr(-h) * ndtr(-k)


def _bvnu_moderate(h, k, r):
    out = np.empty(r.shape)
    small = np.abs(r) < 0.3
    mid = (~small) & (np.abs(r) < 0.75)
    big = (~small) & (~mid)
    for mask, gx, gw in ((small, _GX6, _GW6), (mid, _GX12, _GW12),
                         (big, _GX20, _GW20)):
        if np.any(mask):
            out[mask] = _bvnu_moderate_rule(h[mask], k[mask], r[mask], gx, gw)
    return out


def _bvnu_tail(h, k, r):
    k = np.where(r < 0, -k, k)
    hk = h * k
    aas = (1.0 - r) * (1.0 + r)
    a = np.sqrt(aas)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    asr = -0.5 * (bs / aas + hk)
    bvn = np.where(
        asr > -100.0,
        a * np.exp(asr) * (1.0 - c * (bs - aas) * (1.0 - d * bs / 5.0) / 3.0
                           + c * d * aas * aas / 5.0),
        0.0)
    b = np.sqrt(bs)
    sp = np.sqrt(2.0 * np.pi) * ndtr(-b / a)
    # exponents are clamped where the guard masks the term anyway
    bvn = np.where(
        -hk < 100.0,
        bvn - np.exp(np.where(-hk < 100.0, -0.5 * hk, 0.0)) * sp * b
        * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
        bvn)
    a = 0.5 * a
    xs = (a[..., None] * (1.0 + _GX20)) ** 2
    asr = -0.5 * (bs[..., None] / xs + hk[..., None])
    guard = asr > -100.0
    rs = np.sqrt(1.0 - xs)
    sp = 1.0 + c[..., None] * xs * (1.0 + d[..., None] * xs)
    expo = np.where(guard, -hk[..., None] * (1.0 - rs) / (2.0 * (1.0 + rs)), 0.0)
    ep = np.exp(expo) / rs
    contrib = np.where(guard, np.exp(asr) * (ep - sp), 0.0)
    bvn = bvn + a * (contrib @ _GW20)
    bvn = -bvn / (2.0 * np.pi)
    pos = bvn + ndtr(-np.maximum(h, k))
    neg = -bvn + np.maximum(0.0, ndtr(-h) - ndtr(np.negative(k)))
    return np.where(r > 0, pos, neg)


def _bvnu(h, k, r):
    """P(X > h, Y > k), vectorized over broadcastable arrays."""
    h, k, r = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float),
                                  np.asarray(r, float))
    out = np.empty(h.shape, dtype=float)

    snap_hi = r > 1.0 - 1e-12
    snap_lo = r < -1.0 + 1e-12
    moderate = (~snap_hi) & (~snap_lo) & (np.abs(r) < _TAIL_SPLIT)
    tail = (~snap_hi) & (~snap_lo) & ~moderate

    if np.any(snap_hi):
        out[snap_hi] = ndtr(-np.maximum(h[snap_hi], k[snap_hi]))
    if np.any(snap_lo):
        out[snap_lo] = np.maximum(0.0, ndtr(-k[snap_lo]) - ndtr(h[snap_lo]))
    if np.any(moderate):
        out[moderate] = _bvnu_moderate(h[moderate], k[moderate], r[moderate])
    if np.any(tail):
        out[tail] = _bvnu_tail(h[tail], k[tail], r[tail])

    # infinite limits override the generic paths
    out = np.where((h == np.inf) | (k == np.inf), 0.0, out)
    only_k = (h == -np.inf) & (k > -np.inf)
    only_h = (k == -np.inf) & (h > -np.inf)
    if np.any(only_k):
        out[only_k] = ndtr(-k[only_k])
    if np.any(only_h):
        out[only_h] = ndtr(-h[only_h])
    out = np.where((h == -np.inf) & (k == -np.inf), 1.0, out)
    return np.clip(out, 0.0, 1.0)


def phi2_scalar(x, y, r):
    return float(_bvnu(-x, -y, r))


def phi2_batch(x, y, r, out):
    out[:] = _bvnu(-np.asarray(x), -np.asarray(y), np.asarray(r))


# The conditional lower-dimensional CDF is integrated over the conditioning
# variable in z-space (entire integrand, geometric Gauss-Legendre
# convergence). Steep conditional transitions (|r1j| near 1) become
# segment endpoints; inactive splits collapse to zero-width segments so the
# computation stays fully vectorized.

_ZCUT = 9.0
_INV_SQRT_2PI = 0.3989422804014327


def _phi_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _cond_sigma(r1j):
    return np.sqrt(np.maximum(1.0 - r1j * r1j, 1e-24))


def _activate(zs, w, lo, hi):
    """Candidate boundaries bracketing a steep transition: zs and zs +/- 8w.

    Inactive candidates collapse onto hi so the segment list stays
    rectangular; zero-width segments contribute nothing.
    """
    w8 = 8.0 * w
    feature = (w * 20.0 < hi - lo) & (zs + w8 > lo) & (zs - w8 < hi)
    cands = []
    for point in (zs - w8, zs + w8):
        ok = feature & (point > lo) & (point < hi)
        cands.append(np.where(ok, point, hi))
    return cands


def _split_candidate(bj, r1j, sj, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(np.abs(r1j) > 1e-12, bj / r1j, np.inf)
        w = np.where(np.abs(r1j) > 1e-12, sj / np.abs(r1j), np.inf)
    return _activate(zs, w, lo, hi)


def _pair_split_candidate(bj, bk, mj, mk, rc, lo, hi):
    # crease of Phi2(c_j, c_k; rc) as rc -> +/-1: c_j = c_k or c_j = -c_k
    denom = np.where(rc >= 0.0, mj - mk, mj + mk)
    width = np.sqrt(2.0 * (1.0 - np.abs(rc)))
    num = np.where(rc >= 0.0, bj - bk, bj + bk)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = np.abs(denom) >= 1e-12
        zs = np.where(ok, num / denom, np.inf)
        w = np.where(ok, width / np.abs(denom), np.inf)
    return _activate(zs, w, lo, hi)


def _segment_bounds(lo, hi, cand_groups):
    """Sorted (nseg+1, N) boundary array; collapsed segments have width 0."""
    cands = [c for group in cand_groups for c in group]
    cols = [np.broadcast_to(lo, cands[0].shape)]
    cols += list(np.sort(np.stack(cands, axis=0), axis=0))
    cols.append(np.broadcast_to(hi, cands[0].shape))
    return np.stack(cols, axis=0)


def phi3_batch(b, r12, r13, r23, gx, gw, out):
    b = np.asarray(b)
    lo = np.full(b.shape[0], -_ZCUT)
    hi = np.minimum(b[:, 0], _ZCUT)
    s2, s3 = _cond_sigma(r12), _cond_sigma(r13)
    rc = np.clip((r23 - r12 * r13) / (s2 * s3), -1.0, 1.0)
    bounds = _segment_bounds(lo, hi, [
        _split_candidate(b[:, 1], r12, s2, lo, hi),
        _split_candidate(b[:, 2], r13, s3, lo, hi),
        _pair_split_candidate(b[:, 1] / s2, b[:, 2] / s3,
                              r12 / s2, r13 / s3, rc, lo, hi)])
    acc = np.zeros(b.shape[0])
    for seg in range(bounds.shape[0] - 1):
        half = 0.5 * (bounds[seg + 1] - bounds[seg])
        if not np.any(half > 0.0):
            continue
        mid = 0.5 * (bounds[seg + 1] + bounds[seg])
        z = half[None, :] * gx[:, None] + mid[None, :]
        c2 = (b[:, 1][None, :] - r12[None, :] * z) / s2[None, :]
        c3 = (b[:, 2][None, :] - r13[None, :] * z) / s3[None, :]
        g = _bvnu(-c2, -c3, np.broadcast_to(rc, c2.shape))
        acc += half * np.einsum("k,kn->n", gw, _phi_pdf(z) * g)
    out[:] = np.where(hi <= lo, 0.0, acc)


def _phi4_chunk(b, r12, r13, r14, r23, r24, r34, gx_o, gw_o, gx_i, gw_i):
    n = b.shape[0]
    ko = gx_o.shape[0]
    lo = np.full(n, -_ZCUT)
    hi = np.minimum(b[:, 0], _ZCUT)
    s2, s3, s4 = _cond_sigma(r12), _cond_sigma(r13), _cond_sigma(r14)
    rc23 = np.clip((r23 - r12 * r13) / (s2 * s3), -1.0, 1.0)
    rc24 = np.clip((r24 - r12 * r14) / (s2 * s4), -1.0, 1.0)
    rc34 = np.clip((r34 - r13 * r14) / (s3 * s4), -1.0, 1.0)
    bounds = _segment_bounds(lo, hi, [
        _split_candidate(b[:, 1], r12, s2, lo, hi),
        _split_candidate(b[:, 2], r13, s3, lo, hi),
        _split_candidate(b[:, 3], r14, s4, lo, hi),
        _pair_split_candidate(b[:, 1] / s2, b[:, 2] / s3,
                              r12 / s2, r13 / s3, rc23, lo, hi),
        _pair_split_candidate(b[:, 1] / s2, b[:, 3] / s4,
                              r12 / s2, r14 / s4, rc24, lo, hi),
        _pair_split_candidate(b[:, 2] / s3, b[:, 3] / s4,
                              r13 / s3, r14 / s4, rc34, lo, hi)])
    acc = np.zeros(n)
    tile = lambda v: np.broadcast_to(v, (ko, n)).ravel()
    inner_out = np.empty(ko * n)
    for seg in range(bounds.shape[0] - 1):
        half = 0.5 * (bounds[seg + 1] - bounds[seg])
        if not np.any(half > 0.0):
            continue
        mid = 0.5 * (bounds[seg + 1] + bounds[seg])
        z = half[None, :] * gx_o[:, None] + mid[None, :]
        c2 = (b[:, 1][None, :] - r12[None, :] * z) / s2[None, :]
        c3 = (b[:, 2][None, :] - r13[None, :] * z) / s3[None, :]
        c4 = (b[:, 3][None, :] - r14[None, :] * z) / s4[None, :]
        inner_b = np.stack([c2.ravel(), c3.ravel(), c4.ravel()], axis=1)
        phi3_batch(inner_b, tile(rc23), tile(rc24), tile(rc34),
                   gx_i, gw_i, inner_out)
        acc += half * np.einsum(
            "k,kn->n", gw_o, _phi_pdf(z) * inner_out.reshape(ko, n))
    return np.where(hi <= lo, 0.0, acc)


def phi4_batch(b, r12, r13, r14, r23, r24, r34, gx_o, gw_o, gx_i, gw_i, out):
    b = np.asarray(b)
    step = 512
    for i in range(0, b.shape[0], step):
        s = slice(i, min(i + step, b.shape[0]))
        out[s] = _phi4_chunk(b[s], r12[s], r13[s], r14[s], r23[s], r24[s],
                             r34[s], gx_o, gw_o, gx_i, gw_i)


def _merge_count(a):
    """Sorted copy of a and its strict inversion count (divide and conquer)."""
    n = a.shape[0]
    if n < 2:
        return a, 0
    mid = n // 2
    left, cl = _merge_count(a[:mid])
    right, cr = _merge_count(a[mid:])
    pos = np.searchsorted(left, right, side="right")
    cross = int(left.size) * int(right.size) - int(pos.sum())
    merged = np.concatenate([left, right])
    merged.sort(kind="mergesort")
    return merged, cl + cr + cross


def _tie_pairs(groups):
    runs = np.diff(np.flatnonzero(np.concatenate(([True], groups, [True]))))
    return int(np.sum(runs.astype(np.int64) * (runs - 1) // 2))


def kendall_sorted_stats(xs, ys):
    """Pair-tie counts and discordances for arrays lexsorted by (x, y)."""
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    x_change = xs[1:] != xs[:-1]
    xy_change = x_change | (ys[1:] != ys[:-1])
    n1 = _tie_pairs(x_change)
    n3 = _tie_pairs(xy_change)
    ysorted, disc = _merge_count(ys.copy())
    n2 = _tie_pairs(ysorted[1:] != ysorted[:-1])
    return disc, n1, n2, n3


def interp_multilinear(axes, offs, shape, values, queries, out):
    """Vectorized counterpart of the compiled grid lookup."""
    d = len(shape)
    nq = queries.shape[0]
    strides = np.ones(d, dtype=np.int64)
    for dim in range(d - 2, -1, -1):
        strides[dim] = strides[dim + 1] * shape[dim + 1]
    cell = np.empty((nq, d), dtype=np.int64)
    frac = np.empty((nq, d), dtype=float)
    for dim in range(d):
        ax = axes[offs[dim]:offs[dim + 1]]
        q = np.clip(queries[:, dim], ax[0], ax[-1])
        i = np.clip(np.searchsorted(ax, q, side="right") - 1, 0, len(ax) - 2)
        cell[:, dim] = i
        frac[:, dim] = (q - ax[i]) / (ax[i + 1] - ax[i])
    acc = np.zeros(nq)
    for corner in range(1 << d):
        w = np.ones(nq)
        flat = np.zeros(nq, dtype=np.int64)
        for dim in range(d):
            if (corner >> dim) & 1:
                w = w * frac[:, dim]
                flat += (cell[:, dim] + 1) * strides[dim]
            else:
                w = w * (1.0 - frac[:, dim])
                flat += cell[:, dim] * strides[dim]
        acc += w * values[flat]
    out[:] = acc
