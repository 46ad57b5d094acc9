"""Standard-normal CDFs in one to four dimensions, plus the quantile.

Everything here is deterministic: ``phi2`` uses a single-integral reduction
with fixed Gauss-Legendre nodes, and ``phi3``/``phi4`` integrate the
conditional lower-dimensional CDF over the first (smallest-limit) variable
in probability space, doubling the node count until two successive rules
agree. No randomized lattice rules are involved, so repeated calls are
bit-reproducible.

Correlation arguments for ``phi3``/``phi4`` must be symmetric with unit
diagonal and positive semi-definite within an eigenvalue tolerance of
1e-10. Correlations of magnitude above ``1 - 1e-12`` snap to the exact
degenerate (comonotone/antimonotone) formulas.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError
from .kernels import impl

__all__ = ["phi", "phi_inv", "phi2", "phi3", "phi4", "validate_correlation"]

# beyond this the double-precision normal CDF is exactly 0 or 1
_ZMAX = 9.5


def phi(x: float) -> float:
    """Univariate standard normal CDF, defined on the extended reals."""
    return float(ndtr(x))


def phi_inv(p: float) -> float:
    """Univariate standard normal quantile for p in the open unit interval."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"phi_inv requires 0 < p < 1, got {p}")
    return float(ndtri(p))


def phi2(x: float, y: float, r: float) -> float:
    """Bivariate standard normal CDF P(Z1 <= x, Z2 <= y) at correlation r."""
    if not -1.0 <= r <= 1.0:
        raise DomainError(f"correlation must lie in [-1, 1], got {r}")
    return float(impl.phi2_scalar(float(x), float(y), float(r)))


def validate_correlation(R, tol: float = 1e-10) -> np.ndarray:
    """Check a small correlation matrix (dim 2..4) and return it as float64."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DomainError(f"correlation matrix must be square, got shape {R.shape}")
    d = R.shape[0]
    if not 2 <= d <= 4:
        raise DomainError(f"supported dimensions are 2..4, got {d}")
    if not np.all(np.isfinite(R)):
        raise DomainError("correlation matrix has non-finite entries")
    if np.max(np.abs(R - R.T)) > 1e-12:
        raise DomainError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(R) - 1.0)) > 1e-12:
        raise DomainError("correlation matrix diagonal must be 1")
    if np.linalg.eigvalsh(R)[0] < -tol:
        raise DomainError("correlation matrix is not positive semi-definite")
    return R


@lru_cache(maxsize=32)
def _glnodes(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [-1, 1]; the kernels map it per segment."""
    x, w = np.polynomial.legendre.leggauss(k)
    return np.ascontiguousarray(x), np.ascontiguousarray(w)


def _clamp_limits(b: np.ndarray) -> np.ndarray:
    return np.clip(b, -_ZMAX, _ZMAX)


def _cond_score(rjk, rjl, rkl):
    """|conditional correlation| of (k, l) given j; huge when degenerate."""
    s2 = np.maximum((1.0 - rjk * rjk) * (1.0 - rjl * rjl), 1e-30)
    return np.abs(rkl - rjk * rjl) / np.sqrt(s2)


def _sort3(b, r12, r13, r23):
    """Condition on the variable whose removal leaves the tamest pair.

    A near-degenerate conditional pair turns the inner bivariate CDF into a
    creased surface that quadrature resolves poorly, so the conditioning
    variable is chosen to minimize the remaining |conditional correlation|.
    """
    score = np.stack([_cond_score(r12, r13, r23),
                      _cond_score(r12, r23, r13),
                      _cond_score(r13, r23, r12)], axis=0)
    j = np.argmin(score, axis=0)
    out_b = b.copy()
    o12, o13, o23 = r12.copy(), r13.copy(), r23.copy()
    m = j == 1
    if np.any(m):
        out_b[m] = b[m][:, [1, 0, 2]]
        o13[m] = r23[m]
        o23[m] = r13[m]
    m = j == 2
    if np.any(m):
        out_b[m] = b[m][:, [2, 0, 1]]
        o12[m] = r13[m]
        o13[m] = r23[m]
        o23[m] = r12[m]
    return out_b, o12, o13, o23


def _sort4(b, r12, r13, r14, r23, r24, r34):
    """Pick the outer conditioning variable, then order the inner triple.

    The outer choice minimizes the worst |conditional correlation| among
    the remaining pairs; the inner integral then conditions on its first
    variable, which _sort3-style scoring picks from the conditional triple.
    """
    def max_score(rjk, rjl, rjm, rkl, rkm, rlm):
        return np.maximum(np.maximum(_cond_score(rjk, rjl, rkl),
                                     _cond_score(rjk, rjm, rkm)),
                          _cond_score(rjl, rjm, rlm))

    score = np.stack([
        max_score(r12, r13, r14, r23, r24, r34),
        max_score(r12, r23, r24, r13, r14, r34),
        max_score(r13, r23, r34, r12, r14, r24),
        max_score(r14, r24, r34, r12, r13, r23)], axis=0)
    j = np.argmin(score, axis=0)
    out_b = b.copy()
    rs = [r.copy() for r in (r12, r13, r14, r23, r24, r34)]
    perms = {
        1: ([1, 0, 2, 3], lambda: (r12, r23, r24, r13, r14, r34)),
        2: ([2, 0, 1, 3], lambda: (r13, r23, r34, r12, r14, r24)),
        3: ([3, 0, 1, 2], lambda: (r14, r24, r34, r12, r13, r23)),
    }
    for jj, (order, remap) in perms.items():
        m = j == jj
        if np.any(m):
            out_b[m] = b[m][:, order]
            for dst, src in zip(rs, [s[m] for s in remap()]):
                dst[m] = src
    b2, r12, r13, r14, r23, r24, r34 = out_b, *rs

    # order the conditional triple: its first member is the inner
    # conditioning variable, chosen the same way
    s2 = np.sqrt(np.maximum(1.0 - r12 * r12, 1e-30))
    s3 = np.sqrt(np.maximum(1.0 - r13 * r13, 1e-30))
    s4 = np.sqrt(np.maximum(1.0 - r14 * r14, 1e-30))
    rc23 = (r23 - r12 * r13) / (s2 * s3)
    rc24 = (r24 - r12 * r14) / (s2 * s4)
    rc34 = (r34 - r13 * r14) / (s3 * s4)
    score = np.stack([_cond_score(rc23, rc24, rc34),
                      _cond_score(rc23, rc34, rc24),
                      _cond_score(rc24, rc34, rc23)], axis=0)
    k = np.argmin(score, axis=0)
    out_b = b2.copy()
    rs = [r.copy() for r in (r12, r13, r14, r23, r24, r34)]
    perms = {
        # inner permutations keep variable 1 in place
        1: ([0, 2, 1, 3], lambda: (r13, r12, r14, r23, r34, r24)),
        2: ([0, 3, 1, 2], lambda: (r14, r12, r13, r24, r34, r23)),
    }
    for kk, (order, remap) in perms.items():
        m = k == kk
        if np.any(m):
            out_b[m] = b2[m][:, order]
            for dst, src in zip(rs, [s[m] for s in remap()]):
                dst[m] = src
    return (out_b, *rs)


def phi3_batch(b, r12, r13, r23, nodes: int = 32) -> np.ndarray:
    """Trivariate CDF at many points with a fixed quadrature rule.

    b is (N, 3); the correlation entries are length-N vectors. No domain
    validation; callers guarantee valid correlation structure.
    """
    b = _clamp_limits(np.asarray(b, dtype=float))
    r12 = np.ascontiguousarray(r12, dtype=float)
    r13 = np.ascontiguousarray(r13, dtype=float)
    r23 = np.ascontiguousarray(r23, dtype=float)
    b, r12, r13, r23 = _sort3(b, r12, r13, r23)
    gx, gw = _glnodes(nodes)
    out = np.empty(b.shape[0])
    impl.phi3_batch(np.ascontiguousarray(b), r12, r13, r23, gx, gw, out)
    return out


def phi4_batch(b, r12, r13, r14, r23, r24, r34,
               nodes_outer: int = 24, nodes_inner: int = 24) -> np.ndarray:
    """Quadrivariate CDF at many points with fixed quadrature rules."""
    b = _clamp_limits(np.asarray(b, dtype=float))
    rs = [np.ascontiguousarray(r, dtype=float)
          for r in (r12, r13, r14, r23, r24, r34)]
    b, r12, r13, r14, r23, r24, r34 = _sort4(b, *rs)
    gx_o, gw_o = _glnodes(nodes_outer)
    gx_i, gw_i = _glnodes(nodes_inner)
    out = np.empty(b.shape[0])
    impl.phi4_batch(np.ascontiguousarray(b), r12, r13, r14, r23, r24, r34,
                    gx_o, gw_o, gx_i, gw_i, out)
    return out


def _reduce_infinite(x, R):
    """Drop +inf coordinates (marginalization); None signals a zero result."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("limits must not be NaN")
    if np.any(x == -np.inf):
        return None, None
    keep = x < np.inf
    return x[keep], R[np.ix_(keep, keep)]


def _phi_general(x, R) -> float:
    """CDF for the post-reduction dimension (0..4)."""
    d = len(x)
    if d == 0:
        return 1.0
    if d == 1:
        return phi(x[0])
    if d == 2:
        return phi2(x[0], x[1], R[0, 1])
    if d == 3:
        return _phi3_adaptive(x, R)
    return _phi4_adaptive(x, R)


def _phi3_adaptive(x, R, tol: float = 1e-9) -> float:
    one = lambda k: float(phi3_batch(x[None, :], np.array([R[0, 1]]),
                                     np.array([R[0, 2]]), np.array([R[1, 2]]),
                                     nodes=k)[0])
    k = 24
    prev = one(k)
    while k < 400:
        k *= 2
        cur = one(k)
        if abs(cur - prev) <= 0.5 * tol:
            return min(max(cur, 0.0), 1.0)
        prev = cur
    return min(max(prev, 0.0), 1.0)


def _phi4_adaptive(x, R, tol: float = 5e-9) -> float:
    one = lambda k: float(phi4_batch(
        x[None, :], np.array([R[0, 1]]), np.array([R[0, 2]]),
        np.array([R[0, 3]]), np.array([R[1, 2]]), np.array([R[1, 3]]),
        np.array([R[2, 3]]), nodes_outer=k, nodes_inner=k)[0])
    k = 24
    prev = one(k)
    while k < 200:
        k *= 2
        cur = one(k)
        if abs(cur - prev) <= 0.5 * tol:
            return min(max(cur, 0.0), 1.0)
        prev = cur
    return min(max(prev, 0.0), 1.0)


def phi3(x, R) -> float:
    """Trivariate standard normal CDF P(Z <= x) under correlation matrix R."""
    R = validate_correlation(R)
    if R.shape[0] != 3:
        raise DomainError(f"phi3 needs a 3x3 matrix, got {R.shape[0]}x{R.shape[0]}")
    xr, Rr = _reduce_infinite(x, R)
    if xr is None:
        return 0.0
    return _phi_general(xr, Rr)


def phi4(x, R) -> float:
    """Quadrivariate standard normal CDF P(Z <= x) under correlation matrix R."""
    R = validate_correlation(R)
    if R.shape[0] != 4:
        raise DomainError(f"phi4 needs a 4x4 matrix, got {R.shape[0]}x{R.shape[0]}")
    xr, Rr = _reduce_infinite(x, R)
    if xr is None:
        return 0.0
    return _phi_general(xr, Rr)
