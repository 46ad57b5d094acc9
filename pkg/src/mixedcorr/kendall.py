"""Kendall's tau with the pair-count denominator (tau-a).

The bridge moment equation relates the latent correlation to the
expectation of the *tau-a* statistic: the concordance sum divided by the
total number of observation pairs, with tied pairs contributing zero. No
tie correction is applied -- substituting tau-b here would bias every
downstream inversion.

The concordance sum is accumulated in exact integer arithmetic from
merge-sort inversion counts, so the result is bit-identical to the
O(n^2) sign-product definition at O(n log n) cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .kernels import impl

__all__ = ["TauEstimate", "kendall_tau", "kendall_tau_matrix"]


@dataclass(frozen=True)
class TauEstimate:
    tau: float
    n_effective: int


def _tau_from_clean(x: np.ndarray, y: np.ndarray, kernels=impl) -> float:
    n = x.shape[0]
    order = np.lexsort((y, x))
    xs = np.ascontiguousarray(x[order])
    ys = np.ascontiguousarray(y[order])
    disc, n1, n2, n3 = kernels.kendall_sorted_stats(xs, ys)
    n0 = n * (n - 1) // 2
    s = n0 - n1 - n2 + n3 - 2 * disc
    return s / n0


def kendall_tau(x, y, kernels=impl) -> TauEstimate:
    """tau-a over the pairwise-complete rows of two equal-length vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"kendall_tau needs equal-length vectors, "
                        f"got shapes {x.shape} and {y.shape}")
    mask = ~(np.isnan(x) | np.isnan(y))
    xc = x[mask]
    yc = y[mask]
    if xc.size < 2:
        raise DataError("fewer than 2 pairwise-complete observations")
    return TauEstimate(tau=_tau_from_clean(xc, yc, kernels),
                       n_effective=int(xc.size))


def kendall_tau_matrix(values: np.ndarray, kernels=impl) -> np.ndarray:
    """Symmetric tau-a matrix over the columns of an (n, p) array."""
    values = np.asarray(values, dtype=float)
    n, p = values.shape
    out = np.eye(p)
    has_nan = bool(np.isnan(values).any())
    for j in range(p):
        for k in range(j + 1, p):
            if has_nan:
                t = kendall_tau(values[:, j], values[:, k], kernels).tau
            else:
                t = _tau_from_clean(values[:, j], values[:, k], kernels)
            out[j, k] = out[k, j] = t
    return out
