"""Inverting the bridge: latent correlation from an observed Kendall tau.

Two routes:

* ``invert_original`` -- per-pair bracketed root-finding of F(rho) = tau on
  [-1 + eps, 1 - eps]. Continuous/continuous pairs skip the root-finder
  and use the arcsine closed form directly.
* ``invert_approx`` -- multilinear interpolation of precompiled F-inverse
  values on a grid indexed by the *rescaled* tau (tau divided by its
  attainable extreme for the pair's thresholds, so the first grid axis
  always spans [-1, 1]) and threshold coordinates. A thin band next to
  the rescaled endpoints falls back to the root-finder, where
  interpolation error would otherwise concentrate.

``invert_batch`` is the vectorized counterpart of ``invert_original`` used
by the grid compiler and its certification pass; it honors the same
residual contract (|F(rho) - tau| <= 1e-8).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .bridge import BridgeSpec, bridge_batch, bridge_value, tau_bound_batch
from .errors import DomainError, NumericError
from .kernels import impl

__all__ = [
    "RHO_EPS",
    "ROOT_TOL",
    "RescaledTau",
    "invert_original",
    "invert_batch",
    "rescale_tau",
    "rescale_tau_batch",
    "invert_approx",
]

RHO_EPS = 1e-9
ROOT_TOL = 1e-8

# dataclass-light: the rescaled value is just a float with a documented range
class RescaledTau(float):
    """tau divided by its attainable extreme, clamped to [-1, 1]."""

    def __new__(cls, value: float):
        return super().__new__(cls, min(1.0, max(-1.0, value)))


def _arcsin_inverse(tau):
    return np.sin(0.5 * np.pi * np.asarray(tau, dtype=float))


def invert_original(spec: BridgeSpec, tau: float) -> float:
    """The unique rho with F(rho) = tau, by bracketed root-finding.

    tau at or beyond the attainable extremes maps to +/-(1 - 1e-9); the
    extremes are taken as the bridge values at the bracket endpoints, so
    the early exit and the root-finder agree. The returned rho satisfies
    |F(rho) - tau| <= 1e-8.
    """
    if not math.isfinite(tau):
        raise DomainError(f"tau must be finite, got {tau}")
    if abs(tau) > 1.0:
        raise DomainError(f"tau must lie in [-1, 1], got {tau}")
    key, a1, a2, b1, b2 = spec.canonical_args()
    if key == ("con", "con"):
        return float(_arcsin_inverse(tau))
    lo, hi = -1.0 + RHO_EPS, 1.0 - RHO_EPS
    f_lo = bridge_value(spec, lo) - tau
    if f_lo >= 0.0:
        return lo
    f_hi = bridge_value(spec, hi) - tau
    if f_hi <= 0.0:
        return hi
    g = lambda rho: bridge_value(spec, rho) - tau
    root = brentq(g, lo, hi, xtol=1e-13, rtol=8.9e-16, maxiter=200)
    res = g(root)
    n_extra = 0
    blo, bhi = (root, hi) if res < 0 else (lo, root)
    while abs(res) > ROOT_TOL and n_extra < 80:
        mid = 0.5 * (blo + bhi)
        r = g(mid)
        if r < 0:
            blo = mid
        else:
            bhi = mid
        root, res = mid, r
        n_extra += 1
    if abs(res) > ROOT_TOL:
        raise NumericError(
            f"root residual {abs(res):.2e} above {ROOT_TOL} for pair {key}")
    return float(root)


def invert_batch(key, tau, a1=None, a2=None, b1=None, b2=None,
                 bracket=None, max_iter: int = 80,
                 return_failures: bool = False):
    """Vectorized bridge inversion with the invert_original contract.

    ``bracket`` optionally supplies per-point (lo, hi) warm brackets (e.g.
    from a coarse curve); points whose bracket does not straddle the root
    fall back to the full interval. Root-finding is Illinois-style regula
    falsi with a bisection safeguard. With ``return_failures`` the result
    is (rho, still_active_mask) instead of raising on non-convergence.
    """
    tau = np.asarray(tau, dtype=float)
    if key == ("con", "con"):
        return _arcsin_inverse(tau)
    shape = tau.shape
    tau = tau.ravel()
    thr = [None if t is None else np.broadcast_to(t, shape).ravel()
           for t in (a1, a2, b1, b2)]
    a1, a2, b1, b2 = thr
    n = tau.size

    def f(rho, mask):
        sel = lambda t: None if t is None else t[mask]
        return bridge_batch(key, rho, sel(a1), sel(a2), sel(b1), sel(b2)) \
            - tau[mask]

    out = np.empty(n)
    lo = np.full(n, -1.0 + RHO_EPS)
    hi = np.full(n, 1.0 - RHO_EPS)
    flo = np.empty(n)
    fhi = np.empty(n)

    # accepting a warm bracket skips the two full-interval evaluations,
    # which sit at the most expensive correlations; only points near the
    # attainable extremes (where the closed bound and the bracket-endpoint
    # bridge value may disagree) always take the cold path
    warm_ok = np.zeros(n, dtype=bool)
    if bracket is not None:
        lo_b, hi_b = tau_bound_batch(key, a1, a2, b1, b2)
        interior = (tau > np.broadcast_to(lo_b, tau.shape) + 1e-4) & \
                   (tau < np.broadcast_to(hi_b, tau.shape) - 1e-4)
        wlo = np.clip(np.asarray(bracket[0], dtype=float).ravel(),
                      -1.0 + RHO_EPS, 1.0 - RHO_EPS)
        whi = np.clip(np.asarray(bracket[1], dtype=float).ravel(),
                      -1.0 + RHO_EPS, 1.0 - RHO_EPS)
        cand = interior & (whi > wlo)
        if np.any(cand):
            fwlo = np.full(n, np.nan)
            fwhi = np.full(n, np.nan)
            fwlo[cand] = f(wlo[cand], cand)
            fwhi[cand] = f(whi[cand], cand)
            warm_ok = cand & (fwlo < 0.0) & (fwhi > 0.0)
            lo[warm_ok] = wlo[warm_ok]
            hi[warm_ok] = whi[warm_ok]
            flo[warm_ok] = fwlo[warm_ok]
            fhi[warm_ok] = fwhi[warm_ok]

    cold = ~warm_ok
    at_lo = np.zeros(n, dtype=bool)
    at_hi = np.zeros(n, dtype=bool)
    if np.any(cold):
        flo[cold] = f(lo[cold], cold)
        at_lo = cold & (flo >= 0.0)
        out[at_lo] = -1.0 + RHO_EPS
        rest = cold & ~at_lo
        if np.any(rest):
            fhi[rest] = f(hi[rest], rest)
            at_hi = rest & (fhi <= 0.0)
            out[at_hi] = 1.0 - RHO_EPS
    active = ~(at_lo | at_hi)

    for it in range(max_iter):
        if not np.any(active):
            break
        la, ha, fla, fha = lo[active], hi[active], flo[active], fhi[active]
        x = ha - fha * (ha - la) / (fha - fla)
        if it % 3 == 2:  # periodic bisection keeps worst-case convergence
            x = 0.5 * (la + ha)
        x = np.clip(x, la + 1e-16, ha - 1e-16)
        fx = f(x, active)
        done = np.abs(fx) <= ROOT_TOL
        idx = np.flatnonzero(active)
        out[idx[done]] = x[done]
        move_lo = fx < 0.0
        la = np.where(move_lo, x, la)
        fla = np.where(move_lo, fx, fla)
        ha = np.where(move_lo, ha, x)
        fha = np.where(move_lo, fha, fx)
        # Illinois halving of the stale side
        fha = np.where(move_lo, 0.5 * fha, fha)
        fla = np.where(move_lo, fla, 0.5 * fla)
        lo[idx], hi[idx], flo[idx], fhi[idx] = la, ha, fla, fha
        active[idx[done]] = False
    if np.any(active) and bracket is not None:
        # a warm bracket built from a noisy curve sample can straddle zero
        # without containing the true crossing; redo stragglers cold
        retry = invert_batch(key, tau[active],
                             None if a1 is None else a1[active],
                             None if a2 is None else a2[active],
                             None if b1 is None else b1[active],
                             None if b2 is None else b2[active],
                             bracket=None, max_iter=max_iter,
                             return_failures=True)
        out[active] = retry[0]
        active[active] = retry[1]
    if np.any(active):
        out[active] = 0.5 * (lo[active] + hi[active])
        if return_failures:
            return out.reshape(shape), active.reshape(shape)
        raise NumericError(
            f"{int(active.sum())} inversions failed to reach residual "
            f"{ROOT_TOL} in {max_iter} iterations for pair {key}")
    if return_failures:
        return out.reshape(shape), active.reshape(shape)
    return out.reshape(shape)


def rescale_tau_batch(key, tau, a1=None, a2=None, b1=None, b2=None):
    """tau over its attainable extreme (sign-dependent), clamped to [-1, 1]."""
    lo, hi = tau_bound_batch(key, a1, a2, b1, b2)
    tau = np.asarray(tau, dtype=float)
    scaled = np.where(tau >= 0.0, tau / hi, tau / np.abs(lo))
    return np.clip(scaled, -1.0, 1.0)


def rescale_tau(spec: BridgeSpec, tau: float) -> RescaledTau:
    if abs(tau) > 1.0:
        raise DomainError(f"tau must lie in [-1, 1], got {tau}")
    key, a1, a2, b1, b2 = spec.canonical_args()
    return RescaledTau(float(rescale_tau_batch(key, tau, a1, a2, b1, b2)))


def threshold_coords(spec: BridgeSpec) -> list[float]:
    """Grid coordinates for a spec's thresholds, in canonical order.

    Binary/truncated contribute their zero-share p = Phi(delta1); ternary
    contributes (c1, w) with c1 = Phi(delta1) and w = (c2 - c1)/(1 - c1),
    which maps the ordered-cutoff constraint onto a full rectangle.
    """
    key, a1, a2, b1, b2 = spec.canonical_args()
    coords: list[float] = []
    for kind, d1, d2 in ((key[0], a1, a2), (key[1], b1, b2)):
        if kind == "con":
            continue
        c1 = float(ndtr(d1))
        if kind == "ter":
            c2 = float(ndtr(d2))
            coords.extend([c1, (c2 - c1) / (1.0 - c1)])
        else:
            coords.append(c1)
    return coords


def invert_approx(grid, spec: BridgeSpec, tau: float,
                  boundary_band: float = 0.005) -> float:
    """Grid-interpolated inverse, with root-finding where the grid declines.

    Queries outside the grid hull clamp onto it. The interpolation path
    hands a query to invert_original when the rescaled tau falls in the
    endpoint band (default |scaled| > 0.995), past the interpolated bound
    surface, or in the short-side steep zone of a strongly asymmetric
    pair (see grids.approx_invert).
    """
    from .grids import approx_invert

    key = spec.pair.key
    if grid.key != key:
        raise DomainError(f"grid holds pair {grid.key}, spec is {key}")
    if abs(tau) > 1.0 or not math.isfinite(tau):
        raise DomainError(f"tau must lie in [-1, 1], got {tau}")
    coords = [np.array([c]) for c in threshold_coords(spec)]
    rho, fallback = approx_invert(grid, np.array([tau]), coords,
                                  boundary_band)
    if bool(fallback[0]):
        return invert_original(spec, tau)
    return float(rho[0])


def invert_approx_class(key, tau, specs, boundary_band: float = 0.005,
                        grid=None):
    """Vectorized approx inversion for one pair class in the pipeline.

    Returns (rho, fallback_mask); fallback entries went through
    invert_original.
    """
    from .grids import approx_invert, default_grid

    tau = np.asarray(tau, dtype=float)
    if key == ("con", "con"):
        return _arcsin_inverse(tau), np.zeros(tau.shape, dtype=bool)
    if grid is None:
        grid = default_grid(key)
    coords_per_spec = np.array([threshold_coords(s) for s in specs])
    coords = [coords_per_spec[:, j] for j in range(coords_per_spec.shape[1])]
    rho, fallback = approx_invert(grid, tau, coords, boundary_band)
    for i in np.flatnonzero(fallback):
        rho[i] = invert_original(specs[i], float(tau[i]))
    return rho, fallback
