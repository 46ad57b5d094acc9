"""Bridge functions: the map F with E(tau-hat) = F(rho) per pair class.

For a latent bivariate normal (Z1, Z2) with correlation rho, observed
through the two variables' marginal regimes, F(rho) is the population
Kendall tau-a of the observed pair. Writing U = (Z1 - Z1')/sqrt(2) and
V = (Z2 - Z2')/sqrt(2) for an independent copy (Z1', Z2'), every form
below is the expectation of a product of sign kernels, reduced to a finite
signed combination of normal CDFs in up to four dimensions. Three
ingredients do all the work:

* binary-style kernels ``1{Z > d} - 1{Z' > d}`` leave products of
  *independent* copies, so purely discrete pairs (bin/ter) collapse to
  bivariate CDFs at threshold pairs;
* the truncated kernel is ``1{Z > d, U > 0}`` minus its swap, coupling the
  copies and bringing in 3-d and 4-d CDFs;
* a continuous variable contributes ``sign(V)`` directly.

Every form, including the four classical ones, is certified against
``bridge_mc``, a direct Monte-Carlo simulation of the defining
expectation; a transcription that fails the oracle does not ship.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError
from .kernels import impl
from .model import PairClass, ThresholdParams, VariableKind
from .mvnorm import phi3_batch, phi4_batch

__all__ = [
    "BridgeSpec",
    "PAIR_KEYS",
    "bridge_value",
    "bridge_batch",
    "bridge_mc",
    "tau_bound",
    "tau_bound_batch",
]

_SQ2 = math.sqrt(2.0)

# canonical (harder, easier) tag pairs; dispatch and grid files use these
PAIR_KEYS: tuple[tuple[str, str], ...] = (
    ("ter", "ter"), ("ter", "tru"), ("ter", "bin"), ("ter", "con"),
    ("tru", "tru"), ("tru", "bin"), ("tru", "con"),
    ("bin", "bin"), ("bin", "con"),
    ("con", "con"),
)

# fixed quadrature sizes for the vectorized paths; the accuracy tests in
# the suite pin these against refined evaluations and the MC oracle
PHI3_NODES = 32
PHI4_NODES = (24, 24)

_N_PARAMS = {"con": 0, "bin": 1, "tru": 1, "ter": 2}


@dataclass(frozen=True)
class BridgeSpec:
    """A pair classification plus the thresholds its bridge needs."""

    pair: PairClass
    params_a: ThresholdParams
    params_b: ThresholdParams

    def __post_init__(self):
        for kind, params, side in ((self.pair.kind_a, self.params_a, "a"),
                                   (self.pair.kind_b, self.params_b, "b")):
            need = _N_PARAMS[kind.value]
            have = (params.delta1 is not None) + (params.delta2 is not None)
            if need != have:
                raise DomainError(
                    f"variable {side} is {kind.value} and needs {need} "
                    f"threshold(s), got {have}")

    def canonical_args(self):
        """(key, a1, a2, b1, b2) with the harder variable first."""
        if self.pair.canonical:
            pa, pb = self.params_a, self.params_b
            key = (self.pair.kind_a.value, self.pair.kind_b.value)
        else:
            pa, pb = self.params_b, self.params_a
            key = (self.pair.kind_b.value, self.pair.kind_a.value)
        return key, pa.delta1, pa.delta2, pb.delta1, pb.delta2


def make_bridge_spec(kind_a: VariableKind, params_a: ThresholdParams,
                     kind_b: VariableKind, params_b: ThresholdParams) -> BridgeSpec:
    return BridgeSpec(PairClass(kind_a, kind_b), params_a, params_b)


# ---------------------------------------------------------------------------
# vectorized CDF helpers
# ---------------------------------------------------------------------------

def _p2(x, y, r):
    x, y, r = np.broadcast_arrays(x, y, r)
    out = np.empty(x.size)
    impl.phi2_batch(np.ascontiguousarray(x, float).ravel(),
                    np.ascontiguousarray(y, float).ravel(),
                    np.ascontiguousarray(r, float).ravel(), out)
    return out.reshape(x.shape)


def _p3(x1, x2, x3, r12, r13, r23):
    x1, x2, x3, r12, r13, r23 = np.broadcast_arrays(x1, x2, x3, r12, r13, r23)
    b = np.stack([x1.ravel(), x2.ravel(), x3.ravel()], axis=1)
    out = phi3_batch(b, r12.ravel(), r13.ravel(), r23.ravel(),
                     nodes=PHI3_NODES)
    return out.reshape(x1.shape)


def _p4(x1, x2, x3, x4, r12, r13, r14, r23, r24, r34):
    arrs = np.broadcast_arrays(x1, x2, x3, x4, r12, r13, r14, r23, r24, r34)
    b = np.stack([a.ravel() for a in arrs[:4]], axis=1)
    out = phi4_batch(b, *[a.ravel() for a in arrs[4:]],
                     nodes_outer=PHI4_NODES[0], nodes_inner=PHI4_NODES[1])
    return out.reshape(arrs[0].shape)


# ---------------------------------------------------------------------------
# the ten closed forms (canonical order: harder kind's thresholds first)
# ---------------------------------------------------------------------------

def _f_cc(rho):
    return 2.0 / np.pi * np.arcsin(rho)


def _f_bc(rho, d):
    return 4.0 * _p2(d, 0.0, rho / _SQ2) - 2.0 * ndtr(d)


def _f_bb(rho, da, db):
    return 2.0 * (_p2(da, db, rho) - ndtr(da) * ndtr(db))


def _e1(rho, a, b):
    # E[1{Z1 > a, Z1' <= b} sign(V)] for the cross-level ternary term
    p3 = _p3(a, b, 0.0, 0.0, rho / _SQ2, -rho / _SQ2)
    return (ndtr(b) - 2.0 * _p2(b, 0.0, -rho / _SQ2)
            - ndtr(a) * ndtr(b) + 2.0 * p3)


def _f_nc(rho, d1, d2):
    return _f_bc(rho, d1) + _f_bc(rho, d2) - 2.0 * _e1(rho, d2, d1)


def _f_nb(rho, d1, d2, lam):
    plam = ndtr(lam)
    p21, p22 = _p2(d1, lam, rho), _p2(d2, lam, rho)

    def term(c, pc, d, pd):
        hi = (1.0 - ndtr(c) - plam + pc) * pd
        lo = (plam - pc) * (ndtr(d) - pd)
        return hi - lo

    return 2.0 * (term(d1, p21, d1, p21) + term(d2, p22, d2, p22)
                  - term(d2, p22, d1, p21))


def _f_nn(rho, d1, d2, l1, l2):
    pd = {1: ndtr(d1), 2: ndtr(d2)}
    pl = {1: ndtr(l1), 2: ndtr(l2)}
    p2 = {(i, j): _p2(di, lj, rho)
          for i, di in ((1, d1), (2, d2)) for j, lj in ((1, l1), (2, l2))}

    def term(c, d, e, f):
        hi = (1.0 - pd[c] - pl[e] + p2[c, e]) * p2[d, f]
        lo = (pl[f] - p2[c, f]) * (pd[d] - p2[d, e])
        return hi - lo

    tot = 0.0
    for c, d, s1 in ((1, 1, 1.0), (2, 2, 1.0), (2, 1, -1.0)):
        for e, f, s2 in ((1, 1, 1.0), (2, 2, 1.0), (2, 1, -1.0)):
            tot = tot + s1 * s2 * term(c, d, e, f)
    return 2.0 * tot


def _f_tc(rho, d):
    p3 = _p3(-d, 0.0, 0.0, 1.0 / _SQ2, rho / _SQ2, rho)
    return -2.0 * _p2(-d, 0.0, 1.0 / _SQ2) + 4.0 * p3


def _f_tb(rho, dt, lam):
    pa = _p3(-dt, 0.0, -lam, 1.0 / _SQ2, rho, rho / _SQ2)
    pb = _p3(-dt, 0.0, -lam, 1.0 / _SQ2, 0.0, -rho / _SQ2)
    return 2.0 * (pa - pb)


def _f_tt(rho, da, db):
    pa = _p4(-da, 0.0, -db, 0.0,
             1.0 / _SQ2, rho, rho / _SQ2, rho / _SQ2, rho, 1.0 / _SQ2)
    pb = _p4(-da, 0.0, -db, 0.0,
             1.0 / _SQ2, 0.0, -rho / _SQ2, -rho / _SQ2, -rho, 1.0 / _SQ2)
    return 2.0 * (pa - pb)


def _f_tn(rho, dt, l1, l2):
    # truncated (dt) against ternary (l1 < l2)
    pa = _p4(-dt, 0.0, -l2, l1,
             1.0 / _SQ2, rho, 0.0, rho / _SQ2, rho / _SQ2, 0.0)
    pb = _p4(-dt, 0.0, -l2, l1,
             1.0 / _SQ2, 0.0, -rho, -rho / _SQ2, -rho / _SQ2, 0.0)
    return _f_tb(rho, dt, l1) + _f_tb(rho, dt, l2) - 2.0 * pa + 2.0 * pb


def bridge_batch(key: tuple[str, str], rho, a1=None, a2=None, b1=None, b2=None):
    """Vectorized F(rho) for one canonical pair class.

    rho and the threshold arguments broadcast together; thresholds not used
    by the class are ignored.
    """
    rho = np.asarray(rho, dtype=float)
    if key == ("con", "con"):
        return _f_cc(rho)
    if key == ("bin", "con"):
        return _f_bc(rho, a1)
    if key == ("ter", "con"):
        return _f_nc(rho, a1, a2)
    if key == ("tru", "con"):
        return _f_tc(rho, a1)
    if key == ("bin", "bin"):
        return _f_bb(rho, a1, b1)
    if key == ("ter", "bin"):
        return _f_nb(rho, a1, a2, b1)
    if key == ("tru", "bin"):
        return _f_tb(rho, a1, b1)
    if key == ("ter", "ter"):
        return _f_nn(rho, a1, a2, b1, b2)
    if key == ("ter", "tru"):
        return _f_tn(rho, b1, a1, a2)
    if key == ("tru", "tru"):
        return _f_tt(rho, a1, b1)
    raise DomainError(f"unsupported pair class {key}")


def bridge_value(spec: BridgeSpec, rho: float) -> float:
    """F(rho) for one pair; exact attainable extremes at rho = +/-1."""
    if not math.isfinite(rho) or abs(rho) > 1.0:
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    if rho == 1.0 or rho == -1.0:
        lo, hi = tau_bound(spec)
        return hi if rho > 0 else lo
    key, a1, a2, b1, b2 = spec.canonical_args()
    return float(bridge_batch(key, rho, a1, a2, b1, b2))


# ---------------------------------------------------------------------------
# Monte-Carlo oracle for the defining expectation
# ---------------------------------------------------------------------------

def _observe(z: np.ndarray, kind: str, d1, d2) -> np.ndarray:
    if kind == "con":
        return z
    if kind == "bin":
        return (z > d1).astype(float)
    if kind == "ter":
        return (z > d1).astype(float) + (z > d2).astype(float)
    if kind == "tru":
        # any increasing, positive-on-observed map gives the same tau;
        # z - d1 keeps the point mass at exactly 0 for every threshold
        return np.where(z > d1, z - d1, 0.0)
    raise DomainError(kind)


def bridge_mc(spec: BridgeSpec, rho: float, replicates: int = 1_000_000,
              seed: int = 0, _tru_map=None) -> tuple[float, float]:
    """Simulate E[sign(X1-X1') sign(X2-X2')] directly.

    Returns (estimate, standard_error). This is the ground truth every
    closed form is certified against.
    """
    if replicates < 10_000:
        raise DomainError(f"need at least 1e4 replicates, got {replicates}")
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    ka = spec.pair.kind_a.value
    kb = spec.pair.kind_b.value
    a1, a2 = spec.params_a.delta1, spec.params_a.delta2
    b1, b2 = spec.params_b.delta1, spec.params_b.delta2

    rng = np.random.default_rng(seed)
    c = math.sqrt(max(0.0, 1.0 - rho * rho))
    total = 0.0
    total_sq = 0.0
    left = replicates
    while left > 0:
        m = min(left, 1 << 20)
        g = rng.standard_normal((m, 4))
        za, zb = g[:, 0], rho * g[:, 0] + c * g[:, 1]
        zap, zbp = g[:, 2], rho * g[:, 2] + c * g[:, 3]
        if ka == "tru" and _tru_map is not None:
            xa, xap = _tru_map(za, a1), _tru_map(zap, a1)
        else:
            xa, xap = _observe(za, ka, a1, a2), _observe(zap, ka, a1, a2)
        if kb == "tru" and _tru_map is not None:
            xb, xbp = _tru_map(zb, b1), _tru_map(zbp, b1)
        else:
            xb, xbp = _observe(zb, kb, b1, b2), _observe(zbp, kb, b1, b2)
        s = np.sign(xa - xap) * np.sign(xb - xbp)
        total += float(s.sum())
        total_sq += float((s * s).sum())
        left -= m
    mean = total / replicates
    var = max(0.0, (total_sq - replicates * mean * mean) / (replicates - 1))
    return mean, math.sqrt(var / replicates)


# ---------------------------------------------------------------------------
# attainable tau extremes (bounds for rescaling)
# ---------------------------------------------------------------------------
#
# At rho = +1 both observed variables are nondecreasing functions of the
# same latent draw, so the sign product is 1 exactly when both detect a
# difference: F(1) = 1 - P(tie_1) - P(tie_2) + P(both tie). Ties happen
# when two iid draws land in the same point-mass cell, giving sums of
# squared cell masses; at rho = -1 the second variable's cells reflect.


def _cells(kind: str, d1, d2, reflect: bool = False):
    if kind == "con":
        iv = []
    elif kind == "bin":
        iv = [(-np.inf, d1), (d1, np.inf)]
    elif kind == "tru":
        iv = [(-np.inf, d1)]
    elif kind == "ter":
        iv = [(-np.inf, d1), (d1, d2), (d2, np.inf)]
    else:
        raise DomainError(kind)
    if reflect:
        iv = [(np.negative(hi), np.negative(lo)) for lo, hi in iv]
    return iv


def _mass2_sum(cells):
    tot = 0.0
    for lo, hi in cells:
        m = ndtr(hi) - ndtr(lo)
        tot = tot + m * m
    return tot


def _overlap2(cells1, cells2):
    tot = 0.0
    for lo1, hi1 in cells1:
        for lo2, hi2 in cells2:
            m = np.maximum(0.0, ndtr(np.minimum(hi1, hi2))
                           - ndtr(np.maximum(lo1, lo2)))
            tot = tot + m * m
    return tot


def tau_bound_batch(key: tuple[str, str], a1=None, a2=None, b1=None, b2=None):
    """(lower, upper) attainable tau, vectorized over threshold arrays."""
    ka, kb = key
    ca = _cells(ka, a1, a2)
    cb = _cells(kb, b1, b2)
    cbr = _cells(kb, b1, b2, reflect=True)
    t1 = _mass2_sum(ca)
    t2 = _mass2_sum(cb)
    base = 1.0 - t1 - t2
    upper = base + _overlap2(ca, cb)
    lower = -(base + _overlap2(ca, cbr))
    return np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)


def tau_bound(spec: BridgeSpec) -> tuple[float, float]:
    """Attainable tau extremes (F at the comonotone/antimonotone limits)."""
    key, a1, a2, b1, b2 = spec.canonical_args()
    lo, hi = tau_bound_batch(key, a1, a2, b1, b2)
    return float(lo), float(hi)
