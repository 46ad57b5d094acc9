"""Variable typing, latent threshold estimation, and pair classification.

A latent Gaussian copula model observes each variable through one of four
marginal regimes:

* ``con`` -- continuous: a strictly monotone transform of the latent normal.
* ``bin`` -- binary: ``1{Z > d1}``.
* ``ter`` -- ternary: two cutoffs ``d1 < d2`` give levels 0/1/2.
* ``tru`` -- zero-inflated (truncated): exact zeros below ``d1``, a
  continuous positive part above.

Cutoffs live on the standard-normal scale and are estimated by moment
matching: ``d1 = phi_inv(p0)`` and, for ternary, ``d2 = phi_inv(p0 + p1)``
where ``p0``/``p1`` are the empirical proportions of the lowest and middle
levels.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DataError, DomainError

__all__ = [
    "VariableKind",
    "DataMatrix",
    "ThresholdParams",
    "PairClass",
    "classify_pair",
    "detect_types",
    "estimate_thresholds",
]


class VariableKind(enum.Enum):
    CONTINUOUS = "con"
    BINARY = "bin"
    TERNARY = "ter"
    TRUNCATED = "tru"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "VariableKind":
        t = token.strip().lower()
        for kind in cls:
            if t == kind.value or t == kind.name.lower():
                return kind
        raise DomainError(f"unknown variable kind {token!r} "
                          f"(expected one of con, bin, ter, tru)")


# Pair dispatch order, hardest marginal first. Ternary needs two cutoffs,
# truncated mixes a point mass with a continuous part, binary needs one
# cutoff, continuous needs none.
_HARDNESS = {
    VariableKind.TERNARY: 0,
    VariableKind.TRUNCATED: 1,
    VariableKind.BINARY: 2,
    VariableKind.CONTINUOUS: 3,
}


@dataclass(frozen=True)
class ThresholdParams:
    """Latent cutoffs for one variable; empty for continuous."""

    delta1: float | None = None
    delta2: float | None = None

    def __post_init__(self):
        if self.delta1 is not None and not math.isfinite(self.delta1):
            raise DomainError(f"non-finite threshold delta1={self.delta1}")
        if self.delta2 is not None:
            if self.delta1 is None:
                raise DomainError("delta2 given without delta1")
            if not math.isfinite(self.delta2):
                raise DomainError(f"non-finite threshold delta2={self.delta2}")
            if not self.delta1 < self.delta2:
                raise DomainError(
                    f"ternary cutoffs must satisfy delta1 < delta2, "
                    f"got {self.delta1} >= {self.delta2}")

    @property
    def empty(self) -> bool:
        return self.delta1 is None


@dataclass(frozen=True)
class PairClass:
    """An unordered combination of two variable kinds.

    ``canonical`` is true when ``kind_a`` is at least as hard as ``kind_b``
    under the fixed ordering ternary > truncated > binary > continuous.
    """

    kind_a: VariableKind
    kind_b: VariableKind
    canonical: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "canonical",
            _HARDNESS[self.kind_a] <= _HARDNESS[self.kind_b])

    def canonicalized(self) -> "PairClass":
        if self.canonical:
            return self
        return PairClass(self.kind_b, self.kind_a)

    @property
    def key(self) -> tuple[str, str]:
        """Canonical ``(harder, easier)`` tag pair, e.g. ``("tru", "bin")``."""
        p = self.canonicalized()
        return (p.kind_a.value, p.kind_b.value)


def classify_pair(kind_a: VariableKind, kind_b: VariableKind) -> PairClass:
    return PairClass(kind_a, kind_b)


@dataclass(frozen=True)
class DataMatrix:
    """An observations-by-variables grid; NaN marks a missing value."""

    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError(f"expected a 2-d data matrix, got shape {v.shape}")
        if len(self.column_names) != v.shape[1]:
            raise DataError(
                f"{len(self.column_names)} column names for {v.shape[1]} columns")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def observed(self, j: int) -> np.ndarray:
        col = self.values[:, j]
        return col[~np.isnan(col)]

    def validate_column(self, j: int, kind: VariableKind) -> None:
        """Check the column invariants for its declared kind."""
        obs = self.observed(j)
        name = self.column_names[j]
        if obs.size < 2:
            raise DataError(f"degenerate column {name!r}: fewer than 2 observed values")
        distinct = np.unique(obs)
        if distinct.size < 2:
            raise DataError(f"degenerate column {name!r}: all observed values equal")
        if kind is VariableKind.BINARY and distinct.size != 2:
            raise DataError(
                f"column {name!r} declared binary but has {distinct.size} levels")
        if kind is VariableKind.TERNARY and distinct.size != 3:
            raise DataError(
                f"column {name!r} declared ternary but has {distinct.size} levels")
        if kind is VariableKind.TRUNCATED:
            if distinct[0] < 0:
                raise DataError(f"column {name!r} declared truncated but has "
                                f"negative values")
            if not np.any(obs == 0.0) or not np.any(obs > 0.0):
                raise DataError(f"column {name!r} declared truncated but lacks "
                                f"zeros or positive values")


def detect_types(data: DataMatrix,
                 declared: list[VariableKind | None] | None = None,
                 zero_rate_cutoff: float = 0.05) -> list[VariableKind]:
    """Infer a variable kind per column; explicit declarations win.

    2 distinct observed values -> binary, 3 -> ternary; more than 3 that are
    all non-negative with a zero share of at least ``zero_rate_cutoff`` ->
    truncated; anything else -> continuous.
    """
    if declared is not None and len(declared) != data.n_cols:
        raise DataError(f"{len(declared)} declared types for {data.n_cols} columns")
    out: list[VariableKind] = []
    for j in range(data.n_cols):
        if declared is not None and declared[j] is not None:
            kind = declared[j]
        else:
            obs = data.observed(j)
            if obs.size < 2:
                raise DataError(f"degenerate column {data.column_names[j]!r}: "
                                f"fewer than 2 observed values")
            distinct = np.unique(obs)
            if distinct.size < 2:
                raise DataError(f"degenerate column {data.column_names[j]!r}: "
                                f"all observed values equal")
            if distinct.size == 2:
                kind = VariableKind.BINARY
            elif distinct.size == 3:
                kind = VariableKind.TERNARY
            elif distinct[0] >= 0 and np.mean(obs == 0.0) >= zero_rate_cutoff:
                kind = VariableKind.TRUNCATED
            else:
                kind = VariableKind.CONTINUOUS
        data.validate_column(j, kind)
        out.append(kind)
    return out


def _clamped_quantile(p: float, n: int, clamp: bool, what: str) -> float:
    lo = 0.5 / n
    if p <= 0.0 or p >= 1.0:
        if not clamp:
            raise DataError(
                f"boundary proportion: {what} is {p:.4g}, latent cutoff "
                f"would be infinite (enable proportion clamping or fix the data)")
        p = min(max(p, lo), 1.0 - lo)
    return float(ndtri(p))


def estimate_thresholds(column: np.ndarray, kind: VariableKind,
                        clamp_proportions: bool = True) -> ThresholdParams:
    """Latent cutoffs from the empirical level proportions of one column.

    Proportions are taken over non-missing entries. With
    ``clamp_proportions`` (the default), proportions of exactly 0 or 1 are
    pulled to ``[1/(2n), 1 - 1/(2n)]`` so small samples keep finite cutoffs.
    """
    obs = np.asarray(column, dtype=float)
    obs = obs[~np.isnan(obs)]
    n = obs.size
    if n < 2:
        raise DataError("degenerate column: fewer than 2 observed values")
    if kind is VariableKind.CONTINUOUS:
        return ThresholdParams()
    if kind is VariableKind.BINARY:
        lowest = obs.min()
        p0 = float(np.mean(obs == lowest))
        return ThresholdParams(_clamped_quantile(p0, n, clamp_proportions,
                                                 "share of the low level"))
    if kind is VariableKind.TRUNCATED:
        p0 = float(np.mean(obs == 0.0))
        return ThresholdParams(_clamped_quantile(p0, n, clamp_proportions,
                                                 "share of zeros"))
    if kind is VariableKind.TERNARY:
        levels = np.unique(obs)
        if levels.size != 3:
            raise DataError(f"ternary column has {levels.size} observed levels")
        p0 = float(np.mean(obs == levels[0]))
        p1 = float(np.mean(obs == levels[1]))
        d1 = _clamped_quantile(p0, n, clamp_proportions, "share of the low level")
        d2 = _clamped_quantile(p0 + p1, n, clamp_proportions,
                               "cumulative share of the low and middle levels")
        if d2 <= d1:
            # can only happen after aggressive clamping at tiny n
            d2 = d1 + 0.5 / n
        return ThresholdParams(d1, d2)
    raise DomainError(f"unsupported kind {kind}")
