"""End-to-end latent correlation matrix estimation.

For every unordered column pair: Kendall tau-a on pairwise-complete rows,
latent cutoffs from level proportions, bridge inversion by the configured
method, then a positive-definiteness repair of the assembled matrix
(ridge toward the identity, optionally followed by a nearest-correlation
projection). Also hosts the Pearson baseline and the synthetic generator
used in the accuracy experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .bridge import BridgeSpec, make_bridge_spec
from .errors import DataError, DomainError, NumericError
from .inversion import invert_approx_class, invert_original
from .kendall import kendall_tau
from .model import (DataMatrix, ThresholdParams, VariableKind, detect_types,
                    estimate_thresholds)

__all__ = [
    "EstimateConfig",
    "LatentMatrixResult",
    "SyntheticSpec",
    "estimate_matrix",
    "estimate_latent_correlation",
    "pearson_matrix",
    "generate",
    "nearest_correlation",
]

MIN_EIG = 1e-10


@dataclass(frozen=True)
class EstimateConfig:
    method: str = "approx"
    ridge_nu: float = 0.001
    use_near_pd: bool = True
    clamp_proportions: bool = True
    boundary_band: float = 0.005

    def __post_init__(self):
        if self.method not in ("approx", "original"):
            raise DomainError(f"method must be 'approx' or 'original', "
                              f"got {self.method!r}")
        if not 0.0 <= self.ridge_nu < 1.0:
            raise DomainError(f"ridge_nu must lie in [0, 1), got {self.ridge_nu}")
        if not 0.0 <= self.boundary_band <= 0.05:
            raise DomainError(f"boundary_band must lie in [0, 0.05], "
                              f"got {self.boundary_band}")


@dataclass(frozen=True)
class LatentMatrixResult:
    """Point estimates before and after PD repair, plus raw ingredients."""

    rho: np.ndarray
    rho_raw: np.ndarray
    tau: np.ndarray
    types: tuple[VariableKind, ...]
    diagnostics: dict

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho.tolist(),
            "rho_raw": self.rho_raw.tolist(),
            "tau": self.tau.tolist(),
            "types": [t.value for t in self.types],
            "diagnostics": self.diagnostics,
        }


def nearest_correlation(matrix: np.ndarray, min_eig: float = MIN_EIG,
                        max_iter: int = 200) -> tuple[np.ndarray, int]:
    """Alternating projections onto the PSD cone and the unit-diagonal set.

    Returns the projected matrix and the number of sweeps used.
    """
    y = np.array(matrix, dtype=float)
    ds = np.zeros_like(y)
    it = 0
    for it in range(1, max_iter + 1):
        r = y - ds
        w, v = np.linalg.eigh(r)
        x = (v * np.maximum(w, 1e-8)) @ v.T
        x = 0.5 * (x + x.T)
        ds = x - r
        y = x.copy()
        np.fill_diagonal(y, 1.0)
        if np.linalg.eigvalsh(y)[0] >= min_eig:
            break
    if np.linalg.eigvalsh(y)[0] < min_eig:
        # final safeguard: blend toward the identity just enough
        w_min = np.linalg.eigvalsh(y)[0]
        t = (min_eig - w_min) / (1.0 - w_min)
        y = (1.0 - t) * y + t * np.eye(y.shape[0])
    return y, it


def _pair_thresholds(data, types, config):
    """Per-column cutoffs from full observed data (no-missing fast path)."""
    return [estimate_thresholds(data.column(j), types[j],
                                config.clamp_proportions)
            for j in range(data.n_cols)]


def estimate_matrix(data: DataMatrix,
                    types: list[VariableKind | None] | None = None,
                    config: EstimateConfig = EstimateConfig()) -> LatentMatrixResult:
    """The full estimator: tau, bridge inversion per pair, PD repair."""
    resolved = detect_types(data, declared=types)
    p = data.n_cols
    values = data.values
    has_nan = bool(np.isnan(values).any())

    tau = np.eye(p)
    n_eff = np.full((p, p), data.n_rows, dtype=int)
    pair_params: dict[tuple[int, int], tuple[ThresholdParams, ThresholdParams]] = {}
    col_params = None
    if not has_nan:
        col_params = _pair_thresholds(data, resolved, config)
    for j in range(p):
        for k in range(j + 1, p):
            est = kendall_tau(values[:, j], values[:, k])
            tau[j, k] = tau[k, j] = est.tau
            n_eff[j, k] = n_eff[k, j] = est.n_effective
            if col_params is not None:
                pair_params[(j, k)] = (col_params[j], col_params[k])
            else:
                mask = ~(np.isnan(values[:, j]) | np.isnan(values[:, k]))
                pair_params[(j, k)] = (
                    estimate_thresholds(values[mask, j], resolved[j],
                                        config.clamp_proportions),
                    estimate_thresholds(values[mask, k], resolved[k],
                                        config.clamp_proportions))

    rho_raw = np.eye(p)
    methods = [["" for _ in range(p)] for _ in range(p)]
    fallback_pairs = 0

    groups: dict[tuple[str, str], list[tuple[int, int]]] = {}
    for j in range(p):
        for k in range(j + 1, p):
            groups.setdefault(
                make_bridge_spec(resolved[j], pair_params[(j, k)][0],
                                 resolved[k], pair_params[(j, k)][1])
                .pair.key, []).append((j, k))

    for key, pairs in groups.items():
        specs = [make_bridge_spec(resolved[j], pair_params[(j, k)][0],
                                  resolved[k], pair_params[(j, k)][1])
                 for j, k in pairs]
        taus = np.array([tau[j, k] for j, k in pairs])
        if key == ("con", "con"):
            rhos = np.sin(0.5 * np.pi * taus)
            how = ["analytic"] * len(pairs)
        elif config.method == "original":
            rhos = np.array([invert_original(s, t)
                             for s, t in zip(specs, taus)])
            how = ["root"] * len(pairs)
        else:
            rhos, edge = invert_approx_class(key, taus, specs,
                                             config.boundary_band)
            how = ["grid+root" if e else "grid" for e in edge]
            fallback_pairs += int(np.sum(edge))
        for (j, k), r, h in zip(pairs, rhos, how):
            rho_raw[j, k] = rho_raw[k, j] = float(r)
            methods[j][k] = methods[k][j] = h

    nu = config.ridge_nu
    rho = (1.0 - nu) * rho_raw + nu * np.eye(p)
    min_eig_raw = float(np.linalg.eigvalsh(rho_raw)[0])
    min_eig_ridge = float(np.linalg.eigvalsh(rho)[0])
    near_pd_applied = False
    near_pd_iter = 0
    if min_eig_ridge < MIN_EIG:
        if not config.use_near_pd:
            raise NumericError(
                f"estimated matrix is not positive definite (min eigenvalue "
                f"{min_eig_ridge:.3e}) and use_near_pd is off; enable it or "
                f"raise ridge_nu")
        rho, near_pd_iter = nearest_correlation(rho)
        near_pd_applied = True
    rho = 0.5 * (rho + rho.T)
    np.fill_diagonal(rho, 1.0)

    diagnostics = {
        "methods": methods,
        "n_effective_min": int(n_eff.min()),
        "pairs_boundary_fallback": fallback_pairs,
        "min_eig_raw": min_eig_raw,
        "min_eig_final": float(np.linalg.eigvalsh(rho)[0]),
        "near_pd_applied": near_pd_applied,
        "near_pd_iterations": near_pd_iter,
    }
    return LatentMatrixResult(rho=rho, rho_raw=rho_raw, tau=tau,
                              types=tuple(resolved), diagnostics=diagnostics)


def estimate_latent_correlation(x, types=None, method: str = "approx",
                                **config_kwargs) -> LatentMatrixResult:
    """Convenience wrapper taking a plain array and type tags."""
    if not isinstance(x, DataMatrix):
        x = np.asarray(x, dtype=float)
        x = DataMatrix(x, tuple(f"x{i+1}" for i in range(x.shape[1])))
    if types is not None:
        types = [None if t is None else
                 (t if isinstance(t, VariableKind) else VariableKind.parse(t))
                 for t in types]
    cfg = EstimateConfig(method=method, **config_kwargs)
    return estimate_matrix(x, types, cfg)


def pearson_matrix(data: DataMatrix) -> np.ndarray:
    """Sample Pearson correlation on pairwise-complete rows."""
    values = data.values
    p = data.n_cols
    out = np.eye(p)
    for j in range(p):
        for k in range(j + 1, p):
            x, y = values[:, j], values[:, k]
            mask = ~(np.isnan(x) | np.isnan(y))
            x, y = x[mask], y[mask]
            if x.size < 2:
                raise DataError(f"fewer than 2 complete rows for columns "
                                f"{data.column_names[j]!r}, {data.column_names[k]!r}")
            sx, sy = x.std(), y.std()
            if sx == 0.0 or sy == 0.0:
                raise DataError(
                    f"zero-variance column among {data.column_names[j]!r}, "
                    f"{data.column_names[k]!r}")
            out[j, k] = out[k, j] = float(
                np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return out


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

_TRANSFORMS = {
    "identity": lambda z: z,
    "exponential": np.exp,
    "cube": lambda z: z ** 3,
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for latent-Gaussian synthetic data.

    proportions holds, per variable, the leading level shares: (p0,) for
    binary and truncated, (p0, p1) for ternary, None for continuous.
    latent_corr may be a single value (applied to every pair) or a full
    correlation matrix.
    """

    n: int
    types: tuple[VariableKind, ...]
    proportions: tuple[tuple[float, ...] | None, ...]
    latent_corr: float | np.ndarray = 0.5
    transforms: tuple[str, ...] | None = None
    seed: int = 0


def _latent_matrix(spec: SyntheticSpec) -> np.ndarray:
    p = len(spec.types)
    if np.isscalar(spec.latent_corr):
        r = float(spec.latent_corr)
        if not -1.0 <= r <= 1.0:
            raise DomainError(f"latent correlation must lie in [-1, 1], got {r}")
        m = np.full((p, p), r)
        np.fill_diagonal(m, 1.0)
    else:
        m = np.asarray(spec.latent_corr, dtype=float)
        if m.shape != (p, p) or np.max(np.abs(m - m.T)) > 1e-12 \
                or np.max(np.abs(np.diag(m) - 1.0)) > 1e-12:
            raise DomainError("latent_corr must be a symmetric correlation "
                              f"matrix of size {p}")
    if np.linalg.eigvalsh(m)[0] < -1e-10:
        raise DomainError("latent correlation matrix is not positive "
                          "semi-definite")
    return m


def _check_proportions(kind: VariableKind, props) -> tuple[float, ...]:
    need = {"con": 0, "bin": 1, "tru": 1, "ter": 2}[kind.value]
    got = tuple(props) if props else ()
    if len(got) != need:
        raise DomainError(f"{kind.value} variable needs {need} proportion(s), "
                          f"got {got}")
    if need and (min(got) <= 0.0 or sum(got) >= 1.0):
        raise DomainError(f"invalid level proportions {got} for {kind.value}")
    return got


def generate(spec: SyntheticSpec) -> DataMatrix:
    """Draw latent normal rows and observe them through each margin."""
    if spec.n < 1:
        raise DomainError("n must be positive")
    p = len(spec.types)
    if len(spec.proportions) != p:
        raise DomainError(f"{len(spec.proportions)} proportion entries for "
                          f"{p} variables")
    transforms = spec.transforms or tuple("identity" for _ in range(p))
    if len(transforms) != p:
        raise DomainError(f"{len(transforms)} transforms for {p} variables")
    for t in transforms:
        if t not in _TRANSFORMS:
            raise DomainError(f"unknown transform {t!r}; choose from "
                              f"{sorted(_TRANSFORMS)}")
    m = _latent_matrix(spec)
    w, v = np.linalg.eigh(m)
    root = v * np.sqrt(np.maximum(w, 0.0))
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal((spec.n, p)) @ root.T

    cols = np.empty_like(z)
    for j, kind in enumerate(spec.types):
        props = _check_proportions(kind, spec.proportions[j])
        g = _TRANSFORMS[transforms[j]]
        zj = z[:, j]
        if kind is VariableKind.CONTINUOUS:
            cols[:, j] = g(zj)
        elif kind is VariableKind.BINARY:
            d1 = ndtri(props[0])
            cols[:, j] = (zj > d1).astype(float)
        elif kind is VariableKind.TERNARY:
            d1 = ndtri(props[0])
            d2 = ndtri(props[0] + props[1])
            cols[:, j] = (zj > d1).astype(float) + (zj > d2).astype(float)
        else:  # truncated: transformed excess above the cutoff, zeros below
            d1 = ndtri(props[0])
            cols[:, j] = np.where(zj > d1, g(zj) - g(d1), 0.0)
    names = tuple(f"x{i+1}" for i in range(p))
    return DataMatrix(cols, names)
