"""Command-line interface: est, gen, grid, bench.

Every run writes a manifest next to its outputs recording the command,
inputs, resolved configuration, grid versions, and per-stage wall times;
re-running with the same inputs reproduces all numeric outputs exactly
(wall times aside). Output files are written atomically.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, DomainError, GridError, MixedCorrError, NumericError
from .heatmap import render_heatmap
from .kendall import kendall_tau_matrix
from .kernels import BACKEND, get_backend
from .model import DataMatrix, VariableKind
from .pipeline import (EstimateConfig, SyntheticSpec, estimate_matrix,
                       generate, pearson_matrix)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


# ---------------------------------------------------------------------------
# small I/O helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode, newline="" if mode == "w" else None) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def read_csv_matrix(path) -> DataMatrix:
    """Header + numeric rows; empty fields are missing values."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(f"{path}:{lineno}: expected "
                                    f"{len(header)} fields, got {len(row)}")
                vals = []
                for name, tok in zip(header, row):
                    tok = tok.strip()
                    if tok == "":
                        vals.append(np.nan)
                    else:
                        try:
                            vals.append(float(tok))
                        except ValueError:
                            raise DataError(
                                f"{path}:{lineno}: non-numeric value {tok!r} "
                                f"in column {name!r}")
                rows.append(vals)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    return DataMatrix(np.array(rows, dtype=float), tuple(header))


def matrix_csv(matrix: np.ndarray, names) -> str:
    lines = [",".join(names)]
    for row in np.asarray(matrix):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _digest(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.hexdigest()[:16]


class _Manifest:
    def __init__(self, command: str, inputs, config: dict, seed=None):
        self.doc = {
            "tool": f"mixedcorr {__version__}",
            "command": command,
            "inputs": [str(p) for p in inputs],
            "config": config,
            "grid_versions": {},
            "seed": seed,
            "wall_times_s": {},
        }
        self._t0 = time.perf_counter()
        self._last = self._t0

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        self.doc["wall_times_s"][name] = round(now - self._last, 6)
        self._last = now

    def write(self, path: Path) -> None:
        self.doc["wall_times_s"]["total"] = round(
            time.perf_counter() - self._t0, 6)
        _atomic_write(path, json.dumps(self.doc, indent=2) + "\n")


def _grid_versions() -> dict:
    from .grids import GRID_AXES, _GRID_CACHE
    return {f"{k[0]}/{k[1]}": g.meta.achieved_error
            for k, g in _GRID_CACHE.items()}


# ---------------------------------------------------------------------------
# argument parsing helpers
# ---------------------------------------------------------------------------

def _parse_types(text: str) -> list[VariableKind | None]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(None if tok in ("", "auto") else VariableKind.parse(tok))
    return out


def _types_arg(text):
    try:
        return _parse_types(text)
    except DomainError as e:
        raise argparse.ArgumentTypeError(str(e))


def _props_arg(text):
    out = []
    for block in text.split("|"):
        block = block.strip()
        if block in ("-", ""):
            out.append(None)
        else:
            try:
                out.append(tuple(float(t) for t in block.split(",")))
            except ValueError:
                raise argparse.ArgumentTypeError(
                    f"bad proportion block {block!r}")
    return out


def _rho_arg(text):
    try:
        val = float(text)
    except ValueError:
        p = Path(text)
        if not p.exists():
            raise argparse.ArgumentTypeError(
                f"{text!r} is neither a number nor an existing matrix file")
        return p
    if not -1.0 <= val <= 1.0:
        raise argparse.ArgumentTypeError(
            f"latent correlation must lie in [-1, 1], got {val}")
    return val


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


# ---------------------------------------------------------------------------
# est
# ---------------------------------------------------------------------------

def cmd_est(args) -> int:
    manifest = _Manifest("est", [args.input], {
        "types": None if args.types is None
        else [None if t is None else t.value for t in args.types],
        "method": args.method,
        "nu": args.nu,
        "near_pd": args.near_pd,
        "heatmap": bool(args.heatmap),
        "compare_pearson": args.compare_pearson,
    })
    data = read_csv_matrix(args.input)
    if args.types is not None and len(args.types) != data.n_cols:
        raise DataError(f"{len(args.types)} types for {data.n_cols} columns")
    manifest.stage("read")

    config = EstimateConfig(method=args.method, ridge_nu=args.nu,
                            use_near_pd=args.near_pd)
    result = estimate_matrix(data, args.types, config)
    manifest.stage("estimate")
    print("resolved types:", ",".join(t.value for t in result.types))

    out = Path(args.output)
    stem = out.with_suffix("")
    names = data.column_names
    _atomic_write(out, matrix_csv(result.rho, names))
    doc = result.to_json_dict()
    doc["manifest"] = manifest.doc
    _atomic_write(stem.with_suffix(".json"), json.dumps(doc, indent=2) + "\n")
    written = [out, stem.with_suffix(".json")]

    if args.heatmap:
        _atomic_write(Path(args.heatmap),
                      render_heatmap(result.rho, names, "latent correlation"))
        written.append(Path(args.heatmap))
    if args.compare_pearson:
        pear = pearson_matrix(data)
        diff = result.rho - pear
        for tag, mat, title in (("pearson", pear, "Pearson correlation"),
                                ("diff", diff, "latent - Pearson")):
            _atomic_write(Path(f"{stem}.{tag}.csv"), matrix_csv(mat, names))
            _atomic_write(Path(f"{stem}.{tag}.svg"),
                          render_heatmap(mat, names, title))
            written.extend([Path(f"{stem}.{tag}.csv"), Path(f"{stem}.{tag}.svg")])
        print(f"max |latent - Pearson|: {np.abs(diff).max():.4f}")
    manifest.stage("write")
    manifest.doc["grid_versions"] = _grid_versions()
    manifest.doc["digest"] = _digest([result.rho, result.rho_raw, result.tau])
    manifest.write(stem.with_suffix(".manifest.json"))
    for p in written:
        print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    manifest = _Manifest("gen", [], {
        "n": args.n,
        "types": [t.value if t else "con" for t in args.types],
        "props": str(args.props),
        "rho": str(args.rho),
        "transforms": args.transforms,
    }, seed=args.seed)
    types = tuple(t or VariableKind.CONTINUOUS for t in args.types)
    if args.props is None:
        props = tuple(None for _ in types)
    else:
        props = tuple(args.props)
    if isinstance(args.rho, Path):
        rho = read_csv_matrix(args.rho).values
    else:
        rho = args.rho
    transforms = tuple(args.transforms.split(",")) if args.transforms else None
    spec = SyntheticSpec(n=args.n, types=types, proportions=props,
                         latent_corr=rho, transforms=transforms,
                         seed=args.seed)
    data = generate(spec)
    manifest.stage("generate")
    _atomic_write(Path(args.output), matrix_csv(data.values, data.column_names))
    manifest.doc["digest"] = _digest([data.values])
    manifest.write(Path(args.output).with_suffix(".manifest.json"))
    print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def _pair_tokens(token: str):
    from .grids import PAIR_CODES
    if token == "all":
        return list(PAIR_CODES)
    key = tuple(token.replace("/", "_").split("_"))
    if len(key) != 2 or key not in PAIR_CODES:
        choices = ", ".join("_".join(k) for k in PAIR_CODES)
        raise DomainError(f"unknown pair {token!r}; choose from {choices} or all")
    return [key]


def cmd_grid(args) -> int:
    from .grids import (SIZE_BUDGET_KB, build_grid, default_grid_dir,
                        grid_filename, load_grid, save_grid, _certify)
    if args.grid_cmd == "build":
        manifest = _Manifest("grid build", [], {
            "pair": args.pair, "target_error": args.target_error,
            "out_dir": str(args.out_dir)})
        keys = _pair_tokens(args.pair)
        out_dir = Path(args.out_dir)
        report = []
        for key in keys:
            t0 = time.perf_counter()
            grid = build_grid(key, target_error=args.target_error,
                              on_progress=lambda k, c, e: print(
                                  f"  {k[0]}/{k[1]} nodes={c} err={e:.2e}",
                                  flush=True))
            path = out_dir / grid_filename(key)
            save_grid(grid, path)
            kb = path.stat().st_size / 1024
            line = (f"{key[0]}/{key[1]}: error {grid.meta.achieved_error:.3e} "
                    f"size {kb:.2f} KB ({time.perf_counter()-t0:.1f}s)")
            report.append(line)
            print(line, flush=True)
            manifest.stage(f"{key[0]}/{key[1]}")
        _atomic_write(out_dir / "build_report.txt", "\n".join(report) + "\n")
        manifest.write(out_dir / "build.manifest.json")
        return 0

    # verify
    target = args.target_error
    directory = Path(args.dir) if args.dir else default_grid_dir()
    files = sorted(directory.glob("*.lcgrid"))
    if not files:
        raise GridError(f"no .lcgrid files in {directory}")
    failures = 0
    for path in files:
        grid = load_grid(path)
        err = _certify(grid, args.probes)
        kb = path.stat().st_size / 1024
        ok = err <= target
        failures += 0 if ok else 1
        print(f"{grid.key[0]}/{grid.key[1]}: recertified {err:.3e} "
              f"(stored {grid.meta.achieved_error:.3e}), {kb:.2f} KB "
              f"[{'pass' if ok else 'FAIL'}]")
    if failures:
        raise GridError(f"{failures} grid(s) failed verification at {target}")
    print("all grids verified")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_dataset(n: int, p: int, seed: int) -> tuple[DataMatrix, list]:
    kinds = [VariableKind.CONTINUOUS, VariableKind.BINARY,
             VariableKind.TERNARY, VariableKind.TRUNCATED]
    types = tuple(kinds[i % 4] for i in range(p))
    props = []
    rng = np.random.default_rng(seed)
    for t in types:
        if t is VariableKind.CONTINUOUS:
            props.append(None)
        elif t is VariableKind.TERNARY:
            p0 = rng.uniform(0.2, 0.4)
            props.append((p0, rng.uniform(0.25, min(0.55, 0.9 - p0))))
        else:
            props.append((rng.uniform(0.25, 0.75),))
    spec = SyntheticSpec(n=n, types=types, proportions=tuple(props),
                         latent_corr=0.3, seed=seed)
    return generate(spec), list(types)


def cmd_bench(args) -> int:
    data, types = _bench_dataset(args.n, args.p, args.seed)
    print(f"dataset: n={args.n} p={args.p} seed={args.seed} "
          f"(kernel backend: {BACKEND})")

    t0 = time.perf_counter()
    tau = kendall_tau_matrix(data.values)
    t_tau = time.perf_counter() - t0

    t0 = time.perf_counter()
    res_a = estimate_matrix(data, types, EstimateConfig(method="approx"))
    t_approx = time.perf_counter() - t0

    t0 = time.perf_counter()
    res_o = estimate_matrix(data, types, EstimateConfig(method="original"))
    t_orig = time.perf_counter() - t0

    gap = float(np.abs(res_a.rho_raw - res_o.rho_raw).max())
    print(f"kendall matrix only : {t_tau:8.3f} s")
    print(f"estimate, approx    : {t_approx:8.3f} s "
          f"({t_approx / t_tau:.2f}x the tau-only time)")
    print(f"estimate, original  : {t_orig:8.3f} s "
          f"(approx speedup {t_orig / t_approx:.1f}x)")
    print(f"max |approx - original|: {gap:.2e}")
    print(f"digest: {_digest([res_a.rho, res_o.rho, tau])}")

    _bench_kernels(args)

    n_pairs = args.p * (args.p - 1) // 2
    if n_pairs >= 45:
        if t_approx > 3.0 * t_tau:
            raise NumericError(
                f"approx took {t_approx:.3f}s, above 3x the tau-only time "
                f"{t_tau:.3f}s")
        print("assertion: approx within 3x tau-only time [pass]")
    else:
        print("assertion skipped (too few pairs to amortize fixed costs)")
    return 0


def _bench_kernels(args) -> None:
    """Compiled extension vs numpy fallback on the hot kernels."""
    try:
        kc = get_backend("c")
    except ImportError:
        print("kernel comparison skipped: compiled extension not built")
        return
    kp = get_backend("python")
    rng = np.random.default_rng(args.seed)
    rows = []

    n = max(args.n, 10_000)
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    order = np.lexsort((y, x))
    xs, ys = np.ascontiguousarray(x[order]), np.ascontiguousarray(y[order])
    rows.append(("kendall stats", f"n={n}",
                 _time(lambda: kc.kendall_sorted_stats(xs, ys)),
                 _time(lambda: kp.kendall_sorted_stats(xs, ys))))

    m = 200_000
    bx = rng.standard_normal(m)
    by = rng.standard_normal(m)
    br = rng.uniform(-0.99, 0.99, m)
    out = np.empty(m)
    rows.append(("phi2 batch", f"n={m}",
                 _time(lambda: kc.phi2_batch(bx, by, br, out)),
                 _time(lambda: kp.phi2_batch(bx, by, br, out))))

    axes = np.concatenate([np.linspace(-1, 1, 41), np.linspace(0.01, 0.99, 25),
                           np.linspace(0.01, 0.99, 25)])
    offs = np.array([0, 41, 66, 91], dtype=np.int64)
    shape = np.array([41, 25, 25], dtype=np.int64)
    vals = rng.standard_normal(41 * 25 * 25)
    q = np.stack([rng.uniform(-1, 1, m), rng.uniform(0.01, 0.99, m),
                  rng.uniform(0.01, 0.99, m)], axis=1)
    qo = np.empty(m)
    rows.append(("interpolation", f"n={m}",
                 _time(lambda: kc.interp_multilinear(axes, offs, shape, vals, q, qo)),
                 _time(lambda: kp.interp_multilinear(axes, offs, shape, vals, q, qo))))

    print("\nkernel backend comparison (compiled vs python fallback):")
    print(f"{'kernel':16s} {'size':>10s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for name, size, tc, tp in rows:
        print(f"{name:16s} {size:>10s} {tc*1e3:9.2f}ms {tp*1e3:9.2f}ms "
              f"{tp/tc:7.1f}x")


def _time(fn, min_time: float = 0.05) -> float:
    fn()  # warm up
    reps = 0
    t0 = time.perf_counter()
    while True:
        fn()
        reps += 1
        dt = time.perf_counter() - t0
        if dt >= min_time and reps >= 3:
            return dt / reps


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mixedcorr",
        description="Latent correlation estimation for mixed-type data")
    ap.add_argument("--version", action="version",
                    version=f"mixedcorr {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    est = sub.add_parser("est", help="estimate a latent correlation matrix "
                                     "from a CSV file")
    est.add_argument("--input", required=True)
    est.add_argument("--types", type=_types_arg, default=None,
                     help="comma-separated con/bin/ter/tru per column "
                          "(default: auto-detect)")
    est.add_argument("--method", choices=("approx", "original"),
                     default="approx")
    est.add_argument("--nu", type=float, default=0.001,
                     help="ridge weight toward the identity (default 0.001)")
    est.add_argument("--near-pd", action=argparse.BooleanOptionalAction,
                     default=True,
                     help="project to the nearest correlation matrix if the "
                          "ridge leaves the result indefinite")
    est.add_argument("--output", required=True,
                     help="CSV path for the estimate; a JSON document and "
                          "manifest are written alongside")
    est.add_argument("--heatmap", default=None, help="also write an SVG heatmap")
    est.add_argument("--compare-pearson", action="store_true",
                     help="also emit the Pearson and difference matrices")
    est.set_defaults(func=cmd_est)

    gen = sub.add_parser("gen", help="generate synthetic mixed-type data")
    gen.add_argument("--n", type=_positive_int, required=True)
    gen.add_argument("--types", type=_types_arg, required=True)
    gen.add_argument("--props", type=_props_arg, default=None,
                     help="per-variable level shares, e.g. \"0.3,0.5|-\"")
    gen.add_argument("--rho", type=_rho_arg, default=0.5,
                     help="latent correlation (number) or CSV matrix path")
    gen.add_argument("--transforms", default=None,
                     help="comma-separated identity/exponential/cube")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--output", required=True)
    gen.set_defaults(func=cmd_gen)

    grid = sub.add_parser("grid", help="build or verify interpolation grids")
    gsub = grid.add_subparsers(dest="grid_cmd", required=True)
    gb = gsub.add_parser("build")
    gb.add_argument("--pair", default="all",
                    help="pair class like ter_con, or all")
    gb.add_argument("--target-error", type=float, default=1e-3)
    gb.add_argument("--out-dir", required=True)
    gb.set_defaults(func=cmd_grid)
    gv = gsub.add_parser("verify")
    gv.add_argument("--dir", default=None,
                    help="grid directory (default: the shipped set)")
    gv.add_argument("--target-error", type=float, default=1e-3)
    gv.add_argument("--probes", type=_positive_int, default=8192)
    gv.set_defaults(func=cmd_grid)

    bench = sub.add_parser("bench", help="timing of tau-only vs approx vs "
                                         "original, plus kernel comparison")
    bench.add_argument("--n", type=_positive_int, default=1000)
    bench.add_argument("--p", type=_positive_int, default=50)
    bench.add_argument("--seed", type=int, default=0)
    bench.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (GridError, NumericError, MixedCorrError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
