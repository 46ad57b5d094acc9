import math

import numpy as np
import pytest

from mixedcorr.bridge import bridge_batch, bridge_value, make_bridge_spec, tau_bound
from mixedcorr.errors import DomainError, GridError
from mixedcorr.grids import (DEFAULT_NODE_COUNTS, GRID_AXES, PAIR_CODES,
                             SIZE_BUDGET_KB, InterpolationGrid, approx_invert,
                             build_grid, default_grid, grid_filename,
                             load_grid, make_axes, save_grid)
from mixedcorr.inversion import (invert_approx, invert_batch, invert_original,
                                 rescale_tau)
from mixedcorr.model import ThresholdParams, VariableKind
from mixedcorr.mvnorm import phi_inv

K = {k.value: k for k in VariableKind}


def spec_of(key, pa=(), pb=()):
    return make_bridge_spec(K[key[0]], ThresholdParams(*pa),
                            K[key[1]], ThresholdParams(*pb))


CON = spec_of(("con", "con"))
TERCON = spec_of(("ter", "con"), (phi_inv(0.3), phi_inv(0.8)))
TRUBIN = spec_of(("tru", "bin"), (phi_inv(0.4),), (phi_inv(0.6),))


class TestInvertOriginal:
    def test_arcsine_closed_form(self):
        assert invert_original(CON, 1 / 3) == pytest.approx(0.5, abs=1e-15)
        # closed form runs straight through the endpoints
        assert invert_original(CON, 1.0) == 1.0
        assert invert_original(CON, -1.0) == -1.0

    def test_round_trip(self):
        tau = bridge_value(TERCON, 0.47)
        assert invert_original(TERCON, tau) == pytest.approx(0.47, abs=1e-6)

    def test_residual_contract(self, rng):
        for spec in (TERCON, TRUBIN):
            lo, hi = tau_bound(spec)
            for t in rng.uniform(lo * 0.98, hi * 0.98, size=5):
                rho = invert_original(spec, float(t))
                assert abs(bridge_value(spec, rho) - t) <= 1e-8

    def test_saturates_beyond_bounds(self):
        lo, hi = tau_bound(TRUBIN)
        assert invert_original(TRUBIN, hi + 0.01) == 1.0 - 1e-9
        assert invert_original(TRUBIN, min(lo - 0.01, -0.01)) == -1.0 + 1e-9

    def test_zero_tau(self):
        for spec in (CON, TERCON, TRUBIN):
            rho = invert_original(spec, 0.0)
            assert abs(bridge_value(spec, rho)) <= 1e-8

    def test_domain(self):
        with pytest.raises(DomainError):
            invert_original(CON, float("nan"))
        with pytest.raises(DomainError):
            invert_original(CON, 1.2)

    def test_batch_matches_scalar(self, rng):
        key, a1, a2, b1, b2 = TERCON.canonical_args()
        taus = rng.uniform(-0.55, 0.55, size=12)
        batch = invert_batch(key, taus, a1, a2, b1, b2)
        for t, r in zip(taus, batch):
            assert abs(r - invert_original(TERCON, float(t))) <= 2e-6


class TestRescale:
    def test_continuous_identity(self):
        assert rescale_tau(CON, 0.4) == 0.4

    def test_binary_half_bound(self):
        s = spec_of(("bin", "bin"), (0.0,), (0.0,))
        assert rescale_tau(s, 0.5) == 1.0
        assert rescale_tau(s, -0.25) == -0.5

    def test_clamped_beyond_bound(self):
        s = spec_of(("bin", "bin"), (0.0,), (0.0,))
        assert rescale_tau(s, 0.7) == 1.0
        assert rescale_tau(s, -0.7) == -1.0


@pytest.fixture(scope="module")
def small_grid():
    # modest budget keeps the build quick; bin/con is the cheapest class
    return build_grid(("bin", "con"), target_error=2e-3)


class TestGrids:
    def test_build_certifies(self, small_grid):
        assert small_grid.meta.achieved_error <= 2e-3
        assert small_grid.nbytes_serialized() <= SIZE_BUDGET_KB[("bin", "con")] * 1024

    def test_refuses_analytic_pair(self):
        with pytest.raises(DomainError, match="analytic"):
            build_grid(("con", "con"))

    def test_node_exact_lookup(self, small_grid):
        g = small_grid
        it, ip = 7, 3
        q = np.array([[g.axes[0][it], g.axes[1][ip]]])
        assert g.lookup(q)[0] == g.values[it, ip]

    def test_file_round_trip(self, small_grid, tmp_path):
        path = tmp_path / grid_filename(small_grid.key)
        save_grid(small_grid, path)
        back = load_grid(path)
        assert back.key == small_grid.key
        assert np.array_equal(back.values, small_grid.values)
        for a, b in zip(back.axes, small_grid.axes):
            assert np.array_equal(a, b)
        assert back.meta.achieved_error == small_grid.meta.achieved_error
        assert path.stat().st_size == small_grid.nbytes_serialized()

    def test_checksum_detects_corruption(self, small_grid, tmp_path):
        path = tmp_path / "g.lcgrid"
        save_grid(small_grid, path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(GridError, match="checksum"):
            load_grid(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.lcgrid"
        path.write_bytes(b"NOTAGRID" + b"\0" * 64)
        with pytest.raises(GridError, match="magic"):
            load_grid(path)

    def test_pair_mismatch(self, small_grid):
        with pytest.raises(DomainError, match="pair"):
            invert_approx(small_grid, TERCON, 0.2)

    def test_approx_matches_original(self, small_grid, rng):
        g = small_grid
        tol = g.meta.achieved_error + 1e-9
        for _ in range(300):
            p = rng.uniform(0.01, 0.99)
            spec = spec_of(("bin", "con"), (phi_inv(p),))
            lo, hi = tau_bound(spec)
            t = float(rng.uniform(lo, hi))
            a = invert_approx(g, spec, t)
            o = invert_original(spec, t)
            assert abs(a - o) <= tol

    def test_boundary_band_falls_back(self, small_grid):
        spec = spec_of(("bin", "con"), (phi_inv(0.45),))
        lo, hi = tau_bound(spec)
        t = hi * (1 - 1e-4)  # rescaled to 0.9999, inside the band
        assert invert_approx(small_grid, spec, t) == \
            invert_original(spec, t)

    def test_hull_clamp(self, small_grid):
        # zero-share outside [0.01, 0.99] clamps onto the hull
        spec = spec_of(("bin", "con"), (phi_inv(0.995),))
        got = invert_approx(small_grid, spec, 0.005)
        assert -1.0 <= got <= 1.0

    def test_layout_tables_consistent(self):
        assert set(PAIR_CODES) == set(GRID_AXES)
        assert set(DEFAULT_NODE_COUNTS) == set(GRID_AXES)
        for key, counts in DEFAULT_NODE_COUNTS.items():
            assert len(counts) == len(GRID_AXES[key])


@pytest.mark.slow
class TestShippedGrids:
    def test_default_set_loads_and_replays(self, rng):
        for key in PAIR_CODES:
            g = default_grid(key)
            assert g.meta.achieved_error <= 1e-3
            assert g.nbytes_serialized() <= SIZE_BUDGET_KB[key] * 1024
