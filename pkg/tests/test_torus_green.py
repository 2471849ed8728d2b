import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import green_fourier_1d, log_sup_bounds, robin_square_torus
from ternary_droplet.geometry import Disc, rasterize
from ternary_droplet.torus_green import (DensityGrid, SingularityError, TorusGreen, cell_centers,
                                         convolve_green, green_eval, integrate_green,
                                         interaction_integral, regular_part, robin_constant,
                                         sup_regular_part)

coord = st.floats(-0.5, 0.5, allow_nan=False)
point = st.tuples(coord, coord).map(np.array)


@pytest.fixture(scope="module")
def g():
    return TorusGreen()


@pytest.fixture(scope="module")
def sup_r(g):
    return sup_regular_part(g)


class TestConstruction:
    @pytest.mark.parametrize("kw", [dict(fourier_cutoff=4), dict(grid_n=100), dict(grid_n=8),
                                    dict(ewald_split=0.0), dict(ewald_split=-1.0)])
    def test_rejects_bad_parameters(self, kw):
        with pytest.raises(ValueError):
            TorusGreen(**kw)

    def test_rejects_unconverged_split(self):
        # tiny tau leaves a large reciprocal tail at K = 8
        with pytest.raises(ValueError, match="tail"):
            TorusGreen(ewald_split=1e-4)

    def test_certificate(self, g):
        assert g.certificate() < 1e-10


class TestPointValues:
    @settings(max_examples=50, deadline=None)
    @given(point, point)
    def test_symmetry(self, g, p, q):
        if np.allclose(p, q):
            return
        assert green_eval(g, p, q) == pytest.approx(green_eval(g, q, p), abs=1e-12)
        assert regular_part(g, p, q) == pytest.approx(regular_part(g, q, p), abs=1e-12)

    @pytest.mark.parametrize("d", [(0.3, 0.1), (0.05, 0.41), (0.5, 0.5), (0.2, -0.37), (0.11, 0.0)])
    def test_matches_fourier_series(self, g, d):
        assert green_eval(g, np.array(d), np.zeros(2)) == pytest.approx(green_fourier_1d(d), abs=1e-10)

    def test_robin_constant_closed_form(self, g):
        assert robin_constant(g) == pytest.approx(robin_square_torus(), abs=1e-12)

    def test_near_diagonal_split(self, g):
        x = np.array([0.1, 0.2])
        y = x + np.array([1e-3, 0.0])
        r = green_eval(g, x, y) + math.log(1e-3) / (2 * math.pi)
        assert r == pytest.approx(regular_part(g, x, y), abs=1e-6)
        # Delta R = 1 with square symmetry: R(d) = R(0) + |d|^2/4 + O(|d|^4)
        assert r == pytest.approx(robin_constant(g) + 1e-6 / 4, abs=1e-9)

    def test_translation_invariance(self, g):
        p, q = np.array([0.1, -0.3]), np.array([0.42, 0.2])
        assert regular_part(g, p, p) == pytest.approx(regular_part(g, q, q), abs=1e-10)
        s = np.array([0.37, -0.21])
        assert green_eval(g, p + s, q + s) == pytest.approx(green_eval(g, p, q), abs=1e-10)

    def test_cutoff_doubling(self, g):
        g2 = g.with_params(fourier_cutoff=16)
        assert regular_part(g, np.zeros(2), np.zeros(2)) == pytest.approx(
            regular_part(g2, np.zeros(2), np.zeros(2)), abs=1e-8)

    def test_other_split_agrees(self, g):
        alt = TorusGreen(fourier_cutoff=12, ewald_split=0.05)
        d = np.random.default_rng(3).uniform(-0.5, 0.5, (20, 2))
        assert np.allclose(g.regular(d), alt.regular(d), atol=1e-11)

    def test_coincident_points(self, g):
        with pytest.raises(SingularityError):
            green_eval(g, np.zeros(2), np.array([1.0, -1.0]))

    def test_non_finite_input(self, g):
        with pytest.raises(ValueError):
            green_eval(g, np.array([np.nan, 0.0]), np.zeros(2))
        with pytest.raises(ValueError):
            regular_part(g, np.array([np.inf, 0.0]), np.zeros(2))

    @pytest.mark.parametrize("y0", [(0.0, 0.0), (0.3, -0.1), (0.5, 0.5)])
    def test_mean_zero(self, g, y0):
        assert abs(integrate_green(g, np.array(y0))) < 1e-8


class TestSupRegular:
    def test_dominates_diagonal(self, g, sup_r):
        assert sup_r >= abs(robin_constant(g))

    def test_grid_refinement(self, g, sup_r):
        assert sup_r <= sup_regular_part(g, grid=128) + 1e-6

    def test_split_independent(self, sup_r):
        alt = TorusGreen(fourier_cutoff=12, ewald_split=0.05)
        assert sup_regular_part(alt) == pytest.approx(sup_r, abs=1e-6)


class TestSpectral:
    def test_constant_density(self, g):
        phi = convolve_green(g, DensityGrid(np.full((32, 32), 3.0)))
        assert np.max(np.abs(phi.values)) < 1e-14

    def test_single_mode(self, g):
        X, _ = cell_centers(64)
        rho = DensityGrid(np.cos(2 * math.pi * X))
        phi = convolve_green(g, rho)
        assert np.allclose(phi.values, np.cos(2 * math.pi * X) / (4 * math.pi**2), atol=1e-10)

    def test_zero_mean_potential(self, g):
        rho = DensityGrid(np.random.default_rng(0).uniform(0, 1, (64, 64)))
        assert abs(convolve_green(g, rho).mean()) < 1e-12

    def test_non_power_of_two(self, g):
        with pytest.raises(ValueError):
            convolve_green(g, DensityGrid(np.zeros((48, 48))))

    def test_resolution_mismatch(self, g):
        with pytest.raises(ValueError):
            interaction_integral(g, DensityGrid(np.zeros((32, 32))), DensityGrid(np.zeros((64, 64))))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_bilinear_symmetric(self, g, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (DensityGrid(rng.normal(size=(32, 32))) for _ in range(3))
        ab = interaction_integral(g, a, b)
        assert ab == pytest.approx(interaction_integral(g, b, a), abs=1e-12)
        lin = interaction_integral(g, DensityGrid(2 * a.values + c.values), b)
        assert lin == pytest.approx(2 * ab + interaction_integral(g, c, b), abs=1e-12)

    def test_matches_point_kernel(self, g):
        # two tiny well separated blobs behave like point masses
        n = 256
        a = rasterize([Disc((-0.2, 0.0), 0.01)], n)
        b = rasterize([Disc((0.2, 0.1), 0.01)], n)
        val = interaction_integral(g, a, b) / (a.total() * b.total())
        assert val == pytest.approx(green_eval(g, np.array([-0.2, 0.0]), np.array([0.2, 0.1])), abs=1e-4)

    def test_small_disc_sandwich(self, g, sup_r):
        area = 1e-2
        B = rasterize([Disc((0.1, -0.2), math.sqrt(area / math.pi))], 256)
        v = interaction_integral(g, B, B)
        lo, hi = log_sup_bounds(area, area, sup_r)
        assert lo <= v <= hi

    def test_refinement_first_order(self, g):
        vals = []
        for n in (64, 128, 256):
            B = rasterize([Disc((0.0, 0.0), 0.2)], n)
            C = rasterize([Disc((0.3, 0.25), 0.15)], n)
            vals.append(interaction_integral(g, B, C))
        d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
        # documented constant: successive differences shrink at least like 1/n
        assert d2 <= 0.6 * d1 + 1e-12


class TestDensityGrid:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            DensityGrid(np.full((4, 4), np.nan))

    def test_cell_area(self):
        d = DensityGrid(np.ones((16, 16)))
        assert d.cell_area == 1 / 256 and d.total() == pytest.approx(1.0)

    def test_csv_roundtrip(self, tmp_path):
        d = DensityGrid(np.random.default_rng(1).normal(size=(16, 16)))
        d.to_csv(tmp_path / "d.csv")
        e = DensityGrid.from_csv(tmp_path / "d.csv")
        assert np.array_equal(d.values, e.values)

    def test_binary_roundtrip(self, tmp_path):
        d = DensityGrid(np.random.default_rng(2).normal(size=(32, 32)))
        d.to_binary(tmp_path / "d.bin")
        assert np.array_equal(DensityGrid.from_binary(tmp_path / "d.bin").values, d.values)
