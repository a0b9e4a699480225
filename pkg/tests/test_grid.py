import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kg2d.errors import GridError
from kg2d.grid import (
    Field,
    Grid2D,
    boundary_mass_fraction,
    forward,
    high_mode_fraction,
    inner,
    inverse,
    lp_norm,
    parseval_defect,
    roundtrip_error,
    sample,
    sobolev_norm,
)

from conftest import gaussian


class TestGrid2D:
    @pytest.mark.parametrize("n", [7, 12, 4, 8192, 2.0, True])
    def test_rejects_bad_n(self, n):
        with pytest.raises(GridError):
            Grid2D(n, 10.0)

    @pytest.mark.parametrize("L", [0.0, -1.0, float("inf"), float("nan")])
    def test_rejects_bad_L(self, L):
        with pytest.raises(GridError):
            Grid2D(16, L)

    def test_coordinates(self):
        g = Grid2D(16, 8.0)
        assert g.x[0] == -4.0
        assert g.dx == 0.5
        assert np.isclose(g.x[-1], 4.0 - 0.5)
        assert np.isclose(g.dk, 2 * np.pi / 8.0)
        assert np.isclose(g.nyquist, 8 * g.dk)

    def test_mesh_is_ij(self):
        g = Grid2D(8, 8.0)
        X, Y = g.mesh
        assert np.all(X[:, 0] == g.x)
        assert np.all(Y[0, :] == g.x)

    def test_dealias_mask_keeps_half_band(self):
        g = Grid2D(32, 2 * np.pi)
        assert g.dealias_mask.sum() == 17 * 17

    def test_nyquist_mask(self):
        g = Grid2D(8, 1.0)
        assert g.nyquist_mask.sum() == 2 * 8 - 1
        assert g.nyquist_mask[4, 0] and g.nyquist_mask[0, 4]

    def test_corner_phase_recentres(self):
        # a mode exp(i k x) sampled on the grid has centred coefficient exactly 1
        g = Grid2D(16, 2 * np.pi)
        X, Y = g.mesh
        f = np.exp(1j * (3 * X - 2 * Y))
        cc = forward(f, g) * g.corner_phase
        assert np.isclose(cc[3, -2], 1.0)
        assert np.abs(cc).sum() == pytest.approx(1.0)

    def test_mismatched_grids(self):
        a = Field(Grid2D(16, 1.0), np.zeros((16, 16)))
        with pytest.raises(GridError):
            inner(a, Field(Grid2D(16, 2.0), np.zeros((16, 16))))


class TestField:
    def test_read_only_copy(self, grid64):
        a = np.zeros((64, 64))
        f = Field(grid64, a)
        a[0, 0] = 1.0
        assert f.data[0, 0] == 0.0
        with pytest.raises(ValueError):
            f.data[0, 0] = 2.0

    def test_shape_checked(self, grid64):
        with pytest.raises(GridError):
            Field(grid64, np.zeros((32, 64)))

    def test_dtype(self, grid64):
        assert Field(grid64, np.zeros((64, 64), dtype=np.int32)).is_real
        assert not Field(grid64, np.zeros((64, 64), dtype=np.complex64)).is_real

    def test_raw_array_needs_grid(self):
        with pytest.raises(GridError):
            lp_norm(np.ones((8, 8)), 2)


class TestTransforms:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), cplx=st.booleans())
    def test_roundtrip_and_parseval(self, seed, cplx):
        g = Grid2D(32, 10.0)
        r = np.random.default_rng(seed)
        a = r.standard_normal((32, 32))
        if cplx:
            a = a + 1j * r.standard_normal((32, 32))
        assert roundtrip_error(a, g) < 1e-12
        assert parseval_defect(a, g) < 1e-12

    def test_inverse_detects_real(self, grid64):
        f = Field(grid64, gaussian(grid64))
        assert inverse(grid64, forward(f)).is_real
        assert not inverse(grid64, forward(f), real=False).is_real

    def test_gaussian_l2_norm(self):
        # ||exp(-r^2/2)||_2^2 = pi
        g = Grid2D(128, 30.0)
        assert lp_norm(gaussian(g), 2, g) ** 2 == pytest.approx(np.pi, rel=1e-12)

    @pytest.mark.parametrize("p", [1, 3, 4, 10])
    def test_gaussian_lp_norms(self, p):
        # ||exp(-r^2/2)||_p^p = 2 pi / p
        g = Grid2D(128, 30.0)
        assert lp_norm(gaussian(g), p, g) ** p == pytest.approx(2 * np.pi / p, rel=1e-10)

    def test_lp_rejects_small_p(self, grid64):
        with pytest.raises(ValueError):
            lp_norm(gaussian(grid64), 0.5, grid64)

    def test_sup_norm(self, grid64):
        assert lp_norm(gaussian(grid64, amp=-3.0), np.inf, grid64) == 3.0

    def test_sobolev_zero_is_l2(self, grid64):
        f = gaussian(grid64)
        assert sobolev_norm(f, 0.0, grid64) == pytest.approx(lp_norm(f, 2, grid64), rel=1e-13)

    def test_h1_norm_gaussian(self):
        # ||f||_{H^1}^2 = ||f||^2 + ||grad f||^2 = pi + pi
        g = Grid2D(128, 30.0)
        assert sobolev_norm(gaussian(g), 1.0, g) ** 2 == pytest.approx(2 * np.pi, rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(s=st.floats(-2, 2), t=st.floats(-2, 2))
    def test_sobolev_monotone_in_s(self, s, t):
        g = Grid2D(32, 10.0)
        f = gaussian(g, width=0.7)
        lo, hi = sorted((s, t))
        assert sobolev_norm(f, lo, g) <= sobolev_norm(f, hi, g) * (1 + 1e-12)

    def test_inner_product(self, grid64):
        f = gaussian(grid64)
        assert inner(f, 2j * f, grid64) == pytest.approx(2j * lp_norm(f, 2, grid64) ** 2)

    def test_sample(self, grid64):
        f = sample(grid64, lambda X, Y: X + 2 * Y)
        assert f.data[3, 5] == pytest.approx(grid64.x[3] + 2 * grid64.x[5])


class TestHealthMetrics:
    def test_boundary_mass_small_for_centred_bump(self, grid64):
        assert boundary_mass_fraction(gaussian(grid64), grid64) < 1e-10

    def test_boundary_mass_large_at_edge(self, grid64):
        assert boundary_mass_fraction(gaussian(grid64, center=(9.5, 0.0)), grid64) > 0.4

    def test_high_mode_fraction(self, grid64):
        assert high_mode_fraction(gaussian(grid64, width=2.0), grid64) < 1e-12
        r = np.random.default_rng(0).standard_normal((64, 64))
        assert high_mode_fraction(r, grid64) > 0.5

    def test_zero_field(self, grid64):
        z = np.zeros((64, 64))
        assert boundary_mass_fraction(z, grid64) == 0.0
        assert high_mode_fraction(z, grid64) == 0.0
        assert lp_norm(z, 3, grid64) == 0.0
