import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kg2d.errors import GridError
from kg2d.grid import Field, Grid2D, lp_norm
from kg2d.kg import (
    BLOWUP,
    COMPLETED,
    UNDERRESOLVED,
    KGState,
    conserved_quantities,
    dealiased_cube,
    energy_first_order,
    evolve,
    from_first_order,
    linear_flow,
    nonlinear_kick,
    strang_step,
    to_first_order,
)
from kg2d.kg import _ir

from conftest import gaussian


def packet(grid, mu=1, amp=1.0):
    X, Y = grid.mesh
    u = amp * np.exp(-(X**2 + Y**2) / 4) * np.cos(0.8 * X)
    ut = 0.5 * amp * np.exp(-((X - 1) ** 2 + Y**2) / 4)
    return KGState.from_arrays(grid, u, ut, 0.0, mu)


def energy_oracle(s):
    """Energy and momentum by plain numpy, independent of the half-plane bookkeeping."""
    g = s.grid
    KX, KY = g.kmesh
    c = np.fft.fft2(s.u.data)
    ux = np.fft.ifft2(1j * KX * c).real
    uy = np.fft.ifft2(1j * KY * c).real
    u, ut = s.u.data, s.ut.data
    dens = 0.5 * ut**2 + 0.5 * (ux**2 + uy**2) + 0.5 * u**2 + 0.25 * s.mu * u**4
    da = g.cell_area
    return dens.sum() * da, -(ut * ux).sum() * da, -(ut * uy).sum() * da


@pytest.fixture
def g():
    return Grid2D(64, 20.0)


class TestState:
    def test_rejects_complex(self, g):
        with pytest.raises(GridError):
            KGState(Field(g, np.zeros((64, 64)) + 0j), Field(g, np.zeros((64, 64))))

    @pytest.mark.parametrize("mu", [0, 2, "1"])
    def test_rejects_mu(self, g, mu):
        with pytest.raises(ValueError):
            KGState.from_arrays(g, np.zeros((64, 64)), mu=mu)

    def test_grid_mismatch(self, g):
        with pytest.raises(GridError):
            KGState(Field(g, np.zeros((64, 64))), Field(Grid2D(64, 10.0), np.zeros((64, 64))))


class TestLinear:
    def test_plane_wave_oracle(self):
        g = Grid2D(32, 2 * np.pi)
        X, Y = g.mesh
        w = np.sqrt(1 + 9 + 4)
        s = KGState.from_arrays(g, np.cos(3 * X + 2 * Y), w * np.sin(3 * X + 2 * Y))
        out = linear_flow(s, 0.37)
        assert np.max(np.abs(out.u.data - np.cos(3 * X + 2 * Y - w * 0.37))) < 1e-13
        assert out.t == pytest.approx(0.37)

    @settings(max_examples=15, deadline=None)
    @given(a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_group_property(self, a, b):
        g = Grid2D(32, 10.0)
        s = packet(g)
        x = linear_flow(linear_flow(s, a), b)
        y = linear_flow(s, a + b)
        assert np.max(np.abs(x.u.data - y.u.data)) < 1e-12
        assert np.max(np.abs(x.ut.data - y.ut.data)) < 1e-12

    def test_first_order_roundtrip(self):
        # roomy box, so the data has no Nyquist content for the round trip to drop
        s = packet(Grid2D(64, 28.0))
        v = to_first_order(s)
        back = from_first_order(v, s.t, s.mu)
        assert np.max(np.abs(back.u.data - s.u.data)) < 1e-14
        assert np.max(np.abs(back.ut.data - s.ut.data)) < 1e-12

    def test_first_order_energy(self, g):
        s = packet(g)
        assert energy_first_order(to_first_order(s), s.mu) == pytest.approx(conserved_quantities(s).energy, rel=1e-12)


class TestNonlinear:
    def test_conserved_quantities_oracle(self, g):
        s = packet(g, mu=-1)
        d = conserved_quantities(s)
        e, p1, p2 = energy_oracle(s)
        assert d.energy == pytest.approx(e, rel=1e-12)
        assert d.p1 == pytest.approx(p1, abs=1e-12)
        assert d.p2 == pytest.approx(p2, abs=1e-12)
        assert d.mass == pytest.approx(np.sum(s.u.data**2) * g.cell_area, rel=1e-12)
        assert d.mass_rate == pytest.approx(2 * np.sum(s.u.data * s.ut.data) * g.cell_area, rel=1e-12)

    def test_dealiased_cube_exact_for_low_modes(self):
        g = Grid2D(64, 2 * np.pi)
        X, Y = g.mesh
        u = np.cos(3 * X) + 0.5 * np.sin(4 * Y + X)
        cube = _ir(g, dealiased_cube(g, u))
        assert np.max(np.abs(cube - u**3)) < 1e-12

    def test_dealiased_cube_removes_high_modes(self):
        g = Grid2D(32, 2 * np.pi)
        X, _ = g.mesh
        c = np.fft.fft2(_ir(g, dealiased_cube(g, np.cos(7 * X)))) / g.n**2
        assert np.all(np.abs(c[~g.dealias_mask]) < 1e-14)

    def test_kick_without_dealias(self, g):
        s = packet(g, mu=-1)
        out = nonlinear_kick(s, 0.1, dealias=False)
        assert np.allclose(out.ut.data, s.ut.data + 0.1 * s.u.data**3, atol=1e-15)


class TestEvolve:
    def test_matches_strang_step(self, g):
        s = packet(g)
        ref = s
        for _ in range(5):
            ref = strang_step(ref, 0.01)
        traj = evolve(s, 0.05, 0.01)
        assert np.max(np.abs(traj.final.u.data - ref.u.data)) < 1e-13
        assert np.max(np.abs(traj.final.ut.data - ref.ut.data)) < 1e-12

    @pytest.mark.parametrize("mu", [1, -1])
    def test_conservation(self, g, mu):
        traj = evolve(packet(g, mu=mu), 1.0, 0.005)
        assert traj.status == COMPLETED
        assert traj.energy_drift() < 1e-5
        assert traj.momentum_drift() < 1e-10

    def test_time_reversible(self, g):
        s = packet(g)
        fwd = evolve(s, 0.5, 0.01).final
        back = evolve(fwd, 0.0, -0.01).final
        assert np.max(np.abs(back.u.data - s.u.data)) < 1e-11
        assert back.t == pytest.approx(0.0, abs=1e-12)

    def test_second_order(self, g):
        s = packet(g, mu=-1, amp=1.5)
        u = [evolve(s, 0.4, dt).final.u for dt in (0.04, 0.02, 0.01)]
        e1 = lp_norm(Field(g, u[0].data - u[1].data), 2)
        e2 = lp_norm(Field(g, u[1].data - u[2].data), 2)
        assert e1 / e2 == pytest.approx(4.0, rel=0.1)

    def test_store_stride(self, g):
        traj = evolve(packet(g), 0.1, 0.01, store_every=3)
        assert len(traj) == 11
        assert np.allclose(traj.state_times, [0.0, 0.03, 0.06, 0.09, 0.1])
        assert len(list(traj.rows())) == 11

    def test_monitors(self, g):
        traj = evolve(packet(g), 0.03, 0.01, monitors={"umax": lambda st: float(st.u.data.max())})
        assert traj.array("umax").shape == (4,)

    def test_blowup_status(self, g):
        traj = evolve(packet(g), 1.0, 0.01, blowup_threshold=0.5)
        assert traj.status == BLOWUP
        assert len(traj) == 2
        assert traj.final.t == pytest.approx(0.01)

    def test_drift_status(self, g):
        traj = evolve(packet(g, mu=-1, amp=2.0), 1.0, 0.2, drift_tol=1e-12)
        assert traj.status == UNDERRESOLVED

    @pytest.mark.parametrize("t_end,dt", [(1.0, 0.0), (1.0, -0.1), (0.105, 0.01), (1.0, float("nan"))])
    def test_bad_schedule(self, g, t_end, dt):
        with pytest.raises(ValueError):
            evolve(packet(g), t_end, dt)

    def test_scattering_size_gaussian_static_norm(self, g):
        s = KGState.from_arrays(g, np.zeros((64, 64)))
        assert evolve(s, 0.1, 0.01).scattering_size() == 0.0
