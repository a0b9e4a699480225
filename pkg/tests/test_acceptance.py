"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines live;
they are also written under ``-v`` because printing bypasses capture.
"""

import time
import warnings

import numpy as np
import pytest

from kg2d.config import from_dict
from kg2d.diagnostics import (
    GLOBAL,
    BLOWUP_PRED,
    classify_dichotomy,
    coercivity_report,
    concavity_monitor,
    conserved,
    dispersive_decay_fit,
    einstein_invariance,
    boost_spacetime,
    required_span,
    scattering_size,
    static_trajectory,
    virial_series,
    zero_momentum_boost,
)
from kg2d.bridge import ResolutionPlan, convergence_sweep
from kg2d.errors import ResolutionWarning
from kg2d.experiments import BRIDGE_TARGETS, SLOPE_TOL, run
from kg2d.grid import Field, Grid2D, lp_norm, parseval_defect, roundtrip_error, sobolev_norm
from kg2d.ground_state import gn_ratio, sample_on_grid, solve_ground_state
from kg2d.io import load_snapshot, read_field, save_snapshot, write_field
from kg2d.kg import BLOWUP, COMPLETED, KGState, evolve
from kg2d.nls import soliton_check
from kg2d.symmetry import TubeIndex, boost_data, jp, littlewood_paley, tube_projection

from conftest import M_ORACLE, gaussian

pytestmark = pytest.mark.slow


class Checks:
    """Collects named sub-checks and reports them as one line."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.items = []
        self.t0 = time.perf_counter()

    def add(self, name, ok, detail):
        self.items.append((name, bool(ok), detail))

    def runtime(self, limit):
        dt = time.perf_counter() - self.t0
        self.add("runtime", dt < limit, f"{dt:.1f}s < {limit:g}s")

    def finish(self, capsys):
        ok = all(i[1] for i in self.items)
        parts = "; ".join(f"{n}={'ok' if good else 'FAIL'} ({d})" for n, good, d in self.items)
        with capsys.disabled():
            print(f"\n[criterion {self.number}] {'PASS' if ok else 'FAIL'} {self.title}: {parts}")
        bad = [n for n, good, _ in self.items if not good]
        assert not bad, f"failed sub-checks: {bad}"


def q_state(profile, grid, eps=0.0):
    q = sample_on_grid(profile, grid)
    return KGState(Field(grid, (1 + eps) * q.data), Field(grid, np.zeros_like(q.data)), 0.0, -1)


def random_bumps(grid, r):
    X, Y = grid.mesh
    f = np.zeros_like(X)
    for _ in range(r.integers(1, 6)):
        cx, cy = r.uniform(-4, 4, 2)
        wx, wy = r.uniform(0.6, 2.0, 2)
        f += r.normal() * np.exp(-((X - cx) ** 2) / (2 * wx**2) - (Y - cy) ** 2 / (2 * wy**2))
    return f


def test_criterion_1_ground_state(capsys):
    c = Checks(1, "ground state")
    prof = solve_ground_state(1e-10)
    c.add("ode_residual", prof.residual < 1e-8, f"{prof.residual:.2e} < 1e-8")
    c.add("pohozaev", prof.pohozaev_error < 1e-6, f"{prof.pohozaev_error:.2e} < 1e-6")
    rel = abs(prof.mass - M_ORACLE) / M_ORACLE
    c.add("mass_vs_oracle", rel < 1e-6, f"M={prof.mass:.12f}, rel {rel:.2e} < 1e-6")
    c.runtime(10)
    c.finish(capsys)


def test_criterion_2_sharp_gn(capsys, profile):
    c = Checks(2, "sharp Gagliardo-Nirenberg")
    bound = 2.0 / profile.mass
    rq = gn_ratio(sample_on_grid(profile, Grid2D(256, 40.0)))
    c.add("gn_ratio_Q", abs(rq / bound - 1) < 1e-3, f"{rq:.8f} vs 2/M={bound:.8f}")
    g = Grid2D(64, 20.0)
    r = np.random.default_rng(20240601)
    ratios = np.array([gn_ratio(random_bumps(g, r), g) for _ in range(100)])
    worst = ratios.max()
    c.add("random_fields", np.all(ratios < bound * (1 + 1e-3)), f"max {worst:.6f} over 100 < {bound * (1 + 1e-3):.6f}")
    c.runtime(30)
    c.finish(capsys)


def test_criterion_3_solver(capsys, profile):
    c = Checks(3, "solver validity")
    g = Grid2D(64, 20.0)
    X, Y = g.mesh
    s = KGState.from_arrays(g, 1.5 * np.exp(-(X**2 + Y**2) / 4) * np.cos(0.8 * X),
                            0.75 * np.exp(-((X - 1) ** 2 + Y**2) / 4), 0.0, -1)
    u = [evolve(s, 0.4, dt).final.u.data for dt in (0.04, 0.02, 0.01)]
    ratio = np.linalg.norm(u[0] - u[1]) / np.linalg.norm(u[1] - u[2])
    c.add("richardson", abs(ratio - 4) <= 0.4, f"{ratio:.4f} in 4 +/- 10%")

    g = Grid2D(256, 40.0)
    X, Y = g.mesh
    s = KGState.from_arrays(g, 1.2 * np.exp(-(X**2 + Y**2) / 4) * np.cos(0.8 * X),
                            0.5 * np.exp(-((X - 1) ** 2 + Y**2) / 4), 0.0, 1)
    traj = evolve(s, 10.0, 1e-3)
    ed, pd = traj.energy_drift(), traj.momentum_drift()
    c.add("energy_drift", traj.status == COMPLETED and ed < 1e-6, f"{ed:.2e} < 1e-6")
    c.add("momentum_drift", pd < 1e-8, f"{pd:.2e} < 1e-8")

    s = q_state(profile, g)
    uT = evolve(s, 5.0, 1e-3).final.u
    err = lp_norm(Field(g, uT.data - s.u.data), 2) / lp_norm(s.u, 2)
    c.add("static_Q", err < 1e-3, f"||u(5)-Q||/||Q|| = {err:.2e} < 1e-3")
    c.runtime(300)
    c.finish(capsys)


def test_criterion_4_dichotomy(capsys, profile):
    c = Checks(4, "Payne-Sattinger dichotomy")
    g = Grid2D(256, 40.0)
    agree = 0
    for eps in (0.05, 0.1, 0.2):
        s = q_state(profile, g, eps)
        v = classify_dichotomy(s, profile)
        traj = evolve(s, 30.0, 5e-4, blowup_threshold=11.0, drift_tol=1e-2)
        cv = concavity_monitor(traj, v)
        vir = virial_series(traj) - 6 * traj.array("kinetic")
        ok = v.prediction == BLOWUP_PRED and traj.status == BLOWUP and bool(cv.ok) and vir.min() > 0
        agree += ok
        c.add(f"eps={eps:+.2f}", ok, f"{traj.status} at t={traj.times[-1]:.3f}, "
              f"max d2 M^-1/2={cv.max_second_difference:.1e}, min virial margin={vir.min():.2e}")
    for eps in (-0.05, -0.1, -0.2):
        s = q_state(profile, g, eps)
        v = classify_dichotomy(s, profile)
        traj = evolve(s, 30.0, 1e-3)
        cr = coercivity_report(traj, profile)
        ok = v.prediction == GLOBAL and traj.status == COMPLETED and cr.sandwich_ok
        agree += ok
        c.add(f"eps={eps:+.2f}", ok, f"{traj.status} to T={traj.times[-1]:.1f}, "
              f"sandwich margins {cr.min_lower_margin:.3f}/{cr.min_upper_margin:.3f}")
    c.add("agreement", agree == 6, f"{agree}/6")
    c.runtime(1200)
    c.finish(capsys)


def test_criterion_5_lorentz(capsys, profile):
    c = Checks(5, "Lorentz sector")
    g = Grid2D(128, 40.0)
    r = np.random.default_rng(5)
    worst = 0.0
    for nu in ((0.2, 0.0), (0.5, 0.0), (0.3, -0.4)):
        f = Field(g, random_bumps(g, r))
        e = abs(sobolev_norm(boost_data(np.asarray(nu), f), 0.5) / sobolev_norm(f, 0.5) - 1)
        worst = max(worst, e)
    c.add("h12_unitarity", worst < 1e-6, f"{worst:.2e} < 1e-6")

    g = Grid2D(128, 32.0)
    s = q_state(profile, g)
    nu = np.array([0.5, 0.0])
    nus = [(0.0, 0.0), (0.2, 0.0), (0.5, 0.0)]
    span = max(required_span(g, n) for n in nus) + 0.5
    traj = static_trajectory(s, -0.05 * np.ceil(span / 0.05), 0.05 * np.ceil(span / 0.05), 0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionWarning)
        cb = conserved(boost_spacetime(traj, nu))
        spread = einstein_invariance(traj, nus)
    m_pred = conserved(s).M / float(jp(nu))
    c.add("boosted_mass", abs(cb.M / m_pred - 1) < 1e-2, f"{cb.M:.5f} vs M/<nu>={m_pred:.5f}")
    c.add("rest_mass_spread", spread < 1e-2, f"{spread:.2e} < 1e-2")
    zm = zero_momentum_boost(cb)
    zerr = np.linalg.norm(zm + nu) / np.linalg.norm(nu)
    c.add("zero_momentum", zerr < 1e-2, f"{np.round(zm, 5).tolist()} vs -nu, rel {zerr:.2e}")
    c.runtime(600)
    c.finish(capsys)


def test_criterion_6_decay(capsys):
    c = Checks(6, "dispersive decay")
    g = Grid2D(512, 160.0)
    fit = dispersive_decay_fit(Field(g, gaussian(g, width=1.5)), 2, (5.0, 50.0), 24)
    c.add("slope", abs(fit.slope + 1) <= 0.1, f"{fit.slope:.4f} in -1 +/- 0.1")
    c.runtime(60)
    c.finish(capsys)


def test_criterion_7_bridge(capsys, profile):
    c = Checks(7, "nonrelativistic bridge")
    rep = soliton_check(profile, Grid2D(128, 20.0), 5.0, 0.002)
    c.add("soliton_drift", rep.modulus_drift < 1e-3, f"{rep.modulus_drift:.2e} < 1e-3")
    g = Grid2D(64, 48.0)
    phi = Field(g, 2.0 * gaussian(g, width=4.0) + 0j)
    sw = convergence_sweep(phi, [4.0, 8.0, 16.0], 1.0, ResolutionPlan(n=64, L_slow=48.0, dt=0.02), mu=1)
    c.add("all_scales_run", sw.lams == [4.0, 8.0, 16.0], f"ran {sw.lams}")
    for k, target in BRIDGE_TARGETS.items():
        s = sw.slope(k)
        c.add(f"slope_{k}", abs(s - target) <= SLOPE_TOL, f"{s:.3f} vs {target:.2f}")
    d = [b.disc_l4 for b in sw.budgets]
    c.add("disc_l4_decreasing", sw.strictly_decreasing(), ", ".join(f"{x:.3e}" for x in d))
    c.runtime(3600)
    c.finish(capsys)


def test_criterion_8_small_data(capsys):
    c = Checks(8, "small-data bound")
    g = Grid2D(128, 40.0)
    vals = []
    for eps in (0.04, 0.02, 0.01):
        s = KGState.from_arrays(g, eps * gaussian(g), None, 0.0, -1)
        traj = evolve(s, 20.0, 0.01)
        vals.append(scattering_size(traj) / traj.energy[0] ** 2)
    v = np.array(vals)
    spread = (v.max() - v.min()) / v.max()
    c.add("S_over_E2", spread <= 0.1, f"{', '.join(f'{x:.5f}' for x in v)}, spread {spread:.1e} <= 10%")
    c.runtime(600)
    c.finish(capsys)


def test_criterion_9_infrastructure(capsys, tmp_path):
    c = Checks(9, "infrastructure")
    g = Grid2D(128, 20.0)
    r = np.random.default_rng(9)
    f = Field(g, r.standard_normal((128, 128)) + 1j * r.standard_normal((128, 128)))
    rt, pv = roundtrip_error(f), parseval_defect(f)
    c.add("fft", rt < 1e-12 and pv < 1e-12, f"roundtrip {rt:.1e}, parseval {pv:.1e}")

    s = KGState.from_arrays(g, r.standard_normal((128, 128)), r.standard_normal((128, 128)), 1.25, -1)
    back = load_snapshot(save_snapshot(s, tmp_path / "s.kgf1"))
    fb, _ = read_field(write_field(tmp_path / "f.kgf1", f), g)
    exact = (back.u.data.tobytes() == s.u.data.tobytes() and back.ut.data.tobytes() == s.ut.data.tobytes()
             and back.t == s.t and fb.data.tobytes() == f.data.tobytes())
    c.add("kgf1", exact, "bit-exact" if exact else "mismatch")

    h = Field(g, r.standard_normal((128, 128)))
    worst = 0.0
    for N in (1, 2, 4, 8):
        total = sum(tube_projection(i, h).data for i in TubeIndex.all(N))
        ref = littlewood_paley(N, h).data
        worst = max(worst, np.max(np.abs(total - ref)) / max(np.max(np.abs(ref)), 1e-300))
    c.add("tube_partition", worst < 1e-12, f"{worst:.1e} < 1e-12")

    cfg = from_dict({"grid": {"n": 64, "L": 20.0}, "T": 0.2, "dt": 0.01, "mu": -1,
                     "data": {"noise": 0.2, "amplitude": 1.5}})
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in ("diagnostics.csv", "config.json"))
    c.add("determinism", same, "identical bytes" if same else "outputs differ")
    c.runtime(60)
    c.finish(capsys)
