"""Conserved quantities, thresholds, virial monitors and the nonlinear boost of solutions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import _fft
from .errors import ResolutionWarning
from .grid import Field, Grid2D, boundary_mass_fraction, lp_norm, sobolev_norm
from .ground_state import GroundStateProfile
from .kg import (
    BLOWUP,
    COMPLETED,
    UNDERRESOLVED,
    KGState,
    Trajectory,
    conserved_quantities,
    dealiased_cube,
    evolve,
    _ir,
)
from .symmetry import jp, littlewood_paley, lorentz_apply, smoothstep

# --------------------------------------------------------------------------
# conserved quantities


@dataclass(frozen=True)
class ConservedRecord:
    E: float
    M: float
    P: tuple

    @property
    def rest_mass_sq(self) -> float:
        return self.E**2 - self.P[0] ** 2 - self.P[1] ** 2

    @property
    def P_abs(self) -> float:
        return math.hypot(*self.P)


def conserved(s: KGState) -> ConservedRecord:
    d = conserved_quantities(s)
    return ConservedRecord(d.energy, d.mass, (d.p1, d.p2))


def scattering_size(traj: Trajectory, interval: tuple[float, float] | None = None) -> float:
    """``integral ||u(t)||_4^4 dt`` by the trapezoid rule over recorded steps in ``interval``."""
    t = traj.times
    q = traj.array("l4_4")
    if interval is not None:
        a, b = interval
        tol = 1e-9 * max(1.0, abs(a), abs(b))
        if a < t.min() - tol or b > t.max() + tol:
            raise ValueError(f"interval [{a}, {b}] exceeds the trajectory span [{t.min()}, {t.max()}]")
        keep = (t >= a - tol) & (t <= b + tol)
        t, q = t[keep], q[keep]
    if t.size < 2:
        return 0.0
    order = np.argsort(t)
    return float(trapezoid(q[order], t[order]))


# --------------------------------------------------------------------------
# virial identity and coercivity



def virial_rate(s: KGState) -> float:
    """Focusing virial rate ``2 integral (u_t^2 - |grad u|^2 - u^2 + u^4)``, the second derivative of the mass."""
    d = conserved_quantities(s)
    return 2.0 * (d.kinetic - d.h1_sq + d.l4_4)


def virial_rate_general(s: KGState) -> float:
    """Sign-general rate ``2 integral (u_t^2 - |grad u|^2 - u^2 - mu u^4)``; derived from the mass definition."""
    d = conserved_quantities(s)
    return 2.0 * (d.kinetic - d.h1_sq - s.mu * d.l4_4)


def virial_series(traj: Trajectory, printed: bool = True) -> np.ndarray:
    """Virial rate at every recorded step from the stored diagnostics."""
    kin, h1, l4 = traj.array("kinetic"), traj.array("h1_sq"), traj.array("l4_4")
    sign = 1.0 if printed else -float(traj.mu)
    return 2.0 * (kin - h1 + sign * l4)


@dataclass(frozen=True)
class CoercivityReport:
    sandwich_ok: bool  # 2E <= ||u||_{H^1}^2 + ||u_t||^2 <= 4E at every step
    min_lower_margin: float
    min_upper_margin: float
    gradient_above_mass: bool  # integral |grad u|^2 > M(Q) at every step
    min_gradient_margin: float


def coercivity_report(traj: Trajectory, profile: GroundStateProfile) -> CoercivityReport:
    e = traj.array("energy")
    quad = traj.array("h1_sq") + traj.array("kinetic")
    grad = traj.array("h1_sq") - traj.array("mass")
    lower = quad - 2 * e
    upper = 4 * e - quad
    gm = grad - profile.mass
    return CoercivityReport(
        bool(np.all(lower >= 0) and np.all(upper >= 0)),
        float(lower.min()),
        float(upper.min()),
        bool(np.all(gm > 0)),
        float(gm.min()),
    )


# --------------------------------------------------------------------------
# dichotomy


GLOBAL, BLOWUP_PRED, OUTSIDE = "global", "blowup", "outside-theory"


@dataclass(frozen=True)
class DichotomyVerdict:
    energy: float
    mass: float
    energy_q: float
    mass_q: float
    energy_below: bool
    mass_below: bool
    mass_above: bool
    prediction: str
    observed: str | None = None
    observed_message: str = ""
    rel_tol: float = 1e-8

    @property
    def agreement(self) -> bool | None:
        if self.observed is None or self.prediction == OUTSIDE:
            return None
        return self.observed == self.prediction

    def with_observation(self, traj: Trajectory) -> "DichotomyVerdict":
        """Blowup status counts as observed blowup; a completed run counts as global."""
        obs = {BLOWUP: BLOWUP_PRED, COMPLETED: GLOBAL}.get(traj.status, UNDERRESOLVED)
        return DichotomyVerdict(**{**self.as_dict(with_derived=False), "observed": obs, "observed_message": traj.message})

    def as_dict(self, with_derived: bool = True) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if with_derived:
            d["agreement"] = self.agreement
        return d


def classify_dichotomy(s: KGState, profile: GroundStateProfile, rel_tol: float = 1e-8) -> DichotomyVerdict:
    """Compare energy and initial mass against the ground-state thresholds.

    Comparisons carry a relative margin ``rel_tol`` so that the ground state
    itself, sampled on a grid, lands on the boundary (outside the theory).
    """
    if s.mu != -1:
        raise ValueError("the dichotomy applies to the focusing equation")
    c = conserved(s)
    eq, mq = profile.energy, profile.mass
    e_below = c.E < eq * (1 - rel_tol)
    m_below = c.M < mq * (1 - rel_tol)
    m_above = c.M > mq * (1 + rel_tol)
    if e_below and m_below:
        pred = GLOBAL
    elif e_below and m_above:
        pred = BLOWUP_PRED
    else:
        pred = OUTSIDE
    return DichotomyVerdict(c.E, c.M, eq, mq, e_below, m_below, m_above, pred, rel_tol=rel_tol)


@dataclass(frozen=True)
class ConcavityVerdict:
    applicable: bool
    ok: bool | None
    max_second_difference: float
    checked: int


def concavity_check(times: np.ndarray, mass: np.ndarray) -> ConcavityVerdict:
    """Second differences of ``M(t)^{-1/2}`` on uniformly spaced samples must all be negative."""
    f = np.asarray(mass, dtype=float) ** -0.5
    if f.size < 3:
        return ConcavityVerdict(True, None, float("nan"), 0)
    d2 = f[2:] - 2 * f[1:-1] + f[:-2]
    return ConcavityVerdict(True, bool(np.all(d2 < 0)), float(d2.max()), int(d2.size))


def concavity_monitor(traj: Trajectory, verdict: DichotomyVerdict | None = None, every: int = 1) -> ConcavityVerdict:
    """Concavity of ``M(t)^{-1/2}`` at interior steps; skipped unless blowup is predicted."""
    if traj.mu != -1 or (verdict is not None and verdict.prediction != BLOWUP_PRED):
        return ConcavityVerdict(False, None, float("nan"), 0)
    m = traj.array("mass")[::every]
    return concavity_check(traj.times[::every], m)


# --------------------------------------------------------------------------
# two-sided and static trajectories


def evolve_two_sided(s: KGState, T: float, dt: float, store_every: int = 1, **kw) -> Trajectory:
    """Run backward and forward from ``s`` over ``[s.t - T, s.t + T]`` and merge."""
    fwd = evolve(s, s.t + T, abs(dt), store_every=store_every, **kw)
    bwd = evolve(s, s.t - T, -abs(dt), store_every=store_every, **kw)
    out = Trajectory(s.grid, s.mu, abs(dt), fwd.store_every)
    names = ("t", "energy", "mass", "p1", "p2", "l4_4", "sup", "kinetic", "h1_sq", "mass_rate")
    for name in names:
        getattr(out, name).extend(list(reversed(getattr(bwd, name)[1:])) + list(getattr(fwd, name)))
    out.states = list(reversed(bwd.states[1:])) + list(fwd.states)
    bad = [tr for tr in (bwd, fwd) if tr.status != COMPLETED]
    if bad:
        out.status, out.message = bad[0].status, bad[0].message
    return out


def static_trajectory(s: KGState, t_min: float, t_max: float, dt: float) -> Trajectory:
    """Constant trajectory of an exactly time-independent solution (``u_t = 0``)."""
    if np.any(s.ut.data != 0):
        raise ValueError("static trajectories need u_t = 0")
    steps = int(round((t_max - t_min) / dt))
    out = Trajectory(s.grid, s.mu, dt, 1)
    d = conserved_quantities(s)
    for k in range(steps + 1):
        t = t_min + k * dt
        out.record(type(d)(**{**d.__dict__, "t": t}))
        out.states.append(s.replace(t=t))
    return out


# --------------------------------------------------------------------------
# boost of a spacetime solution


class SpanError(ValueError):
    """The stored trajectory does not cover the times a boosted slice needs."""


def _time_derivative_fields(s: KGState, nu: np.ndarray) -> list[np.ndarray]:
    """Centred spectra of ``u, u_t, u_tt, nu.grad u, nu.grad u_t``."""
    g = s.grid
    cp = g.corner_phase
    cu = _fft.fft2(s.u.data)
    cv = _fft.fft2(s.ut.data)
    cube = _ir(g, dealiased_cube(g, s.u.data))
    cacc = -(g.ksq + 1.0) * cu - s.mu * _fft.fft2(cube)
    KX, KY = g.kmesh
    d = 1j * (nu[0] * KX + nu[1] * KY)
    out = [cu, cv, cacc, d * cu, d * cv]
    res = []
    for c in out:
        c = c * cp
        c[g.nyquist_mask] = 0.0
        res.append(c)
    return res


def _hermite(s: np.ndarray, h: float, f0, d0, f1, d1):
    s2, s3 = s * s, s * s * s
    return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * h * d1


def _eval_points(cs, k: np.ndarray, px: np.ndarray, py: np.ndarray, chunk: int = 1024) -> list[np.ndarray]:
    """Evaluate several centred spectra at scattered points, sharing the exponentials."""
    out = [np.empty(px.size) for _ in cs]
    for a in range(0, px.size, chunk):
        b = min(a + chunk, px.size)
        ex = np.exp(1j * np.outer(px[a:b], k))
        ey = np.exp(1j * np.outer(py[a:b], k))
        for o, c in zip(out, cs):
            o[a:b] = np.einsum("qk,qk->q", ex @ c, ey).real
    return out


EXACT_SLICE_MAX_N = 128


def required_span(grid: Grid2D, nu, t_slice: float = 0.0) -> float:
    """Largest ``|t|`` of a source event for the boosted slice on this grid."""
    nu = np.asarray(nu, dtype=float).reshape(2)
    if not np.any(nu):
        return abs(t_slice)
    X, Y = grid.mesh
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    tp, xp = lorentz_apply(nu, np.full(pts.shape[0], float(t_slice)), pts)
    half = 0.5 * grid.L
    valid = (np.abs(xp[:, 0]) <= half) & (np.abs(xp[:, 1]) <= half)
    return float(np.max(np.abs(tp[valid])))


def boost_spacetime(traj: Trajectory, nu, t_slice: float = 0.0) -> KGState:
    """The slice ``t~ = t_slice`` of ``u o L_nu`` as Klein-Gordon data on the same grid.

    For every grid point the source event ``(t, x) = L_nu(t~, x~)`` is
    located between stored states. ``u``, ``u_t`` and ``nu . grad u`` are
    interpolated in time by cubic Hermite polynomials using the stored
    ``u_t`` and ``u_tt = Delta u - u - mu u^3``, and evaluated spectrally in
    space. The time derivative of the boosted field is
    ``<nu> u_t - nu . grad u``. Points whose source lies outside the box are
    set to zero, so the solution must be localized; the fraction of the
    result in the outer annulus is checked.
    """
    nu = np.asarray(nu, dtype=float).reshape(2)
    g = traj.grid
    if not traj.states:
        raise SpanError("trajectory holds no states")
    if not np.any(nu):
        times = traj.state_times
        i = int(np.argmin(np.abs(times - t_slice)))
        if abs(times[i] - t_slice) > 1e-9 * max(1.0, abs(t_slice)):
            raise SpanError(f"no stored state at t={t_slice}")
        return traj.states[i]
    if boundary_mass_fraction(traj.states[0].u) > 1e-6:
        warnings.warn("boost of a solution that is not localized in the box", ResolutionWarning, stacklevel=2)
    X, Y = g.mesh
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    tp, xp = lorentz_apply(nu, np.full(pts.shape[0], float(t_slice)), pts)
    half = 0.5 * g.L
    valid = (np.abs(xp[:, 0]) <= half) & (np.abs(xp[:, 1]) <= half)
    st = traj.state_times
    order = np.argsort(st)
    st = st[order]
    states = [traj.states[i] for i in order]
    need_lo, need_hi = tp[valid].min(), tp[valid].max()
    tol = 1e-9 * max(1.0, abs(need_lo), abs(need_hi))
    if need_lo < st[0] - tol or need_hi > st[-1] + tol:
        raise SpanError(
            f"boost needs source times [{need_lo:.4g}, {need_hi:.4g}], trajectory covers [{st[0]:.4g}, {st[-1]:.4g}]"
        )
    axis = 0 if nu[1] == 0 else (1 if nu[0] == 0 else None)
    if axis is None and g.n > EXACT_SLICE_MAX_N:
        raise ValueError(f"general-direction boosts of trajectories are limited to n <= {EXACT_SLICE_MAX_N}")

    u_out = np.zeros(pts.shape[0])
    ut_out = np.zeros(pts.shape[0])
    tcl = np.clip(tp, st[0], st[-1])
    seg = np.clip(np.searchsorted(st, tcl, side="right") - 1, 0, len(st) - 2)
    cache: dict[int, list] = {}

    def fields(i):
        if i not in cache:
            if len(cache) > 4:
                cache.pop(min(cache))
            cache[i] = _time_derivative_fields(states[i], nu)
        return cache[i]

    k = g.k
    ey = np.exp(1j * np.outer(g.x, k))
    gam = float(jp(nu))
    for j in np.unique(seg[valid]):
        sel = np.nonzero(valid & (seg == j))[0]
        h = st[j + 1] - st[j]
        s = (tcl[sel] - st[j]) / h
        a, b = fields(j), fields(j + 1)
        if axis is not None:
            vals = _eval_axis(a + b, k, ey, xp[sel], sel, g.n, axis)
        else:
            vals = _eval_points(a + b, k, xp[sel, 0], xp[sel, 1])
        ua, va, aa, dua, dva = vals[:5]
        ub, vb, ab, dub, dvb = vals[5:]
        u = _hermite(s, h, ua, va, ub, vb)
        ut = _hermite(s, h, va, aa, vb, ab)
        du = _hermite(s, h, dua, dva, dub, dvb)
        u_out[sel] = u
        ut_out[sel] = gam * ut - du
    U = Field(g, u_out.reshape(g.n, g.n))
    V = Field(g, ut_out.reshape(g.n, g.n))
    if boundary_mass_fraction(U) > 1e-6:
        warnings.warn("boosted slice reaches the box boundary", ResolutionWarning, stacklevel=2)
    return KGState(U, V, float(t_slice), traj.mu)


def _eval_axis(cs, k, ey, xp, sel, n, axis):
    """Evaluate spectra at points sharing grid coordinates on the other axis.

    With a boost along one axis the source positions are off-lattice only
    along that axis, so a dense 1D transform handles the other one.
    """
    rows = sel // n if axis == 0 else sel % n
    cols = sel % n if axis == 0 else sel // n
    coord = xp[:, axis]
    urow, inv = np.unique(rows, return_inverse=True)
    # one source coordinate per lattice row along the boost axis
    xs = np.zeros(urow.size)
    xs[inv] = coord
    ex = np.exp(1j * np.outer(xs, k))
    out = []
    for c in cs:
        cc = c if axis == 0 else c.T
        dense = (ex @ cc) @ ey.T  # (rows, n) values on the lattice of the other axis
        out.append(dense[inv, cols].real)
    return out


def zero_momentum_boost(c: ConservedRecord):
    """``nu = -P / sqrt(E^2 - |P|^2)``; requires ``|P| < E``."""
    if not c.P_abs < c.E:
        raise ValueError(f"no zero-momentum frame: |P| = {c.P_abs:g} >= E = {c.E:g}")
    r = math.sqrt(c.rest_mass_sq)
    return np.array([-c.P[0] / r, -c.P[1] / r])


def einstein_invariance(traj: Trajectory, nus, slice_times=(0.0,)) -> float:
    """Max relative spread of ``E^2 - |P|^2`` over recorded times and boosted slices."""
    e = traj.array("energy")
    p2 = traj.array("p1") ** 2 + traj.array("p2") ** 2
    vals = list(e**2 - p2)
    for nu in nus:
        if not np.any(np.asarray(nu, dtype=float)):
            continue
        for ts in slice_times:
            vals.append(conserved(boost_spacetime(traj, nu, ts)).rest_mass_sq)
    v = np.asarray(vals)
    ref = abs(v[0]) if v[0] else 1.0
    return float((v.max() - v.min()) / ref)


# --------------------------------------------------------------------------
# stress-energy tensor


def _spectral_grad(g: Grid2D, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = _fft.fft2(a)
    c[g.nyquist_mask] = 0.0
    KX, KY = g.kmesh
    return _fft.ifft2(1j * KX * c).real, _fft.ifft2(1j * KY * c).real


@dataclass(frozen=True)
class StressEnergy:
    T00: np.ndarray
    T0: tuple  # T^{0j}
    Tjk: np.ndarray  # (2, 2, n, n)


def stress_energy(s: KGState) -> StressEnergy:
    """Energy density, momentum density ``-u_t d_j u`` and the stress tensor."""
    g = s.grid
    u, ut = s.u.data, s.ut.data
    ux, uy = _spectral_grad(g, u)
    grad2 = ux * ux + uy * uy
    pot = 0.5 * u * u + 0.25 * s.mu * u**4
    T00 = 0.5 * ut * ut + 0.5 * grad2 + pot
    lag = 0.5 * grad2 - 0.5 * ut * ut + pot
    d = (ux, uy)
    Tjk = np.empty((2, 2) + u.shape)
    for a in range(2):
        for b in range(2):
            Tjk[a, b] = d[a] * d[b] - (lag if a == b else 0.0)
    return StressEnergy(T00, (-ut * ux, -ut * uy), Tjk)


def stress_divergence(prev: KGState, cur: KGState, nxt: KGState) -> np.ndarray:
    """``||d_t T^{a0} + d_j T^{aj}||_2`` for ``a = 0, 1, 2`` at the middle state.

    Time derivatives are central differences of the neighbouring states,
    space derivatives are spectral.
    """
    g = cur.grid
    h = 0.5 * (nxt.t - prev.t)
    a, b, c = stress_energy(prev), stress_energy(cur), stress_energy(nxt)
    out = []
    dt00 = (c.T00 - a.T00) / (2 * h)
    div0 = sum(_spectral_grad(g, b.T0[j])[j] for j in range(2))
    out.append(lp_norm(dt00 + div0, 2, g))
    for i in range(2):
        dt = (c.T0[i] - a.T0[i]) / (2 * h)
        div = sum(_spectral_grad(g, b.Tjk[i, j])[j] for j in range(2))
        out.append(lp_norm(dt + div, 2, g))
    return np.asarray(out)


# --------------------------------------------------------------------------
# centre of energy and localized virial


def cutoff(r: np.ndarray) -> np.ndarray:
    """Smooth radial cutoff: 1 for ``r <= 1``, 0 for ``r >= 2``."""
    return 1.0 - smoothstep(np.asarray(r, dtype=float) - 1.0)


def cutoff_derivative(r: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return -30.0 * x * x * (1.0 - x) ** 2


@dataclass(frozen=True)
class CenterVirialSample:
    t: float
    X: tuple
    Z: float
    flux: tuple  # printed flux integral for dX/dt (assumes zero momentum)
    flux_general: tuple  # flux plus the momentum term


def center_virial_sample(s: KGState, R: float, eps: float) -> CenterVirialSample:
    g = s.grid
    X, Y = g.mesh
    r = np.hypot(X, Y)
    phi = cutoff(r / R)
    dphi = cutoff_derivative(r / R)
    u, ut = s.u.data, s.ut.data
    ux, uy = _spectral_grad(g, u)
    e = 0.5 * u * u + 0.5 * (ux * ux + uy * uy) + 0.5 * ut * ut + 0.25 * s.mu * u**4
    da = g.cell_area
    Xc = (float(np.sum(X * phi * e)) * da, float(np.sum(Y * phi * e)) * da)
    xdu = X * ux + Y * uy
    Z = -float(np.sum(phi * ut * xdu)) * da - (1 - eps) * float(np.sum(ut * u)) * da
    with np.errstate(invalid="ignore", divide="ignore"):
        wr = np.where(r > 0, dphi / (r * R), 0.0)
    flux = tuple(
        float(np.sum((1 - phi) * ut * d)) * da - float(np.sum(wr * c * ut * xdu)) * da
        for d, c in ((ux, X), (uy, Y))
    )
    P = (-float(np.sum(ut * ux)) * da, -float(np.sum(ut * uy)) * da)
    return CenterVirialSample(s.t, Xc, Z, flux, (flux[0] + P[0], flux[1] + P[1]))


def center_and_virial(traj: Trajectory, R: float, eps: float) -> list[CenterVirialSample]:
    """``X_R(t)`` and ``Z_R(t)`` at every stored state."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return [center_virial_sample(s, R, eps) for s in traj.states]


# --------------------------------------------------------------------------
# linear estimates as measurements


@dataclass(frozen=True)
class DecayFit:
    times: np.ndarray
    sup: np.ndarray
    slope: float
    intercept: float


def dispersive_decay_fit(f: Field, N: int = 2, t_range=(5.0, 50.0), samples: int = 24) -> DecayFit:
    """Fit ``log ||exp(-it<nabla>) P_N f||_inf`` against ``log t`` on log-spaced times."""
    fN = littlewood_paley(N, f)
    c = _fft.fft2(fN.data)
    w = f.grid.kbracket
    ts = np.geomspace(t_range[0], t_range[1], samples)
    sup = np.array([np.max(np.abs(_fft.ifft2(c * np.exp(-1j * t * w)))) for t in ts])
    slope, icpt = np.polyfit(np.log(ts), np.log(sup), 1)
    return DecayFit(ts, sup, float(slope), float(icpt))


def _l4_spacetime_free(f: Field, T: float, dt: float) -> float:
    c = _fft.fft2(f.data)
    w = f.grid.kbracket
    ts = np.arange(0.0, T + 0.5 * dt, dt)
    q = [float(np.sum(np.abs(_fft.ifft2(c * np.exp(-1j * t * w))) ** 4)) * f.grid.cell_area for t in ts]
    return float(trapezoid(q, ts)) ** 0.25


def annular_decoupling_ratio(f: Field, T: float, dt: float, levels=None) -> float:
    """``||e^{-it<nabla>} f||_{L^4}^2 / (sup_N ||e^{-it<nabla>} f_N||_{L^4} ||f||_{H^{1/2}})`` over ``[0, T]``."""
    from .symmetry import dyadic_levels

    levels = dyadic_levels(f.grid) if levels is None else levels
    full = _l4_spacetime_free(f, T, dt)
    best = max(_l4_spacetime_free(littlewood_paley(N, f), T, dt) for N in levels)
    return full**2 / (best * sobolev_norm(f, 0.5))

