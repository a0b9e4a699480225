"""Cubic Klein-Gordon ``u_tt - Delta u + u + mu u^3 = 0`` on a periodic box.

Stepping uses the real second-order form. The linear part is an exact
rotation of each Fourier mode, and the nonlinear part is the pointwise kick
``u_t -= mu dt u^3`` with the cubic dealiased by truncating to
``|xi|_inf <= n dk/4``. The Strang step is kick(dt/2), linear(dt), kick(dt/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import trapezoid

from . import _fft, kernels
from .errors import GridError
from .grid import Field, Grid2D

BLOWUP_THRESHOLD = 1e6
DRIFT_TOL = 1e-2

COMPLETED = "completed"
BLOWUP = "blowup_detected"
UNDERRESOLVED = "underresolved"


def _check_mu(mu) -> int:
    if mu not in (1, -1):
        raise ValueError(f"mu must be +1 (defocusing) or -1 (focusing), got {mu!r}")
    return int(mu)


@dataclass(frozen=True, eq=False)
class KGState:
    """Real data ``(u, u_t)`` at time ``t`` for the equation with sign ``mu``."""

    u: Field
    ut: Field
    t: float = 0.0
    mu: int = -1

    def __post_init__(self):
        self.u.grid.check_same(self.ut.grid)
        if not (self.u.is_real and self.ut.is_real):
            raise GridError("KGState fields must be real")
        object.__setattr__(self, "mu", _check_mu(self.mu))
        object.__setattr__(self, "t", float(self.t))

    @property
    def grid(self) -> Grid2D:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: Grid2D, u, ut=None, t: float = 0.0, mu: int = -1) -> "KGState":
        u = np.asarray(u, dtype=float)
        ut = np.zeros_like(u) if ut is None else np.asarray(ut, dtype=float)
        return cls(Field(grid, u), Field(grid, ut), t, mu)

    def replace(self, **kw) -> "KGState":
        d = dict(u=self.u, ut=self.ut, t=self.t, mu=self.mu)
        d.update(kw)
        return KGState(**d)


# --------------------------------------------------------------------------
# half-plane spectral helpers


@dataclass(frozen=True)
class _Half:
    """Lattice quantities on the real-FFT half plane."""

    grid: Grid2D

    @cached_property
    def kx(self) -> np.ndarray:
        return self.grid.k[:, None]

    @cached_property
    def ky(self) -> np.ndarray:
        m = self.grid.n // 2 + 1
        return (self.grid.dk * np.arange(m))[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def omega(self) -> np.ndarray:
        return np.sqrt(1.0 + self.ksq)

    @cached_property
    def nyq(self) -> np.ndarray:
        n = self.grid.n
        m = np.zeros((n, n // 2 + 1), dtype=bool)
        m[n // 2, :] = True
        m[:, n // 2] = True
        return m

    @cached_property
    def dealias(self) -> np.ndarray:
        cut = 0.25 * self.grid.n * self.grid.dk * (1.0 + 1e-12)
        return (np.abs(self.kx) <= cut) & (np.abs(self.ky) <= cut)

    @cached_property
    def weight(self) -> np.ndarray:
        """Multiplicity of each half-plane mode in full-lattice sums."""
        n = self.grid.n
        w = np.full((1, n // 2 + 1), 2.0)
        w[0, 0] = 1.0
        w[0, n // 2] = 1.0
        return w

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        """``integral f g`` for real f, g with half-plane spectra a, b."""
        return self.grid.L**2 * float(np.sum(self.weight * (a.conj() * b).real))

    @cached_property
    def w_flat(self) -> np.ndarray:
        return np.broadcast_to(self.weight, self.omega.shape).ravel().copy()

    @cached_property
    def w_omega2_flat(self) -> np.ndarray:
        return (self.weight * self.omega**2).ravel()

    @cached_property
    def w_kx_flat(self) -> np.ndarray:
        return np.broadcast_to(self.weight * self.kx, self.omega.shape).ravel().copy()

    @cached_property
    def w_ky_flat(self) -> np.ndarray:
        return np.broadcast_to(self.weight * self.ky, self.omega.shape).ravel().copy()


_HALF: dict[Grid2D, _Half] = {}


def _half(grid: Grid2D) -> _Half:
    h = _HALF.get(grid)
    if h is None:
        h = _HALF[grid] = _Half(grid)
    return h


def _r(grid, a):
    c = _fft.rfft2(a)
    c[_half(grid).nyq] = 0.0
    return c


def _ir(grid, c):
    return _fft.irfft2(c, grid.n)


# --------------------------------------------------------------------------
# substeps on Fields


def linear_flow(s: KGState, dt: float) -> KGState:
    """Exact flow of ``u_tt = Delta u - u`` for time ``dt``."""
    g = s.grid
    h = _half(g)
    uh, vh = _r(g, s.u.data), _r(g, s.ut.data)
    uh, vh = _rotate(h, uh, vh, dt)
    return s.replace(u=Field(g, _ir(g, uh)), ut=Field(g, _ir(g, vh)), t=s.t + dt)


def _rotate(h: _Half, uh, vh, dt):
    w = h.omega
    c, sn = np.cos(dt * w), np.sin(dt * w)
    return c * uh + (sn / w) * vh, -w * sn * uh + c * vh


def dealiased_cube(grid: Grid2D, u: np.ndarray) -> np.ndarray:
    """Half-plane spectrum of ``u^3`` truncated to the dealiased band."""
    c = _fft.rfft2(kernels.cubic_power(np.ascontiguousarray(u)))
    c *= _half(grid).dealias
    return c


def nonlinear_kick(s: KGState, dt: float, dealias: bool = True) -> KGState:
    """``u_t -= mu dt u^3``; with ``dealias`` the cube is band-limited first."""
    g = s.grid
    if dealias:
        ut = s.ut.data + (-s.mu * dt) * _ir(g, dealiased_cube(g, s.u.data))
    else:
        ut = kernels.cubic_kick(np.array(s.ut.data, copy=True), np.ascontiguousarray(s.u.data), s.mu * dt)
    return s.replace(ut=Field(g, ut))


def strang_step(s: KGState, dt: float) -> KGState:
    """One second-order step: kick(dt/2), linear(dt), kick(dt/2)."""
    return nonlinear_kick(linear_flow(nonlinear_kick(s, 0.5 * dt), dt), 0.5 * dt)


# --------------------------------------------------------------------------
# first-order complex view


def to_first_order(s: KGState) -> Field:
    """``v = u + i <nabla>^{-1} u_t``."""
    g = s.grid
    c = _fft.fft2(s.ut.data) / g.kbracket
    c[g.nyquist_mask] = 0.0
    return Field(g, s.u.data + 1j * _fft.ifft2(c).real)


def from_first_order(v: Field, t: float = 0.0, mu: int = -1) -> KGState:
    """Inverse of :func:`to_first_order`: ``u = Re v``, ``u_t = <nabla> Im v``."""
    g = v.grid
    a = np.asarray(v.data)
    c = _fft.fft2(a.imag if np.iscomplexobj(a) else np.zeros_like(a)) * g.kbracket
    c[g.nyquist_mask] = 0.0
    return KGState(Field(g, a.real.copy()), Field(g, _fft.ifft2(c).real), t, mu)


def energy_first_order(v: Field, mu: int) -> float:
    """``integral 1/2 |<nabla> v|^2 + mu/4 (Re v)^4``."""
    g = v.grid
    c = _fft.fft2(v.data)
    quad = 0.5 * g.L**2 * float(np.sum(g.kbracket**2 * np.abs(c) ** 2))
    return quad + 0.25 * mu * float(np.sum(v.data.real**4)) * g.cell_area


# --------------------------------------------------------------------------
# conserved quantities from spectra


@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    energy: float
    mass: float
    p1: float
    p2: float
    l4_4: float
    sup: float
    kinetic: float  # integral u_t^2
    h1_sq: float  # integral |grad u|^2 + u^2
    mass_rate: float  # dM/dt = 2 integral u u_t


def _diag(g: Grid2D, h: _Half, u: np.ndarray, uh, vh, mu: int, t: float) -> StepDiagnostics:
    u2 = (u * u).ravel()
    l4 = float(np.dot(u2, u2)) * g.cell_area
    au = (uh.real**2 + uh.imag**2).ravel()
    av = (vh.real**2 + vh.imag**2).ravel()
    # Im(conj(vh) uh), so that P = -integral u_t grad u = L^2 sum w xi Im(conj(vh) uh)
    cross = (vh.real * uh.imag - vh.imag * uh.real).ravel()
    mass = float(np.dot(h.w_flat, au))
    grad_mass = float(np.dot(h.w_omega2_flat, au))
    kin = float(np.dot(h.w_flat, av))
    L2 = g.L**2
    e = 0.5 * L2 * (kin + grad_mass) + 0.25 * mu * l4
    p1 = L2 * float(np.dot(h.w_kx_flat, cross))
    p2 = L2 * float(np.dot(h.w_ky_flat, cross))
    sup = max(float(u.max()), -float(u.min()))
    rate = 2.0 * L2 * float(np.dot(h.w_flat, (uh.real * vh.real + uh.imag * vh.imag).ravel()))
    return StepDiagnostics(t, e, L2 * mass, p1, p2, l4, sup, L2 * kin, L2 * grad_mass, rate)


def conserved_quantities(s: KGState) -> StepDiagnostics:
    g = s.grid
    return _diag(g, _half(g), s.u.data, _r(g, s.u.data), _r(g, s.ut.data), s.mu, s.t)


# --------------------------------------------------------------------------
# trajectories


@dataclass(eq=False)
class Trajectory:
    """States at uniform spacing plus per-step diagnostics.

    Diagnostics are recorded every step. Full states are kept every
    ``store_every`` steps (always including the first and last), since
    storing every step of a long run does not fit in memory.
    """

    grid: Grid2D
    mu: int
    dt: float
    store_every: int
    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    p1: list = field(default_factory=list)
    p2: list = field(default_factory=list)
    l4_4: list = field(default_factory=list)
    sup: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    h1_sq: list = field(default_factory=list)
    mass_rate: list = field(default_factory=list)
    monitors: dict = field(default_factory=dict)
    states: list = field(default_factory=list)
    status: str = COMPLETED
    message: str = ""

    def record(self, d: StepDiagnostics) -> None:
        self.t.append(d.t)
        self.energy.append(d.energy)
        self.mass.append(d.mass)
        self.p1.append(d.p1)
        self.p2.append(d.p2)
        self.l4_4.append(d.l4_4)
        self.sup.append(d.sup)
        self.kinetic.append(d.kinetic)
        self.h1_sq.append(d.h1_sq)
        self.mass_rate.append(d.mass_rate)

    def __len__(self) -> int:
        return len(self.t)

    def array(self, name: str) -> np.ndarray:
        if name in self.monitors:
            return np.asarray(self.monitors[name], dtype=float)
        return np.asarray(getattr(self, name), dtype=float)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.t)

    @property
    def final(self) -> KGState:
        return self.states[-1]

    @property
    def state_times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def energy_drift(self) -> float:
        e = self.array("energy")
        e = e[np.isfinite(e)]
        if e.size == 0:
            return float("nan")
        scale = abs(e[0]) if e[0] != 0 else 1.0
        return float(np.max(np.abs(e - e[0]))) / scale

    def momentum_drift(self) -> float:
        p = np.stack([self.array("p1"), self.array("p2")], axis=1)
        return float(np.max(np.hypot(*(p - p[0]).T)))

    def scattering_size(self) -> float:
        """Trapezoid rule for ``integral ||u(t)||_4^4 dt`` over the recorded steps."""
        return float(trapezoid(self.array("l4_4"), self.times)) if len(self) > 1 else 0.0

    def rows(self):
        """Diagnostic rows ``(t, E, M, P1, P2, ||u||_4^4, ||u||_inf)``."""
        return zip(self.t, self.energy, self.mass, self.p1, self.p2, self.l4_4, self.sup)


Monitor = Callable[[KGState], float]


class _Stepper:
    """Strang stepping on half-plane spectra, reusing the cube between steps."""

    def __init__(self, s: KGState, dt: float):
        self.g = s.grid
        self.h = _half(self.g)
        self.mu = s.mu
        self.dt = dt
        self.t = s.t
        self.uh = _r(self.g, s.u.data)
        self.vh = _r(self.g, s.ut.data)
        self.u = _ir(self.g, self.uh)
        self.nh = dealiased_cube(self.g, self.u)
        w = self.h.omega
        c, sn = np.cos(dt * w), np.sin(dt * w)
        self.rot = (c, sn / w, -w * sn)
        self.half_kick = -0.5 * self.mu * dt

    def step(self) -> None:
        c, s_over_w, ws = self.rot
        vh = self.vh + self.half_kick * self.nh
        uh = c * self.uh + s_over_w * vh
        vh = ws * self.uh + c * vh
        self.u = _ir(self.g, uh)
        self.nh = dealiased_cube(self.g, self.u)
        self.vh = vh + self.half_kick * self.nh
        self.uh = uh
        self.t += self.dt

    def diagnostics(self) -> StepDiagnostics:
        return _diag(self.g, self.h, self.u, self.uh, self.vh, self.mu, self.t)

    def state(self) -> KGState:
        return KGState(Field(self.g, self.u), Field(self.g, _ir(self.g, self.vh)), self.t, self.mu)


def evolve(
    s: KGState,
    t_end: float,
    dt: float,
    monitors: Mapping[str, Monitor] | None = None,
    store_every: int | None = None,
    blowup_threshold: float = BLOWUP_THRESHOLD,
    drift_tol: float = DRIFT_TOL,
    on_store: Callable[[KGState], None] | None = None,
) -> Trajectory:
    """Advance with Strang steps until ``t_end`` or an early stop.

    Stops with ``blowup_detected`` when ``||u||_inf`` exceeds
    ``blowup_threshold`` and with ``underresolved`` when the relative energy
    drift exceeds ``drift_tol`` or a non-finite value appears. The blowup
    test is made first. A negative ``dt`` with ``t_end < s.t`` runs
    backwards. ``monitors`` are evaluated on the state after every step.
    """
    if dt == 0 or not math.isfinite(dt):
        raise ValueError(f"dt must be finite and nonzero, got {dt}")
    span = t_end - s.t
    if span * dt <= 0:
        raise ValueError("t_end must lie ahead of the state time in the direction of dt")
    steps = int(round(span / dt))
    if abs(steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"t_end - t = {span} is not a whole number of steps of {dt}")
    stride = steps if store_every is None else max(1, int(store_every))
    monitors = dict(monitors or {})

    traj = Trajectory(s.grid, s.mu, dt, stride)
    for name in monitors:
        traj.monitors[name] = []
    st = _Stepper(s, dt)

    def observe(force_store: bool) -> None:
        state = st.state() if (monitors or force_store) else None
        for name, fn in monitors.items():
            traj.monitors[name].append(float(fn(state)))
        if force_store:
            traj.states.append(state)
            if on_store is not None:
                on_store(state)

    d0 = st.diagnostics()
    traj.record(d0)
    observe(True)
    e_scale = abs(d0.energy) if d0.energy != 0 else 1.0
    for k in range(1, steps + 1):
        st.step()
        d = st.diagnostics()
        traj.record(d)
        stop = None
        if not (math.isfinite(d.energy) and math.isfinite(d.sup)):
            stop = (UNDERRESOLVED, f"non-finite field at t={d.t:.6g}")
        elif d.sup > blowup_threshold:
            stop = (BLOWUP, f"||u||_inf = {d.sup:.3g} exceeded {blowup_threshold:g} at t={d.t:.6g}")
        elif abs(d.energy - d0.energy) / e_scale > drift_tol:
            stop = (UNDERRESOLVED, f"energy drift exceeded {drift_tol:g} at t={d.t:.6g}")
        observe(stop is not None or k % stride == 0 or k == steps)
        if stop is not None:
            traj.status, traj.message = stop
            break
    return traj
