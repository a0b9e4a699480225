"""Nonrelativistic bridge: Schrodinger solutions lifted to approximate Klein-Gordon solutions.

An NLS solution ``w`` on slow variables ``(s, y)`` gives the first-order KG
approximant ``v~(t) = exp(-it) D_lam w(t/lam^2)``. The residual of ``v~`` in
``(-i d_t + <nabla>) v + mu <nabla>^{-1} (Re v)^3 = 0`` splits as

* ``e1 = exp(-it) D_lam [<nabla/lam> - 1 + Delta/(2 lam^2)] w`` (dispersion mismatch),
* ``e2 = mu [<nabla>^{-1} - 1] (Re v~)^3``,
* ``e3 = mu/4 Re exp(-3it) (D_lam w)^3`` and
  ``e4 = mu 3/8 exp(it) |D_lam w|^2 conj(D_lam w)`` (non-resonant harmonics).

The harmonics are removed by the corrections ``f_j`` solving
``(-i d_t + <nabla>) f_j = e_j`` with ``f_j(0) = 0``.

Slow and fast grids share ``n``; the fast box is ``lam`` times the slow box,
so ``D_lam`` is an exact relabelling of samples with amplitude ``1/lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fft
from .grid import Field, Grid2D
from .kg import COMPLETED, KGState, _Stepper, from_first_order
from .nls import COUPLING, NLSState, NLSTrajectory, _NLSStepper
from .symmetry import boost_data, dilate, free_propagate_kg, lorentz_apply, low_pass, translate

THETA = 0.01


# --------------------------------------------------------------------------
# wave packets


@dataclass(frozen=True, eq=False)
class WavePacketParams:
    """Parameters of ``T_x0 exp(i t0 <nabla>) L_nu D_lam P_{<= lam^theta} phi``."""

    lam: float
    profile: Field
    nu: tuple = (0.0, 0.0)
    t0: float = 0.0
    x0: tuple = (0.0, 0.0)
    theta: float = THETA

    def __post_init__(self):
        if not self.lam >= 1.0:
            raise ValueError(f"lam must be >= 1, got {self.lam}")
        nu = tuple(float(v) for v in np.asarray(self.nu, dtype=float).reshape(2))
        if self.lam == 1.0 and any(nu):
            raise ValueError("an unscaled packet (lam = 1) must not be boosted")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "x0", tuple(float(v) for v in np.asarray(self.x0, dtype=float).reshape(2)))


@dataclass(frozen=True, eq=False)
class WavePacket:
    data: Field
    center_t: float  # boosted-frame time of the packet centre
    center_x: np.ndarray


def build_wave_packet(p: WavePacketParams) -> WavePacket:
    """Apply the projection, dilation, boost, free flow and translation in that order.

    All operators act on the grid of ``p.profile``; box overflow and
    resolution problems surface as warnings from the individual operators.
    """
    f = low_pass(p.lam**p.theta, p.profile)
    if p.lam != 1.0:
        f = dilate(p.lam, f)
    if any(p.nu):
        f = boost_data(p.nu, f, "forward")
    if p.t0 != 0.0:
        f = free_propagate_kg(-p.t0, f)
    if any(p.x0):
        f = translate(p.x0, f)
    tt, xx = lorentz_apply(p.nu, p.t0, np.asarray(p.x0))
    return WavePacket(f, float(tt), xx)


def fast_grid(slow: Grid2D, lam: float) -> Grid2D:
    return Grid2D(slow.n, slow.L * lam)


def relabel(w: np.ndarray | Field, lam: float, slow: Grid2D | None = None) -> Field:
    """``D_lam w`` on the fast grid, by reading slow samples at fast positions."""
    if isinstance(w, Field):
        slow, w = w.grid, w.data
    return Field(fast_grid(slow, lam), np.asarray(w) / lam)


# --------------------------------------------------------------------------
# pointwise error fields


class _Symbols:
    """Fast-grid multipliers for one (slow grid, lam) pair."""

    def __init__(self, slow: Grid2D, lam: float):
        self.slow = slow
        self.lam = lam
        self.fast = fast_grid(slow, lam)
        a2 = slow.ksq / lam**2  # |xi_fast|^2 on the fast lattice
        br = np.sqrt(1.0 + a2)
        # <a> - 1 - a^2/2 written without cancellation
        self.m1 = -(a2 * a2) / (2.0 * (br + 1.0) ** 2)
        self.one_minus_br = -a2 / (1.0 + br)  # 1 - <xi>
        self.br = br
        self.nyq = slow.nyquist_mask


@dataclass(frozen=True)
class ErrorFields:
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    e4: np.ndarray
    grad_e2: np.ndarray  # <nabla> e2, the quantity measured in L^{4/3}


def _harmonics(dw: np.ndarray, t: float, mu: int):
    """Slow envelopes of e3 and e4: e3 = g3m e^{-3it} + g3p e^{3it}, e4 = g4 e^{it}."""
    cube = dw * dw * dw
    g3m = mu * 0.125 * cube
    g3p = mu * 0.125 * np.conj(cube)
    g4 = mu * COUPLING * (dw.real**2 + dw.imag**2) * np.conj(dw)
    return g3m, g3p, g4


def error_fields(w: np.ndarray, t: float, sym: _Symbols, mu: int) -> ErrorFields:
    """The four residual fields at fast time ``t`` from slow samples ``w``."""
    lam = sym.lam
    ph = np.exp(-1j * t)
    c = _fft.fft2(w) * sym.m1
    c[sym.nyq] = 0.0
    e1 = ph * _fft.ifft2(c) / lam
    dw = w / lam
    v = ph * dw
    cube = v.real**3
    cc = _fft.fft2(cube)
    cc[sym.nyq] = 0.0
    e2 = mu * _fft.ifft2(cc * (1.0 / sym.br - 1.0)).real
    grad_e2 = mu * _fft.ifft2(cc * sym.one_minus_br).real
    g3m, g3p, g4 = _harmonics(dw, t, mu)
    e3 = (g3m * np.exp(-3j * t) + g3p * np.exp(3j * t)).real
    e4 = g4 * np.exp(1j * t)
    return ErrorFields(e1, e2, e3, e4, grad_e2)


def _lp(g: Grid2D, a: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(a) ** p)) * g.cell_area


def _h12(g: Grid2D, a: np.ndarray) -> float:
    c = _fft.fft2(a)
    return g.L * math.sqrt(float(np.sum(g.kbracket * np.abs(c) ** 2)))


def _grad_lp(g: Grid2D, a: np.ndarray, p: float) -> float:
    c = _fft.fft2(a) * g.kbracket
    c[g.nyquist_mask] = 0.0
    return _lp(g, _fft.ifft2(c), p)


# --------------------------------------------------------------------------
# accumulation over one time direction


@dataclass
class ErrorBudget:
    """Spacetime norms of residuals, corrections and discrepancies over ``|t| <= T lam^2``.

    ``e1`` is in ``L^1_t H^{1/2}``; ``e2``, ``e3``, ``e4`` are ``<nabla> e``
    in ``L^{4/3}_{t,x}``. Corrections carry both ``L^inf_t H^{1/2}`` and
    ``L^4_{t,x}`` norms. Discrepancies against a true solution are filled
    only when one is supplied.
    """

    lam: float
    T: float
    e1: float = 0.0
    e2: float = 0.0
    e3: float = 0.0
    e4: float = 0.0
    f3_h12: float = 0.0
    f4_h12: float = 0.0
    f3_l4: float = 0.0
    f4_l4: float = 0.0
    lift_l4: float = 0.0
    disc_l4: float = float("nan")
    disc_l4_uncorrected: float = float("nan")
    disc_h12: float = float("nan")
    disc_h12_uncorrected: float = float("nan")
    true_scattering_size: float = float("nan")

    @property
    def f3(self) -> float:
        """``||f3||_{L^inf H^{1/2}} + ||f3||_{L^4}``."""
        return self.f3_h12 + self.f3_l4

    @property
    def f4(self) -> float:
        return self.f4_h12 + self.f4_l4

    def as_dict(self) -> dict:
        return {**self.__dict__, "f3": self.f3, "f4": self.f4}


class _Sums:
    """Trapezoid sums over one direction; combined at the end."""

    keys = ("e1", "e2", "e3", "e4", "f3_l4", "f4_l4", "lift_l4", "disc", "disc_u", "S")

    def __init__(self, dt: float):
        self.dt = abs(dt)
        self.acc = {k: 0.0 for k in self.keys}
        self.last = None
        self.sup = {"f3": 0.0, "f4": 0.0, "disc": 0.0, "disc_u": 0.0}

    def add(self, vals: dict, sups: dict) -> None:
        if self.last is not None:
            for k in self.keys:
                if k in vals:
                    self.acc[k] += 0.5 * self.dt * (vals[k] + self.last[k])
        self.last = vals
        for k, v in sups.items():
            self.sup[k] = max(self.sup[k], v)


class _Corrections:
    """Duhamel integration of ``(-i d_t + <nabla>) f = e`` with exponential midpoint.

    Over one step the envelope of each harmonic is frozen at the midpoint and
    the carrier ``exp(i c s)`` is integrated exactly against the propagator.
    """

    def __init__(self, fast: Grid2D, dt: float):
        self.g = fast
        self.dt = dt
        w = fast.kbracket
        self.prop = np.exp(-1j * dt * w)
        self.prop[fast.nyquist_mask] = 0.0

        def kern(c):
            a = 0.5 * dt * (w + c)
            return dt * np.exp(-1j * a) * np.sinc(a / np.pi)

        self.k3m, self.k3p, self.k4 = kern(-3.0), kern(3.0), kern(1.0)
        self.f3 = np.zeros((fast.n, fast.n), dtype=np.complex128)
        self.f4 = np.zeros_like(self.f3)

    def step(self, t: float, mid: tuple[np.ndarray, np.ndarray, np.ndarray]) -> None:
        """Advance from ``t`` to ``t + dt`` given midpoint envelopes (g3m, g3p, g4)."""
        g3m, g3p, g4 = (_fft.fft2(a) for a in mid)
        t1 = t + self.dt
        self.f3 = self.prop * self.f3 + 1j * (
            np.exp(-3j * t1) * self.k3m * g3m + np.exp(3j * t1) * self.k3p * g3p
        )
        self.f4 = self.prop * self.f4 + 1j * np.exp(1j * t1) * self.k4 * g4

    def fields(self) -> tuple[np.ndarray, np.ndarray]:
        return _fft.ifft2(self.f3), _fft.ifft2(self.f4)


def _sample(sums: _Sums, sym: _Symbols, w: np.ndarray, t: float, mu: int,
            corr: _Corrections, v_true: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    fg = sym.fast
    ef = error_fields(w, t, sym, mu)
    f3, f4 = corr.fields()
    lift = np.exp(-1j * t) * w / sym.lam
    vals = {
        "e1": _h12(fg, ef.e1),
        "e2": _lp(fg, ef.grad_e2, 4.0 / 3.0),
        "e3": _grad_lp(fg, ef.e3, 4.0 / 3.0),
        "e4": _grad_lp(fg, ef.e4, 4.0 / 3.0),
        "f3_l4": _lp(fg, f3, 4),
        "f4_l4": _lp(fg, f4, 4),
        "lift_l4": _lp(fg, lift, 4),
    }
    sups = {"f3": _h12(fg, f3), "f4": _h12(fg, f4)}
    if v_true is not None:
        corrected = lift - f3 - f4
        vals["disc"] = _lp(fg, v_true - corrected, 4)
        vals["disc_u"] = _lp(fg, v_true - lift, 4)
        vals["S"] = _lp(fg, v_true.real, 4)
        sups["disc"] = _h12(fg, v_true - corrected)
        sups["disc_u"] = _h12(fg, v_true - lift)
    sums.add(vals, sups)
    return lift, lift - f3 - f4


def _finish(lam: float, T: float, parts: list[_Sums], with_true: bool) -> ErrorBudget:
    tot = {k: sum(p.acc[k] for p in parts) for k in _Sums.keys}
    sup = {k: max(p.sup[k] for p in parts) for k in parts[0].sup}
    b = ErrorBudget(
        lam=lam,
        T=T,
        e1=tot["e1"],
        e2=tot["e2"] ** 0.75,
        e3=tot["e3"] ** 0.75,
        e4=tot["e4"] ** 0.75,
        f3_h12=sup["f3"],
        f4_h12=sup["f4"],
        f3_l4=tot["f3_l4"] ** 0.25,
        f4_l4=tot["f4_l4"] ** 0.25,
        lift_l4=tot["lift_l4"] ** 0.25,
    )
    if with_true:
        b.disc_l4 = tot["disc"] ** 0.25
        b.disc_l4_uncorrected = tot["disc_u"] ** 0.25
        b.disc_h12 = sup["disc"]
        b.disc_h12_uncorrected = sup["disc_u"]
        b.true_scattering_size = tot["S"]
    return b


# --------------------------------------------------------------------------
# streaming run


def _true_v(st: _Stepper) -> np.ndarray:
    """Complex first-order field ``u + i <nabla>^{-1} u_t`` of a KG stepper."""
    h = st.h
    return st.u + 1j * _fft.irfft2(st.vh / h.omega, st.g.n)


def run_direction(w0: Field, lam: float, T: float, dt: float, mu: int, with_true: bool = True):
    """Stream one time direction (sign of ``dt``) of the bridge comparison.

    The NLS runs on the slow grid with half steps ``dt/(2 lam^2)`` so that
    every KG step has its Duhamel midpoint available.
    """
    slow = w0.grid
    sym = _Symbols(slow, lam)
    fast = sym.fast
    steps = int(round(T * lam * lam / abs(dt)))
    ns = _NLSStepper(NLSState(w0, 0.0, mu), 0.5 * dt / lam**2)
    corr = _Corrections(fast, dt)
    kg = None
    if with_true:
        v0 = Field(fast, w0.data / lam)
        kg = _Stepper(from_first_order(v0, 0.0, mu), dt)
    sums = _Sums(dt)
    t = 0.0
    _sample(sums, sym, ns.w, t, mu, corr, _true_v(kg) if kg else None)
    for _ in range(steps):
        ns.step()
        tm = t + 0.5 * dt
        corr.step(t, _harmonics(ns.w / lam, tm, mu))
        ns.step()
        if kg is not None:
            kg.step()
        t += dt
        _sample(sums, sym, ns.w, t, mu, corr, _true_v(kg) if kg else None)
    return sums


def bridge_budget(w0: Field, lam: float, T: float, dt: float, mu: int = 1, with_true: bool = True) -> ErrorBudget:
    """Error budget over ``[-T lam^2, T lam^2]`` from slow initial data ``w0``."""
    parts = [run_direction(w0, lam, T, s * dt, mu, with_true) for s in (1.0, -1.0)]
    return _finish(lam, T, parts, with_true)


# --------------------------------------------------------------------------
# stored-trajectory interfaces


@dataclass(eq=False)
class LiftedTrajectory:
    """``v~`` at stored fast times, with free-flow extension outside the window."""

    lam: float
    T: float
    grid: Grid2D
    times: np.ndarray
    fields: list
    mu: int

    def at(self, t: float) -> Field:
        edge = self.T * self.lam**2
        if abs(t) <= edge * (1 + 1e-12):
            i = int(np.argmin(np.abs(self.times - t)))
            if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
                raise ValueError(f"no stored sample at t={t}")
            return self.fields[i]
        base = self.at(math.copysign(edge, t))
        return free_propagate_kg(t - math.copysign(edge, t), base)

    def kg_state(self, t: float) -> KGState:
        return from_first_order(self.at(t), t, self.mu)


def _check_window(w_traj: NLSTrajectory, T: float) -> np.ndarray:
    s = w_traj.state_times
    tol = 1e-9 * max(1.0, T)
    if s.min() > -T + tol or s.max() < T - tol:
        raise ValueError(f"trajectory covers [{s.min():g}, {s.max():g}], need [-{T:g}, {T:g}]")
    return s


def lift_nls(w_traj: NLSTrajectory, lam: float, T: float) -> LiftedTrajectory:
    """``v~(t) = exp(-it) D_lam w(t/lam^2)`` at every stored state with ``|s| <= T``."""
    s = _check_window(w_traj, T)
    keep = np.abs(s) <= T * (1 + 1e-12)
    order = np.argsort(s[keep])
    states = [st for st, k in zip(w_traj.states, keep) if k]
    states = [states[i] for i in order]
    g = fast_grid(w_traj.grid, lam)
    times = np.array([lam**2 * st.t for st in states])
    fields = [Field(g, np.exp(-1j * t) * st.w.data / lam) for t, st in zip(times, states)]
    return LiftedTrajectory(lam, T, g, times, fields, w_traj.mu)


def _split_dirs(w_traj: NLSTrajectory, T: float):
    _check_window(w_traj, T)
    fwd = sorted([st for st in w_traj.states if 0 <= st.t <= T * (1 + 1e-12)], key=lambda q: q.t)
    bwd = sorted([st for st in w_traj.states if -T * (1 + 1e-12) <= st.t <= 0], key=lambda q: -q.t)
    return fwd, bwd


def error_terms(w_traj: NLSTrajectory, lam: float, T: float) -> ErrorBudget:
    """Residual norms by trapezoid quadrature over the stored states.

    The trajectory must hold states on both sides of ``s = 0`` at uniform
    spacing (for instance two runs merged with :func:`merge_directions`).
    Corrections use consecutive triples of states: the middle one is the
    Duhamel midpoint, so the KG step is twice the stored spacing.
    """
    return _stored_budget(w_traj, lam, T)


def forced_corrections(w_traj: NLSTrajectory, lam: float, T: float):
    """Corrections ``f3, f4`` at every other stored fast time, plus their norms.

    Returns ``(times, f3_fields, f4_fields, budget)``.
    """
    return _stored_budget(w_traj, lam, T, keep_fields=True)


def _stored_budget(w_traj: NLSTrajectory, lam: float, T: float, keep_fields: bool = False):
    fwd, bwd = _split_dirs(w_traj, T)
    sym = _Symbols(w_traj.grid, lam)
    mu = w_traj.mu
    parts = []
    times, f3s, f4s = [], [], []
    for seq in (fwd, bwd):
        if len(seq) < 3:
            raise ValueError("need at least three stored states per direction")
        ds = seq[1].t - seq[0].t
        dt = 2.0 * ds * lam**2
        corr = _Corrections(sym.fast, dt)
        sums = _Sums(dt)
        for j in range(0, len(seq), 2):
            t = lam**2 * seq[j].t
            _sample(sums, sym, seq[j].w.data, t, mu, corr, None)
            if keep_fields and not (seq is bwd and j == 0):  # t = 0 is shared by both directions
                a, b = corr.fields()
                times.append(t)
                f3s.append(Field(sym.fast, a))
                f4s.append(Field(sym.fast, b))
            if j + 2 < len(seq):
                corr.step(t, _harmonics(seq[j + 1].w.data / lam, t + 0.5 * dt, mu))
        parts.append(sums)
    budget = _finish(lam, T, parts, False)
    if keep_fields:
        order = np.argsort(times)
        return (np.asarray(times)[order], [f3s[i] for i in order], [f4s[i] for i in order], budget)
    return budget


def corrected_lift(w_traj: NLSTrajectory, lam: float, T: float) -> LiftedTrajectory:
    """``v~ - f3 - f4`` at the correction sample times, free flow outside the window."""
    times, f3s, f4s, _ = forced_corrections(w_traj, lam, T)
    base = lift_nls(w_traj, lam, T)
    fields = []
    for t, a, b in zip(times, f3s, f4s):
        v = base.at(t)
        fields.append(Field(base.grid, v.data - a.data - b.data))
    return LiftedTrajectory(lam, T, base.grid, np.asarray(times), fields, w_traj.mu)


def merge_directions(fwd: NLSTrajectory, bwd: NLSTrajectory) -> NLSTrajectory:
    """Join a forward and a backward run from the same data into one trajectory."""
    out = NLSTrajectory(fwd.grid, fwd.mu, fwd.dt, fwd.store_every)
    pairs = sorted(list(zip(bwd.t, bwd.mass, bwd.energy, bwd.sup, bwd.l4_4))[1:] +
                   list(zip(fwd.t, fwd.mass, fwd.energy, fwd.sup, fwd.l4_4)))
    for t, m, e, s, q in pairs:
        out.t.append(t)
        out.mass.append(m)
        out.energy.append(e)
        out.sup.append(s)
        out.l4_4.append(q)
    out.states = sorted(bwd.states[1:] + fwd.states, key=lambda q: q.t)
    out.status = fwd.status if fwd.status != COMPLETED else bwd.status
    return out


# --------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class ResolutionPlan:
    """Slow box, shared grid size and fast time step for a sweep."""

    n: int = 64
    L_slow: float = 48.0
    dt: float = 0.02
    max_fast_time: float = 1e4
    max_n: int = 512


@dataclass
class SweepReport:
    lams: list
    budgets: list
    skipped: list = field(default_factory=list)

    def slope(self, key: str) -> float:
        lam = np.log(np.asarray(self.lams, dtype=float))
        y = np.log(np.asarray([getattr(b, key) for b in self.budgets], dtype=float))
        return float(np.polyfit(lam, y, 1)[0])

    def strictly_decreasing(self, key: str = "disc_l4") -> bool:
        v = [getattr(b, key) for b in self.budgets]
        return all(b < a for a, b in zip(v, v[1:]))

    def as_dict(self) -> dict:
        return {
            "lams": list(self.lams),
            "budgets": [b.as_dict() for b in self.budgets],
            "skipped": list(self.skipped),
            "slopes": {k: self.slope(k) for k in ("e1", "e2", "f3", "f4", "disc_l4")}
            if len(self.lams) >= 2 else {},
            "disc_decreasing": self.strictly_decreasing() if len(self.lams) >= 2 else None,
        }


def convergence_sweep(phi: Field, lams, T: float, plan: ResolutionPlan = ResolutionPlan(),
                      mu: int = 1, theta: float = THETA, reference_mass: float | None = None) -> SweepReport:
    """Compare true KG runs against corrected lifts for each scale in ``lams``.

    ``phi`` lives on the slow grid. Each run projects it to ``|xi| <~ lam^theta``,
    dilates by relabelling onto the fast grid, and measures the budget over
    ``|t| <= T lam^2``. Scales whose fast horizon exceeds the plan's budget are
    skipped and listed. In the focusing case ``reference_mass`` (the
    ground-state mass) must be given and ``M(phi) < 4/3`` of it.
    """
    from .nls import nls_mass

    if mu == -1:
        if reference_mass is None:
            raise ValueError("focusing sweeps need the ground-state mass for the mass check")
        if nls_mass(phi) >= (4.0 / 3.0) * reference_mass:
            raise ValueError("focusing sweep requires M(phi) < (4/3) M(Q)")
    rep = SweepReport([], [])
    for lam in lams:
        if T * lam * lam > plan.max_fast_time or phi.grid.n > plan.max_n:
            rep.skipped.append(lam)
            continue
        w0 = low_pass(lam**theta, phi)
        rep.lams.append(lam)
        rep.budgets.append(bridge_budget(w0, lam, T, plan.dt, mu, with_true=True))
    return rep
