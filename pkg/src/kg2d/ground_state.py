"""Radial ground state of ``Delta Q + Q^3 = Q`` and the sharp Gagliardo-Nirenberg ratio.

The profile comes from bisection shooting on ``b = Q(0)``. Too large a ``b``
makes the trajectory cross zero; too small a ``b`` makes it turn back up
before reaching zero. Near the separatrix the two bracketing trajectories
agree up to a radius where exponential instability takes over. Past that
radius the profile continues as ``A K_0(r)``, the decaying solution of the
linearized equation, with ``A`` fixed by continuity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline

from . import _fft
from .errors import GridError
from .grid import Field, Grid2D, lp_norm

R0 = 1e-4  # start radius for the series expansion at the origin
H = 0.005  # spacing of the stored radial samples
SHOOT_RMAX = 40.0
MAX_STEP = 0.01  # keeps dense-output error near 1e-11 for the stored samples
SPLIT_TOL = 1e-11  # bracketing trajectories agree to this before splicing
TAIL_FLOOR = 1e-11  # stored samples extend until the tail falls below this


class ShootingError(RuntimeError):
    """The initial interval does not bracket the ground state."""


def _rhs(r, y):
    q, dq = y[0], y[1]
    two_pi_r = 2.0 * np.pi * r
    return [dq, -dq / r + q - q**3, two_pi_r * q * q, two_pi_r * dq * dq, two_pi_r * q**4]


def _hit_zero(r, y):
    return y[0]


_hit_zero.terminal = True


def _turn_up(r, y):
    return y[1]


_turn_up.terminal = True
_turn_up.direction = 1


def _shoot(b: float, rtol: float, dense: bool = False):
    c = b - b**3
    y0 = [
        b + c * R0**2 / 4.0,
        c * R0 / 2.0,
        np.pi * R0**2 * b**2,
        0.0,
        np.pi * R0**2 * b**4,
    ]
    return integrate.solve_ivp(
        _rhs,
        (R0, SHOOT_RMAX),
        y0,
        method="DOP853",
        rtol=rtol,
        atol=1e-16,
        events=(_hit_zero, _turn_up),
        dense_output=dense,
        max_step=MAX_STEP if dense else np.inf,
    )


def _classify(sol) -> int:
    """+1 if b is too large (sign crossing), -1 if too small (turns up)."""
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def _fd6_derivative(v: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order central difference on interior points (3 dropped at each end)."""
    c = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
    out = np.zeros(v.size - 6)
    for i, w in enumerate(c):
        if w:
            out += w * v[i : i + out.size]
    return out / h


@dataclass(frozen=True, eq=False)
class GroundStateProfile:
    """Samples of the ground state with derived constants.

    ``r``, ``Q``, ``dQ`` are stored on a uniform grid up to ``r_max``. For
    ``r > r_splice`` the profile is ``tail_amp * K_0(r)``. Evaluation between
    samples uses cubic Hermite interpolation of ``(Q, Q')``.
    """

    b: float
    r: np.ndarray
    Q: np.ndarray
    dQ: np.ndarray
    r_splice: float
    tail_amp: float
    mass: float
    grad_sq: float
    quartic: float
    residual: float = float("nan")
    _spline: CubicHermiteSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("r", "Q", "dQ"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        inner = self.r <= self.r_splice
        sp = CubicHermiteSpline(self.r[inner], self.Q[inner], self.dQ[inner])
        object.__setattr__(self, "_spline", sp)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def energy(self) -> float:
        """Focusing energy ``1/2 |grad Q|^2 + 1/2 Q^2 - 1/4 Q^4`` integrated."""
        return 0.5 * self.grad_sq + 0.5 * self.mass - 0.25 * self.quartic

    @property
    def gn_constant(self) -> float:
        return 2.0 / self.mass

    @property
    def pohozaev_error(self) -> float:
        return abs(self.energy - 0.5 * self.mass) / self.mass

    def __call__(self, rr) -> np.ndarray:
        """Q at radii ``rr`` (any shape, r >= 0)."""
        rr = np.abs(np.asarray(rr, dtype=float))
        out = np.empty_like(rr)
        near = rr < self.r[0]
        mid = (rr >= self.r[0]) & (rr <= self.r_splice)
        far = rr > self.r_splice
        c = self.b - self.b**3
        out[near] = self.b + c * rr[near] ** 2 / 4.0
        out[mid] = self._spline(rr[mid])
        out[far] = self.tail_amp * special.k0(rr[far])
        return out

    def derivative(self, rr) -> np.ndarray:
        rr = np.abs(np.asarray(rr, dtype=float))
        out = np.empty_like(rr)
        near = rr < self.r[0]
        mid = (rr >= self.r[0]) & (rr <= self.r_splice)
        far = rr > self.r_splice
        out[near] = (self.b - self.b**3) * rr[near] / 2.0
        out[mid] = self._spline(rr[mid], 1)
        out[far] = -self.tail_amp * special.k1(rr[far])
        return out

    def radius_below(self, level: float) -> float:
        """Smallest sampled radius past which Q stays below ``level``."""
        above = np.nonzero(self.Q >= level)[0]
        if above.size == 0:
            return 0.0
        i = min(above[-1] + 1, self.r.size - 1)
        return float(self.r[i])

    @property
    def decay_radius(self) -> float:
        """Radius where Q has dropped to a tenth of its peak."""
        return self.radius_below(0.1 * self.b)

    # ---- persistence

    def save(self, stem: str | Path) -> tuple[Path, Path]:
        """Write ``<stem>.csv`` with columns r,Q,dQ and ``<stem>.json`` with constants."""
        stem = Path(stem)
        csv = stem.with_suffix(".csv")
        meta = stem.with_suffix(".json")
        np.savetxt(csv, np.column_stack([self.r, self.Q, self.dQ]), delimiter=",",
                   header="r,Q,dQ", comments="", fmt="%.17g")
        meta.write_text(json.dumps(self.constants(), indent=2))
        return csv, meta

    def constants(self) -> dict:
        return {
            "b": self.b,
            "mass": self.mass,
            "energy": self.energy,
            "grad_sq": self.grad_sq,
            "quartic": self.quartic,
            "gn_constant": self.gn_constant,
            "pohozaev_error": self.pohozaev_error,
            "residual": self.residual,
            "r_splice": self.r_splice,
            "tail_amp": self.tail_amp,
            "r_max": self.r_max,
        }

    @classmethod
    def load(cls, stem: str | Path) -> "GroundStateProfile":
        stem = Path(stem)
        data = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1)
        c = json.loads(stem.with_suffix(".json").read_text())
        return cls(c["b"], data[:, 0], data[:, 1], data[:, 2], c["r_splice"], c["tail_amp"],
                   c["mass"], c["grad_sq"], c["quartic"], c["residual"])


def ode_residual(profile: GroundStateProfile) -> float:
    """Sup of ``Q'' + Q'/r - Q + Q^3`` over interior samples.

    ``Q''`` comes from a sixth-order difference of the stored ``Q'``, taken
    separately on the shooting segment and on the tail segment so no stencil
    straddles the splice.
    """
    r, q, dq = profile.r, profile.Q, profile.dQ
    worst = 0.0
    inner = r <= profile.r_splice
    for seg in (inner, ~inner):
        idx = np.nonzero(seg)[0]
        if idx.size < 8:
            continue
        rs, qs, ds = r[idx], q[idx], dq[idx]
        d2 = _fd6_derivative(ds, H)
        sl = slice(3, idx.size - 3)
        res = d2 + ds[sl] / rs[sl] - qs[sl] + qs[sl] ** 3
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def solve_ground_state(tol: float = 1e-10, bracket: tuple[float, float] = (2.0, 2.4)) -> GroundStateProfile:
    """Ground state by bisection shooting; raises ShootingError on a bad bracket.

    ``tol`` bounds the ODE residual of the returned samples, and must lie in
    ``[1e-12, 1e-6]``. The bisection runs to floating point resolution, so
    the result is deterministic and insensitive to ``tol`` beyond the check.
    """
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-12, 1e-6], got {tol}")
    rtol = 1e-13
    lo, hi = map(float, bracket)
    s_lo, s_hi = _shoot(lo, rtol), _shoot(hi, rtol)
    if _classify(s_lo) != -1 or _classify(s_hi) != 1:
        raise ShootingError(
            f"interval [{lo}, {hi}] does not bracket the ground state "
            f"(classes {_classify(s_lo)}, {_classify(s_hi)}; expected -1, +1)"
        )
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = _shoot(mid, rtol)
        cls = _classify(s)
        if cls == 1:
            hi, s_hi = mid, s
        elif cls == -1:
            lo, s_lo = mid, s
        else:  # never left the window: as good as it gets
            lo = hi = mid
            s_lo = s_hi = s
            break

    # splice where the bracketing trajectories separate
    s_lo, s_hi = _shoot(lo, rtol, dense=True), _shoot(hi, rtol, dense=True)
    r_end = min(s_lo.t[-1], s_hi.t[-1])
    rr = np.arange(R0, r_end, H)
    y_lo = s_lo.sol(rr)
    y_hi = s_hi.sol(rr)
    y = 0.5 * (y_lo + y_hi)
    gap = np.abs(y_hi[0] - y_lo[0])
    bad = np.nonzero((gap > SPLIT_TOL) | (y[0] <= 0) | (y[1] >= 0))[0]
    k = (bad[0] if bad.size else rr.size) - 8
    if k < 100:
        raise ShootingError("bracketing trajectories separate too early")
    r_s = float(rr[k])
    A = float(y[0, k] / special.k0(r_s))

    # tail samples continue on the same spacing
    r_tail = r_s + H * np.arange(1, 1 + int(np.ceil(20.0 / H)))
    q_tail = A * special.k0(r_tail)
    stop = np.nonzero(q_tail < TAIL_FLOOR)[0]
    n_tail = (stop[0] + 1) if stop.size else r_tail.size
    r_tail, q_tail = r_tail[:n_tail], q_tail[:n_tail]
    dq_tail = -A * special.k1(r_tail)

    def tail_int(fn):
        return integrate.quad(fn, r_s, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)[0]

    two_pi = 2.0 * np.pi
    mass = y[2, k] + tail_int(lambda t: two_pi * t * (A * special.k0(t)) ** 2)
    grad = y[3, k] + tail_int(lambda t: two_pi * t * (A * special.k1(t)) ** 2)
    quart = y[4, k] + tail_int(lambda t: two_pi * t * (A * special.k0(t)) ** 4)

    prof = GroundStateProfile(
        b=0.5 * (lo + hi),
        r=np.concatenate([rr[: k + 1], r_tail]),
        Q=np.concatenate([y[0, : k + 1], q_tail]),
        dQ=np.concatenate([y[1, : k + 1], dq_tail]),
        r_splice=r_s,
        tail_amp=A,
        mass=float(mass),
        grad_sq=float(grad),
        quartic=float(quart),
    )
    res = ode_residual(prof)
    object.__setattr__(prof, "residual", res)
    if res > tol:
        raise ShootingError(f"ODE residual {res:.2e} exceeds requested tol {tol:.2e}")
    return prof


_CACHE: dict[float, GroundStateProfile] = {}


def ground_state(tol: float = 1e-10) -> GroundStateProfile:
    """Memoized :func:`solve_ground_state`."""
    if tol not in _CACHE:
        _CACHE[tol] = solve_ground_state(tol)
    return _CACHE[tol]


def sample_on_grid(profile: GroundStateProfile, grid: Grid2D, center=(0.0, 0.0), scale: float = 1.0) -> Field:
    """``scale * Q(|x - center|)`` on the grid.

    The box must contain the disc of radius ``4 * decay_radius`` around the
    centre, otherwise :class:`GridError` is raised.
    """
    c = np.asarray(center, dtype=float).reshape(2)
    room = 0.5 * grid.L - float(np.max(np.abs(c)))
    need = 4.0 * profile.decay_radius
    if room < need:
        raise GridError(
            f"box overflow: ground state needs {need:.2f} from centre to edge, box allows {room:.2f}"
        )
    X, Y = grid.mesh
    return Field(grid, scale * profile(np.hypot(X - c[0], Y - c[1])))


def gn_ratio(f: Field | np.ndarray, grid: Grid2D | None = None) -> float:
    """``||f||_4^4 / (||f||_2^2 ||grad f||_2^2)``, the Gagliardo-Nirenberg quotient."""
    if isinstance(f, Field):
        grid, a = f.grid, f.data
    else:
        a = np.asarray(f)
        if grid is None:
            raise GridError("a grid is required for raw arrays")
    if not np.any(a):
        raise ValueError("the Gagliardo-Nirenberg ratio is undefined for the zero field")
    c = _fft.fft2(a)
    grad_sq = grid.L**2 * float(np.sum(grid.ksq * np.abs(c) ** 2))
    l4 = lp_norm(a, 4, grid) ** 4
    l2 = lp_norm(a, 2, grid) ** 2
    return l4 / (l2 * grad_sq)
