"""Fourier multipliers, frequency projections, translations, boosts and dilations.

All operators act on :class:`~kg2d.grid.Field` values and return new fields.
Multipliers act on the lattice coefficients. The unpaired Nyquist row and
column are zeroed on output, which keeps real fields real under symbols with
``m(-xi) = conj(m(xi))``.

Boosts and dilations are referred to the box centre. They need the spectrum
at frequencies off the lattice, which comes from the semidiscrete transform
``c(xi) = n**-2 * sum_j f(x_j) exp(-i xi.x_j)``. This agrees with the
continuum transform up to aliasing error once the field is resolved and
localized inside the box.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import _fft, kernels
from .errors import GridError, ResolutionWarning
from .grid import Field, Grid2D

# Above this size a general (non axis-aligned) boost uses spline interpolation
# of the spectrum instead of the quartic-cost exact evaluation.
EXACT_BOOST_MAX_N = 128

# Relative loss of H^{1/2} norm in a boost above which a warning is issued.
BOOST_LOSS_WARN = 1e-6


# --------------------------------------------------------------------------
# scalar helpers


def jp(v: np.ndarray | float) -> np.ndarray:
    """Japanese bracket ``sqrt(1 + |v|^2)`` over the last axis for vectors."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return np.sqrt(1.0 + v * v)
    return np.sqrt(1.0 + np.sum(v * v, axis=-1))


def smoothstep(x: np.ndarray) -> np.ndarray:
    """C^2 quintic step: 0 for x <= 0, 1 for x >= 1, with S(x) + S(1-x) = 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def bump(r: np.ndarray) -> np.ndarray:
    """Radial cutoff equal to 1 for r <= 1 and 0 for r >= 99/98."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - 1.0) * 98.0)


def angular_bump(theta: np.ndarray) -> np.ndarray:
    """Angular partition function: 1 on |θ| <= 0.4, 0 outside |θ| < 0.6.

    Integer translates sum to one because the smoothstep is antisymmetric
    about 1/2.
    """
    a = np.abs(np.asarray(theta, dtype=float))
    return 1.0 - smoothstep((a - 0.4) / 0.2)


def _check_dyadic(N: int) -> int:
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1 or (N & (N - 1)):
        raise ValueError(f"dyadic level must be a power of two >= 1, got {N!r}")
    return int(N)


def lp_symbol(N: int, xi_abs: np.ndarray) -> np.ndarray:
    """Littlewood-Paley symbol: ``phi(xi)`` for N=1, else ``phi(xi/N) - phi(2 xi/N)``."""
    N = _check_dyadic(N)
    xi_abs = np.asarray(xi_abs, dtype=float)
    if N == 1:
        return bump(xi_abs)
    return bump(xi_abs / N) - bump(2.0 * xi_abs / N)


def dyadic_levels(grid: Grid2D) -> list[int]:
    """Dyadic levels whose symbols sum to one on every lattice frequency."""
    top = float(np.sqrt(np.max(grid.ksq)))
    levels = [1]
    while levels[-1] < top:
        levels.append(2 * levels[-1])
    return levels


@dataclass(frozen=True)
class TubeIndex:
    """Angular sector ``k`` of the dyadic annulus ``N``.

    Level 1 has the single index k=0. Level N >= 2 has 20N sectors.
    """

    N: int
    k: int

    def __post_init__(self):
        _check_dyadic(self.N)
        if not 0 <= self.k < self.count(self.N):
            raise ValueError(f"k={self.k} out of range for N={self.N}")

    @staticmethod
    def count(N: int) -> int:
        N = _check_dyadic(N)
        return 1 if N == 1 else 20 * N

    @property
    def center(self) -> np.ndarray:
        if self.N == 1:
            return np.zeros(2)
        ang = 2.0 * np.pi * self.k / self.count(self.N)
        return 0.75 * self.N * np.array([np.cos(ang), np.sin(ang)])

    @classmethod
    def all(cls, N: int) -> list["TubeIndex"]:
        return [cls(N, k) for k in range(cls.count(N))]


def tube_symbol(index: TubeIndex, KX: np.ndarray, KY: np.ndarray) -> np.ndarray:
    """Symbol of the sector projection at the frequencies ``(KX, KY)``."""
    rad = np.hypot(KX, KY)
    base = lp_symbol(index.N, rad)
    if index.N == 1:
        return base
    m = index.count(index.N)
    a = (np.arctan2(KY, KX) % (2.0 * np.pi)) * (m / (2.0 * np.pi)) - index.k
    a = (a + 0.5 * m) % m - 0.5 * m  # periodic distance to sector k
    return angular_bump(a) * base


# --------------------------------------------------------------------------
# multipliers


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier multiplier given by ``func(KX, KY)`` on the lattice.

    ``hermitian`` marks symbols with ``m(-xi) = conj(m(xi))``; for those a
    real input gives a real output.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "multiplier"
    hermitian: bool = False

    def on(self, grid: Grid2D) -> np.ndarray:
        KX, KY = grid.kmesh
        return np.broadcast_to(self.func(KX, KY), KX.shape)


def apply_symbol_array(grid: Grid2D, sym: np.ndarray, a: np.ndarray, real_out: bool) -> np.ndarray:
    c = _fft.fft2(a) * sym
    c[grid.nyquist_mask] = 0.0
    out = _fft.ifft2(c)
    return out.real if real_out else out


def apply_multiplier(symbol: MultiplierSymbol, f: Field) -> Field:
    real_out = f.is_real and symbol.hermitian
    return Field(f.grid, apply_symbol_array(f.grid, symbol.on(f.grid), f.data, real_out))


def bessel_symbol(s: float) -> MultiplierSymbol:
    """``<nabla>^s``."""
    return MultiplierSymbol(lambda kx, ky: (1.0 + kx * kx + ky * ky) ** (0.5 * s), f"<D>^{s}", True)


def bessel(s: float, f: Field) -> Field:
    return apply_multiplier(bessel_symbol(s), f)


def littlewood_paley(N: int, f: Field) -> Field:
    N = _check_dyadic(N)
    sym = MultiplierSymbol(lambda kx, ky: lp_symbol(N, np.hypot(kx, ky)), f"P_{N}", True)
    return apply_multiplier(sym, f)


def low_pass(N: float, f: Field) -> Field:
    """Smooth projection to ``|xi| <~ N`` with symbol ``phi(xi/N)``."""
    sym = MultiplierSymbol(lambda kx, ky: bump(np.hypot(kx, ky) / N), f"P_<={N}", True)
    return apply_multiplier(sym, f)


def tube_projection(index: TubeIndex, f: Field) -> Field:
    # sector symbols are not even in xi, so real input gives complex output
    sym = MultiplierSymbol(lambda kx, ky: tube_symbol(index, kx, ky), f"T_{index.N},{index.k}")
    return apply_multiplier(sym, f)


def translate(y, f: Field) -> Field:
    """``(T_y f)(x) = f(x - y)`` by band-limited interpolation."""
    y1, y2 = (float(v) for v in np.asarray(y, dtype=float).reshape(2))
    sym = MultiplierSymbol(lambda kx, ky: np.exp(-1j * (kx * y1 + ky * y2)), "T_y", True)
    return apply_multiplier(sym, f)


def free_propagate_kg(t: float, f: Field) -> Field:
    """Half-wave propagator ``exp(-i t <nabla>)``."""
    sym = MultiplierSymbol(lambda kx, ky: np.exp(-1j * t * np.sqrt(1.0 + kx * kx + ky * ky)), "KG")
    return apply_multiplier(sym, f)


def free_propagate_schrodinger(t: float, f: Field) -> Field:
    """Free Schrodinger propagator ``exp(i t Delta / 2)``."""
    sym = MultiplierSymbol(lambda kx, ky: np.exp(-0.5j * t * (kx * kx + ky * ky)), "S")
    return apply_multiplier(sym, f)


# --------------------------------------------------------------------------
# Lorentz geometry


def _split(nu: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Components of ``v`` (..., 2) parallel and perpendicular to ``nu``."""
    s = float(np.hypot(*nu))
    if s == 0.0:
        return np.zeros_like(v), v
    e = nu / s
    par = (v @ e)[..., None] * e
    return par, v - par


def lorentz_map(nu, xi) -> np.ndarray:
    """Frequency map ``xi^perp + <nu> xi^par - nu <xi>`` over the last axis."""
    nu = np.asarray(nu, dtype=float).reshape(2)
    xi = np.asarray(xi, dtype=float)
    par, perp = _split(nu, xi)
    return perp + jp(nu) * par - nu * jp(xi)[..., None]


def lorentz_matrix(nu) -> np.ndarray:
    """3x3 matrix of ``(t, x) -> (<nu> t - nu.x, x^perp + <nu> x^par - nu t)``."""
    nu = np.asarray(nu, dtype=float).reshape(2)
    g = float(jp(nu))
    s = float(np.hypot(*nu))
    M = np.eye(3)
    M[0, 0] = g
    M[0, 1:] = -nu
    M[1:, 0] = -nu
    if s > 0:
        e = nu / s
        M[1:, 1:] = np.eye(2) + (g - 1.0) * np.outer(e, e)
    return M


def lorentz_apply(nu, t, x) -> tuple[np.ndarray, np.ndarray]:
    """Apply the spacetime boost to arrays ``t`` (...) and ``x`` (..., 2)."""
    M = lorentz_matrix(nu)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tt = M[0, 0] * t + x @ M[0, 1:]
    xx = t[..., None] * M[1:, 0] + x @ M[1:, 1:].T
    return tt, xx


def boost_jacobian_weight(nu, xi_tilde, direction: str = "inverse") -> tuple[np.ndarray, np.ndarray]:
    """Source frequency and amplitude weight for a data boost.

    Returns ``(xi, w)`` with ``c_out(xi_tilde) = w * c_in(xi)``; in the
    inverse direction ``xi = ell_{-nu}(xi_tilde)`` and ``w = <xi>/<xi_tilde>``.
    """
    nu = np.asarray(nu, dtype=float).reshape(2)
    src = lorentz_map(-nu if direction == "inverse" else nu, xi_tilde)
    return src, jp(src) / jp(xi_tilde)


def boost_multiplier_ms(nu, s: float, xi) -> np.ndarray:
    """Weight ``(<ell_nu(xi)>/<xi>)^(2s-1)`` relating H^s pairings across a boost."""
    xi = np.asarray(xi, dtype=float)
    return (jp(lorentz_map(nu, xi)) / jp(xi)) ** (2.0 * s - 1.0)


# --------------------------------------------------------------------------
# off-lattice spectra


def _centered_spectrum(f: Field) -> np.ndarray:
    return _fft.fft2(f.data) * f.grid.corner_phase


def _from_centered(grid: Grid2D, c: np.ndarray) -> np.ndarray:
    c = c * grid.corner_phase
    c[grid.nyquist_mask] = 0.0
    return _fft.ifft2(c)


def _inside(grid: Grid2D, xi: np.ndarray) -> np.ndarray:
    """Frequencies strictly inside the resolved band on both axes."""
    lim = grid.nyquist * (1.0 - 1e-12)
    return (np.abs(xi[..., 0]) < lim) & (np.abs(xi[..., 1]) < lim)


def _spectrum_at_exact(f: Field, pts: np.ndarray) -> np.ndarray:
    g = f.grid
    vals = kernels.nonuniform_eval(f.data.astype(np.complex128), g.x, g.x, pts[:, 0], pts[:, 1], -1.0)
    return vals / g.n**2


def _spectrum_at_spline(f: Field, pts: np.ndarray) -> np.ndarray:
    g = f.grid
    c = np.fft.fftshift(_centered_spectrum(f))
    k = np.fft.fftshift(g.k)
    re = RectBivariateSpline(k, k, c.real, kx=3, ky=3)
    im = RectBivariateSpline(k, k, c.imag, kx=3, ky=3)
    return re.ev(pts[:, 0], pts[:, 1]) + 1j * im.ev(pts[:, 0], pts[:, 1])


def _axis_of(nu: np.ndarray) -> int | None:
    if nu[1] == 0.0:
        return 0
    if nu[0] == 0.0:
        return 1
    return None


def _boost_axis_aligned(f: Field, nu: np.ndarray, direction: str, axis: int) -> np.ndarray:
    """Exact boost when ``nu`` lies along a coordinate axis, at cubic cost.

    The transverse frequency is unchanged by the map, so a lattice transform
    along the other axis followed by one off-lattice sum per column suffices.
    """
    g = f.grid
    a = f.data.astype(np.complex128)
    if axis == 1:
        a = a.T
    other_phase = np.where(np.fft.fftfreq(g.n, 1.0 / g.n).astype(int) % 2 == 0, 1.0, -1.0)
    h = _fft.fft_axis(a, axis=1) * other_phase[None, :]  # h[x1, xi2]
    k = g.k
    out = np.zeros((g.n, g.n), dtype=np.complex128)
    sgn = -1.0 if direction == "inverse" else 1.0
    s = float(abs(nu[axis])) * np.sign(nu[axis])
    gnu = float(jp(s))
    for m in range(g.n):
        xt1 = k
        xt2 = k[m]
        br = np.sqrt(1.0 + xt1 * xt1 + xt2 * xt2)
        src1 = gnu * xt1 - sgn * s * br  # ell_{-nu} for the inverse boost
        w = np.sqrt(1.0 + src1 * src1 + xt2 * xt2) / br
        ok = np.abs(src1) < g.nyquist * (1.0 - 1e-12)
        if not np.any(ok):
            continue
        E = np.exp(-1j * np.outer(src1[ok], g.x))
        out[ok, m] = w[ok] * (E @ h[:, m]) / g.n
    if axis == 1:
        out = out.T
    return out


BoostMethod = Literal["auto", "exact", "spline"]


def boost_data(nu, f: Field, direction: str = "inverse", method: BoostMethod = "auto") -> Field:
    """Lorentz boost of initial data.

    ``direction="inverse"`` applies the inverse data boost, whose spectrum is
    ``<xi>/<xi~> c(xi)`` with ``xi = ell_{-nu}(xi~)``; ``"forward"`` applies
    its inverse. The result is complex in general. A
    :class:`ResolutionWarning` is issued when the boost loses more than a
    small fraction of the ``H^{1/2}`` norm, which signals content mapped
    outside the resolved band.
    """
    if direction not in ("inverse", "forward"):
        raise ValueError(f"direction must be 'inverse' or 'forward', got {direction!r}")
    nu = np.asarray(nu, dtype=float).reshape(2)
    if not np.all(np.isfinite(nu)):
        raise ValueError("boost parameter must be finite")
    g = f.grid
    if not np.any(nu):
        return Field(g, f.data.astype(np.complex128))
    axis = _axis_of(nu)
    if method == "auto":
        method = "exact" if (axis is not None or g.n <= EXACT_BOOST_MAX_N) else "spline"
    if method == "exact" and axis is not None:
        c_out = _boost_axis_aligned(f, nu, direction, axis)
    else:
        KX, KY = g.kmesh
        xt = np.stack([KX, KY], axis=-1).reshape(-1, 2)
        src, w = boost_jacobian_weight(nu, xt, direction)
        ok = _inside(g, src)
        vals = np.zeros(xt.shape[0], dtype=np.complex128)
        if method == "exact":
            vals[ok] = _spectrum_at_exact(f, src[ok])
        elif method == "spline":
            vals[ok] = _spectrum_at_spline(f, src[ok])
        else:
            raise ValueError(f"unknown boost method {method!r}")
        c_out = (w * vals).reshape(g.n, g.n)
    c_out[g.nyquist_mask] = 0.0
    out = Field(g, _from_centered(g, c_out))
    _warn_if_lossy(f, out, "boost")
    return out


def _h12_sq(f: Field) -> float:
    c = _fft.fft2(f.data)
    return float(np.sum(f.grid.kbracket * np.abs(c) ** 2))


def _warn_if_lossy(f: Field, out: Field, what: str) -> None:
    a, b = _h12_sq(f), _h12_sq(out)
    if a > 0 and abs(a - b) / a > BOOST_LOSS_WARN:
        warnings.warn(
            f"{what} changed the H^1/2 norm by a relative {abs(a - b) / a:.2e}; "
            "content was mapped outside the resolved band",
            ResolutionWarning,
            stacklevel=3,
        )


def dilate(lam: float, f: Field, warn_tol: float = 1e-6) -> Field:
    """``(D_lam f)(x) = f(x/lam) / lam`` about the box centre.

    Evaluated exactly through the semidiscrete transform, one axis at a time.
    Warns when the result puts more than ``warn_tol`` of its mass in the
    outer tenth of the box.
    """
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError(f"dilation factor must be positive, got {lam!r}")
    g = f.grid
    tgt = lam * g.k
    ok = np.abs(tgt) < g.nyquist * (1.0 - 1e-12)
    E = np.zeros((g.n, g.n), dtype=np.complex128)
    E[ok] = np.exp(-1j * np.outer(tgt[ok], g.x)) / g.n
    c = lam * (E @ f.data.astype(np.complex128) @ E.T)
    re = Field(g, _from_centered(g, c))
    out = Field(g, re.data.real) if f.is_real else re
    from .grid import boundary_mass_fraction

    if boundary_mass_fraction(out) > warn_tol:
        warnings.warn(
            f"dilation by {lam} leaves {boundary_mass_fraction(out):.2e} of the mass near the box edge",
            ResolutionWarning,
            stacklevel=2,
        )
    return out


# --------------------------------------------------------------------------
# symmetry relations


@dataclass(frozen=True)
class CommutationReport:
    tau_tilde: float
    y_tilde: np.ndarray
    max_abs_error: float
    rel_l2_error: float


def commutation_check(nu, y, tau: float, f: Field, method: BoostMethod = "auto") -> CommutationReport:
    """Compare both sides of the boost/translation exchange relation.

    Left: inverse boost of ``T_y exp(i tau <nabla>) f``. Right: ``T_y~
    exp(i tau~ <nabla>)`` applied to the inverse boost of ``f``, with
    ``(tau~, y~)`` the boosted spacetime shift.
    """
    y = np.asarray(y, dtype=float).reshape(2)
    tt, yy = lorentz_apply(nu, tau, y)
    lhs = boost_data(nu, free_propagate_kg(-tau, translate(y, f)), "inverse", method)
    rhs = translate(yy, free_propagate_kg(-float(tt), boost_data(nu, f, "inverse", method)))
    diff = lhs.data - rhs.data
    from .grid import lp_norm

    den = max(lp_norm(rhs, 2), 1e-300)
    return CommutationReport(float(tt), yy, float(np.max(np.abs(diff))), lp_norm(Field(f.grid, diff), 2) / den)


def dilation_commutation_error(symbol: Callable[[np.ndarray, np.ndarray], np.ndarray], lam: float, f: Field) -> float:
    """Relative L^2 gap between ``m(nabla) D_lam f`` and ``D_lam m(nabla/lam) f``."""
    from .grid import lp_norm

    m = MultiplierSymbol(symbol)
    ms = MultiplierSymbol(lambda kx, ky: symbol(kx / lam, ky / lam))
    a = apply_multiplier(m, dilate(lam, f))
    b = dilate(lam, apply_multiplier(ms, f))
    return lp_norm(Field(f.grid, a.data - b.data), 2) / max(lp_norm(a, 2), 1e-300)
