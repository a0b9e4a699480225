"""Periodic square grids, sampled fields and spectral norms.

Physical samples sit at ``x_j = -L/2 + j*dx`` on each axis. Frequencies are
``dk*j`` for ``j = -n/2 .. n/2-1`` (stored in FFT order). Spectral
coefficients use the forward normalization 1/n**2, so that a field equals
``sum_k c_k exp(i k.x')`` with ``x'`` measured from the lower-left corner.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from . import _fft
from .errors import GridError

MIN_N = 8
MAX_N = 4096


@dataclass(frozen=True)
class Grid2D:
    """Square periodic grid of ``n x n`` points on a box of side ``L``."""

    n: int
    L: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise GridError(f"n must be an integer, got {n!r}")
        if n < MIN_N or n > MAX_N or (n & (n - 1)) != 0:
            raise GridError(f"n must be a power of two in [{MIN_N}, {MAX_N}], got {n}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise GridError(f"L must be positive and finite, got {self.L!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @property
    def nyquist(self) -> float:
        """Magnitude of the most negative resolved frequency, ``n*dk/2``."""
        return 0.5 * self.n * self.dk

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.L + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """One-dimensional frequencies in FFT order."""
        return self.dk * np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        return X, Y

    @cached_property
    def kmesh(self) -> tuple[np.ndarray, np.ndarray]:
        KX, KY = np.meshgrid(self.k, self.k, indexing="ij")
        return KX, KY

    @cached_property
    def ksq(self) -> np.ndarray:
        KX, KY = self.kmesh
        return KX * KX + KY * KY

    @cached_property
    def kbracket(self) -> np.ndarray:
        """Japanese bracket ``<xi> = sqrt(1 + |xi|^2)`` on the lattice."""
        return np.sqrt(1.0 + self.ksq)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on the unpaired Nyquist row and column."""
        idx = np.zeros(self.n, dtype=bool)
        idx[self.n // 2] = True
        return idx[:, None] | idx[None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Modes kept by the cubic dealiasing rule, ``|xi|_inf <= n*dk/4``."""
        KX, KY = self.kmesh
        cut = 0.25 * self.n * self.dk * (1.0 + 1e-12)
        return (np.abs(KX) <= cut) & (np.abs(KY) <= cut)

    @cached_property
    def corner_phase(self) -> np.ndarray:
        """``exp(-i xi.x_0)`` with ``x_0`` the lower-left sample, i.e. ``(-1)^(j1+j2)``.

        Multiplying FFT coefficients by this gives coefficients referred to
        the box centre, which is the origin for boosts and dilations.
        """
        j = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)
        s = np.where(j % 2 == 0, 1.0, -1.0)
        return s[:, None] * s[None, :]

    def radius(self) -> np.ndarray:
        X, Y = self.mesh
        return np.hypot(X, Y)

    def check_same(self, other: "Grid2D") -> None:
        if self != other:
            raise GridError(f"grid mismatch: {self} vs {other}")


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a real or complex function on a grid. The array is read-only."""

    grid: Grid2D
    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, copy=True)
        if a.shape != (self.grid.n, self.grid.n):
            raise GridError(f"field shape {a.shape} does not match grid n={self.grid.n}")
        if np.iscomplexobj(a):
            a = a.astype(np.complex128)
        else:
            a = a.astype(np.float64)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.data)

    def spectrum(self) -> np.ndarray:
        return _fft.fft2(self.data)

    def with_data(self, data: np.ndarray) -> "Field":
        return Field(self.grid, data)

    def real(self) -> "Field":
        return Field(self.grid, np.real(self.data))

    def __repr__(self) -> str:
        kind = "real" if self.is_real else "complex"
        return f"Field({kind}, n={self.grid.n}, L={self.grid.L})"


RealField2D = Field
ComplexField2D = Field

FieldLike = Union[Field, np.ndarray]


def _unwrap(f: FieldLike, grid: Grid2D | None) -> tuple[np.ndarray, Grid2D]:
    if isinstance(f, Field):
        if grid is not None:
            grid.check_same(f.grid)
        return f.data, f.grid
    if grid is None:
        raise GridError("a grid is required for raw arrays")
    a = np.asarray(f)
    if a.shape != (grid.n, grid.n):
        raise GridError(f"array shape {a.shape} does not match grid n={grid.n}")
    return a, grid


def sample(grid: Grid2D, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Field:
    """Evaluate ``func(X, Y)`` on the grid."""
    X, Y = grid.mesh
    return Field(grid, func(X, Y))


def forward(f: FieldLike, grid: Grid2D | None = None) -> np.ndarray:
    """Spectral coefficients with the 1/n**2 forward normalization."""
    a, _ = _unwrap(f, grid)
    return _fft.fft2(a)


def inverse(grid: Grid2D, coeffs: np.ndarray, real: bool | None = None) -> Field:
    """Field from spectral coefficients.

    With ``real=None`` the result is real when the imaginary part vanishes to
    rounding; ``True`` or ``False`` forces the choice.
    """
    a = _fft.ifft2(coeffs)
    if real is None:
        scale = max(float(np.max(np.abs(a))), 1e-300)
        real = float(np.max(np.abs(a.imag))) <= 1e-13 * scale
    return Field(grid, a.real if real else a)


def zero_nyquist(grid: Grid2D, coeffs: np.ndarray) -> np.ndarray:
    out = np.array(coeffs, copy=True)
    out[grid.nyquist_mask] = 0.0
    return out


def lp_norm(f: FieldLike, p: float, grid: Grid2D | None = None) -> float:
    """Quadrature ``L^p`` norm ``dx^(2/p) * (sum |f|^p)^(1/p)``; ``p=inf`` is the max."""
    a, g = _unwrap(f, grid)
    if p == np.inf:
        return float(np.max(np.abs(a)))
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    m = np.abs(a)
    top = float(np.max(m))
    if top == 0.0:
        return 0.0
    # scale before powering to avoid overflow for large p
    return top * g.dx ** (2.0 / p) * float(np.sum((m / top) ** p)) ** (1.0 / p)


def sobolev_norm(f: FieldLike, s: float, grid: Grid2D | None = None) -> float:
    """``H^s`` norm ``L * (sum <xi>^(2s) |c_xi|^2)^(1/2)``; equals the ``L^2`` norm at s=0."""
    a, g = _unwrap(f, grid)
    c = _fft.fft2(a)
    w = g.kbracket ** (2.0 * s)
    return g.L * float(np.sqrt(np.sum(w * np.abs(c) ** 2)))


def inner(f: FieldLike, h: FieldLike, grid: Grid2D | None = None) -> complex:
    """Quadrature ``L^2`` inner product, conjugate-linear in the first slot."""
    a, g = _unwrap(f, grid)
    b, _ = _unwrap(h, g)
    return complex(np.vdot(a, b) * g.cell_area)


def parseval_defect(f: FieldLike, grid: Grid2D | None = None) -> float:
    """Relative mismatch between physical and spectral ``L^2`` norms."""
    a, g = _unwrap(f, grid)
    phys = float(np.sum(np.abs(a) ** 2)) * g.cell_area
    spec = g.L**2 * float(np.sum(np.abs(_fft.fft2(a)) ** 2))
    if phys == 0.0:
        return abs(spec)
    return abs(phys - spec) / phys


def roundtrip_error(f: FieldLike, grid: Grid2D | None = None) -> float:
    """Relative max error of inverse(forward(f))."""
    a, g = _unwrap(f, grid)
    back = _fft.ifft2(_fft.fft2(a))
    scale = max(float(np.max(np.abs(a))), 1e-300)
    return float(np.max(np.abs(back - a))) / scale


def boundary_mass_fraction(f: FieldLike, grid: Grid2D | None = None, width: float = 0.1) -> float:
    """Fraction of ``sum |f|^2`` in the outer ``width*L`` frame of the box."""
    a, g = _unwrap(f, grid)
    X, Y = g.mesh
    edge = 0.5 * g.L * (1.0 - 2.0 * width)
    frame = (np.abs(X) > edge) | (np.abs(Y) > edge)
    tot = float(np.sum(np.abs(a) ** 2))
    if tot == 0.0:
        return 0.0
    return float(np.sum(np.abs(a[frame]) ** 2)) / tot


def high_mode_fraction(f: FieldLike, grid: Grid2D | None = None) -> float:
    """Fraction of spectral ``L^2`` mass outside the dealiased region."""
    a, g = _unwrap(f, grid)
    c2 = np.abs(_fft.fft2(a)) ** 2
    tot = float(np.sum(c2))
    if tot == 0.0:
        return 0.0
    return float(np.sum(c2[~g.dealias_mask])) / tot
