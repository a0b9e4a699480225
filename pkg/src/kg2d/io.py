"""KGF1 snapshots with JSON sidecars, and CSV writers for reports.

A KGF1 file holds one field: the magic ``KGF1``, ``u32 n``, ``f64 L``,
``f64 t``, ``u8 kind`` (0 real, 1 complex), then ``n*n`` little-endian f64
samples, or ``2*n*n`` interleaved real/imaginary pairs, in row-major order.
A Klein-Gordon state is stored as the complex field ``u + i u_t`` so both
components round-trip bit for bit; the sidecar records the layout.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GridError, SnapshotError
from .grid import Field, Grid2D
from .kg import KGState
from .nls import NLSState

MAGIC = b"KGF1"
_HEADER = struct.Struct("<4sIddB")
_LAYOUTS = ("field", "kg-state", "nls-state")


def sidecar_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def write_field(path: str | Path, f: Field, t: float = 0.0, meta: dict | None = None) -> Path:
    """Write ``f`` as KGF1 and, when ``meta`` is given, a sidecar next to it."""
    path = Path(path)
    g = f.grid
    kind = 0 if f.is_real else 1
    data = np.ascontiguousarray(f.data)
    if kind == 1:
        data = np.ascontiguousarray(data.astype(np.complex128)).view(np.float64)
    payload = data.astype("<f8", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.n, float(g.L), float(t), kind))
        fh.write(payload)
    if meta is not None:
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_field(path: str | Path, grid: Grid2D | None = None) -> tuple[Field, float]:
    """Read a KGF1 field, returning ``(field, t)``.

    ``grid`` (optional) must match the stored ``n`` and ``L``. Any header
    problem or short payload raises :class:`SnapshotError` before a field is
    built.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, n, L, t, kind = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if kind not in (0, 1):
        raise SnapshotError(f"{path}: unknown field kind {kind}")
    count = n * n * (2 if kind else 1)
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise SnapshotError(f"{path}: expected {8 * count} payload bytes, found {len(body)}")
    try:
        g = Grid2D(n, L)
    except GridError as exc:
        raise SnapshotError(f"{path}: invalid grid in header: {exc}") from exc
    if grid is not None and (grid.n != n or grid.L != L):
        raise GridError(f"{path}: snapshot grid (n={n}, L={L}) does not match expected (n={grid.n}, L={grid.L})")
    a = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if kind:
        a = a.view(np.complex128)
    return Field(g, a.reshape(n, n)), float(t)


def read_meta(path: str | Path) -> dict:
    p = sidecar_path(path)
    return json.loads(p.read_text()) if p.exists() else {}


def save_snapshot(state: KGState | NLSState | Field, path: str | Path, meta: dict | None = None) -> Path:
    """Persist a state or field; the sidecar records its layout and ``mu``."""
    info = dict(meta or {})
    if isinstance(state, KGState):
        f = Field(state.grid, state.u.data + 1j * state.ut.data)
        info.update(layout="kg-state", mu=state.mu)
        return write_field(path, f, state.t, info)
    if isinstance(state, NLSState):
        info.update(layout="nls-state", mu=state.mu)
        return write_field(path, state.w, state.t, info)
    info.setdefault("layout", "field")
    return write_field(path, state, 0.0, info)


def load_snapshot(path: str | Path, grid: Grid2D | None = None):
    """Inverse of :func:`save_snapshot`; the layout comes from the sidecar (default: plain field)."""
    f, t = read_field(path, grid)
    meta = read_meta(path)
    layout = meta.get("layout", "field")
    if layout not in _LAYOUTS:
        raise SnapshotError(f"{path}: unknown layout {layout!r}")
    if layout == "kg-state":
        if f.is_real:
            raise SnapshotError(f"{path}: a kg-state snapshot must be complex")
        return KGState(Field(f.grid, f.data.real.copy()), Field(f.grid, f.data.imag.copy()), t, meta.get("mu", -1))
    if layout == "nls-state":
        return NLSState(f, t, meta.get("mu", -1))
    return f


# --------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write rows with full-precision floats, so equal inputs give equal bytes."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


DIAG_HEADER = ("t", "E", "M", "P1", "P2", "L4_4", "sup")


def write_diagnostics(path: str | Path, traj) -> Path:
    return write_csv(path, DIAG_HEADER, traj.rows())


def write_plotdata(path: str | Path, x, y, xname: str = "x", yname: str = "y") -> Path:
    return write_csv(path, (xname, yname), zip(np.asarray(x).tolist(), np.asarray(y).tolist()))


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    return header, np.asarray(rows, dtype=float).reshape(len(rows), len(header))
