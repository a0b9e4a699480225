import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kg2d.errors import GridError, SnapshotError
from kg2d.grid import Field, Grid2D
from kg2d.io import (
    DIAG_HEADER,
    load_snapshot,
    read_csv,
    read_field,
    read_meta,
    save_snapshot,
    sidecar_path,
    write_csv,
    write_diagnostics,
    write_field,
)
from kg2d.kg import KGState, evolve
from kg2d.nls import NLSState


class TestKGF1:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), cplx=st.booleans(), t=st.floats(-1e6, 1e6))
    def test_field_roundtrip_bit_exact(self, tmp_path_factory, seed, cplx, t):
        g = Grid2D(16, 3.7)
        r = np.random.default_rng(seed)
        a = r.standard_normal((16, 16))
        if cplx:
            a = a + 1j * r.standard_normal((16, 16))
        p = tmp_path_factory.mktemp("f") / "x.kgf1"
        write_field(p, Field(g, a), t)
        f, t2 = read_field(p)
        assert f.grid == g and t2 == t
        assert f.data.dtype == a.dtype
        assert f.data.tobytes() == a.tobytes()

    def test_header_layout(self, tmp_path):
        g = Grid2D(8, 2.5)
        p = write_field(tmp_path / "h.kgf1", Field(g, np.zeros((8, 8))), 1.25)
        raw = p.read_bytes()
        assert raw[:4] == b"KGF1"
        assert struct.unpack_from("<IddB", raw, 4) == (8, 2.5, 1.25, 0)
        assert len(raw) == 25 + 8 * 64

    def test_kg_state_roundtrip(self, tmp_path, rng):
        g = Grid2D(32, 10.0)
        s = KGState.from_arrays(g, rng.standard_normal((32, 32)), rng.standard_normal((32, 32)), 0.75, 1)
        save_snapshot(s, tmp_path / "s.kgf1", {"note": "x"})
        back = load_snapshot(tmp_path / "s.kgf1")
        assert isinstance(back, KGState)
        assert back.u.data.tobytes() == s.u.data.tobytes()
        assert back.ut.data.tobytes() == s.ut.data.tobytes()
        assert back.t == 0.75 and back.mu == 1
        assert read_meta(tmp_path / "s.kgf1")["note"] == "x"

    def test_nls_state_roundtrip(self, tmp_path, rng):
        g = Grid2D(16, 10.0)
        w = Field(g, rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16)))
        save_snapshot(NLSState(w, 2.0, -1), tmp_path / "w.kgf1")
        back = load_snapshot(tmp_path / "w.kgf1")
        assert isinstance(back, NLSState) and back.t == 2.0
        assert back.w.data.tobytes() == w.data.tobytes()

    def test_sidecar_name(self):
        assert sidecar_path("a/b/snap_001.kgf1").name == "snap_001.meta.json"

    def test_truncated(self, tmp_path):
        p = write_field(tmp_path / "t.kgf1", Field(Grid2D(8, 1.0), np.ones((8, 8))))
        data = p.read_bytes()
        for cut in (3, 24, len(data) - 1):
            p.write_bytes(data[:cut])
            with pytest.raises(SnapshotError):
                read_field(p)

    def test_bad_magic_and_kind(self, tmp_path):
        p = write_field(tmp_path / "m.kgf1", Field(Grid2D(8, 1.0), np.ones((8, 8))))
        data = bytearray(p.read_bytes())
        p.write_bytes(b"KGF2" + bytes(data[4:]))
        with pytest.raises(SnapshotError, match="magic"):
            read_field(p)
        data[24] = 7
        p.write_bytes(bytes(data))
        with pytest.raises(SnapshotError, match="kind"):
            read_field(p)

    def test_invalid_grid_in_header(self, tmp_path):
        p = tmp_path / "g.kgf1"
        p.write_bytes(struct.pack("<4sIddB", b"KGF1", 3, 1.0, 0.0, 0) + b"\0" * 72)
        with pytest.raises(SnapshotError, match="grid"):
            read_field(p)

    def test_cross_grid(self, tmp_path):
        p = write_field(tmp_path / "c.kgf1", Field(Grid2D(16, 1.0), np.ones((16, 16))))
        with pytest.raises(GridError):
            read_field(p, Grid2D(32, 1.0))

    def test_kg_layout_must_be_complex(self, tmp_path):
        p = tmp_path / "k.kgf1"
        save_snapshot(Field(Grid2D(8, 1.0), np.ones((8, 8))), p, {"layout": "kg-state"})
        with pytest.raises(SnapshotError):
            load_snapshot(p)

    def test_unknown_layout(self, tmp_path):
        p = tmp_path / "u.kgf1"
        save_snapshot(Field(Grid2D(8, 1.0), np.ones((8, 8))), p, {"layout": "mystery"})
        with pytest.raises(SnapshotError):
            load_snapshot(p)


class TestCSV:
    def test_full_precision_roundtrip(self, tmp_path):
        vals = [[0.1, 1 / 3, 2.0**-40], [np.float64(np.pi), 1e300, -0.0]]
        write_csv(tmp_path / "a.csv", ("a", "b", "c"), vals)
        header, arr = read_csv(tmp_path / "a.csv")
        assert header == ["a", "b", "c"]
        assert arr.tobytes() == np.array(vals).tobytes()

    def test_diagnostics_deterministic(self, tmp_path):
        g = Grid2D(32, 20.0)
        X, Y = g.mesh
        s = KGState.from_arrays(g, np.exp(-(X**2 + Y**2)), mu=1)
        write_diagnostics(tmp_path / "a.csv", evolve(s, 0.1, 0.01))
        write_diagnostics(tmp_path / "b.csv", evolve(s, 0.1, 0.01))
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes()
        header, arr = read_csv(tmp_path / "a.csv")
        assert tuple(header) == DIAG_HEADER and arr.shape == (11, 7)
