import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kg2d import _kernels_py, kernels

try:
    from kg2d import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")
backends = [pytest.param(_kernels_py, id="python"), pytest.param(compiled, id="compiled", marks=needs_compiled)]


@pytest.mark.parametrize("impl", backends)
class TestBackends:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), coef=st.floats(-2, 2))
    def test_cubic_kick(self, impl, seed, coef):
        r = np.random.default_rng(seed)
        u = r.standard_normal((16, 8))
        ut = r.standard_normal((16, 8))
        expect = ut - coef * u**3
        out = impl.cubic_kick(ut, u, coef)
        assert np.allclose(out, expect, rtol=1e-15, atol=1e-15)
        assert np.allclose(ut, expect, rtol=1e-15, atol=1e-15)  # in place

    def test_cubic_power(self, impl):
        u = np.random.default_rng(1).standard_normal((32, 32))
        assert np.allclose(impl.cubic_power(u), u**3, rtol=1e-15, atol=0)

    def test_nonuniform_eval_direct_sum(self, impl):
        r = np.random.default_rng(2)
        f = r.standard_normal((12, 10)) + 1j * r.standard_normal((12, 10))
        x = np.sort(r.uniform(-3, 3, 12))
        y = -2.0 + 0.4 * np.arange(10)
        p1, p2 = r.uniform(-4, 4, 7), r.uniform(-4, 4, 7)
        want = np.array([np.sum(f * np.exp(-1j * (a * x[:, None] + b * y[None, :]))) for a, b in zip(p1, p2)])
        got = impl.nonuniform_eval(f, x, y, p1, p2, -1.0)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


@needs_compiled
def test_backends_agree_through_wrapper():
    r = np.random.default_rng(3)
    f = r.standard_normal((16, 16)) + 0j
    x = np.linspace(-1, 1, 16, endpoint=False)
    p = r.uniform(-5, 5, (2, 9))
    a = _kernels_py.nonuniform_eval(f, x, x, p[0], p[1], 1.0)
    b = kernels.nonuniform_eval(f, x, x, p[0], p[1], 1.0)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_env_forces_fallback():
    env = dict(os.environ, KG2D_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from kg2d import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
