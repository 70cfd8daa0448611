import numpy as np
import pytest

from gcilab import _kernels
from gcilab._kernels import _ref

fast = pytest.importorskip("gcilab._kernels._fast")


class TestBackends:
    def test_compiled_backend_selected(self):
        assert _kernels.BACKEND == "cython"

    def test_jacobi_agreement(self):
        rng = np.random.default_rng(0)
        for n in (2, 4, 8, 16):
            a = rng.standard_normal((n, n))
            a = a + a.T
            w1, v1 = _ref.jacobi_eigh(a)
            w2, v2 = fast.jacobi_eigh(a)
            assert np.allclose(np.sort(w1), np.sort(w2), atol=1e-9)
            for w, v in ((w1, v1), (w2, v2)):
                assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-9)

    def test_convolution_agreement(self):
        rng = np.random.default_rng(1)
        for n, m in ((16, 16), (64, 9), (255, 511)):
            f = np.abs(rng.standard_normal(n))
            g = np.abs(rng.standard_normal(m))
            a = _ref.convolve_direct(f, g)
            b = fast.convolve_direct(f, g)
            assert a.shape == b.shape == (n + m - 1,)
            assert np.allclose(a, b, atol=1e-12)
            assert np.allclose(a, np.convolve(f, g), atol=1e-12)
