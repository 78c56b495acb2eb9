import numpy as np
import pytest

from rirsense import _kernels

BACKENDS = [("numpy", _kernels.sliding_mean_numpy)]
if _kernels.sliding_mean_numba is not None:
    BACKENDS.append(("numba", _kernels.sliding_mean_numba))


@pytest.fixture(params=BACKENDS, ids=[name for name, _ in BACKENDS])
def mean(request):
    return request.param[1]


class TestSlidingMean:
    def test_constant_preserved(self, mean):
        out = mean(np.full(100, 3.25), 9)
        assert np.allclose(out, 3.25, rtol=0, atol=1e-15)

    def test_impulse_spreads_uniformly(self, mean):
        x = np.zeros(64)
        x[30] = 1.0
        out = mean(x, 9)
        assert np.allclose(out[26:35], 1 / 9)
        assert np.all(out[:26] == 0) and np.all(out[35:] == 0)

    def test_linear_ramp_fixed_interior(self, mean):
        x = np.arange(50, dtype=float)
        out = mean(x, 11)
        assert np.allclose(out[5:-5], x[5:-5], rtol=1e-14)

    def test_shrunken_edges(self, mean):
        x = np.ones(10)
        x[0] = 11.0
        out = mean(x, 5)
        # First window covers indices 0..2 only.
        assert out[0] == pytest.approx((11 + 1 + 1) / 3)

    def test_window_larger_than_input(self, mean):
        x = np.array([1.0, 2.0, 3.0])
        out = mean(x, 9)
        assert np.allclose(out, 2.0)

    def test_complex_input(self, mean):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(40) + 1j * rng.standard_normal(40)
        out = mean(z, 7)
        assert out.dtype == np.complex128
        assert out[20] == pytest.approx(z[17:24].mean(), rel=1e-12)

    def test_rejects_even_window(self, mean):
        with pytest.raises(ValueError):
            mean(np.ones(10), 4)

    def test_mean_preserved_for_interior_support(self, mean):
        # With the input supported >= one window away from the edges,
        # every sample is covered by exactly `w` full windows, so the
        # total (and hence the mean) is preserved exactly.
        rng = np.random.default_rng(1)
        w = 21
        x = np.zeros(500)
        x[w : 500 - w] = rng.standard_normal(500 - 2 * w)
        out = mean(x, w)
        assert np.sum(out) == pytest.approx(np.sum(x), rel=1e-12)


@pytest.mark.skipif(_kernels.sliding_mean_numba is None, reason="numba unavailable")
class TestBackendAgreement:
    @pytest.mark.parametrize("window", [9, 41, 481])
    def test_real_paths_agree(self, window):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(5000) ** 2
        a = _kernels.sliding_mean_numba(x, window)
        b = _kernels.sliding_mean_numpy(x, window)
        assert np.allclose(a, b, rtol=1e-11)

    def test_complex_paths_agree(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal(5000) + 1j * rng.standard_normal(5000)
        a = _kernels.sliding_mean_numba(z, 41)
        b = _kernels.sliding_mean_numpy(z, 41)
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12 * np.abs(b).max())

    def test_decaying_tail_accuracy(self):
        # Windowed means in a tail 120 dB below the peak must stay
        # accurate on both paths (the reason cumsum tricks are banned).
        n = 20000
        env = np.exp(-np.arange(n) * 14.0 / n)
        rng = np.random.default_rng(4)
        x = (env * rng.standard_normal(n)) ** 2
        for impl in (_kernels.sliding_mean_numba, _kernels.sliding_mean_numpy):
            out = impl(x, 41)
            tail = slice(n - 400, n)
            exact = np.array([x[max(0, i - 20) : min(n, i + 21)].mean() for i in range(*tail.indices(n))])
            assert np.allclose(out[tail], exact, rtol=1e-10)

    def test_dispatch_matches_env(self):
        assert _kernels.backend() in ("numba", "numpy")
        assert _kernels.sliding_mean in (_kernels.sliding_mean_numba, _kernels.sliding_mean_numpy)
