import numpy as np
import pytest

from rirsense import AnalysisConfig, Rir, analyze_band, gen_mixing_pair
from rirsense import _kernels

# Bit-exact self-coherence is guaranteed on the numba path (matched
# accumulation order); the numpy fallback agrees to ~1e-15.
SELF_COHERENCE_ATOL = 0.0 if _kernels.backend() == "numba" else 1e-12


@pytest.fixture(scope="session")
def config():
    return AnalysisConfig()


@pytest.fixture(scope="session", autouse=True)
def warm_kernels(config):
    """Compile the numba kernels once so timed tests measure work, not JIT."""
    pair = gen_mixing_pair(1.0, rt=0.1, sample_rate=8000, snr_db=60.0, seed=0, duration=0.12)
    analyze_band(pair.x, pair.y, None, config)


def make_rir(samples, rate=16000, **labels):
    return Rir(sample_rate=rate, samples=np.asarray(samples, dtype=float), **labels)


def noise_rir(n=4000, rate=16000, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return make_rir(scale * rng.standard_normal(n), rate=rate)
