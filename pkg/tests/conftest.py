import numpy as np
import pytest

from ssvepkit import synthgen


def random_stationary_autocov(rng: np.random.Generator, max_lag: int) -> np.ndarray:
    """A valid (positive definite) autocovariance: inverse FFT of a random
    strictly positive spectrum."""
    nfft = 256
    half = rng.uniform(0.1, 1.0, nfft // 2 + 1)
    full = np.concatenate([half, half[-2:0:-1]])
    r = np.fft.ifft(full).real
    return r[: max_lag + 1].copy()


@pytest.fixture(scope="session")
def background():
    return synthgen.default_background_ar()
