import hypothesis
import numpy as np
import pytest

from sfma.semantic_rate import InterferenceProfile, Link

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.load_profile("default")

NOISE_W = 10.0 ** (-10.4)  # -104 dBW


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def default_profile():
    return InterferenceProfile.default_table()


@pytest.fixture
def unit_link():
    return Link(gain=1.0, noise=1.0)


def make_link(snr_at_1w_db: float, noise_w: float = NOISE_W) -> Link:
    """Link whose receive SNR at 1 W transmit power is the given dB value."""
    return Link(gain=noise_w * 10.0 ** (snr_at_1w_db / 10.0), noise=noise_w)
