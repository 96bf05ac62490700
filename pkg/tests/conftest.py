import warnings

import pytest

from hsps.config import ConfigWarning, make_symmetric_config


@pytest.fixture
def symmetric():
    """Factory for exactly energy-matched normalized configs."""

    def build(sigma_s=1.0, sigma_i=1.0, g2=0.01, **kwargs):
        kwargs.setdefault("det_efficiencies", (1.0, 1.0, 1.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConfigWarning)
            return make_symmetric_config(sigma_s, sigma_i, g2, **kwargs)

    return build


@pytest.fixture(autouse=True)
def _quiet_config_warnings():
    """Soft validity warnings (wide-band collection factor, low-gain guard)
    fire intentionally in several sweeps; tests that assert on warnings use
    pytest.warns explicitly."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigWarning)
        yield
