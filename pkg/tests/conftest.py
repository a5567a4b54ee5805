import numpy as np
import pytest

from kitwpa import device


@pytest.fixture(scope="session")
def dev():
    """Calibrated device with the measured loss table."""
    return device.paper_device(with_loss=True)


@pytest.fixture(scope="session")
def dev_nl():
    """Calibrated device without loss."""
    return device.paper_device(with_loss=False)


@pytest.fixture(scope="session")
def wide_grid():
    """Frequency grid covering the third harmonic and upper sidebands."""
    return np.linspace(0.02e9, 6.2e9, 6200)


@pytest.fixture(scope="session")
def curve(dev, wide_grid):
    return device.bloch_dispersion(dev, wide_grid)


@pytest.fixture(scope="session")
def curve_nl(dev_nl, wide_grid):
    return device.bloch_dispersion(dev_nl, wide_grid)
