import numpy as np
import pytest

from qcorr.spins import build_bath, omega0_from_field

TWO_PI = 2 * np.pi


@pytest.fixture
def carbon():
    """One 13C-like spin at 504 G with the hyperfine values used throughout."""
    return build_bath(omega0_from_field(504), TWO_PI * 58.4e3, TWO_PI * 60.4e3, 0.5)


@pytest.fixture
def bare_spin():
    return build_bath(TWO_PI * 200e3, 0.0, TWO_PI * 50e3, 0.8)


def random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
