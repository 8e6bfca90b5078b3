import numpy as np
import pytest

from beamsched import NoiseModel, build_hex_layout


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance criteria (slow)"
    )


@pytest.fixture(scope="session")
def layout7():
    return build_hex_layout(7)


@pytest.fixture(scope="session")
def layout2():
    return build_hex_layout(2)


@pytest.fixture(scope="session")
def noise():
    return NoiseModel()


def random_complex_matrix(rng, b, scale=1.0):
    re = rng.normal(size=(b, b))
    im = rng.normal(size=(b, b))
    return scale * (re + 1j * im) / np.sqrt(2.0)
