import numpy as np
import pytest

from spherelight.geometry import build_grid, generate_anchors


@pytest.fixture(scope="session")
def anchors_1280():
    return generate_anchors(1280)


@pytest.fixture(scope="session")
def grid_1024(anchors_1280):
    return build_grid(anchors_1280, 1024, 512)


@pytest.fixture(scope="session")
def anchors_128():
    return generate_anchors(128)


@pytest.fixture(scope="session")
def grid_128(anchors_128):
    return build_grid(anchors_128, 256, 128)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
