import os

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
IMAGE_DIR = os.path.join(ROOT, "data", "images")


def image_path(name):
    return os.path.join(IMAGE_DIR, f"{name}.pgm")


@pytest.fixture(scope="session")
def lena():
    from scbcs.pgm import read_pgm
    return read_pgm(image_path("lena")).astype(np.float64)


@pytest.fixture(scope="session")
def lena_crop(lena):
    """122x122 patch (4x4 grid of 32-pixel blocks) with real texture."""
    return lena[200:322, 200:322].copy()
