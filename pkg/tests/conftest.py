import numpy as np
import pytest

from nbrestore.synthetic import synthetic_image


@pytest.fixture(scope="session")
def natural_image() -> np.ndarray:
    """A 96x96 synthetic image with edges, shading, and texture."""
    return synthetic_image(seed=101, index=0, size=96)


@pytest.fixture(scope="session")
def natural_image_large() -> np.ndarray:
    return synthetic_image(seed=101, index=1, size=192)


@pytest.fixture()
def mid_gray_512() -> np.ndarray:
    return np.full((512, 512), 0.5, dtype=np.float32)
