import numpy as np
import pytest

from speclab import diophantine as dio
from speclab import ehm


@pytest.fixture(scope="session")
def golden():
    return dio.expand("golden", 40)


@pytest.fixture(scope="session")
def ehm_112(golden):
    return ehm.ehm_model((0.1, 0.5, 0.2), golden)


@pytest.fixture(scope="session")
def amo_half(golden):
    return ehm.amo_model(0.5, golden)


def random_sl2(rng):
    """Random SL(2, R) matrix (det exactly +1 side) with moderate condition."""
    m = rng.normal(size=(2, 2))
    det = np.linalg.det(m)
    while abs(det) < 0.3:
        m = rng.normal(size=(2, 2))
        det = np.linalg.det(m)
    if det < 0:
        m = m[:, ::-1].copy()
        det = -det
    return m / np.sqrt(det)
