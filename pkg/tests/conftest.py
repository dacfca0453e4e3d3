import numpy as np
import pytest

from sketchinf import _accel


def sylvester(n: int) -> np.ndarray:
    """Orthonormal Hadamard matrix of order ``n`` by repeated Kronecker products."""
    H = np.array([[1.0]])
    base = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    while H.shape[0] < n:
        H = np.kron(base, H)
    return H


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not _accel.NUMBA_AVAILABLE:
        pytest.skip("numba not installed")
    old = _accel.get_backend()
    _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(old)


@pytest.fixture(scope="session")
def case1_small():
    from sketchinf.datagen import gen_case1

    return gen_case1(512, 5, 11)
