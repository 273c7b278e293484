import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dense_matrix(apply_fn, in_shape, out_shape=None):
    """Materialize a linear map column by column from basis inputs."""
    if out_shape is None:
        out_shape = in_shape
    n = int(np.prod(in_shape))
    m = int(np.prod(out_shape))
    mat = np.zeros((m, n))
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        mat[:, j] = np.asarray(apply_fn(basis.reshape(in_shape))).ravel()
        basis[j] = 0.0
    return mat
