import warnings

import numpy as np
import pytest

from softmaximin import GroupedDataset, TensorDesign


def random_dataset(rng, n_dims=(6,), p_dims=(3,), G=3, scale=1.0):
    factors = [rng.standard_normal((n, p)) for n, p in zip(n_dims, p_dims)]
    Y = scale * rng.standard_normal(tuple(n_dims) + (G,))
    return GroupedDataset(TensorDesign(factors), Y)


def dense_losses(X, ys, beta):
    """h_g = -(2 b'X'y - b'X'Xb)/n from explicit matrices."""
    out = []
    for y in ys:
        n = y.size
        out.append(-(2 * beta @ X.T @ y - beta @ X.T @ X @ beta) / n)
    return np.array(out)


def dense_lse(x, zeta):
    # mpmath-free reference: high-precision via longdouble and the shift trick
    x = np.asarray(x, dtype=np.longdouble) * zeta
    m = x.max()
    return float((m + np.log(np.exp(x - m).sum())) / zeta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def _quiet_convergence():
    from softmaximin import ConvergenceWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        yield
