import numpy as np
import pytest

from softmaximin import TensorDesign, fit_path
from softmaximin.simgen import (
    NOISE_VAR,
    SimTruth,
    design_1d,
    design_3d,
    gen_1d,
    gen_3d,
    grid_1d,
    grid_3d,
    mse_vs_truth,
    signal_1d,
    signal_3d,
)


@pytest.fixture(scope="module")
def sim1():
    return gen_1d(7)


@pytest.fixture(scope="module")
def sim3():
    return gen_3d(7)


def test_1d_dimensions(sim1):
    data, truth = sim1
    assert data.responses.shape == (2001, 50)
    assert truth.signal.shape == (2001,)
    assert len(truth.index_sets) == 50 and truth.phases.shape == (50,)
    for J in truth.index_sets:
        assert len(set(J)) == 7 and J.min() >= 1 and J.max() <= 101
    assert np.all(np.abs(truth.phases) <= np.pi)


def test_same_seed_same_data(sim1):
    again, _ = gen_1d(7)
    assert again.responses.tobytes() == sim1[0].responses.tobytes()
    other, _ = gen_1d(8)
    assert not np.array_equal(other.responses, sim1[0].responses)


def test_groups_do_not_depend_on_group_count(sim1):
    few, _ = gen_1d(7, G=5)
    np.testing.assert_array_equal(few.responses, sim1[0].responses[:, :5])


def test_noise_variance(sim1):
    data, truth = sim1
    clean, _ = gen_1d(7, noise=False)
    resid = data.responses - clean.responses
    assert abs(resid.var() / NOISE_VAR - 1) < 0.05


def test_signal_definition():
    x = grid_1d()
    assert x[0] == 0.0 and x[-1] == 1.0 and x.size == 2001
    np.testing.assert_allclose(signal_1d(0.05), np.cos(np.pi) + 1.5 * np.sin(np.pi / 2))


def test_noise_free_signal_is_recovered():
    data, truth = gen_1d(3, noise=False, nuisance=False, G=3)
    fit = fit_path(data, 1.0, penalty="none")
    assert mse_vs_truth(fit.coef(0), data.design, truth) < 1e-8


def test_3d_dimensions_and_peak(sim3):
    data, truth = sim3
    assert data.responses.shape == (25, 25, 101, 50)
    f = truth.signal
    i, j, k = np.unravel_index(np.argmax(f), f.shape)
    x, y, t = grid_3d()
    assert abs(x[i] - 12.5) <= 0.5 and abs(y[j] - 12.5) <= 0.5 and t[k] == 50
    energy = np.sum(f**2, axis=(0, 1))
    assert np.argmax(energy) == 49


def test_3d_reproducible(sim3):
    again, _ = gen_3d(7, G=3)
    np.testing.assert_array_equal(again.responses, sim3[0].responses[..., :3])


def test_3d_signal_is_density_product():
    x, y, t = grid_3d()
    f = signal_3d(x, y, t)
    nd = lambda v, m, s2: np.exp(-((v - m) ** 2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)  # noqa: E731
    assert f[3, 20, 70] == pytest.approx(nd(4.0, 12.5, 4) * nd(21.0, 12.5, 4) * nd(71.0, 50, 25), rel=1e-14)


def test_mse_trivial_cases(rng):
    D = TensorDesign([rng.standard_normal((6, 3)), rng.standard_normal((5, 2))])
    beta = rng.standard_normal((3, 2))
    exact = SimTruth(D.dense() @ beta.ravel(order="F"), 0, [], [], np.zeros(0))
    exact.signal = exact.signal.reshape(6, 5, order="F")
    assert mse_vs_truth(beta, D, exact) < 1e-28
    assert mse_vs_truth(np.zeros((3, 2)), D, exact) == pytest.approx(np.mean(exact.signal**2), rel=1e-15)


def test_mse_matches_dense_oracle(sim3):
    data, truth = sim3
    D = design_3d()
    # down-sampled grid: keep every 4th cell along each axis
    sub = [f[::4] for f in D.factors]
    Ds = TensorDesign(sub)
    beta = np.random.default_rng(0).standard_normal(D.col_dims)
    f_sub = truth.signal[::4, ::4, ::4]
    small = SimTruth(f_sub, truth.seed, [], [], truth.phases)
    fitted = Ds.dense() @ beta.ravel(order="F")
    want = np.mean((fitted - f_sub.ravel(order="F")) ** 2)
    assert abs(mse_vs_truth(beta, Ds, small) - want) / want < 1e-10


def test_designs():
    assert design_1d().col_dims == (101,)
    assert design_3d().row_dims == (25, 25, 101) and design_3d().col_dims == (10, 10, 20)
