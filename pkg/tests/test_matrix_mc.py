import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from eigenflow.errors import ConfigError, InputError
from eigenflow.matrix_mc import (
    MatrixPathConfig, eigen_overlaps, evolve, initial_basis, mc_mean_overlaps,
    sample_hermitian_increment,
)
from eigenflow.rng import substream
from eigenflow.spectral_model import Semicircle, SpectralModel, discretize

SEED = 20240611


def semicircle_cdf(x, r=2.0):
    x = np.clip(np.asarray(x) / r, -1, 1)
    return 0.5 + (x * np.sqrt(1 - x * x) + np.arcsin(x)) / np.pi


def _draws(n, N, beta, rng):
    return np.array([sample_hermitian_increment(N, 1.0, beta, rng) for _ in range(n)])


@pytest.mark.parametrize("beta", [1, 2])
def test_increment_variances(beta):
    rng = substream(SEED, "test-increment", beta)
    n = 100_000
    H = _draws(n, 10, beta, rng)
    off = H[:, 0, 1]
    diag = H[:, 0, 0].real
    v_off = np.mean(np.abs(off) ** 2)
    se_off = np.std(np.abs(off) ** 2) / np.sqrt(n)
    assert abs(v_off - 0.1) < 3 * se_off
    v_diag = np.mean(diag ** 2)
    se_diag = np.std(diag ** 2) / np.sqrt(n)
    assert abs(v_diag - 2.0 / (beta * 10)) < 3 * se_diag
    # centred entries
    m = H.mean(axis=0)
    se = H.std(axis=0) / np.sqrt(n)
    z = np.abs(m.real) / np.where(se > 0, se, 1)
    assert np.mean(z < 3) > 0.97
    np.testing.assert_allclose(H, np.conj(np.swapaxes(H, 1, 2)))


def test_increment_rejects_bad_dt():
    with pytest.raises(ConfigError):
        sample_hermitian_increment(3, 0.0, 1, substream(1, "x"))


def test_evolve_zero_time_returns_A():
    A = np.diag([2.0, 1.0, -1.0])
    out = evolve(A, MatrixPathConfig(N=3, t_max=0.0))
    assert len(out) == 1
    np.testing.assert_array_equal(out[0], A)


def test_evolve_rejects_non_hermitian():
    with pytest.raises(InputError):
        evolve(np.array([[0.0, 1.0], [0.0, 0.0]]), MatrixPathConfig(N=2))


def test_config_validation():
    with pytest.raises(ConfigError):
        MatrixPathConfig(N=3, beta=4)
    with pytest.raises(ConfigError):
        MatrixPathConfig(N=3, t_max=1.0, checkpoints=(0.5, 2.0))
    with pytest.raises(ConfigError):
        MatrixPathConfig(N=3, n_samples=0)
    with pytest.raises(ConfigError):
        MatrixPathConfig(N=3, dynamics="brownian")


@pytest.mark.parametrize("dynamics,t", [("additive", 1.0), ("ou", 12.0)])
def test_spectrum_is_semicircle(dynamics, t):
    N = 200
    cfg = MatrixPathConfig(N=N, t_max=t, dynamics=dynamics, seed=SEED)
    X = evolve(np.zeros((N, N)), cfg)[-1]
    w = np.linalg.eigvalsh(X)
    assert kstest(w, semicircle_cdf).statistic < 0.05


@pytest.mark.parametrize("beta", [1, 2])
def test_ou_marginal_n1(beta):
    a, t, n = 1.5, 0.7, 20_000
    cfg = MatrixPathConfig(N=1, beta=beta, t_max=t, dynamics="ou", seed=SEED)
    x = np.array([evolve(np.array([[a]]), cfg, s)[-1][0, 0].real for s in range(n)])
    mean, var = np.exp(-t / 2) * a, (2.0 / beta) * (-np.expm1(-t))
    assert abs(x.mean() - mean) < 3 * np.sqrt(var / n)
    assert abs(x.var(ddof=1) - var) < 3 * var * np.sqrt(2.0 / n)


def test_overlaps_of_A_itself_are_identity():
    A = np.diag([3.0, 1.0, 0.5, -2.0])
    rec = eigen_overlaps(A, initial_basis(A))
    np.testing.assert_allclose(rec.squared_overlaps, np.eye(4), atol=1e-15)
    np.testing.assert_array_equal(rec.eigenvalues, [3.0, 1.0, 0.5, -2.0])


@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 12), beta=st.sampled_from([1, 2]))
@settings(max_examples=40, deadline=None)
def test_overlaps_bistochastic(seed, N, beta):
    rng = substream(seed, "bistochastic")
    A = sample_hermitian_increment(N, 1.0, beta, rng)
    X = A + sample_hermitian_increment(N, 0.3, beta, rng)
    rec = eigen_overlaps(X, initial_basis(A))
    sq = rec.squared_overlaps
    np.testing.assert_allclose(sq.sum(axis=0), 1.0, atol=1e-8)
    np.testing.assert_allclose(sq.sum(axis=1), 1.0, atol=1e-8)
    assert sq.min() >= 0 and sq.max() <= 1 + 1e-12
    assert np.all(np.diff(rec.eigenvalues) <= 0)


def test_non_orthonormal_basis_rejected():
    with pytest.raises(InputError):
        eigen_overlaps(np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_degenerate_eigenvalues_flagged():
    rec = eigen_overlaps(np.diag([1.0, 1.0, 0.0]), np.eye(3))
    assert rec.degenerate.tolist() == [True, True, False]


def test_mean_overlaps_at_time_zero():
    A = discretize(SpectralModel(Semicircle(2.0)), 8).matrix()
    mo = mc_mean_overlaps(A, MatrixPathConfig(N=8, t_max=0.5, checkpoints=(0.0, 0.5), n_samples=5), 3)
    expected = np.zeros(8)
    expected[2] = 1.0
    np.testing.assert_allclose(mo.mean[0], expected, atol=1e-15)
    np.testing.assert_array_equal(mo.std_err[0], 0.0)


def test_mean_overlaps_deterministic_and_worker_independent():
    A = discretize(SpectralModel(Semicircle(2.0)), 12).matrix()
    cfg = MatrixPathConfig(N=12, t_max=0.3, checkpoints=(0.1, 0.3), n_samples=30, seed=7)
    a = mc_mean_overlaps(A, cfg, 5, workers=1)
    b = mc_mean_overlaps(A, cfg, 5, workers=3, chunk=7)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.std_err, b.std_err)
    c = mc_mean_overlaps(A, MatrixPathConfig(N=12, t_max=0.3, checkpoints=(0.1, 0.3),
                                             n_samples=30, seed=8), 5)
    assert not np.array_equal(a.mean, c.mean)


def test_exchangeable_columns_for_zero_source():
    N, n = 6, 400
    cfg = MatrixPathConfig(N=N, t_max=0.5, n_samples=n, seed=SEED)
    cols = [mc_mean_overlaps(np.zeros((N, N)), cfg, j) for j in (1, 4, 6)]
    for mo in cols:
        # every entry has expectation 1/N whatever j is
        z = (mo.mean[0] - 1.0 / N) / mo.std_err[0]
        assert np.max(np.abs(z)) < 4
        assert mo.mean[0].sum() == pytest.approx(1.0, abs=1e-12)


def test_factor_model_half_time_overlap():
    N, n = 200, 200
    A = discretize(SpectralModel.factor(5.0), N).matrix()
    mo = mc_mean_overlaps(A, MatrixPathConfig(N=N, t_max=12.5, n_samples=n, seed=SEED), 1)
    assert abs(mo.mean[0, 0] - 0.5) < 3 * mo.std_err[0, 0]


def test_rows_schema():
    A = np.diag([1.0, 0.0])
    mo = mc_mean_overlaps(A, MatrixPathConfig(N=2, t_max=0.1, n_samples=3), 1)
    rows = list(mo.rows())
    assert len(rows) == 2 and rows[0][:3] == (0.1, 1, 1) and rows[0][-1] == 3
