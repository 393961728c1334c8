import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from eigenflow.errors import ConfigError, DomainError
from eigenflow.spectral_model import (
    DiscreteSpectrum, Semicircle, SpectralModel, Tabulated, Triangular, Uniform, ZeroBulk,
    bulk_support, density_from_dict, discretize, quantile_a,
)

PARAMETRIC = [Semicircle(2.0), Semicircle(0.7), Uniform(-1.0, 1.0), Uniform(0.5, 3.0),
              Triangular(-1.0, 0.2, 2.0), Triangular(0.0, 0.0, 1.0)]


def _id(d):
    return type(d).__name__


def test_quantile_examples():
    assert quantile_a(SpectralModel(Semicircle(2.0)), 0.5) == pytest.approx(0.0, abs=1e-12)
    assert quantile_a(SpectralModel(Uniform(-1.0, 1.0)), 0.25) == pytest.approx(0.5, abs=1e-14)
    assert quantile_a(SpectralModel.factor(5.0), 0.3) == 0.0


@pytest.mark.parametrize("x", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_quantile_domain(x):
    with pytest.raises(DomainError):
        quantile_a(SpectralModel(Semicircle(2.0)), x)


def test_discretize_examples():
    np.testing.assert_array_equal(discretize(SpectralModel.factor(5.0), 3).values, [5.0, 0.0, 0.0])
    sc = discretize(SpectralModel(Semicircle(2.0)), 2).values
    assert sc[0] == pytest.approx(0.0, abs=1e-12)
    assert sc[1] == pytest.approx(Semicircle(2.0).quantile(0.75), abs=1e-12)
    u = discretize(SpectralModel(Uniform(-1.0, 1.0)), 4).values
    np.testing.assert_allclose(u, [0.5, 0.0, -0.5, -0.75], atol=1e-14)


def test_discretize_needs_more_than_spikes():
    with pytest.raises(ConfigError):
        discretize(SpectralModel(Semicircle(1.0), (3.0, 2.0)), 2)


def test_discretize_spikes_first():
    spec = discretize(SpectralModel(Uniform(-1, 1), (4.0, 2.5)), 10)
    assert spec.values[:2].tolist() == [4.0, 2.5]
    assert spec.n_spikes == 2
    assert np.all(np.diff(spec.values) <= 0)


def test_bulk_support_examples():
    assert bulk_support(SpectralModel(Semicircle(2.0))) == (-2.0, 2.0)
    assert bulk_support(SpectralModel(Uniform(-1.0, 1.0))) == (-1.0, 1.0)
    tab = Tabulated.from_density(Semicircle(2.0), K=1025)
    lo, hi = bulk_support(SpectralModel(tab))
    assert lo == pytest.approx(-2.0, abs=1e-9) and hi == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("d", PARAMETRIC, ids=_id)
def test_density_integrates_to_one(d):
    lo, hi = d.support()
    pts = [getattr(d, "peak", None)] if isinstance(d, Triangular) else None
    total = quad(d.pdf, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    assert abs(total - 1.0) < 1e-10


@pytest.mark.parametrize("d", PARAMETRIC + [Tabulated.from_density(Semicircle(1.0), 9)], ids=_id)
def test_stieltjes_matches_quadrature(d):
    lo, hi = d.support()
    pts = list(d.values[1:-1]) if isinstance(d, Tabulated) else None
    for w in (0.3 + 0.4j, lo - 0.5 + 0.1j, hi + 1.0 + 0.0j, 0.1 + 2.0j):
        re = quad(lambda x: (d.pdf(x) / (w - x)).real, lo, hi, points=pts, limit=400, epsabs=1e-12)[0]
        im = quad(lambda x: (d.pdf(x) / (w - x)).imag, lo, hi, points=pts, limit=400, epsabs=1e-12)[0]
        assert abs(complex(d.stieltjes(w)) - (re + 1j * im)) < 1e-8


@pytest.mark.parametrize("d", PARAMETRIC, ids=_id)
@given(x1=st.floats(1e-6, 1 - 1e-6), x2=st.floats(1e-6, 1 - 1e-6))
@settings(max_examples=40, deadline=None)
def test_quantile_non_increasing(d, x1, x2):
    lo_x, hi_x = min(x1, x2), max(x1, x2)
    assert d.quantile(lo_x) >= d.quantile(hi_x) - 1e-12


@pytest.mark.parametrize("d", PARAMETRIC, ids=_id)
@given(x=st.floats(1e-4, 1 - 1e-4))
@settings(max_examples=40, deadline=None)
def test_quantile_inverts_tail_cdf(d, x):
    assert float(d.tail_cdf(d.quantile(x))) == pytest.approx(x, abs=1e-10)


@pytest.mark.parametrize("d", PARAMETRIC, ids=_id)
@pytest.mark.parametrize("N", [10, 57, 400])
def test_discretized_bulk_kolmogorov_distance(d, N):
    vals = discretize(SpectralModel(d), N).values
    grid = np.sort(vals)
    ecdf_hi = np.arange(1, N + 1) / N
    ecdf_lo = np.arange(0, N) / N
    cdf = 1.0 - d.tail_cdf(grid)
    dist = max(np.max(np.abs(ecdf_hi - cdf)), np.max(np.abs(ecdf_lo - cdf)))
    assert dist <= 2.0 / N


def test_spike_validation():
    with pytest.raises(ConfigError):
        SpectralModel(Semicircle(2.0), (1.5,))
    with pytest.raises(ConfigError):
        SpectralModel(Semicircle(2.0), (3.0, 4.0))
    with pytest.raises(ConfigError):
        DiscreteSpectrum([1.0, 2.0])


def test_tabulated_validation():
    with pytest.raises(ConfigError):
        Tabulated((0.0, 1.0))
    with pytest.raises(ConfigError):
        Tabulated((1.0,))


@pytest.mark.parametrize("model", [SpectralModel(Semicircle(2.0), (3.5,)), SpectralModel.factor(5.0, 3.0),
                                   SpectralModel(Triangular(-1.0, 0.5, 1.0)),
                                   SpectralModel(Tabulated((1.0, 0.2, -1.0)))], ids=_id)
def test_model_dict_round_trip(model):
    assert SpectralModel.from_dict(model.to_dict()) == model


def test_unknown_density_kind():
    with pytest.raises(ConfigError):
        density_from_dict({"kind": "gamma"})
    with pytest.raises(ConfigError):
        density_from_dict({"kind": "uniform", "low": 0})


def test_zero_bulk_is_point_mass():
    z = ZeroBulk()
    assert z.support() == (0.0, 0.0)
    assert complex(z.stieltjes(2.0 + 1.0j)) == pytest.approx(1.0 / (2.0 + 1.0j))
