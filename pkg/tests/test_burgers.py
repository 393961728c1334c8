import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from eigenflow.burgers import (
    BulkProfile, boundary_G, bulk_state, density_rho, local_resolvent_U, overlap_kernel_w,
    overlap_kernel_w_ou, quantile_lambda, solve_G, subordination_outside, support_edges, velocity_v,
)
from eigenflow.errors import DomainError
from eigenflow.spectral_model import Semicircle, SpectralModel, Triangular, Uniform, ZeroBulk
from eigenflow.stationary import kernel_closed_array

ZERO = SpectralModel(ZeroBulk())
SC = SpectralModel(Semicircle(2.0))
MODELS = [SC, SpectralModel(Uniform(-1.0, 1.0)), SpectralModel(Triangular(-1.0, 0.3, 1.5))]


def _id(m):
    return type(m.bulk).__name__


def semicircle_G(z, t):
    # branch with Im G < 0 for Im z > 0
    r = np.sqrt(z - 2 * np.sqrt(t)) * np.sqrt(z + 2 * np.sqrt(t))
    return (z - r) / (2 * t)


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_zero_bulk_matches_closed_form(t):
    zs = (np.linspace(-3, 3, 20) + 1j * np.linspace(0.05, 1.0, 20))
    for z in zs:
        assert abs(solve_G(ZERO, z, t).G - semicircle_G(z, t)) < 1e-10


def test_golden_ratio_value():
    sol = solve_G(ZERO, 1j, 1.0)
    assert sol.G == pytest.approx(1j * (1 - np.sqrt(5)) / 2, abs=1e-10)
    assert sol.G.imag == pytest.approx(-0.6180, abs=1e-4)


def test_time_zero_is_source_transform():
    assert solve_G(ZERO, 2 + 1j, 0.0).G == pytest.approx(1 / (2 + 1j))
    z = 0.4 + 0.3j
    assert solve_G(SC, z, 0.0).G == pytest.approx(complex(Semicircle(2.0).stieltjes(z)), abs=1e-14)


def test_fixed_point_residual():
    sol = solve_G(SC, 0.3 + 0.05j, 0.5)
    assert sol.residual < 1e-12
    mapped = complex(Semicircle(2.0).stieltjes(sol.z - sol.t * sol.G))
    assert abs(sol.G - mapped) < 1e-12


def test_solve_G_domain():
    with pytest.raises(DomainError):
        solve_G(SC, 0.5, 1.0)
    with pytest.raises(DomainError):
        solve_G(SC, 0.5 + 1j, -1.0)


@pytest.mark.parametrize("model", MODELS, ids=_id)
@given(x=st.floats(-6, 6), y=st.floats(0.01, 4), t=st.floats(0, 3))
@settings(max_examples=30, deadline=None)
def test_herglotz(model, x, y, t):
    assert solve_G(model, complex(x, y), t).G.imag < 0


@pytest.mark.parametrize("model", MODELS, ids=_id)
@pytest.mark.parametrize("t", [0.2, 1.0])
def test_large_z_decay(model, t):
    lo, hi = model.bulk.support()
    R = 10 * (max(abs(lo), abs(hi)) + 2 * np.sqrt(t))
    for phase in np.linspace(0.1, np.pi - 0.1, 7):
        z = 1.01 * R * np.exp(1j * phase)
        assert abs(z * solve_G(model, z, t).G - 1) < 2 / abs(z)


def test_density_examples():
    assert density_rho(ZERO, 0.0, 1.0) == pytest.approx(1 / np.pi, abs=1e-6)
    assert density_rho(ZERO, 3.0, 1.0) == pytest.approx(0.0, abs=1e-6)
    assert density_rho(ZERO, 0.0, 1.0, method="exact") == pytest.approx(1 / np.pi, abs=1e-12)
    assert density_rho(SC, 0.5, 0.0) == pytest.approx(float(Semicircle(2.0).pdf(0.5)))


def test_density_normalized():
    lo, hi = support_edges(SC, 0.5)
    total = quad(lambda x: density_rho(SC, x, 0.5, method="exact"), lo, hi, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_semicircle_stays_semicircle():
    # Semicircle(2) after time t is the semicircle of radius 2 sqrt(1 + t)
    t = 0.7
    r = 2 * np.sqrt(1 + t)
    lo, hi = support_edges(SC, t)
    assert (lo, hi) == (pytest.approx(-r, abs=1e-10), pytest.approx(r, abs=1e-10))
    lam = np.linspace(-r + 0.05, r - 0.05, 11)
    exact = np.sqrt(r * r - lam * lam) / (np.pi * r * r / 2)
    np.testing.assert_allclose(density_rho(SC, lam, t, method="exact"), exact, atol=1e-10)
    np.testing.assert_allclose(density_rho(SC, lam, t), exact, atol=1e-5)


def test_extrapolation_agrees_with_boundary_solve():
    m = SpectralModel(Uniform(-1.0, 1.0))
    lam = np.linspace(-1.2, 1.2, 9)
    np.testing.assert_allclose(density_rho(m, lam, 0.3), density_rho(m, lam, 0.3, method="exact"),
                               atol=1e-4)


def test_velocity_examples():
    assert velocity_v(ZERO, 1.0, 1.0) == pytest.approx(0.5, abs=1e-6)
    for lam in (-1.5, 0.3, 1.1):
        assert velocity_v(ZERO, lam, 2.0, method="exact") == pytest.approx(lam / 4, abs=1e-10)
    assert velocity_v(SC, 0.0, 0.8) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(DomainError):
        velocity_v(ZERO, 2.5, 1.0)


def test_quantiles_move_with_velocity():
    x, t, dt = 0.3, 0.5, 1e-4
    speed = (quantile_lambda(SC, x, t + dt) - quantile_lambda(SC, x, t - dt)) / (2 * dt)
    assert speed == pytest.approx(velocity_v(SC, quantile_lambda(SC, x, t), t), abs=1e-3)


def test_quantile_examples():
    assert quantile_lambda(SC, 0.5, 0.7) == pytest.approx(0.0, abs=1e-6)
    assert quantile_lambda(ZERO, 1e-9, 1.0) == pytest.approx(2.0, abs=1e-4)
    assert quantile_lambda(SC, 0.2, 0.0) == Semicircle(2.0).quantile(0.2)
    with pytest.raises(DomainError):
        quantile_lambda(SC, 1.0, 0.5)


@pytest.mark.parametrize("model", MODELS, ids=_id)
def test_profile_inverts_tail_cdf(model):
    prof = BulkProfile(model, 0.4)
    assert abs(prof.mass_error) < 1e-10
    x = np.array([0.05, 0.3, 0.5, 0.9])
    np.testing.assert_allclose(prof.tail_cdf(prof.quantile(x)), x, atol=1e-10)


def test_local_resolvent_examples():
    z = 0.4 + 0.2j
    assert local_resolvent_U(SC, z, 0.7, 0.0) == pytest.approx(1 / (z - 0.7))
    assert local_resolvent_U(ZERO, z, 0.0, 0.6) == pytest.approx(solve_G(ZERO, z, 0.6).G, abs=1e-12)


def test_local_resolvent_averages_to_G():
    z, t = 0.2 + 0.1j, 0.3
    d = Semicircle(2.0)
    f = lambda a, part: getattr(local_resolvent_U(SC, z, a, t) * d.pdf(a), part)
    total = complex(quad(f, -2, 2, args=("real",), epsabs=1e-13, limit=200)[0],
                    quad(f, -2, 2, args=("imag",), epsabs=1e-13, limit=200)[0])
    assert abs(total - solve_G(SC, z, t).G) < 1e-8


@pytest.mark.parametrize("model,mu,t", [(SC, 0.0, 0.25), (SC, 1.2, 0.5),
                                        (SpectralModel(Uniform(-1.0, 1.0)), -0.4, 0.1)],
                         ids=["sc-0", "sc-1.2", "uniform"])
def test_kernel_normalized(model, mu, t):
    lo, hi = support_edges(model, t)
    f = lambda lam: overlap_kernel_w(model, lam, mu, t) * density_rho(model, lam, t, method="exact")
    total = quad(f, lo + 1e-12, hi - 1e-12, limit=400, points=[mu])[0]
    assert total == pytest.approx(1.0, abs=1e-4)


def test_kernel_domain():
    with pytest.raises(DomainError):
        overlap_kernel_w(SC, 5.0, 0.0, 0.5)
    with pytest.raises(DomainError):
        overlap_kernel_w(SC, 0.0, 0.0, 0.0)


def test_ou_kernel_matches_stationary_closed_form():
    t = 0.25
    grid = np.linspace(-1.6, 1.6, 5)
    for lam in grid:
        for mu in grid:
            w = overlap_kernel_w_ou(SC, lam, mu, t)
            assert w == pytest.approx(float(kernel_closed_array(lam, mu, t)), abs=1e-3)


def test_boundary_value_outside_support_is_real():
    G = boundary_G(SC, np.array([3.5, -4.0]), 0.5)
    np.testing.assert_array_equal(G.imag, 0.0)
    w = subordination_outside(SC, 3.5, 0.5)
    assert w + 0.5 * float(np.real(Semicircle(2.0).stieltjes(w + 0j))) == pytest.approx(3.5, abs=1e-12)
    with pytest.raises(DomainError):
        subordination_outside(SC, 1.0, 0.5)


@pytest.mark.parametrize("model", MODELS, ids=_id)
def test_bulk_state_invariants(model):
    bs = bulk_state(model, 0.3)
    assert np.all(bs.rho >= 0)
    assert np.trapezoid(bs.rho, bs.lambda_grid) == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(bs.lambda_of_x) <= 0)
    # d lam / dx = -1 / rho away from the edges
    mid = slice(20, -20)
    dldx = np.gradient(bs.lambda_of_x, bs.x_grid)[mid]
    rho = np.interp(bs.lambda_of_x[mid], bs.lambda_grid, bs.rho)
    np.testing.assert_allclose(dldx * rho, -1.0, atol=2e-3)
