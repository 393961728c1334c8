"""
Isolated eigenvalues (spikes) above the bulk and their eigenvectors.

A spike ``a_j`` above the initial support moves as ``d lam_j/dt = G(lam_j, t)``.
In subordination variables its point ``omega`` never moves, which gives

    lam_j(t) = a_j + t G_A(a_j),    kappa(t) = 1 + t G_A'(a_j),

where ``kappa = d lam / d omega`` vanishes exactly when the spike touches the
bulk edge. The principal overlap is ``f(t) = exp(-int_0^t phi)`` with
``phi(s) = int rho(lam, s) / (lam_j(s) - lam)**2 dlam = -G_A'(a_j) / kappa(s)``,
so ``f = kappa`` while the spike is separated.

The transverse overlaps ``u(x, t)`` (rescaled squared overlaps of the bulk
eigenvectors at quantile level x with the initial spike direction) solve a
linear non-local equation with source ``f / (lam_j - lam(x, t))**2``; its
solution is ``w(lam(x, t), a_j, t)``, the bulk overlap kernel evaluated at
the spike. Fluctuations of ``<psi_j^t|psi_j^0>`` around the conditional mean
are asymptotically Gaussian with variance ``g2 / N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import stats
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import eigvalsh

from .burgers import BulkProfile, _omega_edges, boundary_G, subordination_outside, support_edges
from .errors import ConfigError, DomainError, NumericError, StepSizeError
from .matrix_mc import MatrixPathConfig, _eigh_desc, evolve
from .parallel import map_ordered
from .rng import substream
from .spectral_model import Semicircle, SpectralModel, Tabulated, ZeroBulk, as_model, discretize

__all__ = [
    "SpikeTrajectory", "SpikeOverlapState", "CLTReport", "PrincipalOverlapMC",
    "spike_trajectory", "critical_time", "phi", "principal_overlap_f", "mean_overlap",
    "transverse_h", "transverse_exact", "transverse_pde", "variance_g2", "moments_gn",
    "clt_report", "mc_principal_overlap",
    "factor_position", "factor_overlap", "factor_phi", "factor_h", "factor_g2",
]

ALIVE_KAPPA = 1e-3


def _spike(model: SpectralModel, j: int) -> float:
    if not 1 <= j <= model.n_spikes:
        raise ConfigError(f"spike index j={j} not in 1..{model.n_spikes}")
    return float(model.spikes[j - 1])


def _GA(model, a):
    return float(np.real(model.bulk.stieltjes(a + 0j)))


def _dGA(model, a):
    return float(np.real(model.bulk.stieltjes_deriv(a + 0j)))


def _kappa(model, a, t):
    return 1.0 + t * _dGA(model, a)


def critical_time(model, j: int = 1) -> float:
    """Time at which spike j merges with the bulk: ``-1 / G_A'(a_j)``."""
    model = as_model(model)
    return -1.0 / _dGA(model, _spike(model, j))


def _require_alive(model, j, t):
    a = _spike(model, j)
    if np.any(np.asarray(t) < 0):
        raise DomainError("time must be non-negative")
    if np.any(_kappa(model, a, np.max(t)) < ALIVE_KAPPA):
        raise DomainError(f"spike {j} has merged with the bulk before t={np.max(t):.6g} "
                          f"(critical time {critical_time(model, j):.6g})")
    return a


@dataclass(frozen=True)
class SpikeTrajectory:
    """Spike path on a time grid.

    ``alive`` is True while ``kappa = d lam / d omega >= 1e-3``; after death
    ``position`` follows the upper edge. ``death_time`` is the root of
    ``kappa`` (linear extrapolation from the last alive steps), or inf.
    """

    j: int
    times: np.ndarray
    position: np.ndarray
    edge: np.ndarray
    alive: np.ndarray
    kappa: np.ndarray
    death_time: float


def _G_real(model, lam, t):
    """``G(lam, t)`` for lam at or above the upper edge (bulk only)."""
    bulk = model.bulk
    edge = support_edges(model, t)[1]
    if t == 0:
        return _GA(model, lam), _dGA(model, lam)
    if lam <= edge:
        w = _omega_edges(bulk, float(t))[1]
    else:
        w = subordination_outside(model, lam, t)
    return _GA(model, w), _dGA(model, w)


def spike_trajectory(model, j: int = 1, t_max: float = 1.0, dt: float | None = None) -> SpikeTrajectory:
    """Integrate ``d lam_j/dt = G(lam_j, t)`` by classical RK4 with ``dt = 1e-3 t_max``."""
    model = as_model(model)
    a = _spike(model, j)
    if t_max < 0:
        raise DomainError("t_max must be non-negative")
    if t_max == 0:
        return SpikeTrajectory(j, np.zeros(1), np.array([a]), np.array([model.bulk.support()[1]]),
                               np.array([True]), np.ones(1), np.inf)
    dt = 1e-3 * t_max if dt is None else float(dt)
    n = int(np.ceil(t_max / dt - 1e-9))
    times = np.linspace(0.0, t_max, n + 1)
    lam = np.empty(n + 1)
    edge = np.empty(n + 1)
    kap = np.empty(n + 1)
    alive = np.zeros(n + 1, dtype=bool)
    lam[0], edge[0], kap[0], alive[0] = a, model.bulk.support()[1], 1.0, True
    f = lambda t, x: _G_real(model, x, t)[0]
    death = np.inf
    for k in range(n):
        t, h, x = times[k], times[k + 1] - times[k], lam[k]
        t1 = times[k + 1]
        edge[k + 1] = support_edges(model, t1)[1]
        if not alive[k]:
            lam[k + 1], kap[k + 1] = edge[k + 1], 0.0
            continue
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t1, x + h * k3)
        x1 = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        lam[k + 1] = x1
        kap[k + 1] = 1.0 + t1 * _G_real(model, x1, t1)[1] if x1 > edge[k + 1] else 0.0
        alive[k + 1] = kap[k + 1] >= ALIVE_KAPPA
        if not alive[k + 1]:
            lam[k + 1] = max(x1, edge[k + 1])
            if k >= 1:
                # kappa is close to linear in t: extrapolate from the last two alive points
                slope = (kap[k] - kap[k - 1]) / (times[k] - times[k - 1])
                death = times[k] - kap[k] / slope if slope < 0 else times[k]
            else:
                death = times[k + 1]
    return SpikeTrajectory(j, times, lam, edge, alive, kap, float(death))


def spike_position(model, t, j: int = 1):
    """``lam_j(t) = a_j + t G_A(a_j)`` (exact solution of the spike equation while alive)."""
    model = as_model(model)
    a = _spike(model, j)
    return a + np.asarray(t, dtype=float) * _GA(model, a)


def _breakpoints(bulk):
    if isinstance(bulk, Tabulated):
        return np.asarray(bulk.values)
    peak = getattr(bulk, "peak", None)
    return np.array([] if peak is None else [peak])


def _bulk_nodes(model, s, m):
    """Midpoint nodes ``lam_k`` in the angle variable and weights ``rho dlam`` for ``rho(., s)``."""
    lo, hi = support_edges(model, s)
    bulk = model.bulk
    if s == 0 and not isinstance(bulk, (Semicircle, ZeroBulk)):
        # hard edges and kinks: composite Gauss-Legendre between breakpoints,
        # on which the source densities are polynomial
        cuts = np.unique(np.concatenate([[lo, hi], _breakpoints(bulk)]))
        k = max(4, m // (cuts.size - 1))
        x, wx = np.polynomial.legendre.leggauss(k)
        mid, half = 0.5 * (cuts[1:] + cuts[:-1]), 0.5 * np.diff(cuts)
        lam = (mid[:, None] + half[:, None] * x).ravel()
        weight = (half[:, None] * wx).ravel() * np.asarray(bulk.pdf(lam), dtype=float)
        return lam, weight, bulk.stieltjes(lam + 0j)
    c, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    theta = (np.arange(m) + 0.5) * np.pi / m
    lam = c + hw * np.cos(theta)
    if s == 0:
        G = model.bulk.stieltjes(lam + 0j) if not isinstance(model.bulk, ZeroBulk) else None
        rho = np.asarray(model.bulk.pdf(lam), dtype=float)
    else:
        G = boundary_G(model, lam, s)
        rho = np.clip(-np.imag(G) / np.pi, 0.0, None)
    weight = rho * hw * np.sin(theta) * np.pi / m
    return lam, weight, G


def _bulk_average(model, s, fn, tol=1e-13, m=64, max_m=1 << 13):
    prev = None
    while True:
        lam, wgt, G = _bulk_nodes(model, s, m)
        val = float(np.sum(wgt * fn(lam, G)))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        if m >= max_m:
            raise NumericError(f"bulk quadrature did not converge at s={s}: {prev} vs {val}")
        prev, m = val, 2 * m


def phi(model, s: float, j: int = 1, method: str = "subordination") -> float:
    """``phi(s) = int rho(lam, s) / (lam_j(s) - lam)**2 dlam``.

    ``method="subordination"`` uses ``-G_A'(a_j) / kappa(s)``;
    ``method="quadrature"`` integrates against the solved density.
    """
    model = as_model(model)
    a = _require_alive(model, j, s)
    if method == "subordination":
        return -_dGA(model, a) / _kappa(model, a, s)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if s == 0 and isinstance(model.bulk, ZeroBulk):
        return 1.0 / a ** 2
    lam1 = float(spike_position(model, s, j))
    return _bulk_average(model, float(s), lambda lam, G: 1.0 / (lam1 - lam) ** 2)


def principal_overlap_f(model, t, j: int = 1):
    """``f(t) = exp(-int_0^t phi)`` while the spike is alive, 0 afterwards.

    The antiderivative of ``phi`` is ``-log kappa(t)`` in closed form.
    """
    model = as_model(model)
    a = _spike(model, j)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    kap = 1.0 + t * _dGA(model, a)
    alive = kap >= ALIVE_KAPPA
    integral = -np.log(np.where(alive, kap, 1.0))
    out = np.where(alive, np.exp(-integral), 0.0)
    return float(out) if out.ndim == 0 else out


def mean_overlap(model, t, j: int = 1):
    """Limit of the mean overlap ``<psi_j^t|psi_j^0>``: ``exp(-int phi / 2) = sqrt(f)``."""
    return np.sqrt(principal_overlap_f(model, t, j))


# ---------------------------------------------------------------- transverse overlaps

def transverse_exact(model, x, t, j: int = 1):
    """Closed-form transverse profile ``u(x, t) = w(lam(x, t), a_j, t)``."""
    model = as_model(model)
    a = _spike(model, j)
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.zeros_like(x)
    lam = _lambda_of_x(model, x, t)
    G = boundary_G(model, lam, t)
    omega = lam - t * G
    return t / np.abs(omega - a) ** 2


def transverse_h(model, s: float, j: int = 1) -> float:
    """``h(s) = int w(mu, s) rho(mu, s) / (lam_j(s) - mu)**2 dmu`` with ``w`` at the spike.

    Uses ``w(mu, s) = s / |omega(mu) - a_j|**2``, ``omega = mu - s G(mu + i0, s)``.
    """
    model = as_model(model)
    a = _require_alive(model, j, s)
    if s == 0:
        return 0.0
    lam1 = float(spike_position(model, s, j))
    return _bulk_average(model, float(s),
                         lambda lam, G: s / np.abs(lam - s * G - a) ** 2 / (lam1 - lam) ** 2)


def _semicircle_radius(model, t):
    bulk = model.bulk
    if isinstance(bulk, ZeroBulk):
        return 2.0 * np.sqrt(t)
    if isinstance(bulk, Semicircle):
        return np.sqrt(bulk.radius ** 2 + 4.0 * t)
    return None


@lru_cache(maxsize=16)
def _unit_semicircle_quantile(x: tuple):
    return Semicircle(1.0).quantile(np.asarray(x))


def _lambda_of_x(model, x, t):
    r = _semicircle_radius(model, t)
    x = np.asarray(x, dtype=float)
    if r is not None:
        return r * _unit_semicircle_quantile(tuple(np.atleast_1d(x).tolist())).reshape(x.shape)
    if t == 0:
        return model.bulk.quantile(x)
    return BulkProfile(model, t).quantile(x)


class _QuantileFlow:
    """``lam(x, t)`` on a fixed x-grid for all t in [0, t_max]."""

    def __init__(self, model, x, t_max, n_nodes=65):
        self.model = model
        self.x = x
        r0 = _semicircle_radius(model, 1.0)
        if r0 is not None:
            self.q = _unit_semicircle_quantile(tuple(x.tolist()))
            self.spline = None
        else:
            # nodes uniform in sqrt(t), where the flow is smooth near t = 0
            r = np.linspace(0.0, np.sqrt(t_max), n_nodes)
            lam = np.array([_lambda_of_x(model, x, ri * ri) for ri in r])
            self.spline = CubicSpline(r, lam, axis=0)

    def __call__(self, t):
        if self.spline is None:
            return _semicircle_radius(self.model, t) * self.q
        return self.spline(np.sqrt(t))


@dataclass(frozen=True)
class SpikeOverlapState:
    """Transverse overlap solution; ``u`` has shape (n_x, T)."""

    j: int
    times: np.ndarray
    x: np.ndarray
    f: np.ndarray
    u: np.ndarray
    h: np.ndarray
    g2: np.ndarray
    mass_error: np.ndarray
    steps: int = 0
    clipped: int = 0

    weights: np.ndarray = None

    @property
    def transverse_mass(self):
        return self.weights @ self.u


def _pv_operator(lam, w, ds, correction):
    """Discrete PV operator on the graded quantile grid and its stability radius.

    The grid is uniform in ``s`` with cell weights ``w_k`` (the x-width of
    cell k): ``(L u)_i = sum_{k != i} w_k (u_k - u_i) / (lam_i - lam_k)**2``.
    With ``correction`` the missing self-cell contributes
    ``ds (om u''/2 + om' u' - om u' lam''/lam') / lam'**2`` where
    ``om = dx/ds`` and derivatives in ``s`` come from central differences.
    """
    d = lam[:, None] - lam[None, :]
    np.fill_diagonal(d, np.inf)
    W = w[None, :] / (d * d)
    rate = W.sum(axis=1)
    if not correction:
        return W, rate, None
    om = w / ds
    lp = np.gradient(lam, ds)
    lpp = np.gradient(lp, ds)
    return W, rate, (lp, lpp, om, np.gradient(om, ds))


def _apply(W, rate, corr, u, ds, scale=1.0):
    out = W @ u - rate * u
    if corr is not None:
        lp, lpp, om, omp = corr
        up = np.gradient(u, ds)
        upp = np.gradient(up, ds)
        out = out + ds * (0.5 * om * upp + omp * up - om * up * lpp / lp) / (lp ** 2 * scale)
    return out


def transverse_pde(model, t_max: float, x_points: int = 256, j: int = 1, times=None,
                   dt: float | None = None, correction: bool = True, safety: float = 0.5,
                   t_start: float | None = None, grading: float = 3.0) -> SpikeOverlapState:
    """Method of lines for the transverse overlap equation.

    The x-grid is ``x_i = s_i**grading`` on the midpoint grid
    ``s_i = (i + 1/2)/M``, refined toward the upper edge ``x = 0`` where the
    profile peaks as the spike approaches the bulk. It is carried by the
    quantile flow, so ``lam_i(t) = lam(x_i, t)`` moves with the bulk. The PV
    integral is a weighted sum over the other grid points (the self-cell is
    restored by a second-derivative correction), the source is
    ``f(t) / (lam_j(t) - lam_i)**2``, and Heun steps of size
    ``safety / max_i sum_k W_ik`` keep the scheme stable (Heun is stable
    for ``dt * spectral radius <= 2``; the row-sum bound covers half of it).
    ``h`` and ``g2`` are integrated along from the computed ``u``.
    """
    model = as_model(model)
    a = _require_alive(model, j, t_max)
    if x_points < 128:
        raise ConfigError("x_points must be at least 128")
    if not grading >= 1:
        raise ConfigError("grading must be at least 1")
    times = np.linspace(0.0, t_max, 41) if times is None else np.asarray(times, dtype=float)
    if times[0] != 0 or np.any(np.diff(times) <= 0) or times[-1] > t_max:
        raise ConfigError("times must start at 0, increase and end by t_max")
    M = int(x_points)
    ds = 1.0 / M
    s_grid = (np.arange(M) + 0.5) * ds
    x = s_grid ** grading
    # exact cell widths, so the weights sum to one
    w = np.diff(np.arange(M + 1, dtype=float) ** grading) / float(M) ** grading
    flow = _QuantileFlow(model, x, t_max)
    dGA, GA = _dGA(model, a), _GA(model, a)
    lam1 = lambda t: a + t * GA
    fval = lambda t: 1.0 + t * dGA
    phival = lambda t: -dGA / (1.0 + t * dGA)
    # the bulk of a degenerate source is a point mass: start just after t = 0
    t0 = (1e-9 * t_max if isinstance(model.bulk, ZeroBulk) else 0.0) if t_start is None else t_start

    if flow.spline is None:
        # semicircle family: lam = r(t) q(x), so the operator is the unit one over r**2
        unit = _pv_operator(flow.q, w, ds, correction)

    def operator(t, lam):
        if flow.spline is None:
            r2 = _semicircle_radius(model, t) ** 2
            W, rate, corr = unit
            return W / r2, rate / r2, corr, r2
        W, rate, corr = _pv_operator(lam, w, ds, correction)
        return W, rate, corr, 1.0

    def rhs(t, u, g2):
        lam = flow(t)
        W, rate, corr, r2 = operator(t, lam)
        src = fval(t) / (lam1(t) - lam) ** 2
        du = _apply(W, rate, corr, u, ds, r2) + src
        h = float(w @ (u / (lam1(t) - lam) ** 2))
        return du, -phival(t) * g2 + h, float(rate.max()), h

    u = np.zeros(M)
    g2 = 0.0
    t = t0
    out_u = np.zeros((M, times.size))
    out_h = np.zeros(times.size)
    out_g = np.zeros(times.size)
    steps = clipped = 0
    k = int(np.searchsorted(times, t0, side="right"))
    while k < times.size:
        du, dg, rmax, h_now = rhs(t, u, g2)
        bound = safety / rmax
        if dt is not None and dt > 1.0 / rmax:
            raise StepSizeError(f"dt={dt} exceeds the stability bound {1.0 / rmax:.3e} at t={t:.4g}")
        step = min(bound if dt is None else dt, times[k] - t)
        u_pred = u + step * du
        g_pred = g2 + step * dg
        du2, dg2, _, _ = rhs(t + step, u_pred, g_pred)
        u = u + 0.5 * step * (du + du2)
        g2 = g2 + 0.5 * step * (dg + dg2)
        if np.any(u < 0):
            clipped += int(np.sum(u < 0))
            u = np.clip(u, 0.0, None)
        t += step
        steps += 1
        if abs(t - times[k]) <= 1e-12 * max(1.0, times[k]):
            t = times[k]
            out_u[:, k] = u
            out_h[k] = float(w @ (u / (lam1(t) - flow(t)) ** 2))
            out_g[k] = g2
            k += 1
    f = principal_overlap_f(model, times, j)
    mass_error = f + w @ out_u - 1.0
    return SpikeOverlapState(j, times, x, np.asarray(f), out_u, out_h, out_g, mass_error,
                             steps, clipped, w)


# ---------------------------------------------------------------- Gaussian fluctuations

@lru_cache(maxsize=64)
def _h_interpolant(model: SpectralModel, j: int, t: float, tol=1e-13):
    """Chebyshev interpolant of ``h`` on [0, t], refined until the tail coefficients are below tol."""
    deg = 16
    while True:
        nodes = 0.5 * t * (1.0 - np.cos(np.pi * np.arange(deg + 1) / deg))
        vals = np.array([transverse_h(model, s, j) for s in nodes])
        coef = C.chebfit(2.0 * nodes / t - 1.0, vals, deg)
        scale = max(np.max(np.abs(vals)), 1e-300)
        if np.max(np.abs(coef[-3:])) <= tol * scale or deg >= 512:
            return coef
        deg *= 2


def _ladder(model, j, t, n_max):
    """Solve the moment ladder ``g_n' = -(n/2) phi g_n + n(n-1)/2 g_{n-2} h`` on [0, t]."""
    a = _require_alive(model, j, t)
    if t == 0:
        return np.zeros(n_max // 2)
    coef = _h_interpolant(model, j, float(t))
    dGA = _dGA(model, a)
    orders = np.arange(2, n_max + 1, 2)

    def rhs(s, g):
        h = C.chebval(2.0 * s / t - 1.0, coef)
        ph = -dGA / (1.0 + s * dGA)
        prev = np.concatenate([[1.0], g[:-1]])
        return -0.5 * orders * ph * g + 0.5 * orders * (orders - 1) * prev * h

    sol = solve_ivp(rhs, (0.0, t), np.zeros(orders.size), method="DOP853",
                    rtol=1e-13, atol=1e-18)
    if not sol.success:
        raise NumericError(f"moment ladder integration failed: {sol.message}")
    return sol.y[:, -1]


@lru_cache(maxsize=256)
def _ladder_cached(model, j, t, n_max):
    return _ladder(model, j, t, n_max)


def variance_g2(model, t: float, j: int = 1) -> float:
    """``g2(t) = int_0^t exp(-int_s^t phi) h(s) ds``."""
    model = as_model(model)
    if t < 0:
        raise DomainError("time must be non-negative")
    return float(_ladder_cached(model, j, float(t), 2)[0])


def moments_gn(model, n: int, t: float, j: int = 1) -> float:
    """Limiting n-th moment ``g^(n)(t)`` of ``sqrt(N)`` times the centred overlap."""
    model = as_model(model)
    n = int(n)
    if n < 0:
        raise DomainError("moment order must be non-negative")
    if n == 0:
        return 1.0
    if n % 2:
        return 0.0
    return float(_ladder_cached(model, j, float(t), n)[n // 2 - 1])


# ---------------------------------------------------------------- factor model closed forms

def factor_position(a, t):
    """Spike path ``a + t / a`` for an all-zero bulk."""
    return a + np.asarray(t, dtype=float) / a


def factor_overlap(a, t):
    """Principal overlap ``max(1 - t / a**2, 0)`` for an all-zero bulk."""
    return np.maximum(1.0 - np.asarray(t, dtype=float) / a ** 2, 0.0)


def factor_phi(a, s):
    return 1.0 / (a * a - np.asarray(s, dtype=float))


def factor_h(a, s):
    s = np.asarray(s, dtype=float)
    return s * a * a / (a * a - s) ** 3


def factor_g2(a, t):
    """``g2(t) = (a**2 - t) int_0^t s a**2 / (a**2 - s)**4 ds`` in closed form."""
    A = a * a
    F = lambda u: -A / (3.0 * u ** 3) + 1.0 / (2.0 * u ** 2)
    return A * (A - t) * (F(A) - F(A - t))


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class PrincipalOverlapMC:
    """``|<psi_j^t|psi_j^0>|`` sampled at ``times``; ``samples`` is (n_samples, T)."""

    times: np.ndarray
    samples: np.ndarray
    spike_path: np.ndarray = field(repr=False, default=None)

    @property
    def mean(self):
        return self.samples.mean(axis=0)

    @property
    def std_err(self):
        n = self.samples.shape[0]
        return self.samples.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(self.times.size, np.nan)


def mc_principal_overlap(model, N: int, times, n_samples: int, seed: int, beta: int = 1,
                         j: int = 1, workers=None) -> PrincipalOverlapMC:
    """Matrix Monte Carlo of ``|<psi_j^t|psi_j^0>|`` and of ``lam_j(t)`` (the sign is arbitrary)."""
    model = as_model(model)
    _spike(model, j)
    times = np.asarray(times, dtype=float)
    A = discretize(model, N).matrix()
    cfg = MatrixPathConfig(N=N, beta=beta, t_max=float(times[-1]),
                           checkpoints=tuple(times), seed=seed, n_samples=n_samples)

    def one(s):
        ov = np.empty(times.size)
        lam = np.empty(times.size)
        for k, X in enumerate(evolve(A, cfg, s)):
            w, V = _eigh_desc(X)
            ov[k] = abs(V[j - 1, j - 1])
            lam[k] = w[j - 1]
        return ov, lam

    res = map_ordered(one, range(n_samples), workers)
    return PrincipalOverlapMC(times, np.array([r[0] for r in res]), np.array([r[1] for r in res]))


@dataclass(frozen=True)
class CLTReport:
    """Fluctuations of ``sqrt(N) (<psi_j^t|psi_j^0> - conditional mean)`` against ``N(0, g2)``.

    The conditional mean given the eigenvalue path is
    ``exp(-(1/2N) int_0^t sum_{k != j} ds / (lam_j - lam_k)**2)``, evaluated by
    Simpson's rule on the checkpoints. ``*_sample`` fields use the sample
    mean instead, which also contains the fluctuations of the path itself.
    """

    N: int
    t: float
    n_samples: int
    g2: float
    variance: float
    variance_ratio: float
    skewness: float
    excess_kurtosis: float
    ks_distance: float
    variance_sample: float
    variance_ratio_sample: float
    mean_overlap: float
    mean_overlap_theory: float

    def as_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in self.__dict__.items())


def clt_report(model, cfg: MatrixPathConfig, j: int = 1, n_checkpoints: int = 41,
               workers=None) -> CLTReport:
    """Monte Carlo check of the Gaussian limit of the principal overlap at ``cfg.t_max``."""
    model = as_model(model)
    if model.n_spikes != 1:
        raise ConfigError("the CLT report needs exactly one spike")
    t = float(cfg.t_max)
    N = cfg.N
    _require_alive(model, j, t)
    if n_checkpoints < 3 or n_checkpoints % 2 == 0:
        raise ConfigError("n_checkpoints must be odd and at least 3")
    A = discretize(model, N).matrix()
    grid = np.linspace(0.0, t, n_checkpoints)
    path_cfg = MatrixPathConfig(N=N, beta=cfg.beta, t_max=t, checkpoints=tuple(grid),
                                dynamics=cfg.dynamics, seed=cfg.seed, n_samples=cfg.n_samples)

    def one(s):
        mats = evolve(A, path_cfg, s)
        rate = np.empty(grid.size)
        for k, X in enumerate(mats[:-1]):
            w = eigvalsh(X)[::-1]
            d = w[j - 1] - np.delete(w, j - 1)
            rate[k] = np.sum(1.0 / d ** 2) / N
        w, V = _eigh_desc(mats[-1])
        d = w[j - 1] - np.delete(w, j - 1)
        rate[-1] = np.sum(1.0 / d ** 2) / N
        hstep = grid[1] - grid[0]
        integral = hstep / 3.0 * (rate[0] + rate[-1] + 4 * rate[1:-1:2].sum() + 2 * rate[2:-1:2].sum())
        return abs(V[j - 1, j - 1]), np.exp(-0.5 * integral)

    if t == 0:
        ov = np.ones(cfg.n_samples)
        cm = np.ones(cfg.n_samples)
    else:
        res = map_ordered(one, range(cfg.n_samples), workers)
        ov = np.array([r[0] for r in res])
        cm = np.array([r[1] for r in res])
    g2 = variance_g2(model, t, j)
    z = np.sqrt(N) * (ov - cm)
    zs = np.sqrt(N) * (ov - ov.mean())
    var = float(np.var(z, ddof=1)) if z.size > 1 else 0.0
    var_s = float(np.var(zs, ddof=1)) if z.size > 1 else 0.0
    if var > 0:
        zc = z - z.mean()
        skew = float(stats.skew(zc))
        kurt = float(stats.kurtosis(zc))
        ks = float(stats.kstest(zc, "norm", args=(0.0, np.sqrt(var))).statistic)
    else:
        skew = kurt = ks = 0.0
    ratio = var / g2 if g2 > 0 else float("nan")
    return CLTReport(N, t, int(cfg.n_samples), g2, var, ratio, skew, kurt, ks, var_s,
                     var_s / g2 if g2 > 0 else float("nan"), float(ov.mean()),
                     float(mean_overlap(model, t, j)))
