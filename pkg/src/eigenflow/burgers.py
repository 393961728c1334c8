"""
Large-N limit of the additive flow: Stieltjes transform, density, velocity
field, quantile flow, local resolvent and the macroscopic overlap kernel.

The Stieltjes transform of ``rho(., t)`` solves

    G = G_A(z - t G),

with ``G_A`` the transform of the initial bulk. Writing ``omega = z - t G``
turns this into the subordination relation ``z = omega + t G_A(omega)``,
which is how boundary values on the real axis and the support edges are
computed without any smoothing parameter.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct
from scipy.optimize import brentq

from .errors import DomainError, NumericError, SolverError
from .spectral_model import DensitySpec, SpectralModel, ZeroBulk, as_model

__all__ = [
    "StieltjesSolution", "BulkState", "BulkProfile", "solve_G", "boundary_G",
    "density_rho", "velocity_v", "support_edges", "quantile_lambda",
    "local_resolvent_U", "overlap_kernel_w", "subordination_outside", "overlap_kernel_w_ou", "bulk_state",
]

EPS_LADDER = (1e-3, 5e-4, 2.5e-4)
EDGE_FLAG_DISTANCE = 1e-3


@dataclass(frozen=True)
class StieltjesSolution:
    z: complex
    t: float
    G: complex
    residual: float
    iterations: int


def _source_stieltjes(model: SpectralModel, w, N=None):
    """Stieltjes transform of the initial spectrum, bulk only unless N is given."""
    g = model.bulk.stieltjes(w)
    if N is None or not model.spikes:
        return g
    ell = model.n_spikes
    g = (1.0 - ell / N) * g
    for a in model.spikes:
        g = g + (1.0 / N) / (np.asarray(w, dtype=complex) - a)
    return g


def _fixed_point(model, z, t, tol=1e-12, max_iter=10_000, damping=0.5, N=None):
    z = np.asarray(z, dtype=complex)
    if t == 0:
        G = _source_stieltjes(model, z, N)
        return G, np.zeros(z.shape), np.zeros(z.shape, dtype=int)
    G = 1.0 / z
    iters = np.full(z.shape, -1)
    res = np.full(z.shape, np.inf)
    for k in range(1, max_iter + 1):
        mapped = _source_stieltjes(model, z - t * G, N)
        res = np.abs(G - mapped)
        done = (res < tol) & (iters < 0)
        iters = np.where(done, k - 1, iters)
        if np.all(iters >= 0):
            return G, res, iters
        G = np.where(iters >= 0, G, (1.0 - damping) * G + damping * mapped)
    bad = iters < 0
    raise SolverError("Stieltjes fixed point did not converge",
                      residual=float(np.max(res[bad])), iterations=max_iter)


def solve_G(model, z, t, *, tol=1e-12, max_iter=10_000, damping=0.5, N=None):
    """Solve ``G = int dx / (z - a(x) - t G)`` by damped fixed-point iteration.

    Parameters
    ----------
    model : SpectralModel or DensitySpec
    z : complex
        Spectral parameter, ``Im z > 0``.
    t : float
        Time, ``t >= 0``.
    N : int, optional
        If given, spikes enter as atoms of weight ``1/N`` (finite-N
        correction); by default only the bulk contributes.

    Returns
    -------
    StieltjesSolution
    """
    model = as_model(model)
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("solve_G needs Im z > 0")
    if t < 0:
        raise DomainError("time must be non-negative")
    G, res, it = _fixed_point(model, z, float(t), tol, max_iter, damping, N)
    return StieltjesSolution(z, float(t), complex(G), float(res), int(it))


def _omega_newton(bulk: DensitySpec, lam, t, omega0, tol=1e-14, max_iter=200):
    """Solve ``omega + t G_A(omega) = lam`` for Im omega >= 0 by projected Newton."""
    omega = omega0.copy()
    scale = bulk.scale + np.sqrt(t)
    for _ in range(max_iter):
        F = omega + t * bulk.stieltjes(omega) - lam
        dF = 1.0 + t * bulk.stieltjes_deriv(omega)
        step = F / dF
        new = omega - step
        # stay in the closed upper half-plane
        below = new.imag < 0
        new = np.where(below, new.real + 0.5j * omega.imag, new)
        omega = new
        if np.all(np.abs(step) < tol * scale):
            break
    F = omega + t * bulk.stieltjes(omega) - lam
    if np.any(~np.isfinite(F)) or np.max(np.abs(F), initial=0.0) > 1e-9 * scale:
        raise SolverError("boundary subordination Newton did not converge",
                          residual=float(np.nanmax(np.abs(F))), iterations=max_iter)
    return omega


def boundary_G(model, lam, t):
    """Boundary value ``G(lam + i0, t)`` on the real axis (exact, no smoothing).

    Returns complex values with ``-Im G / pi`` the density and ``Re G`` the
    principal-value integral.
    """
    model = as_model(model)
    bulk = model.bulk
    lam = np.asarray(lam, dtype=float)
    if t == 0:
        return bulk.stieltjes(lam + 0j)
    lo, hi = support_edges(model, t)
    half = 0.5 * (hi - lo)
    z0 = lam + 1j * max(0.05 * half, 1e-3)
    G0, _, _ = _fixed_point(model, z0, t)
    omega = _omega_newton(bulk, lam, t, z0 - t * G0)
    outside = (lam >= hi) | (lam <= lo)
    omega = np.where(outside, omega.real + 0j, omega)
    return (lam - omega) / t


def _extrapolated_G(model, lam, t):
    lam = np.asarray(lam, dtype=float)
    g = [_fixed_point(model, lam + 1j * e, t)[0] for e in EPS_LADDER]
    # second-order Richardson on eps, eps/2, eps/4
    return (8.0 * g[2] - 6.0 * g[1] + g[0]) / 3.0


def _boundary(model, lam, t, method):
    if method == "exact":
        return boundary_G(model, lam, t)
    if method == "extrapolate":
        return _extrapolated_G(model, lam, t)
    raise ValueError(f"unknown method {method!r}")


def density_rho(model, lam, t, method="extrapolate"):
    """Density ``rho(lam, t) = -Im G(lam + i0, t) / pi``.

    ``method="extrapolate"`` evaluates G at ``eps`` in {1e-3, 5e-4, 2.5e-4}
    and extrapolates to ``eps = 0``; ``method="exact"`` solves the boundary
    subordination equation directly.
    """
    model = as_model(model)
    if t < 0:
        raise DomainError("time must be non-negative")
    if t == 0:
        out = model.bulk.pdf(lam)
        return float(out) if np.ndim(out) == 0 else out
    rho = -np.imag(_boundary(model, lam, t, method)) / np.pi
    if np.any(rho < -1e-8):
        raise NumericError(f"negative density {np.min(rho):.3e} from boundary solve")
    rho = np.clip(rho, 0.0, None)
    return float(rho) if np.ndim(rho) == 0 else rho


def velocity_v(model, lam, t, method="extrapolate"):
    """Velocity field ``v(lam, t) = Re G(lam + i0, t)`` (principal-value integral)."""
    model = as_model(model)
    lo, hi = support_edges(model, t)
    lam_a = np.asarray(lam, dtype=float)
    if np.any((lam_a < lo) | (lam_a > hi)):
        raise DomainError(f"velocity field is defined on the support [{lo}, {hi}]")
    if t == 0:
        out = np.real(model.bulk.stieltjes(lam_a + 0j))
    else:
        out = np.real(_boundary(model, lam_a, t, method))
    return float(out) if np.ndim(out) == 0 else out


def edge_confidence(model, lam, t):
    """True where ``lam`` is at least 1e-3 away from both support edges."""
    lo, hi = support_edges(model, t)
    lam = np.asarray(lam, dtype=float)
    return (lam - lo > EDGE_FLAG_DISTANCE) & (hi - lam > EDGE_FLAG_DISTANCE)


@lru_cache(maxsize=4096)
def _omega_edges(bulk: DensitySpec, t: float):
    """Subordination points ``(w_lo, w_hi)`` mapped to the support edges at time t.

    Outside the initial support, ``lam = w + t G_A(w)`` is increasing in w
    exactly while ``t int rho_A / (w - a)**2 < 1``; the edge is where this
    reaches 1, or the initial endpoint itself if the density there is finite.
    """
    lo, hi = bulk.support()
    if t == 0:
        return lo, hi
    if isinstance(bulk, ZeroBulk):
        r = np.sqrt(t)
        return -r, r
    span = 2.0 * np.sqrt(t) + bulk.scale

    def crit(w):
        return t * bulk.moment2_outside(w) - 1.0

    out = []
    for side, anchor in ((-1, lo), (+1, hi)):
        far = anchor + side * span
        near = anchor + side * 1e-15 * bulk.scale
        if crit(near) < 0:
            out.append(anchor)
        else:
            out.append(brentq(crit, min(near, far), max(near, far), xtol=1e-15, rtol=1e-15))
    return tuple(out)


@lru_cache(maxsize=4096)
def _edges_cached(bulk: DensitySpec, t: float):
    if t == 0:
        return bulk.support()
    w_lo, w_hi = _omega_edges(bulk, t)
    return tuple(w + t * float(np.real(bulk.stieltjes(w + 0j))) for w in (w_lo, w_hi))


def subordination_outside(model, lam, t):
    """Real ``omega`` with ``omega + t G_A(omega) = lam`` for ``lam`` above the upper edge.

    Then ``G(lam, t) = G_A(omega)`` on the real axis.
    """
    bulk = as_model(model).bulk
    lam = float(lam)
    if t == 0:
        return lam
    w_hi = _omega_edges(bulk, float(t))[1]
    edge = w_hi + t * float(np.real(bulk.stieltjes(w_hi + 0j)))
    if lam <= edge:
        raise DomainError(f"{lam} is not above the upper edge {edge}")
    F = lambda w: w + t * float(np.real(bulk.stieltjes(w + 0j))) - lam
    # F increases on (w_hi, inf) and F(w) <= w - lam there
    right = max(lam, w_hi) + 1.0
    while F(right) < 0:
        right = w_hi + 2.0 * (right - w_hi)
    return brentq(F, w_hi, right, xtol=1e-14 * max(1.0, abs(lam)), rtol=4 * np.finfo(float).eps)


def support_edges(model, t):
    """Support ``(lower, upper)`` of ``rho(., t)`` (bulk only)."""
    model = as_model(model)
    if t < 0:
        raise DomainError("time must be non-negative")
    return _edges_cached(model.bulk, float(t))


class BulkProfile:
    """Density, tail CDF and quantile of ``rho(., t)`` on its whole support.

    With ``lam = c + h cos(theta)`` the tail mass density
    ``g(theta) = rho(lam) h sin(theta)`` is, for square-root edges, a smooth
    even 2*pi-periodic function of theta. Its cosine series is computed by a
    type-I DCT and integrated term by term, which converges spectrally.
    """

    def __init__(self, model, t, n_modes=128, tol=1e-11, max_modes=1 << 14):
        self.model = as_model(model)
        self.t = float(t)
        lo, hi = support_edges(self.model, self.t)
        self.lo, self.hi = lo, hi
        self.c, self.h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        M = n_modes
        prev = None
        while True:
            coef = self._cosine_coefficients(M)
            mass = float(self._tail(np.pi, coef))
            if prev is not None and abs(mass - 1.0) < tol and \
                    np.max(np.abs(coef[:prev.size] - prev)) < tol:
                break
            if M >= max_modes:
                raise NumericError(f"tail CDF did not converge (mass={mass!r}, modes={M})")
            prev, M = coef, 2 * M
        self.coef = coef
        self.mass_error = mass - 1.0

    def _density_at_theta(self, theta):
        lam = self.c + self.h * np.cos(theta)
        if self.t == 0:
            return np.asarray(self.model.bulk.pdf(lam), dtype=float)
        return -np.imag(boundary_G(self.model, lam, self.t)) / np.pi

    def _cosine_coefficients(self, M):
        theta = np.pi * np.arange(M + 1) / M
        g = np.zeros(M + 1)
        g[1:-1] = self._density_at_theta(theta[1:-1]) * self.h * np.sin(theta[1:-1])
        a = dct(g, type=1) / M
        a[-1] *= 0.5
        return a

    @staticmethod
    def _tail(theta, coef):
        theta = np.asarray(theta, dtype=float)
        k = np.arange(1, coef.size)
        return 0.5 * coef[0] * theta + np.sum(
            coef[1:] * np.sin(np.multiply.outer(theta, k)) / k, axis=-1)

    def density_theta(self, theta):
        """``rho(c + h cos(theta)) h sin(theta)`` from the cosine series."""
        theta = np.asarray(theta, dtype=float)
        k = np.arange(self.coef.size)
        return np.sum(self.coef * np.cos(np.multiply.outer(theta, k)), axis=-1) \
            - 0.5 * self.coef[0]

    def tail_cdf(self, lam):
        """Mass of ``rho(., t)`` above ``lam``."""
        lam = np.asarray(lam, dtype=float)
        theta = np.arccos(np.clip((lam - self.c) / self.h, -1.0, 1.0))
        return self._tail(theta, self.coef)

    def quantile(self, x, tol=1e-13):
        """``lam(x, t)``: the point with tail mass x (vectorized bisection in theta)."""
        x = np.asarray(x, dtype=float)
        a = np.zeros_like(x)
        b = np.full_like(x, np.pi)
        while np.max(b - a, initial=0.0) > tol:
            m = 0.5 * (a + b)
            below = self._tail(m, self.coef) < x
            a = np.where(below, m, a)
            b = np.where(below, b, m)
        return self.c + self.h * np.cos(0.5 * (a + b))


@lru_cache(maxsize=64)
def _profile_cached(model: SpectralModel, t: float) -> BulkProfile:
    return BulkProfile(model, t)


def quantile_lambda(model, x, t, tol=1e-9):
    """Quantile ``lam(x, t)`` with ``x = int_lam^inf rho(., t)``."""
    model = as_model(model)
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) | (xa >= 1)):
        raise DomainError("quantile level x must lie in (0, 1)")
    if t < 0:
        raise DomainError("time must be non-negative")
    if t == 0:
        out = model.bulk.quantile(xa)
    else:
        prof = _profile_cached(model, float(t))

        def one(xi):
            f = lambda lam: float(prof.tail_cdf(lam)) - xi
            try:
                return brentq(f, prof.lo, prof.hi, xtol=tol)
            except ValueError as exc:
                raise NumericError(f"quantile bracket failed at x={xi}: {exc}") from None

        out = np.vectorize(one, otypes=[float])(xa)
    return float(out) if np.ndim(out) == 0 else out


def local_resolvent_U(model, z, a, t):
    """Local resolvent ``U(z, a, t) = 1 / (z - a - t G(z, t))``."""
    sol = solve_G(model, z, t)
    return 1.0 / (sol.z - a - sol.t * sol.G)


def overlap_kernel_w(model, lam, mu, t, method="exact"):
    """Macroscopic overlap kernel ``w(lam, mu, t)``.

    ``t / ((lam - t v - mu)**2 + t**2 pi**2 rho**2)`` with ``rho``, ``v`` the
    density and velocity at ``(lam, t)``; ``lam`` must lie strictly inside
    the time-t support.
    """
    model = as_model(model)
    if not t > 0:
        raise DomainError("overlap kernel needs t > 0")
    lam = np.asarray(lam, dtype=float)
    lo, hi = support_edges(model, t)
    if np.any((lam <= lo) | (lam >= hi)):
        raise DomainError(f"lambda must lie strictly inside the support ({lo}, {hi})")
    G = _boundary(model, lam, t, method)
    rho = -np.imag(G) / np.pi
    v = np.real(G)
    out = t / ((lam - t * v - mu) ** 2 + (t * np.pi * rho) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def overlap_kernel_w_ou(model, lam, mu, t, method="exact"):
    """Overlap kernel for the Ornstein-Uhlenbeck flow ``dX = -X/2 dt + dH``.

    The OU matrix at time t equals ``exp(-t/2) (A + H_s)`` with
    ``s = exp(t) - 1`` in law, so the kernel is the additive one evaluated
    at rescaled eigenvalue ``lam exp(t/2)`` and time ``s``.
    """
    s = np.expm1(t)
    return overlap_kernel_w(model, np.asarray(lam) * np.exp(0.5 * t), mu, s, method)


@dataclass(frozen=True)
class BulkState:
    t: float
    lambda_grid: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    x_grid: np.ndarray
    lambda_of_x: np.ndarray


def bulk_state(model, t, n_lambda=1401, n_x=257):
    """Density, velocity and quantile of ``rho(., t)`` on grids.

    The lambda grid is cosine-spaced between the support edges, which keeps
    the trapezoid integral of a square-root-edged density accurate to
    O(n_lambda**-2) (about 1e-6 at the default size).
    """
    model = as_model(model)
    lo, hi = support_edges(model, t)
    lam = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * np.arange(n_lambda) / (n_lambda - 1))
    if t == 0:
        G = model.bulk.stieltjes(lam[1:-1] + 0j)
    else:
        G = boundary_G(model, lam[1:-1], t)
    rho = np.concatenate([[0.0], np.clip(-np.imag(G) / np.pi, 0, None), [0.0]])
    v = np.concatenate([[np.real(G[0])], np.real(G), [np.real(G[-1])]])
    x = (np.arange(n_x) + 0.5) / n_x
    prof = BulkProfile(model, t) if t > 0 else None
    lam_x = prof.quantile(x) if prof is not None else model.bulk.quantile(x)
    return BulkState(float(t), lam, rho, v, x, np.asarray(lam_x))
