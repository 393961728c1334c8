"""
Stationary Ornstein-Uhlenbeck overlap kernel.

Started from the radius-2 semicircle, the OU flow ``dX = -X/2 dt + dH``
keeps the spectrum stationary and the rescaled overlap kernel is diagonal
in the Chebyshev-U basis:

    K_t(lam, mu) = sum_n exp(-n t / 2) U_n(lam / 2) U_n(mu / 2).

The sum has a closed form in elementary functions; both are provided, and
the eigenrelation behind the diagonalization can be checked numerically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

__all__ = ["KernelQuery", "chebyshev_U", "kernel_series", "kernel_closed", "kernel_closed_array",
           "verify_eigenrelation", "semicircle_gauss_rule"]


@dataclass(frozen=True)
class KernelQuery:
    """Point ``(lam, mu)`` in ``[-2, 2]**2`` and time ``t``.

    ``n_terms=None`` truncates the series adaptively.
    """

    lam: float
    mu: float
    t: float
    n_terms: int | None = None

    def __post_init__(self):
        if abs(self.lam) > 2 or abs(self.mu) > 2:
            raise DomainError("kernel arguments must lie in [-2, 2]")
        if self.n_terms is not None and self.n_terms < 1:
            raise DomainError("n_terms must be at least 1")


def chebyshev_U(n, x):
    """Chebyshev polynomial of the second kind by forward recurrence."""
    x = np.asarray(x, dtype=float)
    if n < 0:
        raise DomainError("degree must be non-negative")
    u_prev, u = np.ones_like(x), 2.0 * x
    if n == 0:
        return u_prev[()] if u_prev.ndim == 0 else u_prev
    for _ in range(n - 1):
        u_prev, u = u, 2.0 * x * u - u_prev
    return u[()] if u.ndim == 0 else u


def _chebyshev_table(n_max, x):
    """Rows ``U_0(x) .. U_{n_max}(x)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * x
    for n in range(1, n_max):
        out[n + 1] = 2.0 * x * out[n] - out[n - 1]
    return out


def _series_length(t, tol=1e-14):
    # |U_n(x)| <= n + 1 on [-1, 1], so the tail term is bounded by exp(-n t/2)(n+1)**2
    n = 0
    while np.exp(-0.5 * n * t) * (n + 1) ** 2 >= tol:
        n += 1
    return n


def kernel_series(q: KernelQuery) -> float:
    """Truncated Chebyshev series of ``K_t(lam, mu)``."""
    if not q.t > 0:
        raise DomainError("the kernel series needs t > 0")
    n_terms = q.n_terms if q.n_terms is not None else _series_length(q.t)
    n = np.arange(n_terms)
    ul = _chebyshev_table(n_terms - 1, 0.5 * q.lam)
    um = _chebyshev_table(n_terms - 1, 0.5 * q.mu)
    return float(np.sum(np.exp(-0.5 * n * q.t) * (ul * um)))


def kernel_closed(q: KernelQuery) -> float:
    """Closed form of ``K_t(lam, mu)``."""
    return float(kernel_closed_array(q.lam, q.mu, q.t))


def kernel_closed_array(lam, mu, t):
    """Vectorized closed form of ``K_t(lam, mu)``.

    The denominator ``1 - e lam mu + e**2 (lam**2 + mu**2 - 2) - lam mu e**3 + e**4``
    (``e = exp(-t/2)``) is evaluated in the factored form
    ``|1 - e exp(i(a+b))|**2 |1 - e exp(i(a-b))|**2`` with ``lam = 2 cos a``,
    ``mu = 2 cos b``, which avoids cancellation near the corners of the square.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not t > 0:
        raise DomainError("the kernel needs t > 0")
    if np.any(np.abs(lam) > 2) or np.any(np.abs(mu) > 2):
        raise DomainError("kernel arguments must lie in [-2, 2]")
    e = np.exp(-0.5 * t)
    one_minus_e = -np.expm1(-0.5 * t)
    a = np.arccos(0.5 * lam)
    b = np.arccos(0.5 * mu)
    den = ((one_minus_e ** 2 + 4.0 * e * np.sin(0.5 * (a + b)) ** 2)
           * (one_minus_e ** 2 + 4.0 * e * np.sin(0.5 * (a - b)) ** 2))
    if np.any(np.abs(den) < 1e-300):
        raise NumericError("kernel denominator vanishes")
    return -np.expm1(-t) / den


def semicircle_gauss_rule(m):
    """Nodes and weights integrating ``f(mu) sqrt(4 - mu**2) / (2 pi)`` on [-2, 2].

    Gauss rule for the semicircle weight (Chebyshev second kind), exact for
    polynomials of degree ``2m - 1``.
    """
    k = np.arange(1, m + 1)
    theta = k * np.pi / (m + 1)
    return 2.0 * np.cos(theta), 2.0 / (m + 1) * np.sin(theta) ** 2


def _taylor_coefficients(n, lam):
    """Taylor coefficients of ``U_n(mu / 2)`` in powers of ``y = mu - lam``."""
    p_prev = np.array([1.0])
    if n == 0:
        return p_prev
    p = np.array([lam, 1.0])
    for _ in range(n - 1):
        # U_{k+1} = (lam + y) U_k - U_{k-1}
        nxt = np.zeros(p.size + 1)
        nxt[:-1] += lam * p
        nxt[1:] += p
        nxt[:p_prev.size] -= p_prev
        p_prev, p = p, nxt
    return p


def _pv_eigenrelation(n, lam, m):
    nodes, weights = semicircle_gauss_rule(m)
    c = _taylor_coefficients(n, lam)
    f_lam = c[0]
    df_lam = c[1] if c.size > 1 else 0.0
    y = nodes - lam
    # bounded remainder [f(mu) - f(lam) - f'(lam) y] / y**2
    far = np.abs(y) > 0.1
    y_far = np.where(far, y, 1.0)
    f_mu = chebyshev_U(n, 0.5 * nodes)
    direct = (f_mu - f_lam - df_lam * y) / y_far ** 2
    tail = c[2:][::-1] if c.size > 2 else np.zeros(1)
    horner = np.polyval(tail, y)
    rem = np.where(far, direct, horner)
    # PV of sqrt(4-mu^2)/(2 pi) / (mu - lam) is -lam/2 on (-2, 2)
    return -np.sum(weights * rem) + 0.5 * lam * df_lam


def verify_eigenrelation(n: int, lam: float, quad_points: int = 2000) -> float:
    """Residual of the Chebyshev eigenrelation at ``(n, lam)``.

    Computes the principal value of
    ``int (U_n(lam/2) - U_n(mu/2)) / (lam - mu)**2 sqrt(4 - mu**2) / (2 pi) dmu``
    by singularity subtraction and returns its distance to ``(n/2) U_n(lam/2)``.
    """
    if not abs(lam) < 2:
        raise DomainError("lambda must lie in (-2, 2)")
    if not 0 <= n <= 30:
        raise DomainError("degree must be in [0, 30]")
    if n == 0:
        return 0.0
    value = _pv_eigenrelation(n, lam, quad_points)
    check = _pv_eigenrelation(n, lam, 2 * quad_points)
    if abs(value - check) > 1e-8 * max(1.0, abs(value)):
        raise NumericError(f"eigenrelation quadrature not converged: {value} vs {check}")
    return float(abs(value - 0.5 * n * chebyshev_U(n, 0.5 * lam)))
