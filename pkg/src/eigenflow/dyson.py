"""
Eigenvalue-level dynamics: Dyson Brownian motion, the conditional overlap
equation along a path, and the mesoscopic crossover system.

Eigenvalues follow

    d lam_i = sqrt(2 / (beta N)) dB_i + (1/N) sum_{k != i} dt / (lam_i - lam_k),

and, conditionally on the eigenvalue path, the mean squared overlaps
``u_i = E[<psi_i^t|psi_j^0>**2 | path]`` solve the linear system

    du_i/dt = (1/N) sum_{k != i} (u_k - u_i) / (lam_k - lam_i)**2,

whose generator is a graph Laplacian (so ``sum_i u_i`` is conserved).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import polygamma

from .errors import ConfigError, SingularKernelError, StiffnessError
from .matrix_mc import _eigh_desc, sample_hermitian_increment
from .parallel import map_ordered
from .rng import substream
from .spectral_model import DiscreteSpectrum

__all__ = [
    "EigenvaluePath", "OverlapVector", "MesoscopicState", "integrate_dyson",
    "integrate_overlap_ode", "dyson_paths_with_overlaps", "dyson_mean_overlaps", "fekete_v",
    "cauchy_profile", "fekete_tail_sum", "simulate_mesoscopic",
]

KAPPA = 0.1
DT_FLOOR = 1e-12
MAX_REJECTIONS = 1000


@dataclass
class StepStats:
    steps: int = 0
    rejections: int = 0
    splits: int = 0
    forced_sorts: int = 0
    jump_flags: int = 0
    max_consecutive_rejections: int = 0


def _pair_inverse(x):
    """``1 / (x_i - x_k)`` with zero diagonal; x has shape (B, n)."""
    d = x[:, :, None] - x[:, None, :]
    n = x.shape[1]
    d[:, np.arange(n), np.arange(n)] = np.inf
    with np.errstate(divide="ignore"):
        # coincident points give inf; callers that need gaps check them
        return 1.0 / d


def _laplacian_apply(W, u):
    """``(L u)_i = sum_k W_ik (u_k - u_i)`` for symmetric W with zero diagonal."""
    return np.einsum("bik,bk->bi", W, u) - W.sum(axis=2) * u


def _taylor_exp_step(W, u, h, leak=None):
    """Fourth-order Taylor approximation of ``exp(h L) u`` with L frozen over the step."""
    def L(v):
        out = _laplacian_apply(W, v)
        return out if leak is None else out - leak * v
    term, acc = u, u.copy()
    for k in range(1, 5):
        term = (h / k) * L(term)
        acc = acc + term
    return acc


def _drift(x, coupling, extra_drift):
    n = x.shape[1]
    inv = _pair_inverse(x) if n > 1 else np.zeros((x.shape[0], 1, 1))
    drift = coupling * inv.sum(axis=2)
    if extra_drift is not None:
        drift = drift + extra_drift(x)
    return drift, inv


def _step_bound(x, coupling, kappa):
    if x.shape[1] < 2:
        return np.full(x.shape[0], np.inf)
    g = np.min(x[:, :-1] - x[:, 1:], axis=1)
    return kappa * g * g / coupling


def _exp_step(W, u, h, leak=None, stiff=0.5):
    """``exp(h L) u`` per path: Taylor for ``h * max_i sum_k W_ik <= stiff``, else expm."""
    rate = W.sum(axis=2)
    if leak is not None:
        rate = rate + leak
    r = h * np.max(rate, axis=1)
    easy = r <= stiff
    if np.all(easy):
        return _taylor_exp_step(W, u, h[:, None], leak)
    out = np.empty_like(u)
    out[easy] = _taylor_exp_step(W[easy], u[easy], h[easy, None],
                                 None if leak is None else leak[easy])
    for m in np.flatnonzero(~easy):
        L = W[m] - np.diag(rate[m])
        out[m] = expm(h[m] * L) @ u[m]
    return out


def _gas_integrate(x0, t_grid, coupling, sigma, dt_cap, rng, kappa=KAPPA,
                   extra_drift=None, on_step=None, dt_floor=DT_FLOOR,
                   max_rejections=MAX_REJECTIONS, on_grid=None):
    """Euler-Maruyama for a batch of Coulomb gases, positions sorted decreasingly.

    Drift ``coupling * sum_k 1/(x_i - x_k)`` (+ ``extra_drift(x)``), noise
    ``sigma dB``. Each path takes its own step, capped by ``dt_cap`` and
    ``kappa * gap_min**2 / coupling``. A step that is too long for the current
    gap, or that breaks the ordering, is halved with a Brownian-bridge draw for
    the midpoint, so the noise path is refined rather than resampled; below
    ``dt_floor`` the positions are sorted instead.

    ``on_step(idx, t, h, x, inv)`` is called before every accepted step with
    the indices of the paths taking it, and ``on_grid(k)`` once all paths
    reach ``t_grid[k]``. Returns positions at ``t_grid`` with shape (B, n, T)
    and step statistics.
    """
    x = np.array(x0, dtype=float)
    B, n = x.shape
    stats = StepStats()
    out = np.empty((B, n, len(t_grid)))
    out[:, :, 0] = x
    t = np.full(B, float(t_grid[0]))
    # per-path stacks of committed (h, dW) pieces awaiting integration
    depth = 2 * int(np.ceil(np.log2(max(dt_cap, dt_floor) / dt_floor))) + 8
    stack_h = np.empty((B, depth))
    stack_w = np.empty((B, depth, n))
    top = np.zeros(B, dtype=int)
    consecutive = np.zeros(B, dtype=int)
    for k, t_next in enumerate(t_grid[1:], start=1):
        tol = 1e-14 * max(1.0, abs(t_next))
        while True:
            busy = top > 0
            idx = np.flatnonzero(busy | (t_next - t > tol))
            if idx.size == 0:
                break
            xa = x[idx]
            bound = np.maximum(_step_bound(xa, coupling, kappa), dt_floor)
            h = np.minimum(np.minimum(t_next - t[idx], dt_cap), bound)
            dW = np.empty_like(xa)
            popped = busy[idx]
            fresh = ~popped
            dW[fresh] = rng.standard_normal((int(fresh.sum()), n)) * np.sqrt(h[fresh])[:, None]
            if np.any(popped):
                pb = idx[popped]
                top[pb] -= 1
                h[popped] = stack_h[pb, top[pb]]
                dW[popped] = stack_w[pb, top[pb]]
            split = h > bound
            drift, inv = _drift(xa, coupling, extra_drift)
            xn = xa + drift * h[:, None] + sigma * dW
            ordered = np.all(xn[:, :-1] > xn[:, 1:], axis=1) if n > 1 else np.ones(idx.size, bool)
            reject = ~split & ~ordered & (h > dt_floor)
            redo = split | reject
            if np.any(redo):
                stats.splits += int(split.sum())
                stats.rejections += int(reject.sum())
                rb = idx[redo]
                first, second = _bridge_split(h[redo], dW[redo], rng)
                if np.any(top[rb] + 2 > depth):
                    raise StiffnessError("bridge refinement exceeded its depth limit")
                # second half below the first, so the first is integrated next
                stack_h[rb, top[rb]] = second[0]
                stack_w[rb, top[rb]] = second[1]
                stack_h[rb, top[rb] + 1] = first[0]
                stack_w[rb, top[rb] + 1] = first[1]
                top[rb] += 2
            if np.any(reject):
                consecutive[idx[reject]] += 1
                worst = int(consecutive.max())
                stats.max_consecutive_rejections = max(stats.max_consecutive_rejections, worst)
                if worst > max_rejections:
                    raise StiffnessError(f"{worst} consecutive rejected steps near t={t_next:.6g}")
            ok = ~redo
            if not np.any(ok):
                continue
            good = idx[ok]
            consecutive[good] = 0
            if on_step is not None:
                on_step(good, t[good], h[ok], xa[ok], inv[ok])
            xg = xn[ok]
            lim = 10 * sigma * np.sqrt(h[ok]) + np.max(np.abs(drift[ok]), axis=1) * h[ok]
            stats.jump_flags += int(np.sum(np.max(np.abs(xg - xa[ok]), axis=1) > lim))
            unsorted = ~ordered[ok]
            if np.any(unsorted):
                stats.forced_sorts += int(unsorted.sum())
                xg[unsorted] = -np.sort(-xg[unsorted], axis=1)
            x[good] = xg
            t[good] += h[ok]
            stats.steps += good.size
        t[:] = t_next
        out[:, :, k] = x
        if on_grid is not None:
            on_grid(k)
    return out, stats


def _bridge_split(h, dW, rng):
    """Split Brownian increments over h into two halves, conditioned on the totals.

    ``h`` has shape (m,) and ``dW`` (m, n); returns ``(h/2, first), (h/2, second)``.
    """
    z = rng.standard_normal(dW.shape)
    first = 0.5 * dW + np.sqrt(h / 4.0)[:, None] * z
    return (0.5 * h, first), (0.5 * h, dW - first)


@dataclass
class EigenvaluePath:
    """Eigenvalue trajectories.

    ``values`` has shape (N, T) for a single path or (B, N, T) for a batch;
    ``sub_times``/``sub_values`` hold every accepted integration step (same
    layout) when recorded. ``initial_overlaps`` (N, N) or (B, N, N) holds
    ``u_{i|j}`` at ``times[0]`` when the path was started from a sampled
    matrix (warm start), else it is None (identity).
    """

    times: np.ndarray
    values: np.ndarray
    beta: float
    sub_times: np.ndarray | None = None
    sub_values: np.ndarray | None = None
    initial_overlaps: np.ndarray | None = None
    stats: StepStats = field(default_factory=StepStats)

    @property
    def N(self):
        return self.values.shape[-2]

    @property
    def batched(self):
        return self.values.ndim == 3


def _warm_start(spectrum, beta, t0, rng, B):
    """Exact sample of ``A + H_{t0}``: eigenvalues and squared overlaps with the canonical basis."""
    A = np.diag(spectrum.values)
    N = spectrum.N
    lam = np.empty((B, N))
    u0 = np.empty((B, N, N))
    for b in range(B):
        X = A + sample_hermitian_increment(N, t0, int(beta), rng)
        w, V = _eigh_desc(X)
        lam[b] = w
        u0[b] = np.abs(V.conj().T) ** 2
    return lam, u0


def _prepare(spectrum, beta, t_max, dt_cap, times, warm_start):
    if not isinstance(spectrum, DiscreteSpectrum):
        spectrum = DiscreteSpectrum(np.asarray(spectrum, dtype=float))
    if not beta > 0:
        raise ConfigError("beta must be positive")
    if not dt_cap > 0:
        raise ConfigError("dt_cap must be positive")
    times = np.asarray([0.0, t_max] if times is None else times, dtype=float)
    if times[0] != 0 or np.any(np.diff(times) < 0) or times[-1] > t_max:
        raise ConfigError("times must be sorted, start at 0 and end by t_max")
    N = spectrum.N
    degenerate = N > 1 and np.min(-np.diff(spectrum.values)) <= 0
    t0 = None
    if degenerate or warm_start is not None:
        if beta not in (1, 2):
            raise ConfigError("repeated initial eigenvalues need beta in {1, 2} for the warm start")
        t0 = warm_start if warm_start is not None else min(1e-3 * max(t_max, 1e-300), dt_cap)
    return spectrum, times, t0


def _start(spectrum, beta, times, t0, rng, B):
    """Initial positions, initial overlaps (or None) and the integration grid."""
    if t0 is None:
        return np.tile(spectrum.values, (B, 1)), None, times
    x0, u0 = _warm_start(spectrum, beta, t0, rng, B)
    return x0, u0, np.concatenate([[t0], times[times > t0]])


def integrate_dyson(spectrum, beta, t_max, dt_cap, rng, times=None, n_paths=None,
                    store_substeps=True, kappa=KAPPA, warm_start=None):
    """Integrate Dyson Brownian motion from ``spectrum``.

    Parameters
    ----------
    spectrum : DiscreteSpectrum or array
        Initial eigenvalues, non-increasing.
    beta : float
        Symmetry class (> 0).
    t_max, dt_cap : float
        Final time and maximal step.
    rng : numpy.random.Generator
    times : array, optional
        Output grid (defaults to ``[0, t_max]``).
    n_paths : int, optional
        Integrate a batch of independent paths, each with its own adaptive step.
    warm_start : float, optional
        For spectra with repeated eigenvalues (beta 1 or 2), start from an
        exact matrix sample at this small time. Chosen automatically when
        needed.
    """
    spectrum, times, t0 = _prepare(spectrum, beta, t_max, dt_cap, times, warm_start)
    N = spectrum.N
    B = 1 if n_paths is None else int(n_paths)
    x0, u0, grid = _start(spectrum, beta, times, t0, rng, B)
    sub_t = [[] for _ in range(B)]
    sub_x = [[] for _ in range(B)]

    def record(idx, t, h, x, inv):
        for m, b in enumerate(idx):
            sub_t[b].append(t[m])
            sub_x[b].append(x[m])

    out, stats = _gas_integrate(x0, grid, 1.0 / N, np.sqrt(2.0 / (beta * N)), dt_cap, rng,
                                kappa, on_step=record if store_substeps else None)
    if grid is not times:
        # output at times <= t0 is the warm-start state
        full = np.empty((B, N, times.size))
        n_early = times.size - (grid.size - 1)
        full[:, :, :n_early] = out[:, :, :1]
        full[:, :, n_early:] = out[:, :, 1:]
        full[:, :, times == 0] = spectrum.values[None, :, None]
        out = full
    st = sx = None
    if store_substeps:
        st = [np.asarray(ts + [grid[-1]]) for ts in sub_t]
        sx = [np.stack(xs + [out[b, :, -1]], axis=1) for b, xs in enumerate(sub_x)]
    if n_paths is None:
        out = out[0]
        st, sx = (st[0], sx[0]) if st is not None else (None, None)
        u0 = u0[0] if u0 is not None else None
    return EigenvaluePath(times, out, beta, st, sx, u0, stats)


@dataclass
class OverlapVector:
    """``u[..., i, k] = u_{i|j}(times[k])``; leading axis is the batch for batched paths."""

    j: int
    times: np.ndarray
    u: np.ndarray
    min_value: float = 0.0
    clipped: int = 0


class _OverlapStepper:
    """Conditional overlaps ``u_{i|j}`` for a batch, advanced alongside the path."""

    def __init__(self, u):
        self.u = u
        self.min_value = 0.0
        self.clipped = 0

    def __call__(self, idx, t, h, x, inv):
        N = x.shape[1]
        if N > 1 and np.any(x[:, :-1] - x[:, 1:] <= 0):
            raise SingularKernelError(f"coincident eigenvalues at t={float(np.min(t)):.6g}")
        W = inv * inv / N
        u = _exp_step(W, self.u[idx], h)
        mn = float(np.min(u))
        self.min_value = min(self.min_value, mn)
        if mn < -1e-12:
            self.clipped += int(np.sum(u < -1e-12))
            u = np.clip(u, 0.0, None)
        self.u[idx] = u


def _initial_u(u0, B, N, j):
    if u0 is None:
        u = np.zeros((B, N))
        u[:, j - 1] = 1.0
        return u
    return np.array(u0[:, :, j - 1])


def integrate_overlap_ode(path: EigenvaluePath, j: int) -> OverlapVector:
    """Conditional mean squared overlaps along ``path`` for initial index j (1-based).

    Each recorded step applies the exponential of the generator frozen at the
    step's start (fourth-order Taylor when ``h W`` is small, ``expm``
    otherwise); the generator has zero row and column sums, so ``sum_i u_i``
    is preserved.
    """
    N = path.N
    if not 1 <= j <= N:
        raise ConfigError(f"j must be in 1..{N}")
    if path.sub_times is None:
        sx = list(path.values) if path.batched else [path.values]
        st = [path.times] * len(sx)
    elif path.batched:
        st, sx = path.sub_times, path.sub_values
    else:
        st, sx = [path.sub_times], [path.sub_values]
    B = len(sx)
    u0 = path.initial_overlaps
    if u0 is not None and not path.batched:
        u0 = u0[None]
    stepper = _OverlapStepper(_initial_u(u0, B, N, j))
    out_times = path.times
    res = np.empty((B, N, out_times.size))
    for b in range(B):
        tb, xb = st[b], sx[b]
        k_out = 0
        while k_out < out_times.size and out_times[k_out] <= tb[0] + 1e-14:
            if out_times[k_out] < tb[0]:
                res[b, :, k_out] = 0.0
                res[b, j - 1, k_out] = 1.0
            else:
                res[b, :, k_out] = stepper.u[b]
            k_out += 1
        one = np.array([b])
        for s in range(tb.size - 1):
            x = xb[None, :, s]
            inv = _pair_inverse(x) if N > 1 else np.zeros((1, 1, 1))
            stepper(one, tb[s:s + 1], np.array([tb[s + 1] - tb[s]]), x, inv)
            while (k_out < out_times.size
                   and abs(out_times[k_out] - tb[s + 1]) <= 1e-12 * max(1, tb[s + 1])):
                res[b, :, k_out] = stepper.u[b]
                k_out += 1
        res[b, :, k_out:] = stepper.u[b][:, None]
    if not path.batched:
        res = res[0]
    return OverlapVector(j, out_times, res, stepper.min_value, stepper.clipped)


def dyson_paths_with_overlaps(spectrum, beta, times, j, rng, n_paths, dt_cap=1e-2,
                              kappa=KAPPA, warm_start=None):
    """Batch of Dyson paths with the overlap equation advanced on the same steps.

    Equivalent to ``integrate_overlap_ode(integrate_dyson(...), j)`` without
    storing the sub-steps. Returns ``(values, OverlapVector, stats)`` with
    values of shape (B, N, T).
    """
    times = np.asarray(times, dtype=float)
    spectrum, times, t0 = _prepare(spectrum, beta, times[-1], dt_cap, times, warm_start)
    N = spectrum.N
    if not 1 <= j <= N:
        raise ConfigError(f"j must be in 1..{N}")
    B = int(n_paths)
    x0, u0, grid = _start(spectrum, beta, times, t0, rng, B)
    stepper = _OverlapStepper(_initial_u(u0, B, N, j))
    snaps = [stepper.u.copy()]
    out, stats = _gas_integrate(x0, grid, 1.0 / N, np.sqrt(2.0 / (beta * N)), dt_cap, rng,
                                kappa, on_step=stepper,
                                on_grid=lambda k: snaps.append(stepper.u.copy()))
    u = np.stack(snaps, axis=2)
    if grid is not times:
        n_early = times.size - (grid.size - 1)
        delta = np.zeros((B, N, 1))
        delta[:, j - 1] = 1.0
        early = np.where((times[:n_early] < t0)[None, None, :], delta, u[:, :, :1])
        u = np.concatenate([early, u[:, :, 1:]], axis=2)
        x = np.concatenate([np.repeat(out[:, :, :1], n_early, axis=2), out[:, :, 1:]], axis=2)
        x[:, :, times == 0] = spectrum.values[None, :, None]
        out = x
    return out, OverlapVector(j, times, u, stepper.min_value, stepper.clipped), stats


def dyson_mean_overlaps(spectrum, beta, times, n_samples, j, seed, dt_cap=1e-2,
                        chunk=250, workers=None):
    """Means and standard errors over paths of ``u_{i|j}(t)``; arrays are (T, N)."""
    times = np.asarray(times, dtype=float)
    if times[0] != 0:
        times = np.concatenate([[0.0], times])
    chunks = [range(s, min(n_samples, s + chunk)) for s in range(0, n_samples, chunk)]

    def run(c):
        rng = substream(seed, "dyson-sde", c.start)
        _, ov, st = dyson_paths_with_overlaps(spectrum, beta, times, j, rng, len(c), dt_cap)
        return ov.u.sum(axis=0), (ov.u ** 2).sum(axis=0), st

    s1 = s2 = 0.0
    stats = []
    for a, b, st in map_ordered(run, chunks, workers):
        s1, s2 = s1 + a, s2 + b
        stats.append(st)
    n = n_samples
    mean = s1 / n
    se = np.sqrt(np.clip((s2 - n * mean ** 2) / (n - 1), 0, None) / n)
    return times, mean.T, se.T, stats


def fekete_v(n: int, tau: float, rho_j: float) -> float:
    """Overlap profile around the Fekete (equally spaced) trajectory.

    ``v_n(tau) = int_0^1 exp(-2 pi**2 xi (1 - xi) rho_j tau) cos(2 pi xi n) dxi``,
    evaluated on [0, 1/2] (the integrand is symmetric about 1/2) with
    QUADPACK's cosine-weighted rule for oscillatory integrands.
    """
    if not rho_j > 0:
        raise ConfigError("rho_j must be positive")
    n = abs(int(n))
    c = 2.0 * np.pi ** 2 * rho_j * tau
    f = lambda xi: np.exp(-c * xi * (1.0 - xi))
    if n == 0:
        val, _ = quad(f, 0.0, 0.5, epsabs=5e-13, epsrel=1e-13, limit=500)
    else:
        val, _ = quad(f, 0.0, 0.5, weight="cos", wvar=2.0 * np.pi * n,
                      epsabs=5e-13, epsrel=1e-13, limit=500)
    return float(2.0 * val)


def cauchy_profile(n, tau, rho):
    """Large-tau limit of the crossover profile: ``tau rho / (n**2 + pi**2 tau**2 rho**2)``."""
    if not (tau > 0 and rho > 0):
        raise ConfigError("tau and rho must be positive")
    n = np.asarray(n, dtype=float)
    out = tau * rho / (n ** 2 + (np.pi * tau * rho) ** 2)
    return float(out) if out.ndim == 0 else out


def fekete_tail_sum(M: int, tau: float, rho_j: float, terms: int = 6) -> float:
    """Asymptotic value of ``sum_{|n| > M} v_n(tau)``.

    Integrating by parts, ``v_n ~ 2 sum_k (-1)**k f^(2k-1)(0) / (2 pi n)**(2k)``
    for ``f(xi) = exp(-c xi (1 - xi))``; the sums over n are Hurwitz zeta values.
    """
    from scipy.special import zeta
    c = 2.0 * np.pi ** 2 * rho_j * tau
    # Taylor coefficients of exp(p(xi)), p = -c xi + c xi**2, via a' = p' a
    order = 2 * terms
    a = np.zeros(order + 1)
    a[0] = 1.0
    dp = np.zeros(order + 1)
    dp[0], dp[1] = -c, 2.0 * c
    for m in range(order):
        a[m + 1] = np.dot(dp[:m + 1], a[m::-1]) / (m + 1)
    total = 0.0
    for k in range(1, terms + 1):
        m = 2 * k - 1
        fact = np.prod(np.arange(1, m + 1, dtype=float))
        deriv = a[m] * fact
        total += 2.0 * (-1) ** k * deriv / (2.0 * np.pi) ** (2 * k) * zeta(2 * k, M + 1)
    return 2.0 * total


@dataclass
class MesoscopicState:
    """Truncated mesoscopic system on sites ``-K..K``.

    Arrays have shape (T, 2K+1), or (B, T, 2K+1) for a batch of paths.
    """

    rho_j: float
    tau: np.ndarray
    K: int
    x: np.ndarray
    v: np.ndarray
    leakage: np.ndarray
    stats: StepStats = field(default_factory=StepStats)

    def v_at(self, n):
        return self.v[..., n + self.K]


def simulate_mesoscopic(K, tau_max, rho_j, beta, rng, times=None, noise=True,
                        tails="lattice", dt_cap=1e-2, n_paths=None):
    """Truncated version of the rescaled particle system around one bulk site.

    Positions start on the lattice ``x_k = k`` and move by
    ``dx_k = sqrt(2 rho / beta) dB_k + rho sum_l dtau / (x_k - x_l)``; the
    weights ``v_k`` of one initial eigenvector (all mass on site 0) evolve by
    ``dv_k/dtau = rho sum_l (v_l - v_k) / (x_l - x_k)**2``.

    ``tails="lattice"`` keeps the discarded particles frozen on the lattice
    ``|l| > K``: they add the compensating drift ``rho (psi(K+1-x) - psi(K+1+x))``
    and weight leaks to them at rate ``rho (psi'(K+1-x) + psi'(K+1+x))``, so
    the noiseless lattice is an exact equilibrium. ``tails="hard"`` drops
    them entirely. ``leakage`` is ``1 - sum_k v_k``.
    """
    if K < 32:
        raise ConfigError("K must be at least 32")
    if tails not in ("lattice", "hard"):
        raise ConfigError("tails must be 'lattice' or 'hard'")
    tau = np.asarray([0.0, tau_max] if times is None else times, dtype=float)
    B = 1 if n_paths is None else int(n_paths)
    sites = np.arange(K, -K - 1, -1, dtype=float)  # decreasing order
    x0 = np.tile(sites, (B, 1))
    n = sites.size
    sigma = np.sqrt(2.0 * rho_j / beta) if noise else 0.0

    if tails == "lattice":
        from scipy.special import digamma

        def extra(x):
            return rho_j * (digamma(K + 1 - x) - digamma(K + 1 + x))

        def leak_rate(x):
            return rho_j * (polygamma(1, K + 1 - x) + polygamma(1, K + 1 + x))
    else:
        extra = None
        leak_rate = None

    v = np.zeros((B, n))
    v[:, K] = 1.0
    snaps = [v.copy()]

    def step(idx, t, h, x, inv):
        W = rho_j * inv * inv
        leak = leak_rate(x) if leak_rate is not None else None
        v[idx] = _exp_step(W, v[idx], h, leak)

    xs, stats = _gas_integrate(x0, tau, rho_j, sigma, dt_cap,
                               rng if noise else _ZeroNoise(), extra_drift=extra,
                               on_step=step, on_grid=lambda k: snaps.append(v.copy()))
    vs = np.stack(snaps, axis=2)
    # report in increasing site order -K..K
    xs = xs[:, ::-1, :].transpose(0, 2, 1)
    vs = vs[:, ::-1, :].transpose(0, 2, 1)
    leakage = 1.0 - vs.sum(axis=2)
    if n_paths is None:
        xs, vs, leakage = xs[0], vs[0], leakage[0]
    return MesoscopicState(float(rho_j), tau, int(K), xs, vs, leakage, stats)


class _ZeroNoise:
    """Stand-in generator producing zero increments (noiseless dynamics)."""

    @staticmethod
    def standard_normal(shape):
        return np.zeros(shape)
