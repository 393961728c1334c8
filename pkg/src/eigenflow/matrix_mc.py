"""
Matrix-level Monte Carlo for ``X_t = A + H_t`` and its Ornstein-Uhlenbeck
variant ``dX = -X/2 dt + dH``.

``H_t`` is a Hermitian Brownian motion: off-diagonal entries have variance
``t/N`` (real plus imaginary parts for beta=2) and diagonal entries
variance ``2t/(beta N)``. Both dynamics are sampled exactly at the
checkpoints, so there is no time-discretization error.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, NumericError
from .parallel import map_ordered
from .rng import substream

__all__ = [
    "MatrixPathConfig", "OverlapRecord", "MeanOverlaps", "BinnedOverlaps",
    "sample_hermitian_increment", "evolve", "eigen_overlaps", "initial_basis",
    "mc_mean_overlaps", "mc_binned_overlaps",
]

DYNAMICS = ("additive", "ou")


@dataclass(frozen=True)
class MatrixPathConfig:
    """Matrix process settings.

    ``checkpoints`` defaults to ``(t_max,)``; ``dynamics`` is ``"additive"``
    or ``"ou"``.
    """

    N: int
    beta: int = 1
    t_max: float = 1.0
    checkpoints: tuple = ()
    dynamics: str = "additive"
    seed: int = 0
    n_samples: int = 1

    def __post_init__(self):
        if int(self.N) < 1:
            raise ConfigError("N must be positive")
        if self.beta not in (1, 2):
            raise ConfigError("beta must be 1 or 2")
        if self.dynamics not in DYNAMICS:
            raise ConfigError(f"dynamics must be one of {DYNAMICS}")
        if int(self.n_samples) < 1:
            raise ConfigError("n_samples must be at least 1")
        if not (np.isfinite(self.t_max) and self.t_max >= 0):
            raise ConfigError("t_max must be a non-negative number")
        cps = tuple(float(c) for c in self.checkpoints) or (float(self.t_max),)
        if any(b < a for a, b in zip(cps, cps[1:])):
            raise ConfigError("checkpoints must be sorted")
        if cps[0] < 0 or cps[-1] > self.t_max:
            raise ConfigError("checkpoints must lie in [0, t_max]")
        object.__setattr__(self, "checkpoints", cps)


@dataclass(frozen=True)
class OverlapRecord:
    """Eigen-decomposition of one sample at one time.

    ``amplitudes[i, j]`` is ``<psi_i^t | psi_j^0>`` after phase fixing and
    ``squared_overlaps`` its squared modulus.
    """

    time: float
    eigenvalues: np.ndarray
    squared_overlaps: np.ndarray
    sample_index: int = 0
    degenerate: np.ndarray = field(default=None)
    amplitudes: np.ndarray = field(default=None, repr=False)


def sample_hermitian_increment(N, dt, beta, rng):
    """Hermitian Brownian increment over a time step ``dt``."""
    if not dt > 0:
        raise ConfigError("dt must be positive")
    s = np.sqrt(dt / N)
    g = rng.standard_normal((N, N))
    if beta == 1:
        return (g + g.T) * (s / np.sqrt(2.0))
    if beta == 2:
        c = (g + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
        return (c + c.conj().T) * (s / np.sqrt(2.0))
    raise ConfigError("beta must be 1 or 2")


def _check_hermitian(A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("A must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if not np.allclose(A, A.conj().T, rtol=0, atol=1e-12 * scale):
        raise InputError("A must be Hermitian")
    return A


def evolve(A, cfg: MatrixPathConfig, sample_index: int = 0, rng=None):
    """Matrices ``X_t`` at the checkpoints of ``cfg`` for one sample."""
    A = _check_hermitian(A)
    if A.shape[0] != cfg.N:
        raise InputError(f"A has size {A.shape[0]}, config says N={cfg.N}")
    if rng is None:
        rng = substream(cfg.seed, "matrix-mc", sample_index)
    dtype = complex if (cfg.beta == 2 or np.iscomplexobj(A)) else float
    X = np.array(A, dtype=dtype)
    t = 0.0
    out = []
    for tc in cfg.checkpoints:
        dt = tc - t
        if dt > 0:
            if cfg.dynamics == "additive":
                X = X + sample_hermitian_increment(cfg.N, dt, cfg.beta, rng)
            else:
                X = np.exp(-0.5 * dt) * X + sample_hermitian_increment(
                    cfg.N, -np.expm1(-dt), cfg.beta, rng)
        t = tc
        out.append(X.copy())
    return out


def _eigh_desc(X):
    try:
        w, V = np.linalg.eigh(X)
    except np.linalg.LinAlgError as exc:
        norm = float(np.linalg.norm(X))
        finite = bool(np.all(np.isfinite(X)))
        raise NumericError(f"eigendecomposition failed ({exc}); "
                           f"Frobenius norm {norm:.3e}, finite entries: {finite}") from None
    w, V = w[::-1], V[:, ::-1]
    # largest-magnitude component real and positive
    idx = np.argmax(np.abs(V), axis=0)
    piv = V[idx, np.arange(V.shape[1])]
    V = V * (np.conj(piv) / np.abs(piv))
    return w, V


def initial_basis(A):
    """Eigenbasis of A, columns ordered by non-increasing eigenvalue."""
    A = _check_hermitian(A)
    if np.count_nonzero(A - np.diag(np.diagonal(A))) == 0:
        d = np.real(np.diagonal(A))
        if np.all(np.diff(d) <= 0):
            return np.eye(A.shape[0])
    return _eigh_desc(A)[1]


def eigen_overlaps(X, basis, time=0.0, sample_index=0) -> OverlapRecord:
    """Eigenvalues of X (non-increasing) and squared overlaps with ``basis``."""
    X = _check_hermitian(X)
    basis = np.asarray(basis)
    gram = basis.conj().T @ basis
    if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-10):
        raise InputError("initial basis is not orthonormal")
    w, V = _eigh_desc(X)
    amp = V.conj().T @ basis
    if not np.iscomplexobj(X) and not np.iscomplexobj(basis):
        amp = np.real(amp)
    gaps = np.abs(np.diff(w))
    degenerate = np.zeros(w.size, dtype=bool)
    degenerate[:-1] |= gaps < 1e-12
    degenerate[1:] |= gaps < 1e-12
    sq = np.abs(amp) ** 2
    return OverlapRecord(float(time), w, sq, int(sample_index), degenerate, amp)


@dataclass(frozen=True)
class MeanOverlaps:
    """Sample means of ``<psi_i^t|psi_j^0>**2`` for fixed j; arrays are (T, N)."""

    times: np.ndarray
    j: int
    mean: np.ndarray
    std_err: np.ndarray
    n_samples: int

    def rows(self):
        """CSV rows ``(time, i, j, mean_sq_overlap, std_err, n_samples)``, indices 1-based."""
        for k, t in enumerate(self.times):
            for i in range(self.mean.shape[1]):
                yield (t, i + 1, self.j, self.mean[k, i], self.std_err[k, i], self.n_samples)


def _chunks(n, size):
    for start in range(0, n, size):
        yield range(start, min(n, start + size))


def mc_mean_overlaps(A, cfg: MatrixPathConfig, j: int, workers=None, chunk=64) -> MeanOverlaps:
    """Monte Carlo means of the squared overlaps with the j-th (1-based) initial eigenvector."""
    A = _check_hermitian(A)
    if not 1 <= j <= cfg.N:
        raise ConfigError(f"j must be in 1..{cfg.N}")
    basis = initial_basis(A)
    col = basis[:, j - 1:j]

    def one(s):
        mats = evolve(A, cfg, s)
        out = np.empty((len(mats), cfg.N))
        for k, X in enumerate(mats):
            _, V = _eigh_desc(X)
            out[k] = np.abs(V.conj().T @ col)[:, 0] ** 2
        return out

    T = len(cfg.checkpoints)
    s1 = np.zeros((T, cfg.N))
    s2 = np.zeros((T, cfg.N))
    for idx in _chunks(cfg.n_samples, chunk):
        for r in map_ordered(one, idx, workers):
            s1 += r
            s2 += r * r
    n = cfg.n_samples
    mean = s1 / n
    if n > 1:
        var = np.clip((s2 - n * mean ** 2) / (n - 1), 0.0, None)
        se = np.sqrt(var / n)
    else:
        se = np.full_like(mean, np.nan)
    return MeanOverlaps(np.asarray(cfg.checkpoints), j, mean, se, n)


@dataclass(frozen=True)
class BinnedOverlaps:
    """``N * <psi_i^t|psi_j^0>**2`` averaged over eigenvalues falling in each lambda-bin.

    Arrays are (T, n_bins). Standard errors treat each sample as a cluster
    (ratio estimator), since eigenvalues of one sample are correlated.
    """

    times: np.ndarray
    j: int
    edges: np.ndarray
    mean: np.ndarray
    std_err: np.ndarray
    counts: np.ndarray
    n_samples: int

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def mc_binned_overlaps(A, cfg: MatrixPathConfig, j: int, edges, workers=None,
                       chunk=64) -> BinnedOverlaps:
    """Bin ``N u_{i|j}`` by the eigenvalue ``lambda_i(t)``."""
    A = _check_hermitian(A)
    edges = np.asarray(edges, dtype=float)
    nb = edges.size - 1
    basis = initial_basis(A)
    col = basis[:, j - 1:j]
    N = cfg.N

    def one(s):
        mats = evolve(A, cfg, s)
        tot = np.zeros((len(mats), nb))
        cnt = np.zeros((len(mats), nb))
        for k, X in enumerate(mats):
            w, V = _eigh_desc(X)
            u = N * np.abs(V.conj().T @ col)[:, 0] ** 2
            b = np.searchsorted(edges, w, side="right") - 1
            ok = (b >= 0) & (b < nb)
            tot[k] = np.bincount(b[ok], weights=u[ok], minlength=nb)
            cnt[k] = np.bincount(b[ok], minlength=nb)
        return tot, cnt

    T = len(cfg.checkpoints)
    per_tot = np.zeros((cfg.n_samples, T, nb))
    per_cnt = np.zeros((cfg.n_samples, T, nb))
    for idx in _chunks(cfg.n_samples, chunk):
        for s, (tot, cnt) in zip(idx, map_ordered(one, idx, workers)):
            per_tot[s], per_cnt[s] = tot, cnt
    n = cfg.n_samples
    ntot = per_cnt.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = per_tot.sum(axis=0) / ntot
        resid = per_tot - mean * per_cnt
        se = np.sqrt(n / (n - 1) * np.sum(resid ** 2, axis=0)) / ntot if n > 1 \
            else np.full_like(mean, np.nan)
    return BinnedOverlaps(np.asarray(cfg.checkpoints), j, edges, mean, se, ntot, n)
