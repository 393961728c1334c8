"""
Initial spectra: a limiting bulk density plus a finite list of spikes.

The external source ``A`` is described by its limiting eigenvalue density
``rho_A`` (a :class:`DensitySpec`) and by isolated eigenvalues above the
bulk. Finite-size spectra are obtained by quantile allocation,
``a_k = a(k/N)``, where ``a(x)`` is the x-quantile of ``rho_A`` counted
from the top.

Every density variant provides its Stieltjes transform
``G_A(w) = int rho_A(x) / (w - x) dx`` in closed form, which is what the
deterministic solvers in :mod:`eigenflow.burgers` consume.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError

__all__ = [
    "Semicircle", "Uniform", "Triangular", "ZeroBulk", "Tabulated",
    "SpectralModel", "DiscreteSpectrum", "density_from_dict",
    "quantile_a", "discretize", "bulk_support",
]


def _clog(w):
    return np.log(np.asarray(w, dtype=complex))


def _xlog(u, w):
    """``u * log(w)`` with the limit 0 where ``u == 0``."""
    u = np.asarray(u, dtype=complex)
    safe = np.where(u == 0, 1.0, np.asarray(w, dtype=complex))
    return np.where(u == 0, 0.0, u * np.log(safe))


def _csqrt(w):
    return np.sqrt(np.asarray(w, dtype=complex))


class DensitySpec:
    """Common interface of the bulk density variants.

    Subclasses implement ``support``, ``pdf``, ``tail_cdf``, ``quantile``,
    ``stieltjes`` and ``stieltjes_deriv``. The tail CDF is
    ``x(lam) = int_lam^inf rho_A``, so that ``quantile`` is its inverse.
    """

    kind: ClassVar[str] = ""

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @property
    def scale(self) -> float:
        lo, hi = self.support()
        return max(hi - lo, abs(lo), abs(hi), 1.0)

    def moment2_outside(self, w):
        """``int rho_A(x) / (w - x)**2 dx = -G_A'(w)`` for real w outside the support."""
        return -np.real(self.stieltjes_deriv(np.asarray(w, dtype=float) + 0j))


@dataclass(frozen=True)
class Semicircle(DensitySpec):
    """Wigner semicircle of the given radius (variance ``radius**2 / 4``)."""

    radius: float = 2.0
    kind: ClassVar[str] = "semicircle"

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ConfigError(f"semicircle radius must be positive, got {self.radius}")

    def support(self):
        return (-float(self.radius), float(self.radius))

    def to_dict(self):
        return {"kind": self.kind, "radius": float(self.radius)}

    def pdf(self, lam):
        r = self.radius
        lam = np.asarray(lam, dtype=float)
        return 2.0 / (np.pi * r * r) * np.sqrt(np.clip(r * r - lam * lam, 0.0, None))

    def tail_cdf(self, lam):
        c = np.clip(np.asarray(lam, dtype=float) / self.radius, -1.0, 1.0)
        theta = np.arccos(c)
        return (theta - np.sin(theta) * np.cos(theta)) / np.pi

    def quantile(self, x):
        x = np.asarray(x, dtype=float)
        r = self.radius

        def one(xi):
            if xi <= 0.0:
                return r
            if xi >= 1.0:
                return -r
            return brentq(lambda lam: float(self.tail_cdf(lam)) - xi, -r, r,
                          xtol=1e-12)

        out = np.vectorize(one, otypes=[float])(x)
        return out[()] if out.ndim == 0 else out

    def stieltjes(self, w):
        r = self.radius
        w = np.asarray(w, dtype=complex)
        return 2.0 * (w - _csqrt(w - r) * _csqrt(w + r)) / (r * r)

    def stieltjes_deriv(self, w):
        r = self.radius
        w = np.asarray(w, dtype=complex)
        return 2.0 * (1.0 - w / (_csqrt(w - r) * _csqrt(w + r))) / (r * r)


@dataclass(frozen=True)
class Uniform(DensitySpec):
    """Uniform density on ``[lo, hi]``."""

    lo: float = -1.0
    hi: float = 1.0
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ConfigError(f"uniform density needs lo < hi, got ({self.lo}, {self.hi})")

    def support(self):
        return (float(self.lo), float(self.hi))

    def to_dict(self):
        return {"kind": self.kind, "lo": float(self.lo), "hi": float(self.hi)}

    def pdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        inside = (lam >= self.lo) & (lam <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    def tail_cdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.clip((self.hi - lam) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return self.hi - x * (self.hi - self.lo)

    def stieltjes(self, w):
        w = np.asarray(w, dtype=complex)
        return (_clog(w - self.lo) - _clog(w - self.hi)) / (self.hi - self.lo)

    def stieltjes_deriv(self, w):
        w = np.asarray(w, dtype=complex)
        return -1.0 / ((w - self.lo) * (w - self.hi))


@dataclass(frozen=True)
class Triangular(DensitySpec):
    """Triangular density on ``[lo, hi]`` with its mode at ``peak``."""

    lo: float = -1.0
    peak: float = 0.0
    hi: float = 1.0
    kind: ClassVar[str] = "triangular"

    def __post_init__(self):
        ok = all(np.isfinite(v) for v in (self.lo, self.peak, self.hi))
        if not (ok and self.lo <= self.peak <= self.hi and self.lo < self.hi):
            raise ConfigError(
                f"triangular density needs lo <= peak <= hi, lo < hi; got "
                f"({self.lo}, {self.peak}, {self.hi})")

    def support(self):
        return (float(self.lo), float(self.hi))

    def to_dict(self):
        return {"kind": self.kind, "lo": float(self.lo), "peak": float(self.peak),
                "hi": float(self.hi)}

    def pdf(self, lam):
        lo, p, hi = self.lo, self.peak, self.hi
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        if p > lo:
            m = (lam >= lo) & (lam <= p)
            out = np.where(m, 2 * (lam - lo) / ((hi - lo) * (p - lo)), out)
        if hi > p:
            m = (lam >= p) & (lam <= hi)
            out = np.where(m, 2 * (hi - lam) / ((hi - lo) * (hi - p)), out)
        return out

    def tail_cdf(self, lam):
        lo, p, hi = self.lo, self.peak, self.hi
        lam = np.clip(np.asarray(lam, dtype=float), lo, hi)
        upper = (hi - lam) ** 2 / ((hi - lo) * (hi - p)) if hi > p else np.zeros_like(lam)
        lower = 1 - (lam - lo) ** 2 / ((hi - lo) * (p - lo)) if p > lo else np.ones_like(lam)
        return np.where(lam >= p, upper, lower)

    def quantile(self, x):
        lo, p, hi = self.lo, self.peak, self.hi
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        xp = (hi - p) / (hi - lo)
        top = hi - np.sqrt(x * (hi - lo) * (hi - p))
        bottom = lo + np.sqrt((1 - x) * (hi - lo) * (p - lo))
        return np.where(x <= xp, top, bottom)

    def stieltjes(self, w):
        lo, p, hi = self.lo, self.peak, self.hi
        w = np.asarray(w, dtype=complex)
        g = np.zeros_like(w)
        if p > lo:
            c1 = 2.0 / ((hi - lo) * (p - lo))
            g = g + c1 * (_xlog(w - lo, w - lo) - _xlog(w - lo, w - p) - (p - lo))
        if hi > p:
            c2 = 2.0 / ((hi - lo) * (hi - p))
            g = g + c2 * (_xlog(hi - w, w - p) - _xlog(hi - w, w - hi) + (hi - p))
        return g

    def stieltjes_deriv(self, w):
        lo, p, hi = self.lo, self.peak, self.hi
        w = np.asarray(w, dtype=complex)
        g = np.zeros_like(w)
        # the 1/(w - peak) pieces of the two halves cancel exactly when both exist
        if p > lo:
            c1 = 2.0 / ((hi - lo) * (p - lo))
            g = g + c1 * (_clog(w - lo) - _clog(w - p))
            if hi == p:
                g = g - 2.0 / (hi - lo) / (w - p)
        if hi > p:
            c2 = 2.0 / ((hi - lo) * (hi - p))
            g = g + c2 * (_clog(w - hi) - _clog(w - p))
            if p == lo:
                g = g + 2.0 / (hi - lo) / (w - p)
        return g


@dataclass(frozen=True)
class ZeroBulk(DensitySpec):
    """Point mass at zero: the bulk of a finite-rank (factor) model."""

    kind: ClassVar[str] = "zero"

    def support(self):
        return (0.0, 0.0)

    def to_dict(self):
        return {"kind": self.kind}

    def pdf(self, lam):
        raise DomainError("the zero bulk is a point mass and has no density")

    def tail_cdf(self, lam):
        return np.where(np.asarray(lam, dtype=float) <= 0.0, 1.0, 0.0)

    def quantile(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        return out[()] if out.ndim == 0 else out

    def stieltjes(self, w):
        return 1.0 / np.asarray(w, dtype=complex)

    def stieltjes_deriv(self, w):
        return -1.0 / np.asarray(w, dtype=complex) ** 2


@dataclass(frozen=True)
class Tabulated(DensitySpec):
    """Density given by quantile samples ``a(x_k)`` on ``x_k = k / (K - 1)``.

    The quantile is interpolated linearly, so the density is piecewise
    constant between consecutive samples and its Stieltjes transform is a
    finite sum of uniform pieces.
    """

    values: tuple = field(default=())
    kind: ClassVar[str] = "tabulated"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2 or not np.all(np.isfinite(v)):
            raise ConfigError("tabulated density needs at least two finite quantile samples")
        if np.any(np.diff(v) > 0):
            raise ConfigError("tabulated quantile samples must be non-increasing in x")
        if v[0] == v[-1]:
            raise ConfigError("tabulated quantile samples span a single point; use ZeroBulk")
        object.__setattr__(self, "values", tuple(float(a) for a in v))

    @classmethod
    def from_density(cls, density: DensitySpec, K: int = 4097) -> "Tabulated":
        """Sample the quantile of another density on a uniform x-grid."""
        x = np.linspace(0.0, 1.0, K)
        return cls(tuple(np.asarray(density.quantile(x), dtype=float)))

    def _pieces(self):
        v = np.asarray(self.values)
        m = 1.0 / (v.size - 1)
        return v[:-1], v[1:], m

    def support(self):
        return (self.values[-1], self.values[0])

    def to_dict(self):
        return {"kind": self.kind, "values": list(self.values)}

    def pdf(self, lam):
        hi, lo, m = self._pieces()
        lam = np.asarray(lam, dtype=float)
        width = hi - lo
        dens = np.where(width > 0, m / np.where(width > 0, width, 1.0), 0.0)
        inside = (lam[..., None] >= lo) & (lam[..., None] < hi)
        out = np.sum(np.where(inside, dens, 0.0), axis=-1)
        return np.where(lam == hi[0], dens[0], out)

    def tail_cdf(self, lam):
        v = np.asarray(self.values)
        x = np.linspace(0.0, 1.0, v.size)
        return np.interp(np.asarray(lam, dtype=float), v[::-1], x[::-1])

    def quantile(self, x):
        v = np.asarray(self.values)
        return np.interp(np.asarray(x, dtype=float), np.linspace(0.0, 1.0, v.size), v)

    def stieltjes(self, w):
        hi, lo, m = self._pieces()
        w = np.asarray(w, dtype=complex)[..., None]
        width = hi - lo
        atom = width <= 1e-14 * self.scale
        safe = np.where(atom, 1.0, width)
        terms = np.where(atom, m / (w - hi),
                         m / safe * (_clog(w - lo) - _clog(w - hi)))
        return terms.sum(axis=-1)

    def stieltjes_deriv(self, w):
        hi, lo, m = self._pieces()
        w = np.asarray(w, dtype=complex)[..., None]
        return (-m / ((w - lo) * (w - hi))).sum(axis=-1)


_VARIANTS = {cls.kind: cls for cls in (Semicircle, Uniform, Triangular, ZeroBulk, Tabulated)}


def density_from_dict(d: dict) -> DensitySpec:
    """Build a density from its tagged-record form, e.g. ``{"kind": "uniform", "lo": -1, "hi": 1}``."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("bulk density must be an object with a 'kind' field")
    kind = d["kind"]
    if kind not in _VARIANTS:
        raise ConfigError(f"unknown bulk kind {kind!r}; expected one of {sorted(_VARIANTS)}")
    params = {k: v for k, v in d.items() if k != "kind"}
    if kind == "tabulated":
        params["values"] = tuple(params.get("values", ()))
    try:
        return _VARIANTS[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for bulk kind {kind!r}: {exc}") from None


@dataclass(frozen=True)
class SpectralModel:
    """Bulk density ``rho_A`` plus spikes ``a_1 > a_2 > ... > a_l`` above it."""

    bulk: DensitySpec
    spikes: tuple = ()

    def __post_init__(self):
        spikes = tuple(float(a) for a in self.spikes)
        object.__setattr__(self, "spikes", spikes)
        if any(not np.isfinite(a) for a in spikes):
            raise ConfigError("spikes must be finite")
        if any(b >= a for a, b in zip(spikes, spikes[1:])):
            raise ConfigError(f"spikes must be strictly decreasing, got {spikes}")
        if spikes and spikes[-1] <= self.bulk.support()[1]:
            raise ConfigError(
                f"spike {spikes[-1]} is not above the bulk upper edge {self.bulk.support()[1]}")

    @property
    def n_spikes(self) -> int:
        return len(self.spikes)

    @classmethod
    def factor(cls, *spikes: float) -> "SpectralModel":
        """Finite-rank source: zero bulk plus the given spikes."""
        return cls(ZeroBulk(), tuple(spikes))

    def to_dict(self) -> dict:
        return {"bulk": self.bulk.to_dict(), "spikes": list(self.spikes)}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralModel":
        if not isinstance(d, dict) or "bulk" not in d:
            raise ConfigError("model must be an object with a 'bulk' field")
        spikes = d.get("spikes", [])
        if not isinstance(spikes, (list, tuple)):
            raise ConfigError("model.spikes must be a list of numbers")
        return cls(density_from_dict(d["bulk"]), tuple(spikes))


@dataclass(frozen=True)
class DiscreteSpectrum:
    """N eigenvalues in non-increasing order; the first ``n_spikes`` are spikes."""

    values: np.ndarray
    n_spikes: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ConfigError("spectrum must be a non-empty vector")
        if np.any(np.diff(v) > 0):
            raise ConfigError("spectrum must be non-increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.size

    def matrix(self) -> np.ndarray:
        """Diagonal matrix with this spectrum (eigenbasis = canonical basis)."""
        return np.diag(self.values)


def quantile_a(model: SpectralModel | DensitySpec, x):
    """x-quantile ``a(x)`` of the bulk, counted from the top: ``x = int_{a(x)}^inf rho_A``."""
    bulk = model.bulk if isinstance(model, SpectralModel) else model
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) | (xa >= 1)) or np.any(~np.isfinite(xa)):
        raise DomainError("quantile level x must lie in the open interval (0, 1)")
    out = bulk.quantile(xa)
    return float(out) if np.ndim(out) == 0 else out


def discretize(model: SpectralModel, N: int) -> DiscreteSpectrum:
    """Allocate N eigenvalues: spikes first, then ``a(k/N)`` for ``k = l+1..N``.

    ``k/N`` is clamped to ``[1/(2N), 1 - 1/(2N)]`` so the quantile is never
    evaluated at an endpoint.
    """
    N = int(N)
    ell = model.n_spikes
    if N <= ell:
        raise ConfigError(f"N={N} must exceed the number of spikes ({ell})")
    k = np.arange(ell + 1, N + 1)
    x = np.clip(k / N, 1.0 / (2 * N), 1.0 - 1.0 / (2 * N))
    bulk = np.atleast_1d(np.asarray(model.bulk.quantile(x), dtype=float))
    values = np.concatenate([np.asarray(model.spikes, dtype=float), bulk])
    return DiscreteSpectrum(values, ell)


def bulk_support(model: SpectralModel | DensitySpec) -> tuple[float, float]:
    """Support interval ``(lower, upper)`` of ``rho_A``."""
    bulk = model.bulk if isinstance(model, SpectralModel) else model
    lo, hi = bulk.support()
    return (float(lo), float(hi))


def as_model(model: SpectralModel | DensitySpec, spikes: Sequence[float] = ()) -> SpectralModel:
    """Promote a bare density to a model without spikes."""
    if isinstance(model, SpectralModel):
        return model
    return SpectralModel(model, tuple(spikes))
