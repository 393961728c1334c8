"""
Theory-versus-Monte-Carlo comparison of two CSV files.

Both files carry a ``value`` column; the Monte Carlo file also has
``std_err``. All other columns of the theory file are keys and must match
row by row. A tolerance spec is a comma-separated list such as
``z=3,frac=0.9`` (|z| <= 3 in at least 90% of the rows) or ``abs=1e-3``.
Rows whose theory ``asserted`` column is 0 are reported but not judged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InputError
from .io import read_csv

__all__ = ["Tolerance", "CompareReport", "parse_tolerance", "compare", "compare_tables"]


@dataclass(frozen=True)
class Tolerance:
    z: float | None = 3.0
    abs: float | None = None
    frac: float = 1.0


def parse_tolerance(spec: str) -> Tolerance:
    """Parse ``"z=3"``, ``"abs=0.01"``, ``"z=3,frac=0.9"``; a bare number means ``z``."""
    spec = (spec or "").strip()
    if not spec:
        return Tolerance()
    try:
        return Tolerance(z=float(spec))
    except ValueError:
        pass
    kw = {"z": None}
    for part in spec.split(","):
        if "=" not in part:
            raise ConfigError(f"tolerance term {part!r} is not key=value")
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in ("z", "abs", "frac"):
            raise ConfigError(f"unknown tolerance key {k!r}")
        try:
            kw[k] = float(v)
        except ValueError:
            raise ConfigError(f"tolerance {k}={v!r} is not a number") from None
    if kw["z"] is None and kw.get("abs") is None:
        raise ConfigError("tolerance needs z= or abs=")
    if not 0 < kw.get("frac", 1.0) <= 1:
        raise ConfigError("frac must lie in (0, 1]")
    return Tolerance(**kw)


@dataclass(frozen=True)
class CompareReport:
    keys: tuple
    key_values: dict
    theory: np.ndarray
    mc: np.ndarray
    std_err: np.ndarray
    z: np.ndarray
    ok: np.ndarray
    tolerance: Tolerance
    passed: bool
    asserted: np.ndarray

    @property
    def max_abs_dev(self):
        return float(np.max(np.abs(self.mc - self.theory)[self.asserted], initial=0.0))

    @property
    def max_abs_z(self):
        return float(np.nanmax(np.abs(self.z)[self.asserted], initial=0.0))

    def text(self) -> str:
        lines = [",".join(self.keys + ("theory", "mc", "std_err", "z", "ok"))]
        for i in range(self.theory.size):
            kv = [f"{self.key_values[k][i]:g}" if isinstance(self.key_values[k][i], float)
                  else str(self.key_values[k][i]) for k in self.keys]
            lines.append(",".join(kv + [f"{self.theory[i]:.6g}", f"{self.mc[i]:.6g}",
                                        f"{self.std_err[i]:.3g}", f"{self.z[i]:.3f}",
                                        ("1" if self.ok[i] else "0") if self.asserted[i] else "-"]))
        lines.append(f"# rows={int(self.asserted.sum())} passing={int(self.ok[self.asserted].sum())} "
                     f"max|z|={self.max_abs_z:.3f} max|dev|={self.max_abs_dev:.4g} "
                     f"result={'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def compare_tables(theory, mc, tol: Tolerance) -> CompareReport:
    if "value" not in theory.columns or "value" not in mc.columns:
        raise InputError("both files need a 'value' column")
    keys = tuple(c for c in theory.columns if c not in ("value", "std_err"))
    missing = [k for k in keys if k not in mc.columns]
    if missing:
        raise InputError(f"Monte Carlo file lacks key columns {missing}")
    if len(theory) != len(mc):
        raise InputError(f"row counts differ: theory {len(theory)}, mc {len(mc)}")
    for k in keys:
        a, b = theory[k], mc[k]
        same = np.allclose(a, b, rtol=1e-12, atol=1e-12) if a.dtype != object else np.all(a == b)
        if not same:
            raise InputError(f"key column {k!r} differs between the files")
    th = np.asarray(theory["value"], dtype=float)
    mv = np.asarray(mc["value"], dtype=float)
    se = np.asarray(mc["std_err"], dtype=float) if "std_err" in mc.columns else np.zeros_like(mv)
    if "std_err" in theory.columns:
        se = np.hypot(se, np.asarray(theory["std_err"], dtype=float))
    dev = mv - th
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, np.where(dev == 0, 0.0, np.inf * np.sign(dev)))
    ok = np.ones(th.size, dtype=bool)
    if tol.z is not None:
        ok &= np.abs(z) <= tol.z
    if tol.abs is not None:
        ok &= np.abs(dev) <= tol.abs
    if "asserted" in theory.columns:
        live = np.asarray(theory["asserted"], dtype=float) != 0
        ok |= ~live
    else:
        live = np.ones(th.size, dtype=bool)
    passed = bool(not live.any() or ok[live].mean() >= tol.frac - 1e-12)
    return CompareReport(keys, {k: list(theory[k]) for k in keys}, th, mv, se, z, ok, tol, passed, live)


def compare(theory_csv, mc_csv, tolerance="z=3") -> CompareReport:
    """Per-row z-scores of ``mc.value - theory.value`` and the pass/fail verdict."""
    tol = parse_tolerance(tolerance) if isinstance(tolerance, str) else tolerance
    return compare_tables(read_csv(theory_csv), read_csv(mc_csv), tol)
