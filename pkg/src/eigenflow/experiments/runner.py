"""
Experiment drivers. Each writes CSV files (and an SVG for the figures) into
the config's output directory and returns a summary dict; :func:`run` wraps
them with a :class:`RunRecord` manifest.
"""
from __future__ import annotations

import datetime as _dt
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .. import burgers, dyson, matrix_mc, spike, stationary
from ..errors import ConfigError, DomainError, NumericError
from ..rng import substream
from ..spectral_model import Semicircle, SpectralModel, discretize
from .compare import compare
from .config import ExperimentConfig
from .io import RunRecord, write_atomic, write_csv, write_record
from .svg import Plot

__all__ = ["run", "figure_config", "figure2_data", "figure3_data", "figure4_data", "RUNNERS"]


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class _Out:
    """Collects emitted files for the manifest."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = Path(cfg.output_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name, columns, rows, comments=()):
        p = write_csv(self.root / name, columns, rows, self.cfg.hash, comments)
        self.files.append(p)
        return p

    def text(self, name, text):
        p = write_atomic(self.root / name, text)
        self.files.append(p)
        return p


def _param(cfg, name, default):
    return cfg.params.get(name, default)


# ---------------------------------------------------------------- data builders

def figure2_data(N=200, seed=0, times=None, a=5.0, beta=1):
    """One matrix path of ``A + H_t`` with a single spike ``a`` over a zero bulk.

    Returns ``(times, eigenvalues (T, N))``; the matrix is sampled exactly at each time.
    """
    times = np.linspace(0.0, 30.0, 121) if times is None else np.asarray(times, dtype=float)
    model = SpectralModel.factor(a)
    A = discretize(model, N).matrix()
    cps = tuple(times[times > 0])
    cfg = matrix_mc.MatrixPathConfig(N=N, beta=beta, t_max=float(times[-1]), checkpoints=cps,
                                     seed=seed, n_samples=1)
    mats = matrix_mc.evolve(A, cfg, 0)
    lam = [np.linalg.eigvalsh(X)[::-1] for X in mats]
    if times[0] == 0:
        lam = [np.diag(A).copy()] + lam
    return times, np.array(lam)


def _bin_theory_ou(edges, t, mu):
    """Density-weighted average of ``K_t(lam, mu)`` over each bin under the radius-2 semicircle."""
    rho = lambda x: np.sqrt(max(4.0 - x * x, 0.0)) / (2.0 * np.pi)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        lo_c, hi_c = max(lo, -2.0), min(hi, 2.0)
        if hi_c <= lo_c:
            out.append(np.nan)
            continue
        num = quad(lambda x: float(stationary.kernel_closed_array(x, mu, t)) * rho(x), lo_c, hi_c,
                   limit=200, epsabs=1e-12, epsrel=1e-10)[0]
        den = quad(rho, lo_c, hi_c, epsabs=1e-14, epsrel=1e-12)[0]
        out.append(num / den)
    return np.array(out)


def figure3_data(N=200, seed=0, n_samples=200, times=(0.125, 0.25, 0.5, 1.0), n_bins=20, j=None,
                 beta=1, workers=None):
    """OU flow from the radius-2 semicircle: binned ``N u_{i|j}`` and the bin-averaged kernel."""
    j = N // 2 if j is None else j
    A = discretize(SpectralModel(Semicircle(2.0)), N).matrix()
    mu = float(A[j - 1, j - 1])
    cfg = matrix_mc.MatrixPathConfig(N=N, beta=beta, t_max=float(times[-1]), checkpoints=tuple(times),
                                     dynamics="ou", seed=seed, n_samples=n_samples)
    edges = np.linspace(-2.0, 2.0, n_bins + 1)
    mc = matrix_mc.mc_binned_overlaps(A, cfg, j, edges, workers=workers)
    theory = np.array([_bin_theory_ou(edges, t, mu) for t in times])
    return mc, theory, mu


def figure4_data(N=200, seed=0, n_samples=100, times=None, a=5.0, beta=1, workers=None):
    """Monte Carlo of ``|<psi_1^t|psi_1^0>|`` for a single spike over a zero bulk."""
    times = np.linspace(0.0, 30.0, 25) if times is None else np.asarray(times, dtype=float)
    return spike.mc_principal_overlap(SpectralModel.factor(a), N, times, n_samples, seed, beta,
                                      workers=workers)


# ---------------------------------------------------------------- experiments

def _run_density(cfg, out):
    n_lam = int(_param(cfg, "n_lambda", 201))
    rows, qrows = [], []
    plot = None
    for t in cfg.times:
        st = burgers.bulk_state(cfg.model, t, n_lambda=n_lam)
        rows += [(l, t, r, v) for l, r, v in zip(st.lambda_grid, st.rho, st.v)]
        qrows += [(t, x, l) for x, l in zip(st.x_grid, st.lambda_of_x)]
        if plot is None:
            lo, hi = burgers.support_edges(cfg.model, cfg.times[-1])
            top = max(np.max(burgers.bulk_state(cfg.model, s, n_lambda=n_lam).rho) for s in cfg.times)
            plot = Plot((lo, hi), (0, 1.1 * top), "density", "lambda", "rho")
        plot.line(st.lambda_grid, st.rho, label=f"t={t:g}")
    out.csv("density.csv", ("lambda", "t", "rho", "v"), rows)
    out.csv("quantiles.csv", ("t", "x", "lambda"), qrows)
    out.text("density.svg", plot.render())
    return {"times": list(cfg.times)}


def _run_paths(cfg, out):
    times = np.concatenate([[0.0], np.asarray(cfg.times)]) if cfg.times[0] > 0 else np.asarray(cfg.times)
    spec = discretize(cfg.model, cfg.N)
    rng = substream(cfg.seed, "paths", 0)
    path = dyson.integrate_dyson(spec, cfg.beta, float(times[-1]), float(_param(cfg, "dt_cap", 1e-2)),
                                 rng, times=times, store_substeps=False)
    rows = [(t, i + 1, path.values[i, k]) for k, t in enumerate(times) for i in range(cfg.N)]
    out.csv("paths.csv", ("time", "i", "lambda_i"), rows)
    s = path.stats
    return {"steps": s.steps, "rejections": s.rejections, "forced_sorts": s.forced_sorts,
            "jump_flags": s.jump_flags}


def _bulk_theory_row(model, dynamics, N, n_bulk, k, j_val, t):
    """``w(lam(x_k, t), a_j, t) / N`` at the bulk level ``x_k = (k - 1/2) / n_bulk``."""
    x = (k - 0.5) / n_bulk
    if dynamics == "additive":
        lam = burgers.quantile_lambda(model, x, t)
        return burgers.overlap_kernel_w(model, lam, j_val, t) / N
    s = np.expm1(t)
    lam = np.exp(-0.5 * t) * burgers.quantile_lambda(model, x, s)
    return burgers.overlap_kernel_w_ou(model, lam, j_val, t) / N


def _run_overlaps_bulk(cfg, out):
    N = cfg.N
    j = int(_param(cfg, "j", N // 2))
    spec = discretize(cfg.model, N)
    times = tuple(t for t in cfg.times if t > 0)
    mcfg = matrix_mc.MatrixPathConfig(N=N, beta=cfg.beta, t_max=times[-1], checkpoints=times,
                                      dynamics=cfg.dynamics, seed=cfg.seed, n_samples=cfg.n_samples)
    mo = matrix_mc.mc_mean_overlaps(spec.matrix(), mcfg, j)
    a_j = float(spec.values[j - 1])
    ell = cfg.model.n_spikes
    th_rows, mc_rows = [], []
    for k, t in enumerate(times):
        for i in range(1, N + 1):
            val, asserted = np.nan, 0
            if i > ell and j > ell:
                try:
                    val, asserted = _bulk_theory_row(cfg.model, cfg.dynamics, N, N - ell, i - ell, a_j, t), 1
                except (DomainError, NumericError):
                    val, asserted = np.nan, 0
            th_rows.append((t, i, asserted, val))
            mc_rows.append((t, i, asserted, mo.mean[k, i - 1], mo.std_err[k, i - 1]))
    out.csv("overlaps.csv", ("time", "i", "j", "mean_sq_overlap", "std_err", "n_samples"), mo.rows())
    out.csv("overlaps_theory.csv", ("t", "i", "asserted", "value"), th_rows)
    out.csv("overlaps_mc.csv", ("t", "i", "asserted", "value", "std_err"), mc_rows)
    rep = compare(out.root / "overlaps_theory.csv", out.root / "overlaps_mc.csv",
                  _param(cfg, "tolerance", "z=3,frac=0.9"))
    out.text("overlaps_compare.txt", rep.text())
    return {"j": j, "compare_pass": rep.passed, "max_abs_z": rep.max_abs_z}


def _run_overlaps_crossover(cfg, out):
    rho = float(_param(cfg, "rho", 1.0 / np.pi))
    K = int(_param(cfg, "K", 32))
    n_show = int(_param(cfg, "n_max", K // 4))
    ns = np.arange(-n_show, n_show + 1)
    taus = [t for t in cfg.times if t > 0]
    th = [(tau, int(n), dyson.fekete_v(int(n), tau, rho), dyson.cauchy_profile(int(n), tau, rho))
          for tau in taus for n in ns]
    out.csv("crossover.csv", ("tau", "n", "v_n", "cauchy_n"), th)
    out.csv("crossover_theory.csv", ("tau", "n", "value"), [r[:3] for r in th])
    summary = {"rho": rho, "K": K}
    if _param(cfg, "simulate", True):
        rng = substream(cfg.seed, "mesoscopic", 0)
        times = np.concatenate([[0.0], taus])
        st = dyson.simulate_mesoscopic(K, taus[-1], rho, cfg.beta, rng, times=times,
                                       n_paths=cfg.n_samples, tails=_param(cfg, "tails", "lattice"))
        v = st.v[:, 1:, :]  # (B, T, 2K+1)
        mean = v.mean(axis=0)
        se = v.std(axis=0, ddof=1) / np.sqrt(v.shape[0]) if v.shape[0] > 1 else np.zeros_like(mean)
        rows = [(tau, int(n), mean[k, n + K], se[k, n + K]) for k, tau in enumerate(taus) for n in ns]
        out.csv("crossover_mc.csv", ("tau", "n", "value", "std_err"), rows)
        summary["max_leakage"] = float(np.max(st.leakage))
    return summary


def _run_spike(cfg, out):
    j = int(_param(cfg, "j", 1))
    t_max = float(cfg.times[-1])
    tr = spike.spike_trajectory(cfg.model, j, t_max)
    out.csv("spike_path.csv", ("t", "lambda1", "edge", "alive"),
            zip(tr.times, tr.position, tr.edge, tr.alive.astype(int)))
    tc = spike.critical_time(cfg.model, j)
    rows = []
    for t in cfg.times:
        f = spike.principal_overlap_f(cfg.model, t, j)
        try:
            g2 = spike.variance_g2(cfg.model, t, j)
        except DomainError:
            g2 = np.nan
        rows.append((t, f, g2))
    out.csv("spike_overlap.csv", ("t", "f", "g2"), rows)
    alive_times = [t for t in cfg.times if 1.0 + t * (-1.0 / tc) >= spike.ALIVE_KAPPA]
    summary = {"death_time": tr.death_time, "critical_time": tc}
    if len(alive_times) > 1:
        times = np.asarray(alive_times if alive_times[0] == 0 else [0.0] + alive_times)
        st = spike.transverse_pde(cfg.model, float(times[-1]), int(_param(cfg, "x_points", 256)), j,
                                  times=times)
        out.csv("transverse.csv", ("t", "x", "u"),
                [(t, x, st.u[i, k]) for k, t in enumerate(st.times) for i, x in enumerate(st.x)])
        summary["max_mass_error"] = float(np.max(np.abs(st.mass_error)))
    return summary


def _run_clt(cfg, out):
    mcfg = matrix_mc.MatrixPathConfig(N=cfg.N, beta=cfg.beta, t_max=float(cfg.times[-1]),
                                      dynamics=cfg.dynamics, seed=cfg.seed, n_samples=cfg.n_samples)
    rep = spike.clt_report(cfg.model, mcfg, int(_param(cfg, "j", 1)),
                           int(_param(cfg, "n_checkpoints", 41)))
    out.text("clt.txt", rep.as_text())
    return {"variance_ratio": rep.variance_ratio, "skewness": rep.skewness,
            "excess_kurtosis": rep.excess_kurtosis}


def _spike_value(model):
    if model.n_spikes != 1:
        raise ConfigError("config field 'model': this figure needs exactly one spike")
    return model.spikes[0]


def _run_figure2(cfg, out):
    a = _spike_value(cfg.model)
    times, lam = figure2_data(cfg.N, cfg.seed, np.asarray(cfg.times), a, cfg.beta)
    out.csv("figure2_eigenvalues.csv", ("t", "i", "lambda"),
            [(t, i + 1, lam[k, i]) for k, t in enumerate(times) for i in range(cfg.N)])
    edge = 2.0 * np.sqrt(times)
    spike_line = a + times / a
    out.csv("figure2_theory.csv", ("t", "spike", "edge_upper", "edge_lower"),
            zip(times, spike_line, edge, -edge))
    top = max(float(lam.max()), float(spike_line.max())) + 0.5
    p = Plot((0, times[-1]), (float(lam.min()) - 0.5, top), "eigenvalue trajectories", "t", "lambda")
    for i in range(1, cfg.N):
        p.line(times, lam[:, i], color="#9a9a9a", width=0.5)
    p.line(times, lam[:, 0], color="#1f77b4", width=1.5, label="lambda_1")
    p.line(times, spike_line, color="#d62728", dash=True, label=f"{a:g} + t/{a:g}")
    p.line(times, edge, color="#2ca02c", dash=True, label="+-2 sqrt(t)")
    p.line(times, -edge, color="#2ca02c", dash=True)
    out.text("figure2.svg", p.render())
    ok = (times > 0) & (times <= 20)
    dev = np.abs(lam[ok, 0] - spike_line[ok]) / np.sqrt(2 * times[ok] / cfg.N)
    return {"max_spike_dev_in_sd": float(dev.max())}


def _run_figure3(cfg, out):
    n_bins = int(_param(cfg, "n_bins", 20))
    mc, theory, mu = figure3_data(cfg.N, cfg.seed, cfg.n_samples, cfg.times, n_bins,
                                  _param(cfg, "j", None), cfg.beta)
    lo, hi = mc.edges[:-1], mc.edges[1:]
    mc_rows, th_rows = [], []
    for k, t in enumerate(cfg.times):
        for b in range(n_bins):
            th_rows.append((t, b, lo[b], hi[b], theory[k, b]))
            mc_rows.append((t, b, lo[b], hi[b], mc.mean[k, b], mc.std_err[k, b], int(mc.counts[k, b])))
    out.csv("figure3_theory.csv", ("t", "bin", "lambda_lo", "lambda_hi", "value"), th_rows)
    out.csv("figure3_mc.csv", ("t", "bin", "lambda_lo", "lambda_hi", "value", "std_err", "count"), mc_rows)
    grid = np.linspace(-1.999, 1.999, 401)
    curves = [(t, x, float(stationary.kernel_closed_array(x, mu, t))) for t in (0.125, 0.25, 0.5, 1.0)
              for x in grid]
    out.csv("figure3_kernel.csv", ("lambda", "mu", "t", "K"), [(x, mu, t, k) for t, x, k in curves])
    ymax = max(float(np.nanmax(mc.mean + mc.std_err)), max(c[2] for c in curves)) * 1.1
    p = Plot((-2, 2), (0, ymax), "rescaled overlaps, OU flow", "lambda", "N E[overlap^2]")
    for k, t in enumerate((0.125, 0.25, 0.5, 1.0)):
        sel = [c for c in curves if c[0] == t]
        p.line([c[1] for c in sel], [c[2] for c in sel], label=f"K_t(lambda, 0), t={t:g}")
    for k, t in enumerate(cfg.times):
        p.points(mc.centers, mc.mean[k], mc.std_err[k], color="#333333")
    out.text("figure3.svg", p.render())
    rep = compare(out.root / "figure3_theory.csv", out.root / "figure3_mc.csv",
                  _param(cfg, "tolerance", "z=3,frac=0.9"))
    out.text("figure3_compare.txt", rep.text())
    return {"compare_pass": rep.passed, "bins_within_3se": int(rep.ok.sum()), "rows": int(rep.ok.size)}


def _run_figure4(cfg, out):
    a = _spike_value(cfg.model)
    times = np.asarray(cfg.times)
    res = figure4_data(cfg.N, cfg.seed, cfg.n_samples, times, a, cfg.beta)
    tc = a * a
    theory = np.sqrt(np.maximum(1.0 - times / tc, 0.0))
    asserted = (times < tc).astype(int)
    out.csv("figure4_mc.csv", ("t", "asserted", "value", "std_err"),
            zip(times, asserted, res.mean, res.std_err))
    out.csv("figure4_theory.csv", ("t", "asserted", "value"), zip(times, asserted, theory))
    fine = np.linspace(0, times[-1], 301)
    p = Plot((0, times[-1]), (0, 1.05), "principal overlap", "t", "<psi_1^t|psi_1^0>")
    p.line(fine, np.sqrt(np.maximum(1 - fine / tc, 0)), color="#d62728", dash=True,
           label=f"sqrt(1 - t/{tc:g})")
    p.line([0, times[-1]], [1 / np.sqrt(cfg.N)] * 2, color="#2ca02c", dash=True, label="1/sqrt(N)")
    p.points(times, res.mean, res.std_err, color="#1f77b4", label="Monte Carlo mean")
    out.text("figure4.svg", p.render())
    tol = float(_param(cfg, "abs_tol", 5.0 / np.sqrt(cfg.N)))
    rep = compare(out.root / "figure4_theory.csv", out.root / "figure4_mc.csv", f"abs={tol}")
    out.text("figure4_compare.txt", rep.text())
    return {"compare_pass": rep.passed, "max_abs_dev": rep.max_abs_dev}


RUNNERS = {
    "density": _run_density,
    "paths": _run_paths,
    "overlaps-bulk": _run_overlaps_bulk,
    "overlaps-crossover": _run_overlaps_crossover,
    "spike": _run_spike,
    "clt": _run_clt,
    "figure2": _run_figure2,
    "figure3": _run_figure3,
    "figure4": _run_figure4,
}


def run(cfg: ExperimentConfig) -> RunRecord:
    """Run one experiment and write ``run.json`` next to its outputs."""
    rec = RunRecord(cfg.hash, int(cfg.seed), cfg.experiment, _now(), config=cfg.to_dict())
    out = _Out(cfg)
    rec.summary = RUNNERS[cfg.experiment](cfg, out)
    rec.finished = _now()
    for p in out.files:
        rec.add(p, out.root)
    write_record(rec, out.root)
    return rec


def figure_config(which: int, N=None, seed=None, n_samples=None, output_dir=None) -> ExperimentConfig:
    """Default config of the figure experiments."""
    if which == 2:
        d = dict(experiment="figure2", model=SpectralModel.factor(5.0), N=200,
                 times=tuple(np.linspace(0, 30, 121)), n_samples=1)
    elif which == 3:
        d = dict(experiment="figure3", model=SpectralModel(Semicircle(2.0)), N=200, dynamics="ou",
                 times=(0.125, 0.25, 0.5, 1.0), n_samples=200)
    elif which == 4:
        d = dict(experiment="figure4", model=SpectralModel.factor(5.0), N=200,
                 times=tuple(np.linspace(0, 30, 25)), n_samples=100)
    else:
        raise ConfigError(f"figure must be 2, 3 or 4, got {which}")
    if N is not None:
        d["N"] = int(N)
    if n_samples is not None:
        d["n_samples"] = int(n_samples)
    d["seed"] = 0 if seed is None else int(seed)
    d["output_dir"] = output_dir or f"figure{which}"
    return ExperimentConfig(**d)
