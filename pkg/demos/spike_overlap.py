"""
A single outlier a=5 over an empty bulk (the factor model).

The spike moves as a + t/a until it meets the edge 2 sqrt(t) at t=a^2.
Its eigenvector keeps a squared overlap f(t) = 1 - t/a^2 with the initial
one, and the fluctuations of the overlap are Gaussian with variance g2(t).

    python demos/spike_overlap.py [output_dir]
"""
import sys
from pathlib import Path

import numpy as np

from eigenflow import spike
from eigenflow.experiments.svg import Plot
from eigenflow.spectral_model import SpectralModel

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

model = SpectralModel.factor(5.0)
tr = spike.spike_trajectory(model, t_max=30.0)
print(f"critical time {spike.critical_time(model):.4f}, detected death at {tr.death_time:.3f}")

times = np.linspace(0.0, 30.0, 13)
mc = spike.mc_principal_overlap(model, 100, times, 40, seed=7, beta=2)
theory = np.sqrt(spike.principal_overlap_f(model, times))
for t, m, se, th in zip(times, mc.mean, mc.std_err, theory):
    print(f"t={t:5.1f}  MC {m:.4f} +- {se:.4f}   sqrt(f) {th:.4f}")

for t in (5.0, 10.0, 20.0):
    g2 = spike.variance_g2(model, t)
    print(f"t={t:4.1f}  g2={g2:.5f}  g4/(3 g2^2)={spike.moments_gn(model, 4, t) / (3 * g2 ** 2):.10f}")

plot = Plot((0, 30), (0, 1.05), title="principal overlap, N=100", xlabel="t", ylabel="|<psi_1^t|psi_1^0>|")
tt = np.linspace(0, 30, 301)
plot.line(tt, np.sqrt(spike.principal_overlap_f(model, tt)), label="sqrt(1 - t/25)")
plot.points(times, mc.mean, err=mc.std_err, label="Monte Carlo")
(out / "spike_overlap.svg").write_text(plot.render())
print("wrote", out / "spike_overlap.svg")
