"""
Free convolution of a uniform spectrum with a growing semicircle.

The deterministic Burgers flow gives the eigenvalue density at each time;
one sample of ``A + H_t`` at N=400 shows the finite-N histogram sitting on
top of it.

    python demos/density_flow.py [output_dir]
"""
import sys
from pathlib import Path

import numpy as np

from eigenflow import burgers, matrix_mc
from eigenflow.experiments.svg import Plot
from eigenflow.rng import substream
from eigenflow.spectral_model import SpectralModel, Uniform, discretize

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

model = SpectralModel(Uniform(-1.0, 1.0))
N, times = 400, (0.05, 0.3, 1.0)
A = discretize(model, N).matrix()
rng = substream(0, "demo-density")

plot = Plot((-3.5, 3.5), (0, 0.75), title="uniform spectrum under additive GOE noise",
            xlabel="lambda", ylabel="density")
X, t_prev = A.copy(), 0.0
for t in times:
    X = X + matrix_mc.sample_hermitian_increment(N, t - t_prev, 1, rng)
    t_prev = t
    lo, hi = burgers.support_edges(model, t)
    lam = np.linspace(lo, hi, 301)
    rho = burgers.density_rho(model, lam, t, method="exact")
    hist, edges = np.histogram(np.linalg.eigvalsh(X), bins=30, range=(lo, hi), density=True)
    plot.line(lam, rho, label=f"t={t:g}")
    plot.points(0.5 * (edges[1:] + edges[:-1]), hist)
    print(f"t={t:<5g} support [{lo:.3f}, {hi:.3f}]  rho(0)={float(burgers.density_rho(model, 0.0, t)):.4f}")

# quantiles travel with the Burgers velocity
for x in (0.1, 0.5, 0.9):
    q = burgers.quantile_lambda(model, x, 1.0)
    print(f"quantile x={x}: lambda={q:+.4f}, velocity={float(burgers.velocity_v(model, q, 1.0)):+.4f}")

(out / "density_flow.svg").write_text(plot.render())
print("wrote", out / "density_flow.svg")
