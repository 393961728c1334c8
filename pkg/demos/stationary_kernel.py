"""
Overlaps under the Ornstein-Uhlenbeck flow that keeps the semicircle fixed.

The kernel has a Chebyshev series and a closed form; both agree to rounding.
A small Monte Carlo (N=100) of binned overlaps N u_{i|j} follows the
bin-averaged kernel.

    python demos/stationary_kernel.py [output_dir]
"""
import sys
from pathlib import Path

import numpy as np

from eigenflow import stationary
from eigenflow.experiments.runner import figure3_data
from eigenflow.experiments.svg import Plot

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

q = stationary.KernelQuery(0.3, -0.2, 0.25)
print(f"series {stationary.kernel_series(q):.15f}\nclosed {stationary.kernel_closed(q):.15f}")

times = (0.125, 0.5)
mc, theory, mu = figure3_data(N=100, seed=3, n_samples=60, times=times, beta=2)
centres = 0.5 * (mc.edges[1:] + mc.edges[:-1])
plot = Plot((-2, 2), (0, max(theory.max(), np.nanmax(mc.mean)) * 1.1), title=f"OU overlaps, mu={mu:.3f}",
            xlabel="lambda", ylabel="N u")
for k, t in enumerate(times):
    plot.line(centres, theory[k], label=f"t={t:g}")
    plot.points(centres, mc.mean[k], err=mc.std_err[k])
    z = np.abs(mc.mean[k] - theory[k]) / mc.std_err[k]
    print(f"t={t:<6g} bins within 3 SE: {(z <= 3).sum()}/{len(z)}")
(out / "stationary_kernel.svg").write_text(plot.render())
print("wrote", out / "stationary_kernel.svg")
