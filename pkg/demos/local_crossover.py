"""
From the macroscopic kernel to the microscopic lattice profile.

At scale tau = N rho t the macroscopic overlap w/N approaches the Cauchy
profile, with a relative correction of order t that vanishes as N grows.
On the lattice, the noiseless Fekete profile converges to the same Cauchy
shape for large tau.

    python demos/local_crossover.py
"""
import numpy as np

from eigenflow import burgers, dyson
from eigenflow.spectral_model import Semicircle, SpectralModel

model = SpectralModel(Semicircle(2.0))
rho = float(burgers.density_rho(model, 0.0, 0.0))
tau = 100.0
for N in (10_000, 100_000):
    t = tau / (N * rho)
    gaps = []
    for n in (0, 50, 100):
        w = burgers.overlap_kernel_w(model, n / (N * rho), 0.0, t) / N
        gaps.append(w / dyson.cauchy_profile(n, tau, rho) - 1)
    print(f"N={N:>6}  t={t:.2e}  relative gap at n=0,50,100: " + ", ".join(f"{g:+.2e}" for g in gaps))

for tau in (1.0, 10.0, 100.0):
    n = int(tau)
    ratio = dyson.fekete_v(n, tau, rho) / dyson.cauchy_profile(n, tau, rho)
    print(f"tau={tau:5g}  fekete/cauchy at n=tau: {ratio:.4f}")
