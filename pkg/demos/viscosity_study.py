#!/usr/bin/env python3
#
# What survives as the viscosity goes to zero?  Run the same scenario at
# three viscosities, park each run on its own dissipation arclength, and
# compare: the total arclength should stay put, and the energy profiles
# E(s) should become a Cauchy sequence in eps.
#
# A coarse mesh keeps this under a minute.

import numpy as np

from bvsim.config import MeshConfig, RunConfig, SolverOptions
from bvsim.scenario import build_model
from bvsim import solver, reparam

EPS = [4e-2, 2e-2, 1e-2]

cfg = RunConfig(mesh=MeshConfig(nx=6, ny=6))
model = build_model(cfg)

rts = {}
for eps in EPS:
    traj = solver.run(model, SolverOptions(eps=eps, tau=4e-3))
    rts[eps] = reparam.rescale(model, traj, n_samples=256)
    print(f"eps={eps:g}: S = {rts[eps].S:.4f}")

S = [rts[e].S for e in EPS]
print(f"\narclength spread max/min = {max(S) / min(S):.4f}")

# energy profiles on a shared arclength grid
s_shared = np.linspace(0.0, min(S), 12)
E = {e: np.interp(s_shared, rts[e].s, rts[e].E) for e in EPS}
d_coarse = np.abs(E[4e-2] - E[2e-2])
d_fine = np.abs(E[2e-2] - E[1e-2])

print("\n   s      |E_4e-2 - E_2e-2|   |E_2e-2 - E_1e-2|")
for s, a, b in zip(s_shared, d_coarse, d_fine):
    marker = "  <-- closer" if b < a else ""
    print(f" {s:5.2f}      {a:11.3e}        {b:11.3e}{marker}")
print(f"\ncloser at {np.sum(d_fine < d_coarse)} of {len(s_shared)} samples")
