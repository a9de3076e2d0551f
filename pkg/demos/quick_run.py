#!/usr/bin/env python3
#
# Smallest end-to-end story: run a coarse scenario, look at the energy
# ledger, put the run on its dissipation arclength, and ask where the
# evolution is sliding (B) versus jumping (A).
#
# Takes a couple of seconds; nothing is written to disk.

import numpy as np

from bvsim.config import MeshConfig, RunConfig, SolverOptions
from bvsim.scenario import build_model
from bvsim import solver, reparam
from bvsim.diagnostics import classify_regimes

cfg = RunConfig(mesh=MeshConfig(nx=6, ny=6), solver=SolverOptions(tau=4e-3))
model = build_model(cfg)

traj = solver.run(model, cfg.solver)
res, worst = solver.edb_residual(traj)
print(f"{traj.n_nodes - 1} steps, wall {traj.wall_time:.1f}s")
print(f"energy balance: worst relative residual {worst:.2e}")
print(f"damage floor   : {min(z.min() for z in traj.zs):.4f}")
print(f"plastic norm   : {np.hypot(*traj.ps[-1].T).max() * np.sqrt(2):.3f}")

rt = reparam.rescale(model, traj, n_samples=256)
print(f"\narclength S = {rt.S:.4f} (t_end = {traj.ts[-1]:g})")
_, nworst = reparam.normalization_residual(rt)
print(f"normalization |t' + rates + D D* - 1| <= {nworst:.2e}")

report = classify_regimes(rt.s, rt.t, rt.Dstar)
print("\nregime components along s:")
for c in report.components:
    span = c.s_hi - c.s_lo
    print(f"  {c.kind}  s in [{c.s_lo:.3f}, {c.s_hi:.3f}]  (length {span:.3f})")
