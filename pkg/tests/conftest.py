"""Session fixtures: the expensive simulations run once and are shared.

The reference pipeline (frozen config, tau = 1e-3) takes ~1 min; the tau
scan and the viscosity sweep add a few more runs on top.  Everything is
deterministic, so session scope is safe.
"""

import os
from pathlib import Path

# Pin BLAS threading before numpy comes up anywhere: the runtime budget in
# the acceptance suite is a single-threaded number, and oversubscription
# makes the small dense solves slower, not faster.
for _v in (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_v, "1")

import pytest

from bvsim import reparam, solver
from bvsim.config import MeshConfig, RunConfig, load_config
from bvsim.scenario import build_model, run_pipeline
from bvsim.solver import SolverOptions

REFERENCE_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "reference.toml"


@pytest.fixture(scope="session")
def reference_config():
    return load_config(REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def reference_model(reference_config):
    return build_model(reference_config)


@pytest.fixture(scope="session")
def reference_result(reference_config, tmp_path_factory):
    """Full reference pipeline with the ledger persisted to a temp dir."""
    outdir = tmp_path_factory.mktemp("reference_ledger")
    return run_pipeline(reference_config, outdir=outdir)


@pytest.fixture(scope="session")
def reference_traj(reference_result):
    return reference_result.traj


@pytest.fixture(scope="session")
def reference_rt(reference_result):
    return reference_result.rt


@pytest.fixture(scope="session")
def tau_scan(reference_model, reference_traj):
    """Trajectories at tau in {4e-3, 2e-3, 1e-3} on the reference scenario."""
    out = {1e-3: reference_traj}
    for tau in (4e-3, 2e-3):
        out[tau] = solver.run(reference_model, SolverOptions(tau=tau))
    return out


@pytest.fixture(scope="session")
def eps_sweep(reference_model, reference_rt):
    """Rescaled trajectories over eps in {4e-2, 2e-2, 1e-2, 5e-3}, tau = 1e-3."""
    rts = {1e-2: reference_rt}
    for eps in (4e-2, 2e-2, 5e-3):
        traj = solver.run(reference_model, SolverOptions(eps=eps))
        rts[eps] = reparam.rescale(reference_model, traj, n_samples=512)
    return rts


@pytest.fixture(scope="session")
def small_model():
    """6x6 mesh model for random-state oracle comparisons (cheap slopes)."""
    return build_model(RunConfig(mesh=MeshConfig(nx=6, ny=6)))


@pytest.fixture(scope="session")
def tiny_model():
    """4x4 mesh model for quick end-to-end runs inside unit tests."""
    return build_model(RunConfig(mesh=MeshConfig(nx=4, ny=4)))
