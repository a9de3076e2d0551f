"""
bvsim: viscously regularized damage-plasticity and its rate-independent limit.

The package simulates a two-dimensional quasi-static solid with scalar
damage (unidirectional, with a nonlocal gradient-type regularization) and
perfectly plastic deviatoric flow whose yield stress degrades with damage.
Both internal variables evolve by viscous time-incremental minimization;
the viscosity `eps` is a regularization, not a material property, and the
point of the toolkit is to study the `eps -> 0` limit:

* :mod:`bvsim.solver` runs the incremental evolution and keeps an exact
  per-step energy ledger;
* :mod:`bvsim.reparam` rescales a run to its energy-dissipation arclength,
  where viscous jumps become resolved transitions;
* :mod:`bvsim.diagnostics` checks the limit energy-dissipation structure on
  the rescaled run: regime classification, the one-sided cornerstone
  estimate, and the lower energy-dissipation inequality.

`bvsim run` / `bvsim sweep` / `bvsim check` expose the pipeline on the
command line; ledger files are plain CSV/JSON (:mod:`bvsim.ledger`).
"""

from .config import ConfigError, RunConfig, load_config
from .energetics import Loads, Model, State, TimeProfile
from .materials import MaterialParams
from .mesh import Mesh, crossed_rectangle, read_mesh, write_mesh
from .reparam import ReparamTrajectory, arclength, normalization_residual, rescale
from .scenario import build_model, run_pipeline
from .solver import SolverOptions, StepFailure, Trajectory, edb_residual, run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "Loads",
    "Model",
    "State",
    "TimeProfile",
    "MaterialParams",
    "Mesh",
    "crossed_rectangle",
    "read_mesh",
    "write_mesh",
    "ReparamTrajectory",
    "arclength",
    "normalization_residual",
    "rescale",
    "build_model",
    "run_pipeline",
    "SolverOptions",
    "StepFailure",
    "Trajectory",
    "edb_residual",
    "run",
    "__version__",
]
