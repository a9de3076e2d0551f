"""
From configuration to finished run directory.

`build_model` turns a :class:`~bvsim.config.RunConfig` into an assembled
:class:`~bvsim.energetics.Model`; `run_pipeline` drives the solver, rescales
the trajectory, evaluates the limit diagnostics, runs the health checks and
writes the ledger files.  The command line is a thin wrapper around these
two functions, and tests call them directly.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .config import RunConfig, config_to_dict
from .diagnostics import (
    classify_regimes,
    cornerstone_check,
    lower_inequality_ledger,
    node_curve,
)
from .energetics import Loads, Model
from .ledger import (
    ledger_hash,
    save_states,
    write_diagnostics_json,
    write_reparam_csv,
    write_run_json,
    write_steps_csv,
)
from .mesh import crossed_rectangle
from .reparam import normalization_residual, rescale
from .solver import Trajectory, edb_residual, run

__all__ = ["build_model", "run_pipeline", "health_checks", "PipelineResult"]


def build_model(cfg: RunConfig) -> Model:
    mesh = crossed_rectangle(cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.lx, cfg.mesh.ly)
    if cfg.loading.kind == "stretch":
        loads = Loads.uniaxial_stretch(mesh, rate=cfg.loading.rate)
    else:
        loads = Loads.simple_shear(mesh, rate=cfg.loading.rate)
    return Model(
        mesh,
        cfg.material,
        loads,
        quad_order=cfg.nonlocal_form.quad_order,
        subdivisions=cfg.nonlocal_form.subdivisions,
    )


@dataclasses.dataclass
class PipelineResult:
    traj: Trajectory
    rt: object
    diagnostics: Dict
    failures: List[str]
    outdir: Optional[Path]
    det_hash: Optional[str] = None

    @property
    def ok(self) -> bool:
        return not self.failures


def health_checks(model: Model, traj: Trajectory, rt, diag: Dict) -> List[str]:
    """Post-run sanity checks; any entry in the returned list is a failure.

    Thresholds are deliberately loose where the quantity depends on mesh or
    step resolution (normalization residual) and strict where the solver
    guarantees the property by construction (monotonicity, flow-rule
    consistency).
    """
    failures: List[str] = []

    dz_steps = np.diff(traj.zs, axis=0)
    worst_up = float(dz_steps.max(initial=0.0))
    if worst_up > 0.0:
        failures.append(f"damage increased by {worst_up:.3e} in some step")

    kkt_p_max = float(np.max(traj.kkt_p[1:], initial=0.0))
    if kkt_p_max > 1.0e-10:
        failures.append(f"plastic flow-rule residual {kkt_p_max:.3e} > 1e-10")

    _, edb_max = edb_residual(traj)
    if edb_max > 0.02:
        failures.append(f"energy balance residual {edb_max:.3e} > 2e-2")

    _, redb_max = rt.edb_residual()
    if redb_max > 0.02:
        failures.append(f"rescaled energy balance residual {redb_max:.3e} > 2e-2")
    if abs(redb_max - edb_max) > 5.0e-3:
        failures.append(
            f"rescaled vs time-domain balance residuals differ by {abs(redb_max - edb_max):.3e}"
        )

    _, norm_max = normalization_residual(rt)
    if norm_max > 0.1:
        failures.append(f"arclength normalization residual {norm_max:.3e} > 0.1")

    low = diag["lower_inequality"]
    if not low["ok"]:
        failures.append(f"lower energy-dissipation inequality slack {low['slack']:.3e} < 0")

    e_scale = 1.0 + float(np.max(np.abs(traj.E)))
    bad = [
        r
        for r in diag["cornerstone"]
        if r["admissible"] and r["slack"] < -1.0e-8 * e_scale
    ]
    if bad:
        worst = min(r["slack"] for r in bad)
        failures.append(
            f"{len(bad)} admissible cornerstone pairs with negative slack (worst {worst:.3e})"
        )
    return failures


def run_diagnostics(model: Model, traj: Trajectory, rt, cfg: RunConfig) -> Dict:
    """Evaluate all limit diagnostics for a finished run."""
    d = cfg.diagnostics
    curve = node_curve(model, traj, theta_stab=d.theta_stab)
    report = classify_regimes(
        rt.s, rt.t, rt.Dstar, theta_stab=d.theta_stab, theta_frozen=d.theta_frozen
    )
    corner = cornerstone_check(curve, n_partition=d.n_partition)
    low = lower_inequality_ledger(
        curve, n_partition=d.n_partition, eta_rel=d.eta_rel
    )
    mediesci = [
        {
            "lo": rec["lo"],
            "hi": rec["hi"],
            "kind": rec["kind"],
            "sub_nodes": rec["sub_nodes"],
            "rounds": rec["rounds"],
        }
        for rec in low["intervals"]
        if "sub_nodes" in rec
    ]
    return {
        "regimes": [dataclasses.asdict(c) for c in report.components],
        "frozen_violations": [
            dataclasses.asdict(c) for c in report.frozen_violations()
        ],
        "cornerstone": corner,
        "mediesci": mediesci,
        "lower_inequality": low,
        "constants": low["constants"],
    }


def run_pipeline(
    cfg: RunConfig, outdir: Union[str, Path, None] = None
) -> PipelineResult:
    """Run solver, rescaling, diagnostics and (optionally) write the ledger."""
    model = build_model(cfg)
    traj = run(model, cfg.solver)
    rt = rescale(model, traj, n_samples=cfg.reparam.n_samples)
    diag = run_diagnostics(model, traj, rt, cfg)
    failures = health_checks(model, traj, rt, diag)

    det_hash = None
    out: Optional[Path] = None
    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_steps_csv(out / "steps.csv", traj)
        write_reparam_csv(
            out / "reparam.csv", rt, theta_stab=cfg.diagnostics.theta_stab
        )
        write_diagnostics_json(out / "diagnostics.json", diag)
        save_states(out / "states.npz", traj)
        det_hash = ledger_hash(out)
        write_run_json(
            out / "run.json",
            {
                "config": config_to_dict(cfg),
                "eps": cfg.solver.eps,
                "tau": cfg.solver.tau,
                "t_end": cfg.solver.t_end,
                "n_nodes": traj.n_nodes,
                "n_samples": rt.n_samples,
                "arclength": float(rt.S),
                "wall_time": traj.wall_time,
                "determinism_hash": det_hash,
                "healthy": not failures,
                "failures": failures,
            },
        )
    return PipelineResult(
        traj=traj, rt=rt, diagnostics=diag, failures=failures, outdir=out,
        det_hash=det_hash,
    )
