"""
On-disk run ledger.

A completed run is persisted as a small directory:

``steps.csv``
    one row per trajectory node; step quantities on row ``k`` describe the
    step from node ``k-1`` to node ``k`` (row 0 carries zeros).  The total
    energy at a node is reconstructible as ``Q + Phi - work``.
``reparam.csv``
    one row per arclength sample of the rescaled run.
``diagnostics.json``
    regime components, cornerstone records, sub-partition summaries, the
    lower energy-dissipation-inequality ledger and the constants used.
``run.json``
    run metadata (viscosity, step size, node count, determinism hash).
``states.npz``
    full solver states; internal, consumed by ``bvsim check`` so
    diagnostics can be recomputed without re-running the solver.

Numbers are written with shortest round-trip formatting, so equal runs
produce byte-identical files; :func:`ledger_hash` fingerprints the two CSV
files for the determinism check.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .reparam import ReparamTrajectory, normalization_residual
from .solver import Trajectory, edb_residual

__all__ = [
    "STEPS_COLUMNS",
    "REPARAM_COLUMNS",
    "SchemaError",
    "write_steps_csv",
    "write_reparam_csv",
    "write_diagnostics_json",
    "write_run_json",
    "save_states",
    "load_states",
    "read_csv_columns",
    "ledger_hash",
]

STEPS_COLUMNS = [
    "t",
    "outer_iters",
    "r_u",
    "kkt_z",
    "kkt_p",
    "Q",
    "Phi",
    "work",
    "R_cum",
    "H_cum",
    "visc_cum",
    "conj_cum",
    "edb_residual",
]

REPARAM_COLUMNS = [
    "s",
    "t",
    "tprime",
    "z_l1_rate",
    "p_l1_rate",
    "D",
    "Dstar",
    "norm_residual",
    "regime",
]


class SchemaError(ValueError):
    """Raised when a ledger file does not have the expected columns."""


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, columns: List[str], rows: List[List]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_steps_csv(path: Union[str, Path], traj: Trajectory) -> None:
    """Write the per-step energy ledger of a trajectory."""
    res, _ = edb_residual(traj)
    R_cum = np.cumsum(traj.R_inc)
    H_cum = np.cumsum(traj.H_inc)
    visc_cum = np.cumsum(traj.visc_inc)
    conj_cum = np.cumsum(traj.conj_inc)
    rows = []
    for k in range(traj.n_nodes):
        rows.append(
            [
                traj.ts[k],
                int(traj.outer_iters[k]),
                traj.r_u[k],
                traj.kkt_z[k],
                traj.kkt_p[k],
                traj.Q[k],
                traj.Phi[k],
                traj.work[k],
                R_cum[k],
                H_cum[k],
                visc_cum[k],
                conj_cum[k],
                res[k],
            ]
        )
    _write_csv(Path(path), STEPS_COLUMNS, rows)


def write_reparam_csv(
    path: Union[str, Path], rt: ReparamTrajectory, theta_stab: float = 1.0e-6
) -> None:
    """Write the arclength-sample ledger of a rescaled run."""
    resid, _ = normalization_residual(rt)
    rows = []
    for k in range(rt.n_samples):
        dstar = float(rt.Dstar[k])
        rows.append(
            [
                rt.s[k],
                rt.t[k],
                rt.tprime[k],
                rt.z_l1_rate[k],
                rt.p_l1_rate[k],
                rt.D[k],
                dstar,
                resid[k],
                "A" if dstar > theta_stab else "B",
            ]
        )
    _write_csv(Path(path), REPARAM_COLUMNS, rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "__dict__"):
        return _jsonable(vars(obj))
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_diagnostics_json(path: Union[str, Path], payload: Dict) -> None:
    Path(path).write_text(
        json.dumps(_jsonable(payload), indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_run_json(path: Union[str, Path], meta: Dict) -> None:
    Path(path).write_text(
        json.dumps(_jsonable(meta), indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# state persistence (internal artifact for `bvsim check`)
# ---------------------------------------------------------------------------

_STATE_KEYS = [
    "ts",
    "us",
    "zs",
    "ps",
    "d_z",
    "d_p",
    "Q",
    "Phi",
    "work",
    "E",
    "dtE",
    "R_inc",
    "H_inc",
    "visc_inc",
    "conj_inc",
    "work_inc",
    "outer_iters",
    "r_u",
    "kkt_z",
    "kkt_p",
    "halvings",
]


def save_states(path: Union[str, Path], traj: Trajectory) -> None:
    arrays = {k: getattr(traj, k) for k in _STATE_KEYS}
    np.savez_compressed(
        Path(path),
        eps=np.array(traj.eps),
        wall_time=np.array(traj.wall_time),
        **arrays,
    )


def load_states(path: Union[str, Path]) -> Trajectory:
    with np.load(Path(path)) as data:
        kwargs = {k: data[k] for k in _STATE_KEYS}
        return Trajectory(
            eps=float(data["eps"]),
            wall_time=float(data["wall_time"]),
            **kwargs,
        )


# ---------------------------------------------------------------------------
# reading back + fingerprint
# ---------------------------------------------------------------------------


def read_csv_columns(
    path: Union[str, Path], expected: List[str]
) -> Dict[str, np.ndarray]:
    """Read a ledger CSV, validating its header against ``expected``.

    String-valued columns (``regime``) come back as object arrays, numeric
    ones as floats.  Raises :class:`SchemaError` when the header does not
    match exactly or a row has the wrong number of fields.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    if header != expected:
        missing = [c for c in expected if c not in header]
        extra = [c for c in header if c not in expected]
        raise SchemaError(
            f"{path}: bad header (missing: {missing or 'none'}, unexpected: {extra or 'none'})"
        )
    raw: List[List[str]] = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(expected):
            raise SchemaError(f"{path}:{i}: expected {len(expected)} fields, got {len(parts)}")
        raw.append(parts)
    out: Dict[str, np.ndarray] = {}
    for j, name in enumerate(expected):
        col = [r[j] for r in raw]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = np.array(col, dtype=object)
    return out


def ledger_hash(outdir: Union[str, Path]) -> str:
    """SHA-256 fingerprint of the CSV ledger files of a run directory."""
    outdir = Path(outdir)
    h = hashlib.sha256()
    for name in ("steps.csv", "reparam.csv"):
        h.update(name.encode())
        h.update((outdir / name).read_bytes())
    return h.hexdigest()
