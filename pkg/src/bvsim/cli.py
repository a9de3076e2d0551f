"""
Command line front end.

Three subcommands::

    bvsim run   [-c cfg.toml] -o OUTDIR      # one run, full ledger
    bvsim sweep [-c cfg.toml] -o OUTDIR --eps 4e-2 2e-2 1e-2 5e-3
    bvsim check OUTDIR                       # recompute diagnostics from a ledger

Exit codes: 0 success, 2 a time step failed to converge, 3 a post-run check
failed, 4 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, config_from_dict, load_config
from .ledger import ledger_hash, load_states
from .reparam import rescale
from .scenario import build_model, health_checks, run_diagnostics, run_pipeline
from .solver import StepFailure

__all__ = ["main"]

EXIT_OK = 0
EXIT_STEP_FAILURE = 2
EXIT_CHECK_FAILURE = 3
EXIT_CONFIG_ERROR = 4


def _eps_dirname(eps: float) -> str:
    return f"eps_{eps:.3e}"


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.eps is not None:
        cfg = dataclasses.replace(
            cfg, solver=dataclasses.replace(cfg.solver, eps=args.eps)
        )
    result = run_pipeline(cfg, args.out)
    print(f"run finished: {result.traj.n_nodes - 1} steps, "
          f"wall time {result.traj.wall_time:.2f} s")
    if result.det_hash:
        print(f"ledger hash: {result.det_hash}")
    for msg in result.failures:
        print(f"CHECK FAILED: {msg}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_CHECK_FAILURE


def _sweep_worker(config_path: Optional[str], eps: float, outdir: str) -> List[str]:
    cfg = load_config(config_path)
    cfg = dataclasses.replace(cfg, solver=dataclasses.replace(cfg.solver, eps=eps))
    result = run_pipeline(cfg, outdir)
    return result.failures


def _cmd_sweep(args: argparse.Namespace) -> int:
    load_config(args.config)  # validate before spawning workers
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eps_list = sorted(set(args.eps), reverse=True)
    dirs = {eps: out / _eps_dirname(eps) for eps in eps_list}

    failures: List[str] = []
    step_failed = False
    if args.jobs == 1:
        results = []
        for eps in eps_list:
            try:
                results.append(_sweep_worker(args.config, eps, str(dirs[eps])))
            except StepFailure as exc:
                step_failed = True
                print(f"eps={eps:g}: step failure: {exc}", file=sys.stderr)
                results.append([f"step failure: {exc}"])
    else:
        results = []
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futs = {
                eps: pool.submit(_sweep_worker, args.config, eps, str(dirs[eps]))
                for eps in eps_list
            }
            for eps in eps_list:
                try:
                    results.append(futs[eps].result())
                except StepFailure as exc:
                    step_failed = True
                    print(f"eps={eps:g}: step failure: {exc}", file=sys.stderr)
                    results.append([f"step failure: {exc}"])

    manifest = {}
    for eps, fails in zip(eps_list, results):
        manifest[_eps_dirname(eps)] = {"eps": eps, "failures": fails}
        for msg in fails:
            print(f"eps={eps:g}: CHECK FAILED: {msg}", file=sys.stderr)
        failures.extend(fails)
    (out / "sweep.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"sweep finished: {len(eps_list)} runs in {out}")
    if step_failed:
        return EXIT_STEP_FAILURE
    return EXIT_OK if not failures else EXIT_CHECK_FAILURE


def _cmd_check(args: argparse.Namespace) -> int:
    outdir = Path(args.outdir)
    run_json = outdir / "run.json"
    if not run_json.is_file():
        raise ConfigError(f"{run_json} not found; not a run directory?")
    try:
        meta = json.loads(run_json.read_text(encoding="utf-8"))
        cfg = config_from_dict(meta["config"])
    except (json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"unreadable run metadata in {run_json}: {exc}") from exc

    stored_hash = meta.get("determinism_hash")
    current_hash = ledger_hash(outdir)
    failures: List[str] = []
    if stored_hash and stored_hash != current_hash:
        failures.append("ledger files changed since the run was written")

    model = build_model(cfg)
    traj = load_states(outdir / "states.npz")
    rt = rescale(model, traj, n_samples=cfg.reparam.n_samples)
    diag = run_diagnostics(model, traj, rt, cfg)
    failures.extend(health_checks(model, traj, rt, diag))

    for msg in failures:
        print(f"CHECK FAILED: {msg}", file=sys.stderr)
    if not failures:
        print(f"all checks passed for {outdir}")
    return EXIT_OK if not failures else EXIT_CHECK_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvsim",
        description="Viscously regularized damage-plasticity runs and "
        "balanced-viscosity diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation and write its ledger")
    p_run.add_argument("-c", "--config", default=None, help="TOML config file")
    p_run.add_argument("-o", "--out", default=None, help="output directory")
    p_run.add_argument("--eps", type=float, default=None,
                       help="override solver.eps from the config")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a viscosity sweep")
    p_sweep.add_argument("-c", "--config", default=None, help="TOML config file")
    p_sweep.add_argument("-o", "--out", required=True, help="output directory")
    p_sweep.add_argument("--eps", type=float, nargs="+",
                         default=[4e-2, 2e-2, 1e-2, 5e-3],
                         help="viscosities to run (one subdirectory each)")
    p_sweep.add_argument("-j", "--jobs", type=int, default=1,
                         help="parallel worker processes")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_check = sub.add_parser(
        "check", help="recompute diagnostics from a run directory"
    )
    p_check.add_argument("outdir", help="directory written by `bvsim run`")
    p_check.set_defaults(func=_cmd_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except StepFailure as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        return EXIT_STEP_FAILURE
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
