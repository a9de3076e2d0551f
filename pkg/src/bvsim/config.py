"""
Run configuration.

Runs are described by a small TOML file; everything has a default so the
reference scenario is just the empty document.  Example::

    [mesh]
    nx = 16
    ny = 16

    [material]
    kappa = 0.5

    [solver]
    eps = 1.0e-2
    tau = 1.0e-3

    [loading]
    kind = "stretch"   # or "shear"
    rate = 1.0

    [reparam]
    n_samples = 512

    [diagnostics]
    n_partition = 64
    eta_rel = 0.05

Unknown keys are rejected so typos surface as configuration errors instead
of silently running the default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

try:  # pragma: no cover - depends on interpreter version
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib  # type: ignore[no-redef]

from .materials import MaterialParams
from .solver import SolverOptions

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "config_to_dict",
    "config_from_dict",
]


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class MeshConfig:
    nx: int = 16
    ny: int = 16
    lx: float = 1.0
    ly: float = 1.0


@dataclass(frozen=True)
class LoadingConfig:
    kind: str = "stretch"
    rate: float = 2.0


@dataclass(frozen=True)
class ReparamConfig:
    n_samples: int = 512


@dataclass(frozen=True)
class DiagnosticsConfig:
    n_partition: int = 64
    eta_rel: float = 0.05
    theta_stab: float = 1.0e-6
    theta_frozen: float = 1.0e-6


@dataclass(frozen=True)
class NonlocalConfig:
    quad_order: int = 3
    subdivisions: int = 1


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig = MeshConfig()
    material: MaterialParams = MaterialParams()
    solver: SolverOptions = SolverOptions()
    loading: LoadingConfig = LoadingConfig()
    reparam: ReparamConfig = ReparamConfig()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    nonlocal_form: NonlocalConfig = NonlocalConfig()


_SECTIONS = {
    "mesh": MeshConfig,
    "material": MaterialParams,
    "solver": SolverOptions,
    "loading": LoadingConfig,
    "reparam": ReparamConfig,
    "diagnostics": DiagnosticsConfig,
    "nonlocal": NonlocalConfig,
}

_SECTION_ATTR = {name: (name if name != "nonlocal" else "nonlocal_form") for name in _SECTIONS}


def _build_section(name: str, cls: type, data: Dict[str, Any]):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}"
        )
    kwargs: Dict[str, Any] = {}
    for key, value in data.items():
        want = fields[key].type
        # tolerate ints where floats are expected; reject the reverse
        if want in ("float", float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        elif want in ("int", int) and not (
            isinstance(value, int) and not isinstance(value, bool)
        ):
            raise ConfigError(f"[{name}] {key} must be an integer")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}] section: {exc}") from exc


def _validate(cfg: RunConfig) -> RunConfig:
    m = cfg.mesh
    if m.nx < 1 or m.ny < 1:
        raise ConfigError("mesh.nx and mesh.ny must be at least 1")
    if m.lx <= 0 or m.ly <= 0:
        raise ConfigError("mesh.lx and mesh.ly must be positive")
    if cfg.loading.kind not in ("stretch", "shear"):
        raise ConfigError("loading.kind must be 'stretch' or 'shear'")
    if cfg.loading.rate <= 0:
        raise ConfigError("loading.rate must be positive")
    s = cfg.solver
    if s.eps <= 0 or s.tau <= 0 or s.t_end <= 0:
        raise ConfigError("solver.eps, solver.tau and solver.t_end must be positive")
    if s.tau > s.t_end:
        raise ConfigError("solver.tau must not exceed solver.t_end")
    if not 0 < s.z_floor < 1:
        raise ConfigError("solver.z_floor must lie in (0, 1)")
    if cfg.reparam.n_samples < 2:
        raise ConfigError("reparam.n_samples must be at least 2")
    d = cfg.diagnostics
    if d.n_partition < 2:
        raise ConfigError("diagnostics.n_partition must be at least 2")
    if d.eta_rel <= 0 or d.theta_stab <= 0 or d.theta_frozen <= 0:
        raise ConfigError("diagnostics thresholds must be positive")
    nl = cfg.nonlocal_form
    if nl.quad_order < 1 or nl.subdivisions < 0:
        raise ConfigError("nonlocal.quad_order must be >= 1 and subdivisions >= 0")
    return cfg


def load_config(source: Union[str, Path, None] = None) -> RunConfig:
    """Load and validate a run configuration.

    Parameters
    ----------
    source : str, Path or None
        Path to a TOML file, or None for the all-defaults configuration.

    Raises
    ------
    ConfigError
        On unreadable files, TOML syntax errors, unknown sections or keys,
        or values outside their valid ranges.
    """
    if source is None:
        return _validate(RunConfig())
    path = Path(source)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    return config_from_dict(doc)


def config_from_dict(doc: Dict[str, Any]) -> RunConfig:
    """Build a validated configuration from a nested plain dict."""
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    parts: Dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        data = doc.get(name, {})
        if not isinstance(data, dict):
            raise ConfigError(f"section [{name}] must be a table")
        parts[_SECTION_ATTR[name]] = _build_section(name, cls, data)
    return _validate(RunConfig(**parts))


def config_to_dict(cfg: RunConfig) -> Dict[str, Any]:
    """Plain nested dict round-trippable through :func:`config_from_dict`."""
    return {
        name: dataclasses.asdict(getattr(cfg, _SECTION_ATTR[name]))
        for name in _SECTIONS
    }
