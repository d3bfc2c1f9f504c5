"""Flat key = value run configuration with dotted sections.

Example::

    model.alpha = 0.1
    model.sigma2 = 1.0
    selection.bumps = 2, 5, 2; 1, -5, 2
    selection.truncation_radius = 12
    initial.kind = gaussian
    initial.mean = -8
    outputs.dir = out/run
    run.seed = 42

Unknown keys are rejected so typos fail loudly, and every validation error
names the offending field.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Density, Grid, ModelParams, density_from_csv, gaussian_density, mixture_density
from .errors import ConfigError
from .kernels import SelectionFn

KNOWN_KEYS = {
    "grid.x_min", "grid.x_max", "grid.n_points",
    "model.alpha", "model.sigma2", "model.dt", "model.t_final",
    "selection.bumps", "selection.table", "selection.truncation_radius",
    "initial.kind", "initial.mean", "initial.variance", "initial.components",
    "initial.path",
    "outputs.dir", "outputs.record_every", "outputs.snapshots", "outputs.figures",
    "run.seed", "run.early_stop", "run.stop_tol", "run.quantile_k",
    "steady.z_init", "steady.fixed_tol", "steady.max_iter", "steady.damping",
    "macro.search_min", "macro.search_max", "macro.root_tol",
    "macro.ode_y0", "macro.ode_t_final", "macro.ode_dt",
}


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        out[key] = value.strip()
    return out


def _require_known(mapping: dict[str, str], source: str) -> None:
    unknown = sorted(set(mapping) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown config key(s): {', '.join(unknown)}")


def _get_float(mapping, key, default=None) -> float:
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing config field '{key}'")
        return default
    try:
        return float(mapping[key])
    except ValueError:
        raise ConfigError(f"field '{key}' must be a number, got {mapping[key]!r}") from None


def _get_int(mapping, key, default=None) -> int:
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing config field '{key}'")
        return default
    try:
        return int(mapping[key])
    except ValueError:
        raise ConfigError(f"field '{key}' must be an integer, got {mapping[key]!r}") from None


def _get_bool(mapping, key, default: bool) -> bool:
    if key not in mapping:
        return default
    val = mapping[key].lower()
    if val in ("true", "yes", "1", "on"):
        return True
    if val in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"field '{key}' must be a boolean, got {mapping[key]!r}")


def _parse_triples(text: str, key: str) -> list[tuple[float, float, float]]:
    triples = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p for p in chunk.replace(",", " ").split() if p]
        if len(parts) != 3:
            raise ConfigError(f"field '{key}' expects semicolon-separated triples, got {chunk!r}")
        try:
            triples.append(tuple(float(p) for p in parts))
        except ValueError:
            raise ConfigError(f"field '{key}' has a non-numeric entry in {chunk!r}") from None
    if not triples:
        raise ConfigError(f"field '{key}' is empty")
    return triples


@dataclass
class RunConfig:
    """Validated configuration for one run."""

    grid: Grid
    alpha: float
    sigma2: float
    dt: float
    t_final: float
    selection: SelectionFn
    initial_kind: str
    initial_spec: dict = field(default_factory=dict)
    out_dir: Path | None = None
    record_every: int = 20
    snapshot_times: list[float] | None = None
    figures: bool = True
    seed: int = 0
    early_stop: bool = True
    stop_tol: float = 1e-10
    quantile_k: int = 4096
    steady_z_init: float | None = None
    steady_fixed_tol: float = 1e-10
    steady_max_iter: int = 10000
    steady_damping: float = 1.0
    macro_search: tuple[float, float] | None = None
    macro_root_tol: float = 1e-10
    macro_ode_y0: float | None = None
    macro_ode_t_final: float | None = None
    macro_ode_dt: float = 0.01

    def model_params(self) -> ModelParams:
        try:
            return ModelParams(self.alpha, self.sigma2, self.selection, self.dt, self.t_final)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def build_initial(self) -> Density:
        kind = self.initial_kind
        if kind == "gaussian":
            return gaussian_density(self.grid, self.initial_spec["mean"],
                                    self.initial_spec["variance"])
        if kind == "mixture":
            return mixture_density(self.grid, self.initial_spec["components"])
        if kind == "table":
            return density_from_csv(self.initial_spec["path"], self.grid)
        raise ConfigError(f"field 'initial.kind' must be gaussian, mixture or table, got {kind!r}")


def config_from_mapping(mapping: dict[str, str], source: str = "<config>",
                        require_initial: bool = True) -> RunConfig:
    _require_known(mapping, source)
    try:
        grid = Grid(
            _get_float(mapping, "grid.x_min", -20.0),
            _get_float(mapping, "grid.x_max", 20.0),
            _get_int(mapping, "grid.n_points", 1024),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from None

    alpha = _get_float(mapping, "model.alpha")
    sigma2 = _get_float(mapping, "model.sigma2", 1.0)
    dt = _get_float(mapping, "model.dt", 0.05)
    default_t_final = 50.0 / alpha if alpha > 0.0 else 50.0
    t_final = _get_float(mapping, "model.t_final", default_t_final)

    if "selection.table" in mapping:
        path = Path(mapping["selection.table"])
        if not path.exists():
            raise ConfigError(f"field 'selection.table' points to missing file {path}")
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        sel_kwargs = {"table": (data[:, 0], data[:, 1])}
    elif "selection.bumps" in mapping:
        sel_kwargs = {"bumps": tuple(_parse_triples(mapping["selection.bumps"], "selection.bumps"))}
    else:
        raise ConfigError("missing config field 'selection.bumps' (or 'selection.table')")
    if "selection.truncation_radius" in mapping:
        sel_kwargs["truncation_radius"] = _get_float(mapping, "selection.truncation_radius")
    try:
        selection = SelectionFn(**sel_kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid selection: {exc}") from None

    initial_kind = mapping.get("initial.kind")
    initial_spec: dict = {}
    if require_initial or initial_kind is not None:
        if initial_kind is None:
            raise ConfigError("missing config field 'initial.kind'")
        if initial_kind == "gaussian":
            initial_spec = {
                "mean": _get_float(mapping, "initial.mean"),
                "variance": _get_float(mapping, "initial.variance", 2.0 * sigma2),
            }
        elif initial_kind == "mixture":
            if "initial.components" not in mapping:
                raise ConfigError("missing config field 'initial.components'")
            initial_spec = {
                "components": _parse_triples(mapping["initial.components"], "initial.components")
            }
        elif initial_kind == "table":
            if "initial.path" not in mapping:
                raise ConfigError("missing config field 'initial.path'")
            path = Path(mapping["initial.path"])
            if not path.exists():
                raise ConfigError(f"field 'initial.path' points to missing file {path}")
            initial_spec = {"path": path}
        else:
            raise ConfigError(
                f"field 'initial.kind' must be gaussian, mixture or table, got {initial_kind!r}"
            )

    snapshots: list[float] | None = None
    snap_text = mapping.get("outputs.snapshots", "geometric")
    if snap_text != "geometric":
        try:
            snapshots = [float(p) for p in snap_text.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(
                f"field 'outputs.snapshots' must be 'geometric' or numbers, got {snap_text!r}"
            ) from None

    cfg = RunConfig(
        grid=grid,
        alpha=alpha,
        sigma2=sigma2,
        dt=dt,
        t_final=t_final,
        selection=selection,
        initial_kind=initial_kind or "gaussian",
        initial_spec=initial_spec,
        out_dir=Path(mapping["outputs.dir"]) if "outputs.dir" in mapping else None,
        record_every=_get_int(mapping, "outputs.record_every", 20),
        snapshot_times=snapshots,
        figures=_get_bool(mapping, "outputs.figures", True),
        seed=_get_int(mapping, "run.seed", 0),
        early_stop=_get_bool(mapping, "run.early_stop", True),
        stop_tol=_get_float(mapping, "run.stop_tol", 1e-10),
        quantile_k=_get_int(mapping, "run.quantile_k", 4096),
        steady_z_init=(_get_float(mapping, "steady.z_init")
                       if "steady.z_init" in mapping else None),
        steady_fixed_tol=_get_float(mapping, "steady.fixed_tol", 1e-10),
        steady_max_iter=_get_int(mapping, "steady.max_iter", 10000),
        steady_damping=_get_float(mapping, "steady.damping", 1.0),
        macro_search=(
            (_get_float(mapping, "macro.search_min"), _get_float(mapping, "macro.search_max"))
            if "macro.search_min" in mapping or "macro.search_max" in mapping
            else None
        ),
        macro_root_tol=_get_float(mapping, "macro.root_tol", 1e-10),
        macro_ode_y0=(_get_float(mapping, "macro.ode_y0")
                      if "macro.ode_y0" in mapping else None),
        macro_ode_t_final=(_get_float(mapping, "macro.ode_t_final")
                           if "macro.ode_t_final" in mapping else None),
        macro_ode_dt=_get_float(mapping, "macro.ode_dt", 0.01),
    )
    cfg.model_params()  # fail early on numeric-bound violations
    return cfg


def load_config(path, require_initial: bool = True) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    mapping = parse_kv_text(path.read_text(), source=str(path))
    return config_from_mapping(mapping, source=str(path), require_initial=require_initial)


def parse_sweep_spec(path) -> list[dict[str, str]]:
    """Cartesian product of comma-separated value lists, deduplicated.

    Each line is `config.key = v1, v2, ...`; every combination yields an
    override mapping applied on top of the base config.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"sweep spec file not found: {path}")
    mapping = parse_kv_text(path.read_text(), source=str(path))
    _require_known(mapping, str(path))
    keys = sorted(mapping)
    value_lists = []
    for key in keys:
        vals = [v.strip() for v in mapping[key].split(",") if v.strip()]
        if not vals:
            raise ConfigError(f"{path}: sweep key '{key}' has no values")
        value_lists.append(vals)
    combos = []
    seen = set()
    for combo in itertools.product(*value_lists):
        if combo in seen:
            continue
        seen.add(combo)
        combos.append(dict(zip(keys, combo)))
    return combos


def combo_label(combo: dict[str, str]) -> str:
    return "__".join(f"{k.split('.')[-1]}={v}" for k, v in sorted(combo.items()))
