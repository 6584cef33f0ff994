"""Flat ``key = value`` run configuration.

Keys are grouped by dotted prefixes (``schedule.``, ``solver.``,
``measurement.``, ``posterior.``, ``model.``, ``run.``). Every key has a
default; unknown keys are rejected. Environment variables named
``POSTSOLVE_<KEY>`` (dots replaced by underscores, upper-cased) override
file values, e.g. ``POSTSOLVE_POSTERIOR_W=0.2``.

Mixture components are given as ``model.<i>.mean``, ``model.<i>.var``,
``model.<i>.weight`` and ``model.<i>.label`` for ``i < model.components``;
``mean``/``var`` accept one number (broadcast) or ``model.dim``
comma-separated numbers.
"""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from .measurement import FourierMagnitudeOperator, MaskOperator
from .pipeline import RunSpec
from .posterior import PosteriorConfig
from .schedule import TimeSequence, build_ddpm_schedule
from .score import GaussianMixtureScore, MixtureComponent
from .solver import SolverParams

ENV_PREFIX = "POSTSOLVE_"

# key -> (default, type, description)
SCHEMA: dict[str, tuple[Any, type, str]] = {
    "schedule.steps": (1000, int, "number of training timesteps"),
    "schedule.beta_start": (1e-4, float, "first beta of the linear ramp"),
    "schedule.beta_end": (0.02, float, "last beta of the linear ramp"),
    "solver.c_skip": (0.0, float, "consistency skip coefficient"),
    "solver.c_out": (1.0, float, "consistency output coefficient"),
    "measurement.operator": ("mask", str, "mask | fourier"),
    "measurement.sigma": (0.01, float, "measurement noise standard deviation"),
    "measurement.kept_indices": ("", str, "fixed mask indices (comma list); empty samples a mask"),
    "measurement.grid_rows": (0, int, "Fourier grid rows; 0 means 1 x dim"),
    "measurement.grid_cols": (0, int, "Fourier grid columns; 0 means dim / rows"),
    "measurement.oversample_keep": (2, int, "oversampling numerator k"),
    "measurement.oversample_of": (8, int, "oversampling denominator n"),
    "posterior.N": (5, int, "outer posterior iterations"),
    "posterior.n": (1, int, "inner solver steps"),
    "posterior.T": (100, int, "Langevin steps per outer iteration"),
    "posterior.h": (1e-5, float, "initial Langevin step size"),
    "posterior.w": (0.1, float, "source injection weight"),
    "posterior.m": (0.01, float, "data-term scale"),
    "posterior.f": (0.5, float, "mask keep probability"),
    "posterior.seed": (0, int, "run seed"),
    "posterior.taus": ("501,401,301,201,101,1", str, "posterior time sequence"),
    "posterior.inner_t": (501, int, "inner solver noise timestep"),
    "posterior.renoise": ("vp", str, "vp | unscaled re-noising mean"),
    "posterior.optimize": (True, bool, "run the Langevin correction"),
    "model.dim": (8, int, "signal dimension"),
    "model.components": (2, int, "number of mixture components"),
    "run.source": ("sample", str, "'sample' or comma-separated source values"),
    "run.source_seed": (12345, int, "seed used when sampling the source"),
    "run.source_label": (0, int, "label of the source (initial prompt)"),
    "run.target_label": (1, int, "edit target label (target prompt)"),
    "run.guidance": (0.0, float, "classifier-free guidance scale"),
    "run.shape": ("", str, "2D lattice shape 'RxC' for SSIM; empty disables"),
}

COMPONENT_FIELDS = {"mean": str, "var": str, "weight": float, "label": int}
_COMPONENT_RE = re.compile(r"^model\.(\d+)\.(mean|var|weight|label)$")


class ConfigError(ValueError):
    """Unknown key or unparsable value."""


def _component_default(i: int, k: int, field: str) -> Any:
    if field == "mean":
        return format_value(-2.0 + 4.0 * i / (k - 1) if k > 1 else 0.0)
    if field == "var":
        return format_value(0.25)
    if field == "weight":
        return 1.0 / k
    return i


def _parse_scalar(key: str, raw: Any, typ: type) -> Any:
    if isinstance(raw, typ) and not (typ is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def format_value(value: Any) -> str:
    """Canonical text form; floats use the shortest round-trip repr."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _key_type(key: str, n_components: int) -> type:
    if key in SCHEMA:
        return SCHEMA[key][1]
    m = _COMPONENT_RE.match(key)
    if m and int(m.group(1)) < n_components:
        return COMPONENT_FIELDS[m.group(2)]
    raise ConfigError(f"unknown config key: {key}")


def parse_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings from config text; ``#`` starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value
    return raw


def resolve(raw: Mapping[str, Any], env: Optional[Mapping[str, str]] = None) -> dict[str, Any]:
    """Merge defaults, ``raw`` values and env overrides into a typed config."""
    env = os.environ if env is None else env
    merged = dict(raw)
    n_comp = int(_parse_scalar("model.components",
                               merged.get("model.components", SCHEMA["model.components"][0]),
                               int))
    if n_comp < 1:
        raise ConfigError("model.components must be >= 1")
    keys = list(SCHEMA)
    keys += [f"model.{i}.{f}" for i in range(n_comp) for f in COMPONENT_FIELDS]
    for key in keys:
        env_name = ENV_PREFIX + key.replace(".", "_").upper()
        if env_name in env:
            merged[key] = env[env_name]
    for key in merged:
        _key_type(key, n_comp)

    cfg: dict[str, Any] = {}
    for key in keys:
        if key in SCHEMA:
            default, typ, _ = SCHEMA[key]
        else:
            i, f = _COMPONENT_RE.match(key).groups()
            default, typ = _component_default(int(i), n_comp, f), COMPONENT_FIELDS[f]
        cfg[key] = _parse_scalar(key, merged.get(key, default), typ)
    return cfg


def load(path=None, overrides: Optional[Mapping[str, Any]] = None,
         env: Optional[Mapping[str, str]] = None) -> dict[str, Any]:
    raw = parse_text(Path(path).read_text(encoding="utf-8")) if path else {}
    if overrides:
        raw.update(overrides)
    return resolve(raw, env)


def echo_lines(cfg: Mapping[str, Any]) -> list[str]:
    return [f"{key}={format_value(value)}" for key, value in cfg.items()]


def documented_defaults() -> str:
    """Config file text listing every key with its default and description."""
    lines = []
    for key, (default, _, doc) in SCHEMA.items():
        lines.append(f"# {doc}")
        lines.append(f"{key} = {format_value(default)}")
    return "\n".join(lines) + "\n"


def _floats(key: str, text: str, dim: int) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in str(text).split(",") if v.strip()])
    except ValueError:
        raise ConfigError(f"bad numeric list for {key}: {text!r}") from None
    if vals.size == 1:
        return np.full(dim, vals[0])
    if vals.size != dim:
        raise ConfigError(f"{key} has {vals.size} values, expected 1 or {dim}")
    return vals


def build_model(cfg: Mapping[str, Any]) -> GaussianMixtureScore:
    dim = cfg["model.dim"]
    comps = []
    for i in range(cfg["model.components"]):
        comps.append(MixtureComponent(
            _floats(f"model.{i}.mean", cfg[f"model.{i}.mean"], dim),
            _floats(f"model.{i}.var", cfg[f"model.{i}.var"], dim),
            cfg[f"model.{i}.weight"],
            cfg[f"model.{i}.label"],
        ))
    return GaussianMixtureScore(comps)


def build_posterior(cfg: Mapping[str, Any]) -> PosteriorConfig:
    if cfg["posterior.renoise"] not in ("vp", "unscaled"):
        raise ConfigError("posterior.renoise must be 'vp' or 'unscaled'")
    return PosteriorConfig(
        outer_iters=cfg["posterior.N"],
        inner_solver_steps=cfg["posterior.n"],
        langevin_steps=cfg["posterior.T"],
        step_size=cfg["posterior.h"],
        inject_weight=cfg["posterior.w"],
        data_scale=cfg["posterior.m"],
        keep_probability=cfg["posterior.f"],
        seed=cfg["posterior.seed"],
        renoise_scaled=cfg["posterior.renoise"] == "vp",
        optimize=cfg["posterior.optimize"],
    )


def sample_source(model: GaussianMixtureScore, label: int, seed: int) -> np.ndarray:
    """Draw one signal from the components carrying ``label``."""
    rng = np.random.default_rng(seed)
    idx = np.flatnonzero(model.labels == label)
    if idx.size == 0:
        raise ConfigError(f"no mixture component has label {label}")
    w = model.weights[idx] / model.weights[idx].sum()
    k = idx[rng.choice(idx.size, p=w)]
    return model.means[k] + np.sqrt(model.variances[k]) * rng.standard_normal(model.dimension)


def _grid(cfg, dim):
    rows, cols = cfg["measurement.grid_rows"], cfg["measurement.grid_cols"]
    rows = rows or 1
    cols = cols or dim // rows
    if rows * cols != dim:
        raise ConfigError(f"grid {rows}x{cols} does not cover dimension {dim}")
    return rows, cols


def build_operator(cfg: Mapping[str, Any]):
    dim = cfg["model.dim"]
    kind = cfg["measurement.operator"]
    sigma = cfg["measurement.sigma"]
    if kind == "fourier":
        rows, cols = _grid(cfg, dim)
        return FourierMagnitudeOperator(rows, cols, cfg["measurement.oversample_keep"],
                                        cfg["measurement.oversample_of"], sigma)
    if kind != "mask":
        raise ConfigError(f"measurement.operator must be 'mask' or 'fourier', got {kind!r}")
    kept = cfg["measurement.kept_indices"].strip()
    if not kept:
        return None
    try:
        indices = tuple(int(v) for v in kept.split(","))
    except ValueError:
        raise ConfigError(f"bad measurement.kept_indices: {kept!r}") from None
    return MaskOperator(indices, dim, sigma)


def build_run_spec(cfg: Mapping[str, Any], mode: str,
                   model: Optional[GaussianMixtureScore] = None) -> RunSpec:
    model = model or build_model(cfg)
    src_label = cfg["run.source_label"]
    tgt_label = src_label if mode == "reconstruct" else cfg["run.target_label"]
    if cfg["run.source"].strip().lower() == "sample":
        source = sample_source(model, src_label, cfg["run.source_seed"])
    else:
        source = _floats("run.source", cfg["run.source"], cfg["model.dim"])
    shape = None
    if cfg["run.shape"].strip():
        try:
            shape = tuple(int(v) for v in cfg["run.shape"].lower().split("x"))
        except ValueError:
            raise ConfigError(f"bad run.shape {cfg['run.shape']!r}") from None
        if len(shape) != 2 or shape[0] * shape[1] != cfg["model.dim"]:
            raise ConfigError(f"run.shape {cfg['run.shape']!r} does not match model.dim")
    taus = tuple(int(v) for v in cfg["posterior.taus"].split(","))
    return RunSpec(
        mode=mode,
        source=source,
        source_label=src_label,
        target_label=tgt_label,
        posterior=build_posterior(cfg),
        operator=build_operator(cfg),
        noise_sigma=cfg["measurement.sigma"],
        schedule=build_ddpm_schedule(cfg["schedule.steps"], cfg["schedule.beta_start"],
                                     cfg["schedule.beta_end"]),
        times=TimeSequence(taus, cfg["posterior.n"]),
        solver=SolverParams(cfg["solver.c_skip"], cfg["solver.c_out"]),
        guidance=cfg["run.guidance"],
        inner_start=cfg["posterior.inner_t"],
        shape=shape,
    )
