"""Config parsing and validation for the CLI.

Configs are hierarchical key-value YAML.  Unknown keys are rejected and
missing required keys are reported by name; all randomness enters through
explicit ``seed`` keys.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .models import CovarianceModel, build_model_from_spec


class ConfigError(Exception):
    """Invalid or incomplete configuration."""


def load_config(path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    return doc


def _check_keys(section: dict, allowed, ctx: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {ctx}: {', '.join(sorted(unknown))}")


def _require(section: dict, key: str, ctx: str):
    if key not in section:
        raise ConfigError(f"missing required key '{key}' in {ctx}")
    return section[key]


def _int(section, key, ctx, default=None, minimum=None):
    val = section.get(key, default)
    if val is None:
        raise ConfigError(f"missing required key '{key}' in {ctx}")
    if not isinstance(val, int) or isinstance(val, bool):
        raise ConfigError(f"'{key}' in {ctx} must be an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(f"'{key}' in {ctx} must be >= {minimum}")
    return val


def parse_model(section, ctx: str = "model") -> CovarianceModel:
    if not isinstance(section, dict):
        raise ConfigError(f"'{ctx}' must be a mapping")
    try:
        return build_model_from_spec(section)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {ctx}: {exc}")


def parse_simulate(cfg: dict) -> dict:
    _check_keys(
        cfg,
        ("model", "n", "R", "seed", "kind", "t_grid", "workers", "output_dir", "tol"),
        "simulate config",
    )
    model = parse_model(_require(cfg, "model", "simulate config"))
    out = {
        "model": model,
        "n": _int(cfg, "n", "simulate config", minimum=1),
        "R": _int(cfg, "R", "simulate config", minimum=1),
        "seed": _int(cfg, "seed", "simulate config", minimum=0),
        "kind": cfg.get("kind", "gaussian"),
        "t_grid": tuple(cfg.get("t_grid", ())),
        "workers": _int(cfg, "workers", "simulate config", default=1, minimum=1),
        "output_dir": cfg.get("output_dir"),
        "tol": float(cfg.get("tol", 1e-9)),
    }
    if out["kind"] not in ("gaussian", "rademacher_series"):
        raise ConfigError("'kind' must be 'gaussian' or 'rademacher_series'")
    return out


def parse_verify(cfg: dict) -> dict:
    _check_keys(
        cfg,
        (
            "grid", "R", "seed", "kind", "workers", "mc_budget",
            "concentration", "lower_bound", "lp", "thresholds", "output_dir",
        ),
        "verify config",
    )
    grid_section = _require(cfg, "grid", "verify config")
    if not isinstance(grid_section, list) or not grid_section:
        raise ConfigError("'grid' in verify config must be a nonempty list")
    grid = []
    for i, entry in enumerate(grid_section):
        ctx = f"grid[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{ctx} must be a mapping")
        _check_keys(entry, ("model", "n"), ctx)
        grid.append((parse_model(_require(entry, "model", ctx), ctx), _int(entry, "n", ctx, minimum=1)))

    out = {
        "grid": grid,
        "R": _int(cfg, "R", "verify config", minimum=100),
        "seed": _int(cfg, "seed", "verify config", minimum=0),
        "kind": cfg.get("kind", "gaussian"),
        "workers": _int(cfg, "workers", "verify config", default=1, minimum=1),
        "mc_budget": _int(cfg, "mc_budget", "verify config", default=100_000, minimum=10_000),
        "output_dir": cfg.get("output_dir"),
    }

    conc = cfg.get("concentration")
    if conc is not None:
        ctx = "concentration section"
        _check_keys(conc, ("model", "n", "R", "t_grid", "centerings", "second_seed"), ctx)
        out["concentration"] = {
            "model": parse_model(_require(conc, "model", ctx), ctx),
            "n": _int(conc, "n", ctx, minimum=1),
            "R": _int(conc, "R", ctx, minimum=100),
            "t_grid": tuple(conc.get("t_grid", (1, 2, 3, 4))),
            "centerings": tuple(conc.get("centerings", ("median", "mean"))),
            "second_seed": conc.get("second_seed"),
        }
    else:
        out["concentration"] = None

    lower = cfg.get("lower_bound")
    if lower is not None:
        if not isinstance(lower, list):
            raise ConfigError("'lower_bound' must be a list")
        checks = []
        for i, entry in enumerate(lower):
            ctx = f"lower_bound[{i}]"
            _check_keys(entry, ("model", "n", "R"), ctx)
            checks.append(
                (
                    parse_model(_require(entry, "model", ctx), ctx),
                    _int(entry, "n", ctx, minimum=1),
                    _int(entry, "R", ctx, default=cfg.get("R"), minimum=100),
                )
            )
        out["lower_bound"] = checks
    else:
        out["lower_bound"] = []

    lp = cfg.get("lp")
    if lp is not None:
        ctx = "lp section"
        _check_keys(lp, ("model", "n", "R", "p"), ctx)
        out["lp"] = {
            "model": parse_model(_require(lp, "model", ctx), ctx),
            "n": _int(lp, "n", ctx, minimum=1),
            "R": _int(lp, "R", ctx, minimum=1000),
            "p": tuple(float(p) for p in lp.get("p", (1.0, 2.0))),
        }
    else:
        out["lp"] = None

    thresholds = cfg.get("thresholds", {})
    _check_keys(
        thresholds,
        ("slope_low", "slope_high", "r_squared_min", "ratio_band_max", "gap_factor"),
        "thresholds section",
    )
    out["thresholds"] = {
        "slope_low": tuple(thresholds.get("slope_low", (0.4, 0.6))),
        "slope_high": tuple(thresholds.get("slope_high", (0.9, 1.1))),
        "r_squared_min": float(thresholds.get("r_squared_min", 0.98)),
        "ratio_band_max": float(thresholds.get("ratio_band_max", 10.0)),
        "gap_factor": float(thresholds.get("gap_factor", 3.0)),
    }
    return out


def parse_calibrate(cfg: dict) -> dict:
    _check_keys(
        cfg,
        ("model", "n", "R", "seed", "t_grid", "centerings", "workers", "output", "experiment_id"),
        "calibrate config",
    )
    return {
        "model": parse_model(_require(cfg, "model", "calibrate config")),
        "n": _int(cfg, "n", "calibrate config", minimum=1),
        "R": _int(cfg, "R", "calibrate config", minimum=100),
        "seed": _int(cfg, "seed", "calibrate config", minimum=0),
        "t_grid": tuple(cfg.get("t_grid", (1, 2, 3, 4))),
        "centerings": tuple(cfg.get("centerings", ("median", "mean"))),
        "workers": _int(cfg, "workers", "calibrate config", default=1, minimum=1),
        "output": cfg.get("output"),
        "experiment_id": str(cfg.get("experiment_id", "calibration")),
    }
