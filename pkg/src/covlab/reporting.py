"""Serialization of experiment outputs: canonical JSON stats, per-replicate
CSV with provenance headers, and two-column plot-data CSV files.

JSON output is canonical (sorted keys, fixed separators) so reruns with the
same config and seed are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .experiments import DeviationStats

SCHEMA_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1) + "\n"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def stats_to_dict(stats: DeviationStats, cfg_hash: str = "") -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg_hash,
        "config": dict(stats.config),
        "mean": stats.mean,
        "median": stats.median,
        "mc_std_error_mean": stats.mc_std_error_mean,
        "quantiles": {f"{t:g}": v for t, v in sorted(stats.quantiles.items())},
        "min": float(np.min(stats.replicates)),
        "max": float(np.max(stats.replicates)),
    }


def write_stats_json(stats: DeviationStats, path, cfg_hash: str = "") -> None:
    Path(path).write_text(canonical_json(stats_to_dict(stats, cfg_hash)))


def write_replicates_csv(stats: DeviationStats, path, cfg_hash: str = "") -> None:
    cfg = stats.config
    with open(path, "w") as fh:
        fh.write(f"# model={cfg['model_label']}\n")
        fh.write(f"# seed={cfg['seed']}\n")
        fh.write(f"# kind={cfg['kind']}\n")
        fh.write(f"# n={cfg['n']}\n")
        fh.write(f"# R={cfg['R']}\n")
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write("# columns=replicate,deviation\n")
        for i, v in enumerate(stats.replicates):
            fh.write(f"{i},{float(v)!r}\n")


def read_replicates_csv(path) -> DeviationStats:
    """Rebuild deviation statistics from a stored replicate file."""
    meta = {}
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            values.append(float(line.split(",")[-1]))
    reps = np.array(values)
    if reps.size == 0:
        raise ValueError(f"no replicate rows in {path}")
    return DeviationStats(
        replicates=reps,
        mean=float(reps.mean()),
        median=float(np.median(reps)),
        quantiles={},
        mc_std_error_mean=float(reps.std(ddof=1) / np.sqrt(len(reps))) if len(reps) > 1 else 0.0,
        config={
            "model_label": meta.get("model", "unknown"),
            "n": int(meta.get("n", 0)),
            "R": len(reps),
            "seed": int(meta.get("seed", 0)),
            "kind": meta.get("kind", "gaussian"),
            "stream_offset": 0,
        },
    )


def write_xy_csv(path, xs, ys, comments=()) -> None:
    """Two-column (x, y) plot-data file with '#' comment headers."""
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("# columns=x,y\n")
        for x, y in zip(xs, ys):
            fh.write(f"{float(x)!r},{float(y)!r}\n")


def scaling_result_to_dict(result) -> dict:
    def fit_dict(fit):
        if fit is None:
            return None
        return {
            "regime": fit.regime,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "n_points": len(fit.points),
        }

    return {
        "fit_low": fit_dict(result.fit_low),
        "fit_high": fit_dict(result.fit_high),
        "ratio_band": list(result.ratio_band),
        "diagnostics": dict(result.diagnostics),
        "grid": [
            {
                "label": p.label,
                "n": p.n,
                "r": p.r,
                "op_norm": p.op_norm,
                "mean_deviation": p.mean_deviation,
                "mc_std_error": p.mc_std_error,
                "ratio": p.ratio,
            }
            for p in result.grid
        ],
    }


def concentration_fit_to_dict(fit) -> dict:
    return {
        "centering": fit.centering,
        "regime": fit.regime,
        "fitted_constant": fit.fitted_constant,
        "t_grid": list(fit.t_grid),
        "exceedance_rates": {f"{t:g}": v for t, v in sorted(fit.exceedance_rates.items())},
        "center": fit.center,
        "op_norm": fit.op_norm,
        "r": fit.r,
        "n": fit.n,
    }


def lower_bound_to_dict(check) -> dict:
    return {
        "applicable": check.applicable,
        "holds": check.holds,
        "margin": _nan_to_none(check.margin),
        "mean_deviation": _nan_to_none(check.mean_deviation),
        "threshold": _nan_to_none(check.threshold),
        "mc_std_error": _nan_to_none(check.mc_std_error),
        "reason": check.reason,
    }


def _nan_to_none(x):
    return None if x != x else x
