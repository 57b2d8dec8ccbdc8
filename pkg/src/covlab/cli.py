"""Command-line front end.

Subcommands: simulate, verify, bound, calibrate, report.  Exit codes:
0 success, 2 config error, 3 numerical error.  The default output
directory comes from --output-dir, the config, or $COVLAB_OUTPUT_DIR.
"""

from __future__ import annotations

import datetime
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import bounds as bounds_mod
from . import experiments, plotting, reporting
from .config import ConfigError, load_config, parse_calibrate, parse_simulate, parse_verify
from .geometry import NormGeometry
from .models import UndefinedRankError
from .opnorm import UnsupportedSizeError
from .sampling import load_batch_csv

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

THEOREM_ALIASES = {
    "classical": "classical_thm21",
    "expectation_upper": "expectation_upper_thm24",
    "expectation_lower": "expectation_lower_thm24",
    "concentration": "concentration_thm25",
    "concentration_implicit": "concentration_implicit_thm26",
    "crude": "crude_lemma34",
    "subgaussian": "subgaussian_thm27",
    "bernstein": "bernstein_psi1",
}


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _output_dir(explicit, cfg_value) -> Path:
    out = explicit or cfg_value or os.environ.get("COVLAB_OUTPUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _guard(fn, *args, **kwargs):
    """Run an operation, mapping failures to the CLI exit-code contract."""
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except (UndefinedRankError, UnsupportedSizeError, np.linalg.LinAlgError,
            ArithmeticError, RuntimeError) as exc:
        _fail(EXIT_NUMERICAL, str(exc))
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))


@click.group()
def main():
    """Monte Carlo laboratory for effective-rank covariance bounds."""


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("-o", "--output-dir", default=None)
@click.option("--workers", default=None, type=int, help="override worker count")
def simulate(config_path, output_dir, workers):
    """Run a deviation Monte Carlo campaign from a config file."""

    def run():
        cfg = parse_simulate(load_config(config_path))
        if workers is not None:
            cfg["workers"] = workers
        raw = load_config(config_path)
        raw.pop("workers", None)  # worker count must not affect outputs
        cfg_hash = reporting.config_hash(raw)
        stats = experiments.run_deviation_mc(
            cfg["model"], cfg["n"], cfg["R"], cfg["seed"],
            kind=cfg["kind"], t_grid=cfg["t_grid"], workers=cfg["workers"], tol=cfg["tol"],
        )
        out = _output_dir(output_dir, cfg["output_dir"])
        stats_path = out / f"sim_{cfg_hash}_stats.json"
        reps_path = out / f"sim_{cfg_hash}_replicates.csv"
        reporting.write_stats_json(stats, stats_path, cfg_hash)
        reporting.write_replicates_csv(stats, reps_path, cfg_hash)
        click.echo(str(stats_path))
        click.echo(str(reps_path))

    _guard(run)


def _run_verify_campaign(cfg):
    report = {"schema_version": reporting.SCHEMA_VERSION, "checks": {}}
    scaling = experiments.verify_expectation_scaling(
        cfg["grid"], cfg["R"], cfg["seed"], kind=cfg["kind"],
        workers=cfg["workers"], mc_budget=cfg["mc_budget"],
    )
    report["scaling"] = reporting.scaling_result_to_dict(scaling)
    th = cfg["thresholds"]
    checks = report["checks"]
    if scaling.fit_low is not None:
        checks["slope_low"] = bool(
            th["slope_low"][0] <= scaling.fit_low.slope <= th["slope_low"][1]
            and scaling.fit_low.r_squared >= th["r_squared_min"]
        )
    if scaling.fit_high is not None:
        checks["slope_high"] = bool(
            th["slope_high"][0] <= scaling.fit_high.slope <= th["slope_high"][1]
            and scaling.fit_high.r_squared >= th["r_squared_min"]
        )
    lo, hi = scaling.ratio_band
    checks["ratio_band"] = bool(hi / lo <= th["ratio_band_max"]) if lo > 0 else False

    conc_fits = []
    if cfg["concentration"] is not None:
        c = cfg["concentration"]
        report["concentration"] = []
        gap_ok = True
        for centering in c["centerings"]:
            fit = experiments.fit_concentration(
                c["model"], c["n"], c["R"], cfg["seed"], t_grid=c["t_grid"],
                centering=centering, kind=cfg["kind"], workers=cfg["workers"],
                mc_budget=cfg["mc_budget"],
            )
            conc_fits.append(fit)
            entry = reporting.concentration_fit_to_dict(fit)
            if c["second_seed"] is not None:
                fit2 = experiments.fit_concentration(
                    c["model"], c["n"], c["R"], c["second_seed"], t_grid=c["t_grid"],
                    centering=centering, kind=cfg["kind"], workers=cfg["workers"],
                    mc_budget=cfg["mc_budget"],
                )
                entry["second_seed_constant"] = fit2.fitted_constant
                entry["reproducible_within_0.2"] = bool(
                    abs(fit.fitted_constant - fit2.fitted_constant) <= 0.2 + 1e-12
                )
            report["concentration"].append(entry)
        stats = experiments.run_deviation_mc(
            c["model"], c["n"], c["R"], cfg["seed"], kind=cfg["kind"],
            t_grid=(), workers=cfg["workers"],
        )
        gap = experiments.median_mean_gap(stats, c["model"], mc_budget=cfg["mc_budget"])
        gap_ok = gap.gap <= th["gap_factor"] * gap.radius
        report["median_mean_gap"] = {
            "gap": gap.gap, "radius": gap.radius, "regime": gap.regime,
        }
        checks["median_mean_gap"] = bool(gap_ok)

    if cfg["lower_bound"]:
        report["lower_bound"] = []
        ok = True
        for model, n, R in cfg["lower_bound"]:
            check = experiments.verify_lower_bound_large_r(
                model, n, R, cfg["seed"], kind=cfg["kind"],
                workers=cfg["workers"], mc_budget=cfg["mc_budget"],
            )
            report["lower_bound"].append(reporting.lower_bound_to_dict(check))
            if check.applicable and not check.holds:
                ok = False
        checks["lower_bound"] = bool(ok)

    if cfg["lp"] is not None:
        lp = cfg["lp"]
        stats = experiments.run_deviation_mc(
            lp["model"], lp["n"], lp["R"], cfg["seed"], kind=cfg["kind"],
            t_grid=(), workers=cfg["workers"],
        )
        report["lp_moments"] = {
            f"{p:g}": experiments.lp_moment(lp["model"], lp["n"], lp["R"], p, cfg["seed"], stats=stats)
            for p in lp["p"]
        }

    report["passed"] = bool(all(checks.values())) if checks else True
    return report, scaling, conc_fits


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("-o", "--output-dir", default=None)
@click.option("--workers", default=None, type=int)
@click.option("--figures/--no-figures", default=True)
def verify(config_path, output_dir, workers, figures):
    """Scaling, concentration, gap, and lower-bound verification campaign."""

    def run():
        raw = load_config(config_path)
        cfg = parse_verify(raw)
        if workers is not None:
            cfg["workers"] = workers
        raw.pop("workers", None)
        cfg_hash = reporting.config_hash(raw)
        out = _output_dir(output_dir, cfg["output_dir"])
        report, scaling, conc_fits = _run_verify_campaign(cfg)
        report["config_hash"] = cfg_hash

        report_path = out / "verify_report.json"
        report_path.write_text(reporting.canonical_json(report))
        plotdata = out / "plotdata"
        plotdata.mkdir(exist_ok=True)
        qs = [p.r / p.n for p in scaling.grid]
        ys = [p.mean_deviation / p.op_norm for p in scaling.grid]
        reporting.write_xy_csv(
            plotdata / "scaling_points.csv", qs, ys,
            comments=[f"config_hash={cfg_hash}", "x=r/n y=mean_deviation/op_norm"],
        )
        for fit, name in ((scaling.fit_low, "low"), (scaling.fit_high, "high")):
            if fit is not None:
                reporting.write_xy_csv(
                    plotdata / f"scaling_fit_{name}.csv",
                    [p[0] for p in fit.points], [p[1] for p in fit.points],
                    comments=[f"slope={fit.slope!r}", f"intercept={fit.intercept!r}"],
                )
        for fit in conc_fits:
            ts = sorted(fit.t_grid)
            reporting.write_xy_csv(
                plotdata / f"concentration_{fit.centering}.csv",
                ts, [fit.exceedance_rates[t] for t in ts],
                comments=[f"fitted_constant={fit.fitted_constant!r}", f"regime={fit.regime}"],
            )
        if figures:
            figdir = out / "figures"
            figdir.mkdir(exist_ok=True)
            plotting.save_scaling_figure(scaling, figdir / "scaling.svg")
            if conc_fits:
                plotting.save_concentration_figure(conc_fits, figdir / "concentration.svg")
        click.echo(str(report_path))
        if not report["passed"]:
            click.echo("verification checks FAILED", err=True)

    _guard(run)


@main.command()
@click.option("--theorem", required=True)
@click.option("--c", "constant", default=1.0, type=float, help="leading constant")
@click.option("--opnorm", default=None, type=float)
@click.option("--r", default=None, type=float)
@click.option("--r-tilde", default=None, type=float)
@click.option("--n", default=None, type=float)
@click.option("--t", default=None, type=float)
@click.option("--d", default=None, type=float)
@click.option("--m-center", default=None, type=float, help="median or mean M")
@click.option("--psi1", default=None, type=float)
@click.option("--e-max-sq", default=None, type=float)
@click.option("--a", default=None, type=float, help="fixed_point: additive term")
@click.option("--b", default=None, type=float, help="fixed_point: sqrt coefficient")
@click.option("--data", default=None, type=click.Path(), help="confidence: batch CSV")
@click.option("--geometry", default="euclidean")
def bound(theorem, constant, opnorm, r, r_tilde, n, t, d, m_center, psi1, e_max_sq, a, b, data, geometry):
    """Evaluate a closed-form bound; prints a JSON report to stdout."""

    def run():
        if theorem == "fixed_point":
            if a is None or b is None:
                raise ConfigError("fixed_point needs --a and --b")
            value = bounds_mod.fixed_point_delta(a, b)
            click.echo(reporting.canonical_json(
                {"theorem": "fixed_point", "inputs": {"a": a, "b": b}, "value": value,
                 "constant": 1.0, "regime": "not_applicable"}
            ), nl=False)
            return
        if theorem == "confidence":
            if data is None or t is None:
                raise ConfigError("confidence needs --data and --t")
            batch = load_batch_csv(data)
            rep = bounds_mod.confidence_bound(batch, t, constant, NormGeometry(geometry))
            click.echo(reporting.canonical_json(rep.to_dict()), nl=False)
            return
        name = THEOREM_ALIASES.get(theorem, theorem)
        inputs = {}
        for key, val in (
            ("op_norm", opnorm), ("r", r), ("r_tilde", r_tilde), ("n", n), ("t", t),
            ("d", d), ("M", m_center), ("psi1_norm", psi1), ("e_max_sq", e_max_sq),
        ):
            if val is not None:
                inputs[key] = val
        rep = bounds_mod.eval_bound(bounds_mod.BoundSpec(theorem=name, constant=constant, inputs=inputs))
        click.echo(reporting.canonical_json(rep.to_dict()), nl=False)

    _guard(run)


@main.command()
@click.option("-c", "--config", "config_path", required=True, type=click.Path())
@click.option("-o", "--output", default=None, type=click.Path())
@click.option("--workers", default=None, type=int)
def calibrate(config_path, output, workers):
    """Fit concentration constants and write the calibrated-constants file."""

    def run():
        cfg = parse_calibrate(load_config(config_path))
        if workers is not None:
            cfg["workers"] = workers
        constants = {}
        for centering in cfg["centerings"]:
            fit = experiments.fit_concentration(
                cfg["model"], cfg["n"], cfg["R"], cfg["seed"],
                t_grid=cfg["t_grid"], centering=centering, workers=cfg["workers"],
            )
            constants[f"concentration_thm25.{centering}.{fit.regime}"] = fit.fitted_constant
        er = experiments.effective_rank(cfg["model"], seed=cfg["seed"])
        stats = experiments.run_deviation_mc(
            cfg["model"], cfg["n"], cfg["R"], cfg["seed"], t_grid=(), workers=cfg["workers"],
        )
        q = er.r / cfg["n"]
        constants["expectation_upper_thm24"] = stats.mean / (er.op_norm * max(q**0.5, q))
        target = output or cfg["output"] or "calibrated_constants.txt"
        bounds_mod.save_constants(
            target, constants,
            provenance={
                "experiment": cfg["experiment_id"],
                "date": datetime.date.today().isoformat(),
                "seed": cfg["seed"],
            },
        )
        click.echo(str(target))

    _guard(run)


@main.command()
@click.option("--replicates", "replicates_path", required=True, type=click.Path())
@click.option("-o", "--output-dir", default=None)
@click.option("--figures/--no-figures", default=True)
def report(replicates_path, output_dir, figures):
    """Re-render stats, plot data, and figures from stored replicates."""

    def run():
        stats = reporting.read_replicates_csv(replicates_path)
        out = _output_dir(output_dir, None)
        stem = Path(replicates_path).stem.replace("_replicates", "")
        reporting.write_stats_json(stats, out / f"{stem}_stats.json")
        sorted_reps = np.sort(stats.replicates)
        reporting.write_xy_csv(
            out / f"{stem}_ecdf.csv",
            sorted_reps, (np.arange(len(sorted_reps)) + 1) / len(sorted_reps),
            comments=[f"source={Path(replicates_path).name}", "x=deviation y=ecdf"],
        )
        if figures:
            plotting.save_deviation_histogram(stats, out / f"{stem}_hist.svg")
        click.echo(str(out / f"{stem}_stats.json"))

    _guard(run)


if __name__ == "__main__":
    main()
