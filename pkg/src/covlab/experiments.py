"""Monte Carlo campaigns: deviation statistics, scaling fits, concentration
constants, moment and Orlicz-norm estimators.

Every campaign is a pure function of (config, seed).  Replicates use
independent counter-based substreams, so a parallel executor produces the
same output as a serial one.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .models import CovarianceModel, effective_rank
from .opnorm import operator_norm, operator_norm_deviation
from .sampling import sample

DEFAULT_T_GRID = (1.0, 2.0, 3.0, 4.0)
CONSTANT_GRID_STEP = 0.05
CONSTANT_GRID_MAX = 40.0
FIT_WINDOW_LOW = 0.25  # r/n <= 1/4
FIT_WINDOW_HIGH = 4.0  # r/n >= 4
MIN_FIT_POINTS = 4
MAX_PLAIN_T = 6.0

REGIME_R_LE_N = "r_le_n"
REGIME_R_GE_N = "r_ge_n"


@dataclass(frozen=True)
class DeviationStats:
    replicates: np.ndarray
    mean: float
    median: float
    quantiles: dict  # t -> (1 - e^-t)-quantile
    mc_std_error_mean: float
    config: dict

    def __post_init__(self):
        r = np.ascontiguousarray(np.asarray(self.replicates, dtype=float))
        r.flags.writeable = False
        object.__setattr__(self, "replicates", r)


@dataclass(frozen=True)
class ScalingFit:
    regime: str
    slope: float
    intercept: float
    r_squared: float
    points: list  # (log(r/n), log(mean deviation / ||Sigma||))


@dataclass(frozen=True)
class GridPoint:
    label: str
    n: int
    r: float
    op_norm: float
    mean_deviation: float
    mc_std_error: float
    ratio: float  # mean / (||Sigma|| * max(sqrt(r/n), r/n))


@dataclass(frozen=True)
class ScalingResult:
    fit_low: Optional[ScalingFit]
    fit_high: Optional[ScalingFit]
    ratio_band: tuple
    grid: list  # GridPoint per (model, n)
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConcentrationFit:
    centering: str  # median | mean
    regime: str
    fitted_constant: float
    t_grid: tuple
    exceedance_rates: dict  # t -> empirical rate at the fitted constant
    center: float
    op_norm: float
    r: float
    n: int


@dataclass(frozen=True)
class LowerBoundCheck:
    applicable: bool
    holds: bool
    margin: float
    mean_deviation: float
    threshold: float
    mc_std_error: float
    reason: str = ""


@dataclass(frozen=True)
class GapReport:
    gap: float
    radius: float
    regime: str


def _replicate_deviations(args) -> tuple:
    model, n, seed, kind, stream_offset, rep_lo, rep_hi, tol = args
    out = np.empty(rep_hi - rep_lo)
    for i, rep in enumerate(range(rep_lo, rep_hi)):
        batch = sample(model, n, seed, kind=kind, substream=stream_offset + rep)
        out[i] = operator_norm_deviation(batch, model, tol=tol)
    return rep_lo, out


def _empirical_quantile(sorted_reps: np.ndarray, t: float) -> float:
    # order statistic at index ceil((1 - e^-t) R), 1-based, no interpolation
    r_count = len(sorted_reps)
    idx = min(math.ceil((1.0 - math.exp(-t)) * r_count), r_count) - 1
    return float(sorted_reps[max(idx, 0)])


def run_deviation_mc(
    model: CovarianceModel,
    n: int,
    R: int,
    seed: int,
    kind: str = "gaussian",
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    workers: int = 1,
    stream_offset: int = 0,
    tol: float = 1e-9,
) -> DeviationStats:
    """R independent replicates of ||Sigma_hat - Sigma||, with summary stats."""
    if R < 100:
        raise ValueError("R must be >= 100 for stable mean/median estimates")
    t_grid = tuple(float(t) for t in t_grid)
    if t_grid:
        t_max = max(t_grid)
        required = 30.0 * math.exp(t_max)
        if R < required:
            raise ValueError(
                f"R={R} too small for the t={t_max} quantile; need R >= {math.ceil(required)}"
            )
    devs = np.empty(R)
    if workers <= 1:
        _, devs[:] = _replicate_deviations((model, n, seed, kind, stream_offset, 0, R, tol))
    else:
        bounds = np.linspace(0, R, workers + 1, dtype=int)
        tasks = [
            (model, n, seed, kind, stream_offset, int(lo), int(hi), tol)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for lo, chunk in pool.map(_replicate_deviations, tasks):
                devs[lo : lo + len(chunk)] = chunk
    sorted_devs = np.sort(devs)
    quantiles = {t: _empirical_quantile(sorted_devs, t) for t in t_grid}
    return DeviationStats(
        replicates=devs,
        mean=float(devs.mean()),
        median=float(np.median(devs)),
        quantiles=quantiles,
        mc_std_error_mean=float(devs.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
        config={
            "model_label": model.label,
            "n": n,
            "R": R,
            "seed": seed,
            "kind": kind,
            "stream_offset": stream_offset,
        },
    )


def _least_squares_loglog(points) -> ScalingFit | None:
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    a = np.vstack([xs, np.ones_like(xs)]).T
    (slope, intercept), *_ = np.linalg.lstsq(a, ys, rcond=None)
    fitted = slope * xs + intercept
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    ss_res = float(np.sum((ys - fitted) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, r2


def verify_expectation_scaling(
    grid: Sequence[tuple],
    R: int,
    seed: int,
    kind: str = "gaussian",
    workers: int = 1,
    mc_budget: int = 100_000,
    tol: float = 1e-9,
) -> ScalingResult:
    """Fit log-log slopes of the mean deviation against r/n in both regimes.

    ``grid`` is a list of (model, n) pairs.  Points with r/n <= 1/4 feed the
    square-root fit, points with r/n >= 4 the linear fit; the crossover is
    excluded.  A regime with fewer than 4 points is skipped with a
    diagnostic instead of fitted.
    """
    points = []
    diagnostics = {}
    for idx, (model, n) in enumerate(grid):
        er = effective_rank(model, mc_budget=mc_budget, seed=seed)
        stats = run_deviation_mc(
            model, n, R, seed, kind=kind, t_grid=(), workers=workers,
            stream_offset=idx << 32, tol=tol,
        )
        q = er.r / n
        ratio = stats.mean / (er.op_norm * max(math.sqrt(q), q))
        points.append(
            GridPoint(
                label=model.label, n=n, r=er.r, op_norm=er.op_norm,
                mean_deviation=stats.mean, mc_std_error=stats.mc_std_error_mean,
                ratio=ratio,
            )
        )

    def fit_for(regime, selector):
        pts = [
            (math.log(p.r / p.n), math.log(p.mean_deviation / p.op_norm))
            for p in points
            if selector(p.r / p.n) and p.mean_deviation > 0
        ]
        if len(pts) < MIN_FIT_POINTS:
            diagnostics[regime] = (
                f"skipped: {len(pts)} point(s) in window, need >= {MIN_FIT_POINTS}"
            )
            return None
        slope, intercept, r2 = _least_squares_loglog(pts)
        return ScalingFit(
            regime=regime, slope=float(slope), intercept=float(intercept),
            r_squared=float(r2), points=pts,
        )

    fit_low = fit_for(REGIME_R_LE_N, lambda q: q <= FIT_WINDOW_LOW)
    fit_high = fit_for(REGIME_R_GE_N, lambda q: q >= FIT_WINDOW_HIGH)
    ratios = [p.ratio for p in points]
    return ScalingResult(
        fit_low=fit_low,
        fit_high=fit_high,
        ratio_band=(min(ratios), max(ratios)) if ratios else (math.nan, math.nan),
        grid=points,
        diagnostics=diagnostics,
    )


def verify_lower_bound_large_r(
    model: CovarianceModel,
    n: int,
    R: int,
    seed: int,
    kind: str = "gaussian",
    workers: int = 1,
    mc_budget: int = 100_000,
) -> LowerBoundCheck:
    """Check the large-r lower bound: mean deviation >= ||Sigma|| r / (2n)."""
    try:
        er = effective_rank(model, mc_budget=mc_budget, seed=seed)
    except Exception as exc:  # zero model etc.
        return LowerBoundCheck(False, False, math.nan, math.nan, math.nan, math.nan, str(exc))
    if er.r < 2 * n:
        return LowerBoundCheck(
            False, False, math.nan, math.nan, math.nan, math.nan,
            f"not applicable: r={er.r:.3f} < 2n={2 * n}",
        )
    stats = run_deviation_mc(model, n, R, seed, kind=kind, t_grid=(), workers=workers)
    threshold = 0.5 * er.op_norm * er.r / n
    slack = 3.0 * stats.mc_std_error_mean
    margin = stats.mean - (threshold - slack)
    return LowerBoundCheck(
        applicable=True,
        holds=margin >= 0,
        margin=margin,
        mean_deviation=stats.mean,
        threshold=threshold,
        mc_std_error=stats.mc_std_error_mean,
    )


def _concentration_radius(regime: str, op_norm: float, r: float, n: int, t: float) -> float:
    if regime == REGIME_R_LE_N:
        return op_norm * max(math.sqrt(t / n), t / n)
    return op_norm * max(math.sqrt(r / n) * math.sqrt(t / n), t / n)


def fit_concentration(
    model: CovarianceModel,
    n: int,
    R: int,
    seed: int,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    centering: str = "median",
    kind: str = "gaussian",
    workers: int = 1,
    mc_budget: int = 100_000,
    allow_large_t: bool = False,
    stats: Optional[DeviationStats] = None,
) -> ConcentrationFit:
    """Smallest grid constant C whose radius keeps every empirical
    exceedance rate below e^-t across the t grid."""
    if centering not in ("median", "mean"):
        raise ValueError("centering must be 'median' or 'mean'")
    t_grid = tuple(float(t) for t in t_grid)
    if not t_grid or min(t_grid) < 1:
        raise ValueError("t_grid must be a nonempty subset of [1, 6]")
    t_max = max(t_grid)
    if t_max > MAX_PLAIN_T and not allow_large_t:
        raise ValueError("t > 6 requires allow_large_t=True (and a very large R)")
    required = 30.0 * math.exp(t_max)
    if R < required:
        raise ValueError(
            f"R={R} too small for t_max={t_max}; need R >= {math.ceil(required)}"
        )
    v = operator_norm(model.matrix(), model.geometry).value
    if v == 0.0:
        r_val, regime = 0.0, REGIME_R_LE_N
    else:
        er = effective_rank(model, mc_budget=mc_budget, seed=seed)
        r_val = er.r
        regime = REGIME_R_LE_N if r_val <= n else REGIME_R_GE_N
    if stats is None:
        stats = run_deviation_mc(model, n, R, seed, kind=kind, t_grid=(), workers=workers)
    center = stats.median if centering == "median" else stats.mean
    abs_dev = np.abs(stats.replicates - center)
    radii = np.array([_concentration_radius(regime, v, r_val, n, t) for t in t_grid])
    targets = np.exp(-np.array(t_grid))
    n_steps = int(round(CONSTANT_GRID_MAX / CONSTANT_GRID_STEP))
    fitted = None
    for step in range(1, n_steps + 1):
        c = round(step * CONSTANT_GRID_STEP, 10)
        rates = [float(np.mean(abs_dev > c * rad)) for rad in radii]
        if all(rate <= tgt for rate, tgt in zip(rates, targets)):
            fitted = c
            fitted_rates = dict(zip(t_grid, rates))
            break
    if fitted is None:
        raise RuntimeError(
            f"no constant on the grid up to {CONSTANT_GRID_MAX} satisfies the tail targets"
        )
    return ConcentrationFit(
        centering=centering,
        regime=regime,
        fitted_constant=fitted,
        t_grid=t_grid,
        exceedance_rates=fitted_rates,
        center=float(center),
        op_norm=v,
        r=r_val,
        n=n,
    )


def median_mean_gap(
    stats: DeviationStats,
    model: CovarianceModel,
    mc_budget: int = 100_000,
    seed: int = 0,
) -> GapReport:
    """|mean - median| of the deviation and the applicable theorem radius."""
    n = stats.config["n"]
    er = effective_rank(model, mc_budget=mc_budget, seed=seed)
    if er.r <= n:
        regime, radius = REGIME_R_LE_N, er.op_norm / math.sqrt(n)
    else:
        regime, radius = REGIME_R_GE_N, er.op_norm * math.sqrt(er.r / n) / math.sqrt(n)
    return GapReport(gap=abs(stats.mean - stats.median), radius=radius, regime=regime)


def lp_moment(
    model: CovarianceModel,
    n: int,
    R: int,
    p: float,
    seed: int,
    kind: str = "gaussian",
    workers: int = 1,
    stats: Optional[DeviationStats] = None,
) -> float:
    """Empirical L^p moment (E ||Sigma_hat - Sigma||^p)^(1/p)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p > 8:
        raise ValueError("p > 8 is too tail-sensitive for the default budgets")
    if stats is None:
        if R < 1000:
            raise ValueError("R must be >= 1000 for L^p moments")
        stats = run_deviation_mc(model, n, R, seed, kind=kind, t_grid=(), workers=workers)
    return float(np.mean(stats.replicates**p) ** (1.0 / p))


def empirical_orlicz_norm(samples, psi: str = "psi2") -> float:
    """Empirical Orlicz norm: smallest C with mean(psi(|s|/C)) = 1.

    psi1(u) = e^u - 1, psi2(u) = e^(u^2) - 1.  Bisection over
    [max|s|/50, 50 max|s|]; returns an endpoint when the root lies outside.
    """
    s = np.abs(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    peak = float(s.max())
    if peak == 0.0:
        return 0.0
    if psi == "psi1":
        def mean_psi(c):
            return float(np.mean(np.expm1(s / c)))
    elif psi == "psi2":
        def mean_psi(c):
            with np.errstate(over="ignore"):
                return float(np.mean(np.expm1((s / c) ** 2)))
    else:
        raise ValueError("psi must be 'psi1' or 'psi2'")
    lo, hi = peak / 50.0, 50.0 * peak
    if mean_psi(hi) > 1.0:
        return hi
    if mean_psi(lo) <= 1.0:
        return lo
    # mean_psi decreases in c: mean_psi(lo) > 1 >= mean_psi(hi)
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if mean_psi(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
