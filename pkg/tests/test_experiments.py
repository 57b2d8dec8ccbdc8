import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import chi2

from covlab.experiments import (
    DeviationStats,
    empirical_orlicz_norm,
    fit_concentration,
    lp_moment,
    median_mean_gap,
    run_deviation_mc,
    verify_expectation_scaling,
    verify_lower_bound_large_r,
)
from covlab.models import build_model
from covlab.sampling import stream


def chi_square_mean_abs_deviation(n):
    """Quadrature oracle for E|chi2(n)/n - 1|."""
    val, _ = quad(lambda y: abs(y / n - 1.0) * chi2.pdf(y, n), 0, np.inf, limit=200)
    return val


def test_d1_mean_matches_quadrature_oracle():
    model = build_model("identity", d=1)
    stats = run_deviation_mc(model, n=100, R=20_000, seed=2, t_grid=())
    oracle = chi_square_mean_abs_deviation(100)
    assert oracle == pytest.approx(0.113, abs=0.002)
    assert abs(stats.mean - oracle) <= 3 * stats.mc_std_error_mean


def test_zero_model_degenerate():
    model = build_model("identity", d=2, truncate=0)
    stats = run_deviation_mc(model, n=10, R=100, seed=1, t_grid=())
    assert stats.mean == 0.0 and stats.median == 0.0
    assert np.all(stats.replicates == 0.0)


def test_determinism_and_worker_independence():
    model = build_model("identity", d=3)
    a = run_deviation_mc(model, n=40, R=120, seed=9, t_grid=())
    b = run_deviation_mc(model, n=40, R=120, seed=9, t_grid=())
    c = run_deviation_mc(model, n=40, R=120, seed=9, t_grid=(), workers=4)
    assert np.array_equal(a.replicates, b.replicates)
    assert np.array_equal(a.replicates, c.replicates)


def test_quantiles_nondecreasing_in_t():
    model = build_model("identity", d=2)
    stats = run_deviation_mc(model, n=30, R=300, seed=4, t_grid=(1.0, 1.5, 2.0))
    qs = [stats.quantiles[t] for t in (1.0, 1.5, 2.0)]
    assert qs == sorted(qs)


def test_quantile_precondition():
    model = build_model("identity", d=2)
    with pytest.raises(ValueError, match="too small"):
        run_deviation_mc(model, n=30, R=200, seed=4, t_grid=(4.0,))


def test_median_midpoint_convention():
    reps = np.array([0.0, 1.0, 2.0, 10.0])
    stats = DeviationStats(
        replicates=reps, mean=float(reps.mean()), median=float(np.median(reps)),
        quantiles={}, mc_std_error_mean=0.0,
        config={"model_label": "x", "n": 1, "R": 4, "seed": 0, "kind": "gaussian"},
    )
    assert stats.median == 1.5


def test_scaling_fit_exact_synthetic_line():
    # fabricate models/means lying exactly on y = 0.5 x through the fitter
    from covlab.experiments import _least_squares_loglog

    xs = np.linspace(-4, -1, 6)
    slope, intercept, r2 = _least_squares_loglog([(x, 0.5 * x) for x in xs])
    assert slope == pytest.approx(0.5, rel=1e-12)
    assert intercept == pytest.approx(0.0, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_scaling_degenerate_grid_skipped():
    model = build_model("identity", d=2)
    result = verify_expectation_scaling([(model, 50), (model, 50)], R=100, seed=3)
    assert result.fit_low is None and result.fit_high is None
    assert "r_le_n" in result.diagnostics and "r_ge_n" in result.diagnostics


def test_scaling_small_campaign_brackets_half_slope():
    grid = [(build_model("identity", d=8), n) for n in (128, 320, 800, 2000)]
    result = verify_expectation_scaling(grid, R=150, seed=5)
    assert result.fit_high is None
    assert result.fit_low is not None
    assert 0.35 <= result.fit_low.slope <= 0.75
    assert result.fit_low.r_squared > 0.9
    lo, hi = result.ratio_band
    assert 0 < lo <= hi


def test_lower_bound_gate_and_holds():
    na = verify_lower_bound_large_r(build_model("identity", d=4), n=100, R=100, seed=1)
    assert not na.applicable and "not applicable" in na.reason

    check = verify_lower_bound_large_r(build_model("identity", d=32), n=8, R=300, seed=1)
    assert check.applicable
    assert check.holds
    assert check.margin > 0

    zero = verify_lower_bound_large_r(build_model("identity", d=4, truncate=0), n=2, R=100, seed=1)
    assert not zero.applicable


def test_fit_concentration_degenerate_model_hits_grid_minimum():
    model = build_model("identity", d=1, truncate=0)
    fit = fit_concentration(model, n=10, R=2000, seed=1, t_grid=(1.0, 2.0))
    assert fit.fitted_constant == pytest.approx(0.05)
    assert all(rate == 0.0 for rate in fit.exceedance_rates.values())


def test_fit_concentration_two_seeds_agree():
    model = build_model("identity", d=4)
    fits = [
        fit_concentration(model, n=200, R=2000, seed=s, t_grid=(1.0, 2.0, 3.0))
        for s in (101, 202)
    ]
    assert fits[0].regime == "r_le_n"
    for fit in fits:
        for t, rate in fit.exceedance_rates.items():
            assert rate <= math.exp(-t)
    assert abs(fits[0].fitted_constant - fits[1].fitted_constant) <= 0.3


def test_fit_concentration_r_check():
    model = build_model("identity", d=4)
    with pytest.raises(ValueError, match="too small"):
        fit_concentration(model, n=200, R=500, seed=1, t_grid=(4.0,))
    with pytest.raises(ValueError, match="allow_large_t"):
        fit_concentration(model, n=200, R=10**6, seed=1, t_grid=(7.0,))


def test_median_mean_gap_symmetric_synthetic():
    reps = np.array([0.5, 1.0, 1.5, 2.0, 2.5])  # symmetric: mean == median
    stats = DeviationStats(
        replicates=reps, mean=float(reps.mean()), median=float(np.median(reps)),
        quantiles={}, mc_std_error_mean=0.0,
        config={"model_label": "x", "n": 100, "R": 5, "seed": 0, "kind": "gaussian"},
    )
    report = median_mean_gap(stats, build_model("identity", d=4))
    assert report.gap == 0.0
    assert report.regime == "r_le_n"
    assert report.radius == pytest.approx(0.1, rel=1e-12)


def test_median_mean_gap_d1():
    model = build_model("identity", d=1)
    stats = run_deviation_mc(model, n=100, R=10_000, seed=6, t_grid=())
    report = median_mean_gap(stats, model)
    assert report.gap <= 3 * report.radius


def test_lp_moment_p1_equals_mean():
    model = build_model("identity", d=2)
    stats = run_deviation_mc(model, n=50, R=1500, seed=8, t_grid=())
    assert lp_moment(model, 50, 1500, 1.0, 8, stats=stats) == pytest.approx(stats.mean, rel=1e-12)


def test_lp_moment_zero_model():
    model = build_model("identity", d=2, truncate=0)
    for p in (1.0, 2.0, 4.0):
        assert lp_moment(model, 20, 1000, p, 1) == 0.0


def test_lp_moments_increase_in_p():
    model = build_model("identity", d=4)
    stats = run_deviation_mc(model, n=100, R=2000, seed=9, t_grid=())
    values = [lp_moment(model, 100, 2000, p, 9, stats=stats) for p in (1.0, 2.0, 4.0)]
    assert values == sorted(values)


def test_orlicz_all_zero_and_empty():
    assert empirical_orlicz_norm(np.zeros(10)) == 0.0
    with pytest.raises(ValueError, match="nonempty"):
        empirical_orlicz_norm([])


def test_orlicz_psi2_standard_normal():
    draws = stream(3).standard_normal(300_000)
    est = empirical_orlicz_norm(draws, "psi2")
    # analytic: E exp(Z^2/C^2) = 1/sqrt(1 - 2/C^2) = 2 at C^2 = 8/3
    assert est == pytest.approx(math.sqrt(8 / 3), abs=0.04)


def test_orlicz_psi1_exponential_samples():
    draws = stream(4).exponential(size=200_000)
    est = empirical_orlicz_norm(draws, "psi1")
    # analytic: E exp(|eta|/C) = 1/(1 - 1/C) = 2 at C = 2 for Exp(1)
    assert est == pytest.approx(2.0, abs=0.1)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_orlicz_homogeneous(scale, seed):
    draws = stream(seed).standard_normal(500)
    base = empirical_orlicz_norm(draws, "psi2")
    assert empirical_orlicz_norm(scale * draws, "psi2") == pytest.approx(scale * base, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 1000))
def test_orlicz_monotone_under_domination(seed):
    rng = stream(seed)
    a = rng.standard_normal(500)
    b = a * (1.0 + rng.random(500))  # |a_i| <= |b_i| everywhere
    assert empirical_orlicz_norm(a, "psi1") <= empirical_orlicz_norm(b, "psi1") * (1 + 1e-9)
