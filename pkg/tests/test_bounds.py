import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covlab.bounds import (
    BoundSpec,
    MissingInputError,
    confidence_bound,
    eval_bound,
    fixed_point_delta,
    load_constants,
    save_constants,
)
from covlab.models import build_model
from covlab.sampling import SampleBatch, sample_gaussian


def test_expectation_upper_example():
    rep = eval_bound(BoundSpec("expectation_upper_thm24", 1.0, {"op_norm": 1, "r": 10, "n": 1000}))
    assert rep.value == pytest.approx(0.1, rel=1e-12)


def test_concentration_low_rank_regime_example():
    rep = eval_bound(BoundSpec("concentration_thm25", 1.0, {"op_norm": 1, "r": 50, "n": 100, "t": 4}))
    assert rep.value == pytest.approx(0.2, rel=1e-12)
    assert rep.regime == "r_le_n"


def test_concentration_high_rank_regime():
    rep = eval_bound(BoundSpec("concentration_thm25", 1.0, {"op_norm": 2, "r": 400, "n": 100, "t": 1}))
    assert rep.regime == "r_ge_n"
    assert rep.value == pytest.approx(2 * max(2 * 0.1, 0.01), rel=1e-12)


def test_regime_continuity_at_r_equals_n():
    below = eval_bound(BoundSpec("concentration_thm25", 1.0, {"op_norm": 1, "r": 100, "n": 100, "t": 2}))
    above = eval_bound(
        BoundSpec("concentration_thm25", 1.0, {"op_norm": 1, "r": 100 * (1 + 1e-12), "n": 100, "t": 2})
    )
    assert below.value == pytest.approx(above.value, rel=1e-9)


def test_bernstein_boundary_example():
    rep = eval_bound(BoundSpec("bernstein_psi1", 1.0, {"psi1_norm": 2, "n": 50, "t": 50}))
    assert rep.value == pytest.approx(2.0, rel=1e-12)


def test_classical_formula():
    rep = eval_bound(BoundSpec("classical_thm21", 2.0, {"op_norm": 1, "d": 25, "n": 100, "t": 1}))
    assert rep.value == pytest.approx(2 * max(0.5, 0.25, 0.1, 0.01), rel=1e-12)


def test_crude_lemma_formula():
    rep = eval_bound(BoundSpec("crude_lemma34", 1.0, {"op_norm": 2, "r": 3, "n": 4, "t": 4}))
    assert rep.value == pytest.approx(2 * (3 * 1.0 + 3 + 1), rel=1e-12)


def test_missing_input_names_field():
    with pytest.raises(MissingInputError, match="op_norm"):
        eval_bound(BoundSpec("expectation_upper_thm24", 1.0, {"r": 10, "n": 1000}))


def test_unknown_theorem_rejected():
    with pytest.raises(ValueError, match="unknown theorem"):
        eval_bound(BoundSpec("nope", 1.0, {}))


def test_probability_bound_requires_t_at_least_one():
    with pytest.raises(ValueError, match="t >= 1"):
        eval_bound(BoundSpec("concentration_thm25", 1.0, {"op_norm": 1, "r": 5, "n": 10, "t": 0.5}))


@settings(max_examples=80, deadline=None)
@given(
    t1=st.floats(1.0, 50.0), t2=st.floats(1.0, 50.0),
    r1=st.floats(0.1, 500.0), r2=st.floats(0.1, 500.0),
    v1=st.floats(0.01, 100.0), v2=st.floats(0.01, 100.0),
)
def test_corollary_23_monotone_in_t_r_and_op_norm(t1, t2, r1, r2, v1, v2):
    t_lo, t_hi = sorted((t1, t2))
    r_lo, r_hi = sorted((r1, r2))
    v_lo, v_hi = sorted((v1, v2))

    def val(v, r, t):
        return eval_bound(
            BoundSpec("corollary_23", 1.0, {"op_norm": v, "r": r, "n": 100, "t": t})
        ).value

    base = val(v_lo, r_lo, t_lo)
    assert val(v_lo, r_lo, t_hi) >= base - 1e-12
    assert val(v_lo, r_hi, t_lo) >= base - 1e-12
    assert val(v_hi, r_lo, t_lo) >= base - 1e-12


def test_fixed_point_examples():
    assert fixed_point_delta(1, 0) == pytest.approx(1.0, rel=1e-12)
    assert fixed_point_delta(0, 1) == pytest.approx(1.0, rel=1e-12)
    # oracle: iterate the recursion from above until it settles
    delta = 10.0
    for _ in range(200):
        delta = 1.0 + math.sqrt(delta)
    assert fixed_point_delta(1, 1) == pytest.approx(delta, rel=1e-12)
    assert fixed_point_delta(1, 1) == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-12)


def test_fixed_point_zero_case():
    assert fixed_point_delta(0.0, 0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.0, 1e6), b=st.floats(0.0, 1e3))
def test_fixed_point_bracketed_by_a_or_b_squared(a, b):
    if a == 0.0 and b == 0.0:
        return
    delta = fixed_point_delta(a, b)
    peak = max(a, b * b)
    assert peak * (1 - 1e-12) <= delta <= 3 * peak * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.0, 1e6), b=st.floats(0.0, 1e3), start=st.floats(1.0, 10.0))
def test_fixed_point_agrees_with_iteration(a, b, start):
    if a == 0.0 and b == 0.0:
        return
    delta = fixed_point_delta(a, b)
    x = delta * start  # any start at or above the fixed point
    for _ in range(100):
        x = a + b * math.sqrt(x)
    assert x == pytest.approx(delta, rel=1e-12)


def test_confidence_bound_identical_rows_rank_one():
    x = np.array([1.0, 2.0, 2.0])
    batch = SampleBatch(
        data=np.tile(x, (5, 1)), model_label="const", sampler_kind="gaussian", seed=0
    )
    rep = confidence_bound(batch, t=1.0)
    assert rep.spec.inputs["r"] == pytest.approx(1.0, rel=1e-12)


def test_confidence_bound_d1_scalar_oracle():
    model = build_model("identity", d=1)
    batch = sample_gaussian(model, 400, 17)
    rep = confidence_bound(batch, t=1.0)
    z = batch.data[:, 0]
    v = np.mean(z**2)
    r_hat = np.mean(np.abs(z)) ** 2 / v
    expected = v * max(math.sqrt(r_hat / 400), r_hat / 400, math.sqrt(1 / 400), 1 / 400)
    assert rep.value == pytest.approx(expected, rel=1e-12)
    assert r_hat == pytest.approx(2 / math.pi, abs=0.1)


def test_confidence_bound_linear_in_large_t():
    model = build_model("identity", d=2)
    batch = sample_gaussian(model, 100, 3)
    v1 = confidence_bound(batch, t=1000.0).value
    v2 = confidence_bound(batch, t=2000.0).value
    assert v2 == pytest.approx(2 * v1, rel=1e-9)


def test_constants_file_roundtrip(tmp_path):
    path = tmp_path / "constants.txt"
    constants = {"concentration_thm25.median.r_le_n": 1.15, "expectation_upper_thm24": 2.3}
    save_constants(path, constants, provenance={"experiment": "unit", "seed": 7})
    text = path.read_text()
    assert text.startswith("#") and "seed=7" in text
    assert load_constants(path) == constants
