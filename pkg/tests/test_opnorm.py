import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covlab.geometry import NormGeometry
from covlab.models import build_model
from covlab.opnorm import (
    UnsupportedSizeError,
    operator_norm,
    operator_norm_deviation,
    sample_covariance,
)
from covlab.sampling import SampleBatch, sample_gaussian, stream


def brute_force_sign_norm(a):
    """Independent linf->l1 oracle: max over both sign vectors u and v."""
    d = a.shape[0]
    best = 0.0
    for u in itertools.product((-1.0, 1.0), repeat=d):
        for v in itertools.product((-1.0, 1.0), repeat=d):
            best = max(best, abs(np.asarray(v) @ a @ np.asarray(u)))
    return best


def random_symmetric(rng, d):
    a = rng.standard_normal((d, d))
    return a + a.T


def test_diagonal_euclidean():
    res = operator_norm(np.diag([3.0, 1.0]))
    assert res.value == pytest.approx(3.0, rel=1e-12)


def test_sup_norm_is_max_entry():
    res = operator_norm(np.array([[0.0, 1.0], [1.0, 0.0]]), NormGeometry.SUP_NORM)
    assert res.value == 1.0
    assert res.method == "max_entry"


def test_one_norm_identity_2d():
    res = operator_norm(np.eye(2), NormGeometry.ONE_NORM)
    assert res.value == pytest.approx(2.0)
    assert res.method == "sign_enumeration"
    assert res.value == brute_force_sign_norm(np.eye(2))


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
def test_sign_enumeration_matches_brute_force(d):
    rng = stream(60 + d)
    for _ in range(5):
        a = random_symmetric(rng, d)
        res = operator_norm(a, NormGeometry.ONE_NORM)
        assert res.value == pytest.approx(brute_force_sign_norm(a), rel=1e-12)


def test_one_norm_dimension_cap():
    with pytest.raises(UnsupportedSizeError):
        operator_norm(np.eye(25), NormGeometry.ONE_NORM)


def test_iterative_matches_dense():
    rng = stream(7)
    for i in range(200):
        d = int(rng.integers(2, 9))
        a = random_symmetric(rng, d)
        dense = operator_norm(a, method="eigen_dense")
        it = operator_norm(a, method="eigen_iterative", tol=1e-12, seed=i)
        assert it.value == pytest.approx(dense.value, rel=1e-10)


def test_iterative_fallback_on_tied_spectrum():
    # antidiagonal flip matrix has eigenvalues +-1 only: power iteration
    # stagnates and the dense fallback must kick in, flagged by its method
    d = 70
    a = np.zeros((d, d))
    for i in range(d):
        a[i, d - 1 - i] = 1.0
    res = operator_norm(a)  # d > 64 -> auto picks iterative
    assert res.method == "eigen_dense"
    assert res.value == pytest.approx(1.0, rel=1e-9)


def test_large_dimension_uses_iterative():
    rng = stream(11)
    a = random_symmetric(rng, 100)
    res = operator_norm(a)
    assert res.method == "eigen_iterative"
    dense = operator_norm(a, method="eigen_dense")
    assert res.value == pytest.approx(dense.value, rel=1e-8)


def test_asymmetric_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        operator_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_norm_ordering_on_random_symmetric():
    rng = stream(13)
    for _ in range(50):
        d = int(rng.integers(1, 9))
        a = random_symmetric(rng, d)
        max_entry = operator_norm(a, NormGeometry.SUP_NORM).value
        spectral = operator_norm(a, NormGeometry.EUCLIDEAN).value
        sign = operator_norm(a, NormGeometry.ONE_NORM).value
        assert max_entry <= spectral + 1e-12 * max(spectral, 1)
        assert spectral <= sign + 1e-12 * max(sign, 1)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    scale=st.floats(-100.0, 100.0, allow_nan=False),
    geometry=st.sampled_from(list(NormGeometry)),
)
def test_homogeneity(seed, scale, geometry):
    a = random_symmetric(stream(seed), 4)
    base = operator_norm(a, geometry).value
    scaled = operator_norm(scale * a, geometry).value
    assert scaled == pytest.approx(abs(scale) * base, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), geometry=st.sampled_from(list(NormGeometry)))
def test_triangle_inequality(seed, geometry):
    rng = stream(seed)
    a = random_symmetric(rng, 4)
    b = random_symmetric(rng, 4)
    na = operator_norm(a, geometry).value
    nb = operator_norm(b, geometry).value
    nab = operator_norm(a + b, geometry).value
    assert nab <= na + nb + 1e-12 * max(na + nb, 1.0)


def test_deviation_rank_one_against_zero_model():
    model = build_model("identity", d=2, truncate=0)
    batch = SampleBatch(
        data=np.array([[1.0, 2.0]]), model_label="x", sampler_kind="gaussian", seed=0
    )
    # Sigma_hat = [[1,2],[2,4]], spectral norm = |x|^2 = 5
    assert operator_norm_deviation(batch, model) == pytest.approx(5.0, rel=1e-12)


def test_deviation_zero_when_batch_reproduces_model():
    model = build_model("poly_decay", d=3, alpha=1.0)
    # rows sqrt(3) * factor rows give (1/n) X^T X = Sigma exactly
    data = np.sqrt(3.0) * np.asarray(model.factors)
    batch = SampleBatch(data=data, model_label=model.label, sampler_kind="gaussian", seed=0)
    assert operator_norm_deviation(batch, model) == pytest.approx(0.0, abs=1e-12)


def test_deviation_d1_scalar_oracle():
    model = build_model("identity", d=1)
    batch = sample_gaussian(model, 100, 31)
    z = batch.data[:, 0]
    assert operator_norm_deviation(batch, model) == pytest.approx(
        abs(np.mean(z**2) - 1.0), rel=1e-12
    )


def test_dimension_mismatch_rejected():
    model = build_model("identity", d=3)
    batch = SampleBatch(data=np.ones((2, 2)), model_label="x", sampler_kind="gaussian", seed=0)
    with pytest.raises(ValueError, match="dimension"):
        operator_norm_deviation(batch, model)


def test_sample_covariance_matches_definition():
    x = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    assert np.allclose(sample_covariance(x), x.T @ x / 3)
