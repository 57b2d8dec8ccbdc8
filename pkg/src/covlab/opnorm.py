"""Operator norms of symmetric matrices under each ambient geometry.

euclidean:  largest |eigenvalue| (dense eigensolve up to d = 64, power
            iteration above, with a dense fallback on stagnation)
sup_norm:   l1 -> linf norm, i.e. the maximum absolute entry
one_norm:   linf -> l1 norm by sign enumeration; for a fixed sign vector u
            the inner maximum over v is ||A u||_1, so only 2^d sign vectors
            are visited.  Exponential, capped at d = 24.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import NormGeometry

SYMMETRY_REL_TOL = 1e-12
DENSE_CUTOFF = 64
ONE_NORM_MAX_DIM = 24
MAX_POWER_ITERATIONS = 1000
DEFAULT_TOL = 1e-9


class UnsupportedSizeError(ValueError):
    """one_norm geometry requested beyond the enumeration cap."""


@dataclass(frozen=True)
class OpNormResult:
    value: float
    method: str  # eigen_iterative | eigen_dense | max_entry | sign_enumeration
    iterations: int = 0
    residual: float = 0.0


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale > 0 and float(np.max(np.abs(a - a.T))) > SYMMETRY_REL_TOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return a


def _dense_spectral(a: np.ndarray) -> OpNormResult:
    lam, vec = np.linalg.eigh(a)
    idx = 0 if abs(lam[0]) >= abs(lam[-1]) else len(lam) - 1
    v = vec[:, idx]
    residual = float(np.linalg.norm(a @ v - lam[idx] * v))
    return OpNormResult(value=float(abs(lam[idx])), method="eigen_dense", residual=residual)


def _power_iteration(a: np.ndarray, tol: float, seed: int) -> OpNormResult | None:
    """Largest |eigenvalue| via power iteration; None if both starts stagnate."""
    d = a.shape[0]
    fro = float(np.linalg.norm(a))
    if fro == 0.0:
        return OpNormResult(value=0.0, method="eigen_iterative")
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0]))
    total_iters = 0
    for _restart in range(2):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(MAX_POWER_ITERATIONS):
            w = a @ v
            lam = float(v @ w)
            res = float(np.linalg.norm(w - lam * v))
            total_iters += 1
            if res <= tol * fro:
                return OpNormResult(
                    value=abs(lam), method="eigen_iterative", iterations=total_iters, residual=res
                )
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                break  # landed in the nullspace; restart
            v = w / nw
    return None


def _sign_enumeration(a: np.ndarray) -> OpNormResult:
    d = a.shape[0]
    if d > ONE_NORM_MAX_DIM:
        raise UnsupportedSizeError(
            f"one_norm geometry supports d <= {ONE_NORM_MAX_DIM} (got d={d}); "
            "the linf->l1 norm is combinatorially hard"
        )
    # u and -u give the same value; fix the first sign.
    n_signs = 1 << max(d - 1, 0)
    best = 0.0
    chunk = 1 << 14
    codes = np.arange(n_signs, dtype=np.int64)
    bits = np.arange(d - 1, dtype=np.int64) if d > 1 else np.arange(0)
    for start in range(0, n_signs, chunk):
        block = codes[start : start + chunk]
        u = np.ones((block.size, d))
        if d > 1:
            u[:, 1:] = 1.0 - 2.0 * ((block[:, None] >> bits[None, :]) & 1)
        vals = np.abs(u @ a).sum(axis=1)
        best = max(best, float(vals.max()))
    return OpNormResult(value=best, method="sign_enumeration", iterations=n_signs)


def operator_norm(
    a: np.ndarray,
    geometry: NormGeometry | str = NormGeometry.EUCLIDEAN,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    method: str = "auto",
) -> OpNormResult:
    """Operator norm of a symmetric matrix under the chosen geometry.

    ``method`` forces 'eigen_dense' or 'eigen_iterative' in the Euclidean
    geometry; 'auto' picks dense for d <= 64.  A non-converged iteration
    falls back to the dense solver and flags the method accordingly.
    """
    geometry = NormGeometry(geometry)
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _check_symmetric(a)
    if geometry == NormGeometry.SUP_NORM:
        return OpNormResult(value=float(np.max(np.abs(a))), method="max_entry")
    if geometry == NormGeometry.ONE_NORM:
        return _sign_enumeration(a)
    d = a.shape[0]
    if method == "auto":
        method = "eigen_dense" if d <= DENSE_CUTOFF else "eigen_iterative"
    if method == "eigen_dense":
        return _dense_spectral(a)
    if method == "eigen_iterative":
        result = _power_iteration(a, tol, seed)
        if result is not None:
            return result
        return _dense_spectral(a)  # flagged by method="eigen_dense"
    raise ValueError(f"unknown method: {method!r}")


def sample_covariance(data: np.ndarray) -> np.ndarray:
    """Empirical second-moment matrix (1/n) X^T X of an (n, d) batch."""
    data = np.asarray(data, dtype=float)
    return data.T @ data / data.shape[0]


def operator_norm_deviation(batch, model, tol: float = DEFAULT_TOL) -> float:
    """||Sigma_hat - Sigma|| of a sample batch against its model."""
    if batch.data.shape[1] != model.dimension:
        raise ValueError(
            f"batch dimension {batch.data.shape[1]} does not match model dimension {model.dimension}"
        )
    dev = sample_covariance(batch.data) - model.matrix()
    return operator_norm(dev, model.geometry, tol=tol).value
