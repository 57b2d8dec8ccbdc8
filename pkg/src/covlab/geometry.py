"""Ambient norm geometries.

The ambient space E carries one of three norms; the dual pairing fixes the
matching operator norm (l2->l2 spectral, l1->linf max entry, linf->l1 sign
enumeration).
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class NormGeometry(str, Enum):
    EUCLIDEAN = "euclidean"
    SUP_NORM = "sup_norm"
    ONE_NORM = "one_norm"


def vector_norm(x: np.ndarray, geometry: NormGeometry) -> float:
    """Norm of a vector of E under the chosen geometry."""
    x = np.asarray(x, dtype=float)
    if geometry == NormGeometry.EUCLIDEAN:
        return float(np.linalg.norm(x))
    if geometry == NormGeometry.SUP_NORM:
        return float(np.max(np.abs(x))) if x.size else 0.0
    if geometry == NormGeometry.ONE_NORM:
        return float(np.sum(np.abs(x)))
    raise ValueError(f"unknown geometry: {geometry!r}")


def batch_vector_norms(data: np.ndarray, geometry: NormGeometry) -> np.ndarray:
    """Row-wise vector norms of an (n, d) array."""
    data = np.asarray(data, dtype=float)
    if geometry == NormGeometry.EUCLIDEAN:
        return np.linalg.norm(data, axis=1)
    if geometry == NormGeometry.SUP_NORM:
        return np.max(np.abs(data), axis=1)
    if geometry == NormGeometry.ONE_NORM:
        return np.sum(np.abs(data), axis=1)
    raise ValueError(f"unknown geometry: {geometry!r}")
