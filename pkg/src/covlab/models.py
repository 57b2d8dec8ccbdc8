"""Covariance models and effective-rank computation.

A model is a finite factor representation Sigma = sum_k x_k x_k^T together
with an ambient norm geometry.  The two complexity parameters are

    r       = (E||X||)^2 / ||Sigma||
    r_tilde = E||X||^2   / ||Sigma||   (= trace / ||Sigma|| in the
                                         Euclidean geometry)

computed in closed form where available and by seeded Monte Carlo otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml
from scipy.special import gammaln

from .geometry import NormGeometry, batch_vector_norms, vector_norm

PSD_REL_TOL = 1e-10
ISOTROPY_REL_TOL = 1e-12
DEFAULT_MC_BUDGET = 100_000
MIN_MC_BUDGET = 10_000

SPECTRUM_KINDS = ("identity", "spiked", "poly_decay", "exp_decay", "low_rank", "explicit")


class UndefinedRankError(ValueError):
    """Effective rank is undefined (zero covariance operator)."""


class NotPositiveSemidefiniteError(ValueError):
    def __init__(self, most_negative: float):
        self.most_negative = most_negative
        super().__init__(
            f"explicit matrix is not PSD: most negative eigenvalue {most_negative:.6g}"
        )


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance operator given by factor vectors and a norm geometry."""

    dimension: int
    factors: np.ndarray  # (m, d), rows are the factor vectors x_k
    geometry: NormGeometry
    label: str
    spec: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        f = np.ascontiguousarray(np.asarray(self.factors, dtype=float))
        if f.ndim != 2 or f.shape[1] != self.dimension:
            raise ValueError("factors must be an (m, d) array")
        f.flags.writeable = False
        object.__setattr__(self, "factors", f)

    @property
    def n_factors(self) -> int:
        return self.factors.shape[0]

    def matrix(self) -> np.ndarray:
        """Induced covariance matrix sum_k x_k x_k^T."""
        return self.factors.T @ self.factors

    def trace(self) -> float:
        return float(np.sum(self.factors**2))

    def truncated(self, m: int) -> "CovarianceModel":
        """Keep only the first m factor vectors."""
        if not 0 <= m <= self.n_factors:
            raise ValueError(f"truncation level {m} outside [0, {self.n_factors}]")
        return CovarianceModel(
            dimension=self.dimension,
            factors=self.factors[:m],
            geometry=self.geometry,
            label=f"{self.label}|m={m}",
            spec=dict(self.spec, truncate=m),
        )


@dataclass(frozen=True)
class EffectiveRankResult:
    r: float
    r_tilde: float
    op_norm: float
    e_norm_x: float
    mc_std_error: float  # zero on closed-form paths


def _spectrum_values(spectrum: str, d: int, k=None, strength=None, alpha=None, beta=None):
    if spectrum == "identity":
        return np.ones(d)
    if spectrum == "spiked":
        if k is None or not 1 <= k <= d:
            raise ValueError("spiked spectrum needs 1 <= k <= d")
        if strength is None or strength <= 0:
            raise ValueError("spiked spectrum needs strength > 0")
        lam = np.ones(d)
        lam[:k] += strength
        return lam
    if spectrum == "poly_decay":
        if alpha is None or alpha <= 0:
            raise ValueError("poly_decay spectrum needs alpha > 0")
        return (1.0 + np.arange(d)) ** (-float(alpha))
    if spectrum == "exp_decay":
        if beta is None or beta <= 0:
            raise ValueError("exp_decay spectrum needs beta > 0")
        return np.exp(-float(beta) * np.arange(d))
    if spectrum == "low_rank":
        if k is None or not 1 <= k <= d:
            raise ValueError("low_rank spectrum needs 1 <= k <= d")
        lam = np.zeros(d)
        lam[:k] = 1.0
        return lam
    raise ValueError(f"unknown spectrum kind: {spectrum!r}")


def build_model(
    spectrum: str,
    geometry: NormGeometry | str = NormGeometry.EUCLIDEAN,
    *,
    d: Optional[int] = None,
    k: Optional[int] = None,
    strength: Optional[float] = None,
    alpha: Optional[float] = None,
    beta: Optional[float] = None,
    scale: float = 1.0,
    matrix: Optional[np.ndarray] = None,
    truncate: Optional[int] = None,
    label: Optional[str] = None,
) -> CovarianceModel:
    """Construct a covariance model from a named spectrum family.

    Factors are the scaled eigenvectors sqrt(lambda_k) v_k, so the model is
    deterministic in its inputs.  ``scale`` multiplies the whole spectrum.
    """
    geometry = NormGeometry(geometry)
    if spectrum == "explicit":
        if matrix is None:
            raise ValueError("explicit spectrum needs a matrix")
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("explicit matrix must be square")
        d = a.shape[0]
        scale_ref = max(np.max(np.abs(a)), 1.0)
        if np.max(np.abs(a - a.T)) > 1e-12 * scale_ref:
            raise ValueError("explicit matrix must be symmetric")
        lam, vec = np.linalg.eigh(0.5 * (a + a.T))
        lam_ref = float(np.max(np.abs(lam))) if lam.size else 0.0
        if lam.size and lam[0] < -PSD_REL_TOL * (lam_ref if lam_ref > 0 else 1.0):
            raise NotPositiveSemidefiniteError(float(lam[0]))
        lam = np.clip(lam, 0.0, None)[::-1] * scale
        vec = vec[:, ::-1]
        spec = {"spectrum": "explicit", "matrix": a.tolist(), "scale": scale}
    else:
        if d is None or d < 1:
            raise ValueError("need dimension d >= 1")
        lam = _spectrum_values(spectrum, d, k=k, strength=strength, alpha=alpha, beta=beta)
        lam = lam * scale
        vec = np.eye(d)
        spec = {"spectrum": spectrum, "d": d, "scale": scale}
        for name, val in (("k", k), ("strength", strength), ("alpha", alpha), ("beta", beta)):
            if val is not None:
                spec[name] = val
    if scale <= 0:
        raise ValueError("scale must be positive")

    keep = lam > 0
    factors = (np.sqrt(lam[keep])[:, None] * vec[:, keep].T)
    if truncate is not None:
        if not 0 <= truncate <= factors.shape[0]:
            raise ValueError(f"truncation level {truncate} outside [0, {factors.shape[0]}]")
        factors = factors[:truncate]
        spec["truncate"] = truncate
    if label is None:
        params = ",".join(f"{kk}={vv}" for kk, vv in spec.items() if kk not in ("spectrum", "matrix"))
        label = f"{spectrum}({params})"
    spec["geometry"] = geometry.value
    return CovarianceModel(dimension=d, factors=factors, geometry=geometry, label=label, spec=spec)


def build_model_from_spec(spec: dict) -> CovarianceModel:
    """Build a model from its serializable spec mapping."""
    spec = dict(spec)
    spectrum = spec.pop("spectrum", None)
    if spectrum is None:
        raise ValueError("model spec is missing 'spectrum'")
    geometry = spec.pop("geometry", NormGeometry.EUCLIDEAN)
    label = spec.pop("label", None)
    allowed = {"d", "k", "strength", "alpha", "beta", "scale", "matrix", "truncate"}
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown model spec keys: {sorted(unknown)}")
    if "matrix" in spec:
        spec["matrix"] = np.asarray(spec["matrix"], dtype=float)
    return build_model(spectrum, geometry, label=label, **spec)


def spec_to_text(spec: dict) -> str:
    return yaml.safe_dump({"model": dict(spec)}, sort_keys=True)


def spec_from_text(text: str) -> dict:
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or "model" not in doc:
        raise ValueError("model spec text must contain a 'model' section")
    return doc["model"]


def save_matrix_csv(a: np.ndarray, path) -> None:
    """Dense row-major CSV with a '# d=<d>' header line."""
    a = np.asarray(a, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"# d={a.shape[0]}\n")
        for row in a:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    d = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "d=" in line:
                    d = int(line.split("d=")[1].split()[0])
                continue
            rows.append([float(v) for v in line.split(",")])
    a = np.array(rows, dtype=float)
    if d is not None and a.shape != (d, d):
        raise ValueError(f"matrix shape {a.shape} does not match header d={d}")
    return a


def _chi_mean(dof: int) -> float:
    # E chi(dof) = sqrt(2) Gamma((dof+1)/2) / Gamma(dof/2)
    return math.sqrt(2.0) * math.exp(gammaln((dof + 1) / 2) - gammaln(dof / 2))


def _is_isotropic(model: CovarianceModel) -> Optional[float]:
    """Return sigma^2 if the induced matrix equals sigma^2 * I, else None."""
    sig = model.matrix()
    s0 = sig[0, 0]
    if s0 <= 0:
        return None
    if np.allclose(sig, s0 * np.eye(model.dimension), rtol=ISOTROPY_REL_TOL, atol=ISOTROPY_REL_TOL * s0):
        return float(s0)
    return None


def effective_rank(
    model: CovarianceModel,
    mc_budget: int = DEFAULT_MC_BUDGET,
    seed: int = 0,
) -> EffectiveRankResult:
    """Effective ranks r and r_tilde of a model.

    Closed forms cover d = 1, a single factor (rank one), and the isotropic
    Euclidean case (chi mean); everything else falls back to Monte Carlo on
    the Gaussian series with a reported standard error.
    """
    from .opnorm import operator_norm

    v = operator_norm(model.matrix(), model.geometry).value
    if v == 0.0:
        raise UndefinedRankError("operator norm is zero; effective rank undefined")

    two_over_pi = 2.0 / math.pi
    euclid = model.geometry == NormGeometry.EUCLIDEAN

    if model.n_factors == 1:
        # X = g * x: every norm cancels, r = 2/pi and r_tilde = 1 exactly
        x = model.factors[0]
        e = math.sqrt(two_over_pi) * vector_norm(x, model.geometry)
        return EffectiveRankResult(r=two_over_pi, r_tilde=1.0, op_norm=v, e_norm_x=e, mc_std_error=0.0)

    if model.dimension == 1:
        sigma2 = model.trace()
        e = math.sqrt(two_over_pi * sigma2)
        return EffectiveRankResult(
            r=e * e / v, r_tilde=sigma2 / v, op_norm=v, e_norm_x=e, mc_std_error=0.0
        )

    if euclid:
        sigma2 = _is_isotropic(model)
        if sigma2 is not None:
            e = math.sqrt(sigma2) * _chi_mean(model.dimension)
            return EffectiveRankResult(
                r=e * e / v,
                r_tilde=model.trace() / v,
                op_norm=v,
                e_norm_x=e,
                mc_std_error=0.0,
            )

    if mc_budget < MIN_MC_BUDGET:
        raise ValueError(f"mc_budget must be >= {MIN_MC_BUDGET} without a closed form")
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0]))
    norms = np.empty(mc_budget)
    sq = 0.0
    chunk = 65536
    done = 0
    while done < mc_budget:
        b = min(chunk, mc_budget - done)
        z = rng.standard_normal((b, model.n_factors))
        x = z @ model.factors
        norms[done : done + b] = batch_vector_norms(x, model.geometry)
        done += b
    e = float(norms.mean())
    se = float(norms.std(ddof=1) / math.sqrt(mc_budget))
    sq = float(np.mean(norms**2))
    r_tilde = model.trace() / v if euclid else sq / v
    return EffectiveRankResult(r=e * e / v, r_tilde=r_tilde, op_norm=v, e_norm_x=e, mc_std_error=se)
