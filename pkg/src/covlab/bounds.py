"""Closed-form bound evaluators.

Each evaluator returns the literal formula value with an explicit leading
constant (default 1); calibrated constants live in a separate key-value
file produced by the calibration campaign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import NormGeometry, batch_vector_norms
from .opnorm import operator_norm, sample_covariance

REGIME_R_LE_N = "r_le_n"
REGIME_R_GE_N = "r_ge_n"
REGIME_NA = "not_applicable"


class MissingInputError(ValueError):
    def __init__(self, theorem: str, fields):
        self.fields = tuple(fields)
        super().__init__(f"{theorem} is missing required input(s): {', '.join(self.fields)}")


@dataclass(frozen=True)
class BoundSpec:
    theorem: str
    constant: float = 1.0
    inputs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundReport:
    spec: BoundSpec
    value: float
    regime: str = REGIME_NA

    def to_dict(self) -> dict:
        return {
            "theorem": self.spec.theorem,
            "constant": self.spec.constant,
            "inputs": {k: float(v) for k, v in sorted(self.spec.inputs.items())},
            "value": self.value,
            "regime": self.regime,
        }


def _sqrt_or_linear(x: float) -> float:
    # sqrt(x) for x <= 1, x for x >= 1
    return max(math.sqrt(x), x)


def _classical(c, i):
    v, d, n, t = i["op_norm"], i["d"], i["n"], i["t"]
    return c * v * max(_sqrt_or_linear(d / n), _sqrt_or_linear(t / n)), REGIME_NA


def _lounici(c, i):
    v, rt, d, n, t = i["op_norm"], i["r_tilde"], i["d"], i["n"], i["t"]
    load = (rt * math.log(d) + t) / n
    return c * v * max(math.sqrt(load), load * math.log(n)), REGIME_NA


def _rudelson(c, i):
    v, emax, d, n = i["op_norm"], i["e_max_sq"], i["d"], i["n"]
    return (
        c * max(math.sqrt(v * emax) * math.sqrt(math.log(d) / n), emax * math.log(d) / n),
        REGIME_NA,
    )


def _expectation_thm24(c, i):
    v, r, n = i["op_norm"], i["r"], i["n"]
    return c * v * _sqrt_or_linear(r / n), REGIME_NA


def _concentration_thm25(c, i):
    v, r, n, t = i["op_norm"], i["r"], i["n"], i["t"]
    if r <= n:
        return c * v * _sqrt_or_linear(t / n), REGIME_R_LE_N
    return c * v * max(math.sqrt(r / n) * math.sqrt(t / n), t / n), REGIME_R_GE_N


def _concentration_thm26(c, i):
    v, m, n, t = i["op_norm"], i["M"], i["n"], i["t"]
    return c * max(v * _sqrt_or_linear(t / n), math.sqrt(v * m) * math.sqrt(t / n)), REGIME_NA


def _corollary_21(c, i):
    v, m, n, t = i["op_norm"], i["M"], i["n"], i["t"]
    return 2.0 * m + c * v * _sqrt_or_linear(t / n), REGIME_NA


def _corollary_23(c, i):
    v, r, n, t = i["op_norm"], i["r"], i["n"], i["t"]
    value = c * v * max(_sqrt_or_linear(r / n), _sqrt_or_linear(t / n))
    return value, (REGIME_R_LE_N if r <= n else REGIME_R_GE_N)


def _crude_lemma34(c, i):
    v, r, n, t = i["op_norm"], i["r"], i["n"], i["t"]
    return c * v * (r * _sqrt_or_linear(t / n) + r + 1.0), REGIME_NA


def _bernstein_psi1(c, i):
    psi1, n, t = i["psi1_norm"], i["n"], i["t"]
    return c * psi1 * _sqrt_or_linear(t / n), REGIME_NA


# theorem -> (required inputs, minimal admissible t, evaluator)
_THEOREMS: dict[str, tuple[tuple[str, ...], Optional[float], Callable]] = {
    "classical_thm21": (("op_norm", "d", "n", "t"), 1.0, _classical),
    "lounici_logd": (("op_norm", "r_tilde", "d", "n", "t"), 1.0, _lounici),
    "rudelson": (("op_norm", "e_max_sq", "d", "n"), None, _rudelson),
    "expectation_upper_thm24": (("op_norm", "r", "n"), None, _expectation_thm24),
    "expectation_lower_thm24": (("op_norm", "r", "n"), None, _expectation_thm24),
    "concentration_thm25": (("op_norm", "r", "n", "t"), 1.0, _concentration_thm25),
    "concentration_implicit_thm26": (("op_norm", "M", "n", "t"), 1.0, _concentration_thm26),
    "corollary_21": (("op_norm", "M", "n", "t"), 1.0, _corollary_21),
    "corollary_23": (("op_norm", "r", "n", "t"), 1.0, _corollary_23),
    "crude_lemma34": (("op_norm", "r", "n", "t"), 0.0, _crude_lemma34),
    "subgaussian_thm27": (("op_norm", "r", "n", "t"), 1.0, _corollary_23),
    "bernstein_psi1": (("psi1_norm", "n", "t"), 0.0, _bernstein_psi1),
}

THEOREM_NAMES = tuple(_THEOREMS)


def eval_bound(spec: BoundSpec) -> BoundReport:
    """Evaluate the literal bound formula for the selected theorem."""
    if spec.theorem not in _THEOREMS:
        raise ValueError(f"unknown theorem: {spec.theorem!r}")
    required, t_min, fn = _THEOREMS[spec.theorem]
    missing = [f for f in required if f not in spec.inputs]
    if missing:
        raise MissingInputError(spec.theorem, missing)
    if spec.constant <= 0:
        raise ValueError("constant must be positive")
    inputs = {k: float(spec.inputs[k]) for k in required}
    if inputs["n"] < 1:
        raise ValueError("n must be >= 1")
    if t_min is not None and inputs["t"] < t_min:
        raise ValueError(f"{spec.theorem} requires t >= {t_min}")
    for name in ("op_norm", "r", "r_tilde", "d", "M", "psi1_norm", "e_max_sq"):
        if name in inputs and inputs[name] < 0:
            raise ValueError(f"{name} must be nonnegative")
    value, regime = fn(spec.constant, inputs)
    return BoundReport(spec=spec, value=float(value), regime=regime)


def fixed_point_delta(a: float, b: float) -> float:
    """Unique fixed point of delta = a + b*sqrt(delta).

    Substituting s = sqrt(delta) gives s^2 - b*s - a = 0, so
    delta = ((b + sqrt(b^2 + 4a)) / 2)^2.  Satisfies
    (a or b^2, whichever larger) <= delta <= 3 * max(a, b^2).
    """
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    if a == 0.0 and b == 0.0:
        return 0.0
    s = 0.5 * (b + math.sqrt(b * b + 4.0 * a))
    return s * s


def confidence_bound(
    batch,
    t: float,
    calibrated_constant: float = 1.0,
    geometry: NormGeometry | str = NormGeometry.EUCLIDEAN,
    tol: float = 1e-9,
) -> BoundReport:
    """Data-driven confidence bound with plug-in effective rank.

    Estimates ||Sigma_hat|| and r_hat = (mean ||X_j||)^2 / ||Sigma_hat||
    from the batch alone and evaluates the dimension-free tail formula with
    the supplied calibrated constant.
    """
    geometry = NormGeometry(geometry)
    n = batch.n
    if n < 2:
        raise ValueError("confidence bound needs n >= 2")
    if t < 1:
        raise ValueError("confidence bound needs t >= 1")
    sig_hat = sample_covariance(batch.data)
    v = operator_norm(sig_hat, geometry, tol=tol).value
    if v == 0.0:
        raise ValueError("||Sigma_hat|| is zero; confidence bound undefined")
    mean_norm = float(np.mean(batch_vector_norms(batch.data, geometry)))
    r_hat = mean_norm**2 / v
    spec = BoundSpec(
        theorem="corollary_23",
        constant=calibrated_constant,
        inputs={"op_norm": v, "r": r_hat, "n": n, "t": t, "e_norm_x": mean_norm},
    )
    value = calibrated_constant * v * max(_sqrt_or_linear(r_hat / n), _sqrt_or_linear(t / n))
    return BoundReport(
        spec=spec, value=value, regime=REGIME_R_LE_N if r_hat <= n else REGIME_R_GE_N
    )


def save_constants(path, constants: dict, provenance: Optional[dict] = None) -> None:
    """Write the calibrated-constants file (theorem -> constant)."""
    with open(path, "w") as fh:
        fh.write("# covlab calibrated constants\n")
        for key, val in sorted((provenance or {}).items()):
            fh.write(f"# {key}={val}\n")
        for name, value in sorted(constants.items()):
            fh.write(f"{name} = {float(value)!r}\n")


def load_constants(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, _, value = line.partition("=")
            out[name.strip()] = float(value)
    return out
