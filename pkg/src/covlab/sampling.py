"""Seeded samplers for covariance models.

Draws are built from the factor series X = sum_k z_k x_k with z either
standard normal (Gaussian law, covariance Sigma) or Rademacher signs
(subgaussian and pregaussian by construction, same covariance).

Streams are counter-based: each (seed, substream) pair keys an independent
Philox generator, so replicates can be produced in parallel or serially
with bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = 2**64 - 1

SAMPLER_KINDS = ("gaussian", "rademacher_series")


@dataclass(frozen=True)
class SampleBatch:
    """n i.i.d. draws of a centered vector, one per row, with provenance."""

    data: np.ndarray  # (n, d)
    model_label: str
    sampler_kind: str
    seed: int
    substream: int = 0

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.data, dtype=float))
        if d.ndim != 2:
            raise ValueError("batch data must be an (n, d) array")
        d.flags.writeable = False
        object.__setattr__(self, "data", d)
        if self.sampler_kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind: {self.sampler_kind!r}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dimension(self) -> int:
        return self.data.shape[1]


def stream(seed: int, substream: int = 0) -> np.random.Generator:
    """Independent counter-based generator for (seed, substream)."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, substream & _MASK64]))


def _draw(model, n: int, seed: int, kind: str, substream: int) -> SampleBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream(seed, substream)
    m = model.n_factors
    if kind == "gaussian":
        z = rng.standard_normal((n, m))
    elif kind == "rademacher_series":
        z = rng.integers(0, 2, size=(n, m)).astype(float) * 2.0 - 1.0
    else:
        raise ValueError(f"unknown sampler kind: {kind!r}")
    data = z @ model.factors if m else np.zeros((n, model.dimension))
    return SampleBatch(
        data=data, model_label=model.label, sampler_kind=kind, seed=seed, substream=substream
    )


def sample_gaussian(model, n: int, seed: int, substream: int = 0) -> SampleBatch:
    """Gaussian draws X_j = sum_k Z_kj x_k with i.i.d. standard normal Z."""
    return _draw(model, n, seed, "gaussian", substream)


def sample_rademacher_series(model, n: int, seed: int, substream: int = 0) -> SampleBatch:
    """Rademacher-series draws X_j = sum_k eps_kj x_k; exact covariance Sigma."""
    return _draw(model, n, seed, "rademacher_series", substream)


def sample(model, n: int, seed: int, kind: str = "gaussian", substream: int = 0) -> SampleBatch:
    return _draw(model, n, seed, kind, substream)


def save_batch_csv(batch: SampleBatch, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# model={batch.model_label}\n")
        fh.write(f"# seed={batch.seed}\n")
        fh.write(f"# kind={batch.sampler_kind}\n")
        fh.write(f"# substream={batch.substream}\n")
        for row in batch.data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_batch_csv(path) -> SampleBatch:
    meta = {"model": "unknown", "seed": "0", "kind": "gaussian", "substream": "0"}
    rows = []
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
            rows.append([float(v) for v in line.split(",")])
    return SampleBatch(
        data=np.array(rows, dtype=float),
        model_label=meta["model"],
        sampler_kind=meta["kind"],
        seed=int(meta["seed"]),
        substream=int(meta["substream"]),
    )
