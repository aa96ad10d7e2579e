"""Matching metrics and their bi-Lipschitz constants.

A matching metric ``M`` acts on difference vectors and is sandwiched by the
Euclidean norm: ``m_M * ||v|| <= M(v) <= L_M * ||v||``. The admission bands
derived from those constants tell which domains the matching rule must
reject or accept regardless of noise in the centroid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

KINDS = ("euclidean", "scaled", "geodesic_chord")


@dataclass(frozen=True)
class MetricSpec:
    """A matching metric.

    ``geodesic_chord`` reads a difference vector as the chord between two
    unit vectors and returns the corresponding great-circle angle,
    ``2 * arcsin(||v|| / 2)``. On chords up to the diameter (``||v|| <= 2``)
    this satisfies ``||v|| <= M(v) <= (pi / 2) * ||v||``; past the diameter
    the angle is continued linearly with slope ``pi / 2`` so the constants
    hold on all of R^d.
    """

    kind: str = "euclidean"
    factor: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}; expected one of {KINDS}")
        if not (self.factor > 0 and math.isfinite(self.factor)):
            raise ValueError(f"metric factor must be positive and finite, got {self.factor}")

    @classmethod
    def euclidean(cls) -> "MetricSpec":
        return cls("euclidean")

    @classmethod
    def scaled(cls, factor: float) -> "MetricSpec":
        return cls("scaled", float(factor))

    @classmethod
    def geodesic_chord(cls) -> "MetricSpec":
        return cls("geodesic_chord")

    @property
    def m_M(self) -> float:
        if self.kind == "scaled":
            return self.factor
        return 1.0

    @property
    def L_M(self) -> float:
        if self.kind == "scaled":
            return self.factor
        if self.kind == "geodesic_chord":
            return math.pi / 2
        return 1.0

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "scaled":
            out["factor"] = self.factor
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricSpec":
        return cls(data.get("kind", "euclidean"), float(data.get("factor", 1.0)))


def _chord_to_angle(r: np.ndarray) -> np.ndarray:
    inside = 2.0 * np.arcsin(np.clip(r, 0.0, 2.0) / 2.0)
    # past the diameter: pi + (pi/2)(r - 2), written as (pi/2) r so the
    # upper constant holds bit-exactly
    return np.where(r <= 2.0, inside, (math.pi / 2) * r)


def metric_eval(metric: MetricSpec, v) -> float:
    """Evaluate ``M(v)`` for a single vector."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"metric_eval needs a non-empty 1-D vector, got shape {v.shape}")
    return float(_from_norm(metric, np.linalg.norm(v)))


def metric_eval_rows(metric: MetricSpec, V) -> np.ndarray:
    """Row-wise ``M`` over an (n, d) array of difference vectors."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[1] == 0:
        raise ValueError(f"expected an (n, d) array with d >= 1, got shape {V.shape}")
    return _from_norm(metric, np.linalg.norm(V, axis=1))


def _from_norm(metric: MetricSpec, r):
    if metric.kind == "euclidean":
        return r
    if metric.kind == "scaled":
        return metric.factor * r
    return _chord_to_angle(r)


@dataclass(frozen=True)
class TauBands:
    exclusion_radius: float
    inclusion_radius: Optional[float]


def tau_bands(metric: MetricSpec, eps_K: float, tau: float) -> TauBands:
    """Safe-exclusion and guaranteed-inclusion radii around the target mean.

    A domain whose mean is farther than ``exclusion_radius`` from the target is
    always rejected by a centroid at error ``eps_K``; one within
    ``inclusion_radius`` is always admitted. The inclusion band exists only
    when ``tau > L_M * eps_K``.
    """
    if eps_K < 0:
        raise ValueError(f"eps_K must be nonnegative, got {eps_K}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    exclusion = eps_K + tau / metric.m_M
    inclusion = tau / metric.L_M - eps_K if tau > metric.L_M * eps_K else None
    return TauBands(exclusion, inclusion)
