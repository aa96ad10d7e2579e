"""Invertible layered maps with certified Lipschitz bounds.

Every layer carries a bound ``C`` on the operator norm of its Jacobian over
all of R^d, so the composed map is ``prod(C)``-Lipschitz. A matched ball of
radius ``tau`` pushed through the map then stays within ``L_T * tau`` of the
image of its centre, both in mean squared distance (squared) and in mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .meta import rng_for


class DiagonalAffine:
    """``y = s * x + b``; Lipschitz bound ``max |s|``."""

    def __init__(self, scale, shift=None):
        self.scale = np.asarray(scale, dtype=float)
        if np.any(self.scale == 0) or not np.all(np.isfinite(self.scale)):
            raise ValueError("diagonal scale entries must be finite and nonzero")
        self.shift = np.zeros_like(self.scale) if shift is None else np.asarray(shift, dtype=float)
        self.bound = float(np.max(np.abs(self.scale)))

    def forward(self, x):
        return x * self.scale + self.shift

    def inverse(self, y):
        return (y - self.shift) / self.scale


class Permute:
    """Coordinate permutation; an isometry."""

    def __init__(self, perm):
        self.perm = np.asarray(perm, dtype=int)
        if sorted(self.perm.tolist()) != list(range(self.perm.size)):
            raise ValueError("perm must be a permutation of 0..d-1")
        self.inv = np.argsort(self.perm)
        self.bound = 1.0

    def forward(self, x):
        return x[..., self.perm]

    def inverse(self, y):
        return y[..., self.inv]


class AdditiveCoupling:
    """Split ``x = (x1, x2)`` at ``split``;
    ``y1 = x1``, ``y2 = a * x2 + W2 tanh(W1 x1 + b1)``.

    The Jacobian is block lower-triangular, so its operator norm is at most
    ``max(1, max|a|) + ||W2|| * ||W1||`` (spectral norms, tanh is 1-Lipschitz).
    """

    def __init__(self, split: int, a, W1, b1, W2):
        self.split = int(split)
        self.a = np.asarray(a, dtype=float)
        if np.any(self.a == 0):
            raise ValueError("coupling scale entries must be nonzero")
        self.W1 = np.asarray(W1, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        self.W2 = np.asarray(W2, dtype=float)
        if self.W1.shape[1] != self.split or self.W2.shape[0] != self.a.size:
            raise ValueError("coupling weight shapes do not match the split")
        lip_t = np.linalg.norm(self.W2, 2) * np.linalg.norm(self.W1, 2)
        self.bound = float(max(1.0, np.max(np.abs(self.a))) + lip_t)

    def _t(self, x1):
        return np.tanh(x1 @ self.W1.T + self.b1) @ self.W2.T

    def forward(self, x):
        x1, x2 = x[..., : self.split], x[..., self.split:]
        return np.concatenate([x1, self.a * x2 + self._t(x1)], axis=-1)

    def inverse(self, y):
        y1, y2 = y[..., : self.split], y[..., self.split:]
        return np.concatenate([y1, (y2 - self._t(y1)) / self.a], axis=-1)


LAYER_TYPES = {"diagonal": DiagonalAffine, "permute": Permute, "coupling": AdditiveCoupling}


@dataclass(frozen=True, eq=False)
class FlowMap:
    layers: tuple
    L_T: float

    def forward(self, z) -> np.ndarray:
        x = np.asarray(z, dtype=float)
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def inverse(self, x) -> np.ndarray:
        z = np.asarray(x, dtype=float)
        for layer in reversed(self.layers):
            z = layer.inverse(z)
        return z

    @property
    def bounds(self) -> list:
        return [layer.bound for layer in self.layers]


def build_flow(layer_specs: Sequence) -> FlowMap:
    """Compose layers (objects or ``{"type": ..., **kwargs}`` dicts) into a FlowMap.

    ``L_T`` is the product of per-layer bounds, taken over the sorted bounds
    so that reordering layers leaves it bit-identical.
    """
    layers = []
    for spec in layer_specs:
        if isinstance(spec, dict):
            spec = dict(spec)
            kind = spec.pop("type")
            if kind not in LAYER_TYPES:
                raise ValueError(f"unknown layer type {kind!r}")
            spec = LAYER_TYPES[kind](**spec)
        if not getattr(spec, "bound", 0) > 0:
            raise ValueError("every layer needs a positive certified bound")
        layers.append(spec)
    return FlowMap(tuple(layers), math.prod(sorted(l.bound for l in layers)))


def random_flow(dim: int, n_layers: int, seed: int, hidden: int = 8, weight_scale: float = 0.5,
                index: int = 0) -> FlowMap:
    """Seeded flow alternating couplings, permutations and diagonal layers.

    Parameters are drawn from the key ``(seed, index)``.
    """
    if dim < 2:
        raise ValueError("random_flow needs dim >= 2 for couplings")
    rng = rng_for(505, seed, index)
    split = dim // 2
    layers = []
    for _ in range(n_layers):
        layers.append(AdditiveCoupling(
            split,
            a=rng.uniform(0.5, 1.5, dim - split) * rng.choice([-1, 1], dim - split),
            W1=weight_scale * rng.standard_normal((hidden, split)),
            b1=rng.standard_normal(hidden),
            W2=weight_scale * rng.standard_normal((dim - split, hidden)),
        ))
        layers.append(Permute(rng.permutation(dim)))
        layers.append(DiagonalAffine(rng.uniform(0.5, 2.0, dim), rng.standard_normal(dim)))
    return build_flow(layers)


@dataclass(frozen=True)
class TransportReport:
    variance_lhs: float
    variance_bound: float
    mean_shift: float
    mean_bound: float
    passed: bool


def sample_ball(center, tau: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws from the open Euclidean ball of radius ``tau``."""
    center = np.asarray(center, dtype=float)
    d = center.size
    u = rng.standard_normal((count, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = tau * rng.random(count) ** (1.0 / d)
    return center + u * r[:, None]


def verify_transport(flow: FlowMap, c_z, tau: float, sample_count: int, seed: int,
                     index: int = 0) -> TransportReport:
    """Push a uniform ``tau``-ball sample through ``flow`` and check
    ``mean ||x - T(c)||^2 <= (L_T tau)^2`` and ``||mean x - T(c)|| <= L_T tau``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    c_z = np.asarray(c_z, dtype=float)
    Z = sample_ball(c_z, tau, sample_count, rng_for(606, seed, index))
    X = flow.forward(Z)
    tc = flow.forward(c_z[None, :])[0]
    var = float(np.mean(np.sum((X - tc) ** 2, axis=1)))
    shift = float(np.linalg.norm(X.mean(axis=0) - tc))
    vb = (flow.L_T * tau) ** 2
    mb = flow.L_T * tau
    return TransportReport(var, vb, shift, mb, var <= vb and shift <= mb)
