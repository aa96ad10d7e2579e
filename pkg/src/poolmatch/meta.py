"""Meta-distributions over domain means and within-domain sampling.

All randomness goes through numpy's PCG64 bit generator seeded from a
``SeedSequence`` built from integer tuples, so a draw depends only on its
``(seed, ...)`` key and never on generation order.

Generators
----------
symmetric(spread)
    ``mu_k = mu_star + spread * z``, ``z ~ N(0, I)``. Sign-symmetric about the
    target; ``Cov = spread^2 I``.
asymmetric(strength, direction, mass, spacing, inlier_spread)
    Two-component mixture ``mu_k = mu_star + inlier_spread * z + B * h * u`` with
    ``B ~ Bernoulli(mass)``, ``u`` the unit ``direction`` and shift
    ``h = spacing * strength``. Most domains sit near the target; a ``mass``
    fraction is pushed ``h`` along ``u``. Tails stay Gaussian-light.
    ``E[mu_k] = mu_star + mass * h * u``,
    ``Cov = inlier_spread^2 I + mass (1 - mass) h^2 u u^T``.
two_point(offset, prob)
    ``mu_star + offset`` with probability ``prob``, else ``mu_star``.
outlier_sequence(base, outlier_distance, every)
    Means at 1-based indices divisible by ``every`` sit exactly
    ``outlier_distance`` from the target along a uniformly random direction;
    all other indices are drawn from ``base``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

KINDS = ("symmetric", "asymmetric", "two_point", "outlier_sequence")

# stream tags keep domain-mean draws and sample draws on disjoint seed keys
_MEANS, _SAMPLES, _OUTLIER = 101, 202, 303


def rng_for(*key: int) -> np.random.Generator:
    """Independent PCG64 generator for an integer key such as ``(seed, k)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


def _unit(v) -> np.ndarray:
    """Unit vector along ``v``; idempotent, so serialized specs reload bit-identically."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("direction must be nonzero")
    return v if n == 1.0 else _exact_length(v, 1.0)


@dataclass(frozen=True, eq=False)
class MetaSpec:
    kind: str
    dim: int = 2
    mu_star: Optional[tuple] = None
    spread: float = 1.5
    strength: float = 1.5
    direction: Optional[tuple] = None
    mass: float = 0.3
    spacing: float = 2.0
    inlier_spread: float = 0.15
    offset: Optional[tuple] = None
    prob: float = 0.0
    base: Optional["MetaSpec"] = None
    outlier_distance: float = 2.5
    every: int = 3

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"meta.kind: unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.dim < 1:
            raise ValueError(f"meta.dim: must be >= 1, got {self.dim}")
        if self.mu_star is None:
            object.__setattr__(self, "mu_star", (0.0,) * self.dim)
        object.__setattr__(self, "mu_star", tuple(float(x) for x in self.mu_star))
        if len(self.mu_star) != self.dim:
            raise ValueError(f"meta.mu_star: length {len(self.mu_star)} does not match dim {self.dim}")
        if self.kind == "symmetric" and not self.spread > 0:
            raise ValueError(f"meta.spread: must be positive, got {self.spread}")
        if self.kind == "asymmetric":
            if not self.strength > 0:
                raise ValueError(f"meta.strength: must be positive, got {self.strength}")
            if not 0 <= self.mass <= 1:
                raise ValueError(f"meta.mass: must lie in [0, 1], got {self.mass}")
            if not self.spacing > 0:
                raise ValueError(f"meta.spacing: must be positive, got {self.spacing}")
            if self.inlier_spread < 0:
                raise ValueError(f"meta.inlier_spread: must be nonnegative, got {self.inlier_spread}")
            d = self.direction if self.direction is not None else (1.0,) * self.dim
            if len(d) != self.dim:
                raise ValueError(f"meta.direction: length {len(d)} does not match dim {self.dim}")
            object.__setattr__(self, "direction", tuple(float(x) for x in _unit(d)))
        if self.kind == "two_point":
            if not 0 <= self.prob <= 1:
                raise ValueError(f"meta.prob: must lie in [0, 1], got {self.prob}")
            off = self.offset if self.offset is not None else (1.0,) + (0.0,) * (self.dim - 1)
            if len(off) != self.dim:
                raise ValueError(f"meta.offset: length {len(off)} does not match dim {self.dim}")
            object.__setattr__(self, "offset", tuple(float(x) for x in off))
        if self.kind == "outlier_sequence":
            if self.base is None:
                raise ValueError("meta.base: outlier_sequence needs a base spec")
            if self.base.dim != self.dim:
                raise ValueError("meta.base: base dim does not match")
            if self.every < 1:
                raise ValueError(f"meta.every: must be >= 1, got {self.every}")
            if not self.outlier_distance > 0:
                raise ValueError(f"meta.outlier_distance: must be positive, got {self.outlier_distance}")

    @property
    def shift(self) -> float:
        return self.spacing * self.strength

    @property
    def target(self) -> np.ndarray:
        return np.array(self.mu_star)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim, "mu_star": list(self.mu_star)}
        if self.kind == "symmetric":
            out["spread"] = self.spread
        elif self.kind == "asymmetric":
            out.update(strength=self.strength, direction=list(self.direction),
                       mass=self.mass, spacing=self.spacing, inlier_spread=self.inlier_spread)
        elif self.kind == "two_point":
            out.update(offset=list(self.offset), prob=self.prob)
        else:
            out.update(base=self.base.to_dict(), outlier_distance=self.outlier_distance,
                       every=self.every)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetaSpec":
        data = dict(data)
        if "kind" not in data:
            raise ValueError("meta.kind: missing")
        allowed = set(cls.__dataclass_fields__)
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"meta.{sorted(unknown)[0]}: unknown field")
        if data.get("base") is not None:
            base = dict(data["base"])
            base.setdefault("dim", data.get("dim", 2))
            base.setdefault("mu_star", data.get("mu_star"))
            data["base"] = cls.from_dict(base)
        for key in ("mu_star", "direction", "offset"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True, eq=False)
class Domain:
    mu: np.ndarray
    sigma: float
    samples: np.ndarray
    k: int = 0
    _mean: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.samples.ndim != 2 or self.samples.shape[1] != self.mu.shape[0]:
            raise ValueError(f"samples of shape {self.samples.shape} do not match mean dim {self.mu.shape[0]}")
        if self.samples.shape[0] == 0:
            raise ValueError("a domain needs at least one sample")
        object.__setattr__(self, "_mean", self.samples.mean(axis=0))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def empirical_mean(self) -> np.ndarray:
        return self._mean

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def _point_means(spec: MetaSpec, idx: np.ndarray, seed: int) -> np.ndarray:
    """Means for 1-based domain indices ``idx``; each row drawn from key (seed, k)."""
    rows = []
    mu_star = spec.target
    for k in idx:
        rng = rng_for(_MEANS, seed, int(k))
        if spec.kind == "symmetric":
            rows.append(mu_star + spec.spread * rng.standard_normal(spec.dim))
        elif spec.kind == "asymmetric":
            z = rng.standard_normal(spec.dim)
            shifted = rng.random() < spec.mass
            rows.append(mu_star + spec.inlier_spread * z
                        + (spec.shift * np.array(spec.direction) if shifted else 0.0))
        elif spec.kind == "two_point":
            hit = rng.random() < spec.prob
            rows.append(mu_star + (np.array(spec.offset) if hit else 0.0))
        else:
            rows.append(_outlier_or_base(spec, int(k), seed))
    return np.array(rows, dtype=float).reshape(len(rows), spec.dim)


def _outlier_or_base(spec: MetaSpec, k: int, seed: int) -> np.ndarray:
    if k % spec.every == 0:
        rng = rng_for(_OUTLIER, seed, k)
        # redraw the (rare) directions whose length cannot be made exact
        for _ in range(64):
            v = _exact_length(rng.standard_normal(spec.dim), spec.outlier_distance)
            if np.linalg.norm(v) == spec.outlier_distance:
                break
        return spec.target + v
    return _point_means(spec.base, np.array([k]), seed)[0]


def _exact_length(u: np.ndarray, r: float) -> np.ndarray:
    """Rescale ``u`` so that ``np.linalg.norm`` returns exactly ``r``.

    Plain ``r * u / ||u||`` misses by an ulp about a fifth of the time. After
    a few rescalings, ulp nudges are applied to the smallest nonzero
    coordinate first, since it moves the rounded sum of squares most finely.
    """
    v = u * (r / np.linalg.norm(u))
    for _ in range(4):
        n = np.linalg.norm(v)
        if n == r:
            return v
        v = v * (r / n)
    order = [i for i in np.argsort(np.abs(v)) if v[i] != 0]
    for i in order:
        for _ in range(256):
            n = np.linalg.norm(v)
            if n == r:
                return v
            toward = np.sign(v[i]) * (np.inf if n < r else -np.inf)
            v[i] = np.nextafter(v[i], toward)
    return v


def sample_domain_means(spec: MetaSpec, K: int, seed: int) -> np.ndarray:
    """Draw ``K`` domain means, shape (K, d). Row ``k-1`` depends only on (seed, k)."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return _point_means(spec, np.arange(1, K + 1), seed)


def outlier_sequence_means(base: MetaSpec, outlier_distance: float, every: int,
                           K: int, seed: int) -> np.ndarray:
    spec = MetaSpec("outlier_sequence", dim=base.dim, mu_star=base.mu_star, base=base,
                    outlier_distance=outlier_distance, every=every)
    return sample_domain_means(spec, K, seed)


def outlier_indices(every: int, K: int) -> list[int]:
    """1-based indices that ``outlier_sequence`` turns into outliers."""
    return list(range(every, K + 1, every))


def sample_domain(mean, sigma: float, N: int, seed: int, k: int = 0) -> Domain:
    """``N`` isotropic Gaussian draws around ``mean``; keyed on (seed, k)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    mean = np.asarray(mean, dtype=float)
    rng = rng_for(_SAMPLES, seed, k)
    samples = mean + sigma * rng.standard_normal((N, mean.shape[0]))
    if sigma == 0:
        samples = np.broadcast_to(mean, (N, mean.shape[0])).copy()
    return Domain(mean.copy(), float(sigma), samples, k)


def make_domains(spec: MetaSpec, K: int, sigma: float, N, seed: int) -> list[Domain]:
    """Draw means then samples for domains 1..K. ``N`` is an int or a per-domain list."""
    means = sample_domain_means(spec, K, seed)
    sizes = [N] * K if isinstance(N, (int, np.integer)) else list(N)
    return [sample_domain(means[i], sigma, sizes[i], seed, k=i + 1) for i in range(K)]


def meta_covariance(spec: MetaSpec, mc_draws: int = 10**6, seed: int = 0) -> np.ndarray:
    """Covariance of the domain-mean law.

    Closed form for symmetric, asymmetric and two_point. For outlier_sequence
    the long-run mixture (a ``1/every`` share of outliers) is estimated by a
    Monte-Carlo oracle that is cached per (spec, draws, seed).
    """
    if spec.kind == "symmetric":
        return spec.spread**2 * np.eye(spec.dim)
    if spec.kind == "asymmetric":
        u = np.array(spec.direction)
        return (spec.inlier_spread**2 * np.eye(spec.dim)
                + spec.mass * (1 - spec.mass) * spec.shift**2 * np.outer(u, u))
    if spec.kind == "two_point":
        c = np.array(spec.offset)
        return spec.prob * (1 - spec.prob) * np.outer(c, c)
    return _mc_covariance(_freeze(spec.to_dict()), mc_draws, seed).copy()


def meta_mean(spec: MetaSpec) -> np.ndarray:
    """Expected domain mean (closed form where one exists)."""
    mu = spec.target
    if spec.kind == "asymmetric":
        return mu + spec.mass * spec.shift * np.array(spec.direction)
    if spec.kind == "two_point":
        return mu + spec.prob * np.array(spec.offset)
    if spec.kind == "outlier_sequence":
        # outlier directions are isotropic, so only the base shifts the mean
        return mu + (1 - 1 / spec.every) * (meta_mean(spec.base) - mu)
    return mu


def _freeze(d):
    if isinstance(d, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in d.items()))
    if isinstance(d, list):
        return tuple(_freeze(v) for v in d)
    return d


def _thaw(t):
    if isinstance(t, tuple) and t and all(isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], str) for x in t):
        return {k: _thaw(v) for k, v in t}
    if isinstance(t, tuple):
        return [_thaw(v) for v in t]
    return t


@functools.lru_cache(maxsize=16)
def _mc_covariance(frozen_spec, draws: int, seed: int) -> np.ndarray:
    spec = MetaSpec.from_dict(_thaw(frozen_spec))
    rng = rng_for(seed, draws)
    if spec.kind != "outlier_sequence":
        raise ValueError("Monte-Carlo covariance is only needed for outlier_sequence")
    n_out = draws // spec.every
    u = rng.standard_normal((n_out, spec.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    outliers = spec.target + spec.outlier_distance * u
    base = _vectorized_base_draws(spec.base, draws - n_out, rng)
    return np.cov(np.vstack([outliers, base]), rowvar=False).reshape(spec.dim, spec.dim)


def _vectorized_base_draws(spec: MetaSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    mu = spec.target
    if spec.kind == "symmetric":
        return mu + spec.spread * rng.standard_normal((n, spec.dim))
    if spec.kind == "asymmetric":
        z = rng.standard_normal((n, spec.dim))
        b = rng.random(n) < spec.mass
        return mu + spec.inlier_spread * z + np.outer(b, spec.shift * np.array(spec.direction))
    if spec.kind == "two_point":
        b = rng.random(n) < spec.prob
        return mu + np.outer(b, np.array(spec.offset))
    raise ValueError("nested outlier_sequence bases are not supported")
