"""Error trajectories, the data-addition score and covariance-limit diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DEFAULT_DA_WEIGHTS = (0.1, 0.2, 0.3, 0.4)


def error_norm(estimate, mu_star) -> float:
    estimate = np.asarray(estimate, dtype=float)
    mu_star = np.asarray(mu_star, dtype=float)
    if estimate.shape != mu_star.shape:
        raise ValueError(f"dimension mismatch: {estimate.shape} vs {mu_star.shape}")
    # hypot rescales before squaring, so tiny differences do not underflow to 0
    return math.hypot(*(estimate - mu_star).ravel().tolist())


@dataclass(frozen=True)
class DaInput:
    y: tuple
    s: tuple = DEFAULT_DA_WEIGHTS

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        object.__setattr__(self, "s", tuple(float(v) for v in self.s))
        if len(self.y) != 5:
            raise ValueError(f"DA score needs exactly 5 performance values, got {len(self.y)}")
        if len(self.s) != 4:
            raise ValueError(f"DA score needs exactly 4 importance weights, got {len(self.s)}")


def da_score(inp) -> float:
    """Data-addition score of a 5-step performance sequence (0-100 scale).

    Each non-decreasing step earns ``1 + (y[i+1] - y[i]) / 10 * s[i]``; a drop
    earns nothing. A score of at least 4 means no step decreased, provided
    no single gain is large enough to outweigh a whole lost step (on steps
    of at most 10 points this always holds).
    """
    if not isinstance(inp, DaInput):
        inp = DaInput(tuple(inp))
    y, s = inp.y, inp.s
    terms = [1.0 + (y[i + 1] - y[i]) / 10.0 * s[i] for i in range(4) if y[i + 1] >= y[i]]
    return math.fsum(terms)


def parse_da_tuple(text: str) -> DaInput:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    try:
        return DaInput(tuple(float(p) for p in parts))
    except ValueError as exc:
        raise ValueError(f"could not parse DA input {text!r}: {exc}") from None


@dataclass(frozen=True)
class Step:
    K: int
    strategy: str
    epsilon: float
    delta_epsilon: float
    set_size: int
    admitted: Optional[bool] = None


@dataclass
class Trajectory:
    steps: list = field(default_factory=list)

    def append(self, K: int, strategy: str, epsilon: float, set_size: int,
               admitted: Optional[bool] = None, delta: Optional[float] = None) -> Step:
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if delta is None:
            delta = epsilon - self.steps[-1].epsilon if self.steps else 0.0
        step = Step(K, strategy, epsilon, delta, set_size, admitted)
        self.steps.append(step)
        return step

    @property
    def epsilons(self) -> list:
        return [s.epsilon for s in self.steps]

    @property
    def deltas(self) -> list:
        return [s.delta_epsilon for s in self.steps]


def relative_frobenius(A, B) -> float:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return float(np.linalg.norm(A - B) / np.linalg.norm(B))


def limit_covariance(sigma: float, Sigma_mu, mode: str) -> np.ndarray:
    Sigma_mu = np.asarray(Sigma_mu, dtype=float)
    d = Sigma_mu.shape[0]
    if mode == "pool_limit":
        return sigma**2 * np.eye(d) + Sigma_mu
    if mode == "match_limit":
        return sigma**2 * np.eye(d)
    raise ValueError(f"mode must be 'pool_limit' or 'match_limit', got {mode!r}")


def covariance_limit_check(result, sigma: float, Sigma_mu, mode: str) -> dict:
    """Relative Frobenius distance from ``result``'s empirical covariance to
    ``sigma^2 I + Sigma_mu`` (pool_limit) or ``sigma^2 I`` (match_limit)."""
    Sigma_mu = np.asarray(Sigma_mu, dtype=float)
    if not np.allclose(Sigma_mu, Sigma_mu.T):
        raise ValueError("Sigma_mu must be symmetric")
    target = limit_covariance(sigma, Sigma_mu, mode)
    cov = result.covariance_estimate if hasattr(result, "covariance_estimate") else result
    return {"frobenius_rel_err": relative_frobenius(cov, target)}
