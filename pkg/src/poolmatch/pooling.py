"""Naive pooling, uniform subsampling and centroid matching over domains.

Means are accumulated with ``math.fsum`` (correctly rounded), so an estimate
depends only on the multiset of samples and is bit-identical under any
reordering of the input domains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .meta import Domain, rng_for
from .metrics import MetricSpec, metric_eval, metric_eval_rows

STRATEGIES = ("naive", "subsample", "matching")
INITS = ("median", "target_oracle", "zero")
_SUBSAMPLE_STREAM = 404
_BOOTSTRAP_STREAM = 405


def exact_mean(X: np.ndarray) -> np.ndarray:
    """Column means of ``X`` that do not depend on row order."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot average zero rows")
    return np.array([math.fsum(X[:, j].tolist()) / X.shape[0] for j in range(X.shape[1])])


def _covariance(X: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance with fsum accumulation (row-order free)."""
    n, d = X.shape
    if n < 2:
        return np.zeros((d, d))
    R = X - exact_mean(X)
    out = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            out[i, j] = out[j, i] = math.fsum((R[:, i] * R[:, j]).tolist()) / (n - 1)
    return out


def _stack(domains: Sequence[Domain]) -> np.ndarray:
    return np.concatenate([dom.samples for dom in domains], axis=0)


@dataclass(frozen=True, eq=False)
class PooledResult:
    strategy: str
    mean_estimate: np.ndarray
    covariance_estimate: np.ndarray
    included_domains: frozenset
    total_samples: int
    members: tuple = field(default=(), repr=False)


@dataclass(frozen=True, eq=False)
class MatchState:
    """Outcome of the matching fixed point.

    ``matched`` holds domain labels (``Domain.k``). ``degenerate`` is set when
    the ball around the centroid emptied and the single nearest domain was
    used instead.
    """

    centroid: np.ndarray
    tau: float
    metric: MetricSpec
    matched: frozenset
    iterations: int
    converged: bool
    trace: tuple
    degenerate: bool = False
    use_true_means: bool = False
    tol: float = 1e-4
    members: tuple = field(default=(), repr=False)

    def distances(self, domains: Sequence[Domain]) -> np.ndarray:
        return metric_eval_rows(self.metric, _points(domains, self.use_true_means) - self.centroid)


def _points(domains: Sequence[Domain], use_true_means: bool) -> np.ndarray:
    if use_true_means:
        return np.array([dom.mu for dom in domains])
    return np.array([dom.empirical_mean for dom in domains])


def _pooled(strategy: str, members: Sequence[Domain]) -> PooledResult:
    X = _stack(members)
    return PooledResult(strategy, exact_mean(X), _covariance(X),
                        frozenset(dom.k for dom in members), X.shape[0], tuple(members))


def naive_pool(domains: Sequence[Domain]) -> PooledResult:
    """Average over the union of every domain's samples."""
    if len(domains) == 0:
        raise ValueError("naive_pool needs at least one domain")
    return _pooled("naive", domains)


def uniform_subsample(domains: Sequence[Domain], m: int, n: int, seed: int,
                      step: int = 0) -> PooledResult:
    """Pick ``m`` domains uniformly without replacement, then ``n`` samples from
    each with replacement, and average the ``m * n`` draws.

    The draw is keyed on ``(seed, step)``; the harness passes ``step=K``.
    """
    K = len(domains)
    if not 1 <= m <= K:
        raise ValueError(f"m must lie in [1, {K}], got {m}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = rng_for(_SUBSAMPLE_STREAM, seed, step)
    chosen = rng.choice(K, size=m, replace=False)
    draws = []
    for i in chosen:
        dom = domains[int(i)]
        draws.append(dom.samples[rng.integers(0, dom.n, size=n)])
    X = np.concatenate(draws, axis=0)
    picked = tuple(domains[int(i)] for i in chosen)
    return PooledResult("subsample", exact_mean(X), _covariance(X),
                        frozenset(dom.k for dom in picked), X.shape[0], picked)


def _initial_centroid(domains, init, mu_star) -> np.ndarray:
    if init == "median":
        # coordinate-wise median over all samples
        return np.median(_stack(domains), axis=0)
    if init == "target_oracle":
        if mu_star is None:
            raise ValueError("init='target_oracle' needs mu_star")
        return np.asarray(mu_star, dtype=float).copy()
    if init == "zero":
        return np.zeros(domains[0].dim)
    raise ValueError(f"unknown init {init!r}; expected one of {INITS}")


def _select(dist: np.ndarray, tau: float, labels: np.ndarray) -> tuple[np.ndarray, bool]:
    inside = np.flatnonzero(dist < tau)
    if inside.size:
        return inside, False
    # nearest domain, ties broken by label so the choice is order-free
    best = min(range(dist.size), key=lambda i: (dist[i], labels[i]))
    return np.array([best]), True


def match_domains(domains: Sequence[Domain], tau: float, metric: Optional[MetricSpec] = None,
                  init: str = "median", tol: float = 1e-4, max_iter: int = 100,
                  mu_star=None, use_true_means: bool = False) -> tuple[MatchState, PooledResult]:
    """Iterate {select domains within ``tau`` of the centroid; move the centroid
    to the sample-weighted mean of the selection} to a fixed point.

    Stops once the centroid moves less than ``tol`` and the selection made
    from the new centroid equals the one that produced it. Running out of
    iterations is reported through ``converged=False``. If the ball around
    the centroid ever holds no domain, the run ends on the single nearest
    domain with ``degenerate=True`` and ``converged=False``.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if len(domains) == 0:
        raise ValueError("match_domains needs at least one domain")
    metric = metric or MetricSpec.euclidean()
    points = _points(domains, use_true_means)
    labels = np.array([dom.k for dom in domains])

    c = _initial_centroid(domains, init, mu_star)
    trace = [c]
    sel, degenerate = _select(metric_eval_rows(metric, points - c), tau, labels)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        members = [domains[i] for i in sel]
        c_new = exact_mean(_stack(members))
        trace.append(c_new)
        if degenerate:
            # the ball emptied: stop on the nearest domain and flag the state
            c = c_new
            break
        sel_new, degenerate = _select(metric_eval_rows(metric, points - c_new), tau, labels)
        moved = float(np.linalg.norm(c_new - c))
        stable = set(labels[sel_new]) == set(labels[sel])
        c = c_new
        if moved < tol and stable and not degenerate:
            converged = True
            break
        sel = sel_new

    members = tuple(domains[i] for i in sel)
    state = MatchState(c, float(tau), metric, frozenset(int(x) for x in labels[sel]), it,
                       converged, tuple(trace), degenerate, use_true_means, tol, members)
    X = _stack(members)
    result = PooledResult("matching", c, _covariance(X), state.matched, X.shape[0], members)
    return state, result


@dataclass(frozen=True, eq=False)
class StepResult:
    result: PooledResult
    state: Optional[MatchState]
    epsilon: float
    delta_epsilon: float
    admitted: bool


def _eps(mean, mu_star) -> float:
    return float(np.linalg.norm(np.asarray(mean) - np.asarray(mu_star)))


def add_domain_step(prev, new_domain: Domain, strategy: str, *, mu_star,
                    domains: Optional[Sequence[Domain]] = None, m: Optional[int] = None,
                    n: Optional[int] = None, seed: int = 0, refine: bool = False) -> StepResult:
    """Move from K to K+1 domains.

    naive
        ``prev`` is a PooledResult; the new domain's samples join the pool.
    matching
        ``prev`` is a MatchState. The domain is admitted iff its mean lies
        strictly within ``tau`` of the current centroid; admission moves the
        centroid to the pooled mean of the enlarged set (one update, or a
        full fixed-point rerun with ``refine=True``). Rejection returns the
        previous state untouched.
    subsample
        Stateless: a fresh draw of ``m`` domains from ``domains + [new_domain]``,
        keyed on ``(seed, K + 1)``.
    """
    if strategy == "naive":
        old = _eps(prev.mean_estimate, mu_star)
        res = naive_pool(tuple(prev.members) + (new_domain,))
        new = _eps(res.mean_estimate, mu_star)
        return StepResult(res, None, new, new - old, True)

    if strategy == "subsample":
        if domains is None or m is None or n is None:
            raise ValueError("subsample steps need domains, m and n")
        old = _eps(prev.mean_estimate, mu_star)
        pool = list(domains) + [new_domain]
        res = uniform_subsample(pool, min(m, len(pool)), n, seed, step=len(pool))
        new = _eps(res.mean_estimate, mu_star)
        return StepResult(res, None, new, new - old, new_domain.k in res.included_domains)

    if strategy != "matching":
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    state: MatchState = prev
    old = _eps(state.centroid, mu_star)
    point = new_domain.mu if state.use_true_means else new_domain.empirical_mean
    if not metric_eval(state.metric, point - state.centroid) < state.tau:
        X = _stack(state.members)
        res = PooledResult("matching", state.centroid, _covariance(X), state.matched,
                           X.shape[0], state.members)
        return StepResult(res, state, old, 0.0, False)

    members = tuple(state.members) + (new_domain,)
    if refine:
        # restart the fixed point from the current centroid
        new_state, res = match_domains(members, state.tau, state.metric, init="target_oracle",
                                       mu_star=state.centroid, tol=state.tol,
                                       use_true_means=state.use_true_means)
    else:
        c_new = exact_mean(_stack(members))
        new_state = replace(state, centroid=c_new, matched=state.matched | {new_domain.k},
                            trace=state.trace + (c_new,), members=members)
        X = _stack(members)
        res = PooledResult("matching", c_new, _covariance(X), new_state.matched, X.shape[0], members)
    new = _eps(new_state.centroid, mu_star)
    return StepResult(res, new_state, new, new - old, True)



@dataclass
class PropertyReport:
    """Sample-level matched-set audit around a fixed centroid.

    ``S(tau) = {x : M(x - c) < tau}`` over the pooled samples. Norm and
    variance checks use the radius ``tau / m_M``, the largest Euclidean
    distance to ``c`` that ``M(x - c) < tau`` allows.
    """

    taus: list
    set_sizes: list
    monotone: list = field(default_factory=list)       # (tau1, tau2, subset?)
    norm_checks: list = field(default_factory=list)    # (tau, |avg||x|| - ||c|||, bound, ok)
    variance_checks: list = field(default_factory=list)  # (tau, variance, bound, ok)
    mean_set_sizes: list = field(default_factory=list)
    decay_exponent: Optional[float] = None
    notices: list = field(default_factory=list)

    @property
    def all_monotone(self) -> bool:
        return all(ok for *_, ok in self.monotone)

    @property
    def all_norms_ok(self) -> bool:
        return all(ok for *_, ok in self.norm_checks)

    @property
    def all_variances_ok(self) -> bool:
        return all(ok for *_, ok in self.variance_checks)


def matched_set_report(state: MatchState, domains: Sequence[Domain], taus: Sequence[float],
                       trial_count: int = 1, seed: int = 0) -> PropertyReport:
    """Check subset monotonicity, norm concentration, variance bound and the
    log-log growth of ``|S(tau)|`` for the samples of ``domains``.

    The expected set size is averaged over ``trial_count`` bootstrap
    resamples of the pooled samples (the first trial is the sample itself).
    """
    taus = [float(t) for t in taus]
    if any(b < a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be sorted ascending")
    X = _stack(domains)
    c = np.asarray(state.centroid, dtype=float)
    dist = metric_eval_rows(state.metric, X - c)
    masks = [dist < t for t in taus]
    report = PropertyReport(taus, [int(mk.sum()) for mk in masks])

    for i in range(len(taus)):
        for j in range(i + 1, len(taus)):
            subset = bool(np.all(~masks[i] | masks[j]))
            report.monotone.append((taus[i], taus[j], subset))

    c_norm = float(np.linalg.norm(c))
    for t, mk in zip(taus, masks):
        if not mk.any():
            report.notices.append(f"S(tau={t}) is empty; norm and variance checks skipped")
            continue
        S = X[mk]
        radius = t / state.metric.m_M
        gap = abs(float(np.mean(np.linalg.norm(S, axis=1))) - c_norm)
        report.norm_checks.append((t, gap, radius, gap <= radius))
        var = float(np.mean(np.sum((S - exact_mean(S)) ** 2, axis=1)))
        report.variance_checks.append((t, var, radius**2, var <= radius**2))

    rng = rng_for(_BOOTSTRAP_STREAM, seed)
    counts = np.zeros(len(taus))
    for trial in range(max(1, trial_count)):
        d = dist if trial == 0 else dist[rng.integers(0, dist.size, size=dist.size)]
        counts += np.array([(d < t).sum() for t in taus])
    counts /= max(1, trial_count)
    report.mean_set_sizes = counts.tolist()
    usable = counts > 0
    log_t = np.log(np.array(taus)[usable])
    if len(taus) < 2 or usable.sum() < 2 or np.ptp(log_t) < 1e-9:
        report.notices.append("fewer than two usable taus; decay fit skipped")
    else:
        slope, _ = np.polyfit(log_t, np.log(counts[usable]), 1)
        report.decay_exponent = float(slope)
    return report
