"""Config-driven runs of the synthetic regimes and the property audits.

A run is described by a single :class:`RunConfig`. Simulation regimes
(``asymptotic``, ``symmetric``, ``addition``) produce one row per
(seed, K, strategy); audit regimes (``properties``, ``transport``) produce
one row per (seed, check). Seeds fan out across worker processes and rows
are sorted before emission, so the output does not depend on ``workers``.

Precedence of settings: regime defaults < JSON config document < CLI flags.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .evaluation import error_norm, relative_frobenius, limit_covariance
from .flows import random_flow, sample_ball, verify_transport
from .meta import MetaSpec, make_domains, meta_covariance, rng_for
from .metrics import MetricSpec, metric_eval_rows
from .pooling import (INITS, STRATEGIES, add_domain_step, match_domains, matched_set_report,
                      naive_pool, uniform_subsample)

REGIMES = ("asymptotic", "symmetric", "addition", "properties", "transport")
SIMULATIONS = ("asymptotic", "symmetric", "addition")
CSV_HEADER = ("regime", "seed", "K", "strategy", "epsilon", "delta_epsilon", "set_size",
              "admitted", "runtime_ms")
AUDIT_HEADER = ("regime", "seed", "check", "value", "lower", "upper", "passed")
SCHEMA_VERSION = 1
# fields that only steer execution; left out of the config echo so that output
# bytes do not depend on where or how a run was executed
_PLUMBING = ("output_path", "format", "workers")


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message

    def to_dict(self) -> dict:
        return {"error": {"type": "config", "field": self.field, "message": self.message}}


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run. ``None`` means "use the regime default".

    Simulations use ``K_grid`` (asymptotic), ``K`` (symmetric) or
    ``K_start``..``K`` (addition). Subsampling draws ``subsample_m`` domains
    (default ``ceil(K/2)``) and ``subsample_n`` points from each.
    ``oracle_means`` makes matching compare true domain means instead of
    empirical ones.
    """

    regime: str
    d: int = 2
    sigma: float = 0.8
    K_grid: Optional[tuple] = None
    K: Optional[int] = None
    K_start: Optional[int] = None
    n: Optional[int] = None
    tau: Optional[float] = None
    metric: MetricSpec = field(default_factory=MetricSpec.euclidean)
    meta: Optional[MetaSpec] = None
    seeds: Optional[tuple] = None
    init: str = "median"
    tol: float = 1e-4
    max_iter: int = 100
    subsample_m: Optional[int] = None
    subsample_n: int = 20
    oracle_means: bool = False
    refine: bool = False
    timing: bool = False
    # audit settings
    band_trials: int = 10_000
    perm_trials: int = 5
    permutations: int = 100
    taus: Optional[tuple] = None
    bootstrap: int = 4
    flow_count: int = 100
    flow_layers: int = 3
    ball_samples: int = 2000
    # execution
    workers: int = 1
    output_path: Optional[str] = None
    format: str = "csv"

    def to_dict(self, plumbing: bool = False) -> dict:
        out = {}
        for f in fields(self):
            if f.name in _PLUMBING and not plumbing:
                continue
            v = getattr(self, f.name)
            if isinstance(v, (MetricSpec, MetaSpec)):
                v = v.to_dict()
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


def _regime_defaults(regime: str, d: int) -> dict:
    asym = MetaSpec("asymmetric", dim=d)
    if regime == "asymptotic":
        return dict(K_grid=(5, 10, 20, 30, 40, 50), n=150, tau=1.2, meta=asym,
                    seeds=tuple(range(10)))
    if regime == "symmetric":
        return dict(K=15, n=100, tau=1.0, meta=MetaSpec("symmetric", dim=d, spread=1.5),
                    seeds=tuple(range(10)))
    if regime == "addition":
        meta = MetaSpec("outlier_sequence", dim=d, base=asym, outlier_distance=2.5, every=3)
        return dict(K_start=5, K=30, n=100, tau=1.1, meta=meta, seeds=tuple(range(10)))
    if regime == "properties":
        taus = tuple(float(t) for t in np.round(np.geomspace(0.05, 0.4, 8), 6))
        return dict(K=50, n=2000, tau=1.2, meta=asym, seeds=(0,), taus=taus)
    if regime == "transport":
        return dict(tau=1.0, seeds=(0,))
    raise ConfigError("regime", f"must be one of {list(REGIMES)}, got {regime!r}")


_TUPLE_FIELDS = ("K_grid", "seeds", "taus")


def _coerce(name: str, value):
    if name == "metric":
        if isinstance(value, MetricSpec):
            return value
        if isinstance(value, str):
            value = {"kind": value}
        try:
            return MetricSpec.from_dict(value)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError("metric", str(exc)) from None
    if name == "meta":
        if isinstance(value, MetaSpec) or value is None:
            return value
        try:
            return MetaSpec.from_dict(value)
        except (TypeError, ValueError) as exc:
            msg = str(exc)
            fname = msg.split(":", 1)[0] if msg.startswith("meta.") else "meta"
            raise ConfigError(fname, msg.split(":", 1)[-1].strip()) from None
    if name in _TUPLE_FIELDS and value is not None:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(name, "must be a list")
        return tuple(value)
    return value


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) \
        and math.isfinite(v)


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(name, message)


def _validate(c: RunConfig) -> None:
    _require(c.regime in REGIMES, "regime", f"must be one of {list(REGIMES)}")
    _require(_is_int(c.d) and c.d >= 1, "d", "must be a positive integer")
    _require(_is_real(c.sigma) and c.sigma >= 0, "sigma", "must be a nonnegative real")
    _require(_is_real(c.tau) and c.tau > 0, "tau", "must be a positive real")
    _require(c.seeds is not None and len(c.seeds) > 0 and all(_is_int(s) and s >= 0 for s in c.seeds),
             "seeds", "must be a nonempty list of nonnegative integers")
    _require(len(set(c.seeds)) == len(c.seeds), "seeds", "must not repeat")
    _require(c.init in INITS, "init", f"must be one of {list(INITS)}")
    _require(_is_real(c.tol) and c.tol > 0, "tol", "must be a positive real")
    _require(_is_int(c.max_iter) and c.max_iter >= 1, "max_iter", "must be a positive integer")
    _require(_is_int(c.subsample_n) and c.subsample_n >= 1, "subsample_n", "must be a positive integer")
    _require(_is_int(c.workers) and c.workers >= 1, "workers", "must be a positive integer")
    _require(c.format in ("csv", "json"), "format", "must be 'csv' or 'json'")
    for name in ("oracle_means", "refine", "timing"):
        _require(isinstance(getattr(c, name), bool), name, "must be true or false")
    for name in ("band_trials", "perm_trials", "permutations", "bootstrap", "flow_count",
                 "flow_layers", "ball_samples"):
        _require(_is_int(getattr(c, name)) and getattr(c, name) >= 1, name, "must be a positive integer")
    if c.regime in SIMULATIONS or c.regime == "properties":
        _require(c.meta is not None, "meta", "required for this regime")
        _require(c.meta.dim == c.d, "meta.dim", f"must equal d={c.d}, got {c.meta.dim}")
        _require(_is_int(c.n) and c.n >= 1, "n", "must be a positive integer")
    if c.regime == "asymptotic":
        _require(c.K_grid is not None and len(c.K_grid) > 0
                 and all(_is_int(k) and k >= 1 for k in c.K_grid), "K_grid",
                 "must be a nonempty list of positive integers")
        _require(list(c.K_grid) == sorted(set(c.K_grid)), "K_grid", "must be strictly ascending")
    if c.regime in ("symmetric", "addition", "properties"):
        _require(_is_int(c.K) and c.K >= 1, "K", "must be a positive integer")
    if c.regime == "addition":
        _require(_is_int(c.K_start) and 1 <= c.K_start < c.K, "K_start", "must satisfy 1 <= K_start < K")
    if c.subsample_m is not None:
        smallest = min(c.K_grid) if c.regime == "asymptotic" else (c.K_start or c.K)
        _require(_is_int(c.subsample_m) and 1 <= c.subsample_m <= (smallest or 1), "subsample_m",
                 f"must lie in [1, {smallest}]")
    if c.regime == "properties":
        _require(c.taus is not None and len(c.taus) >= 1 and all(_is_real(t) and t > 0 for t in c.taus),
                 "taus", "must be a nonempty list of positive reals")
        _require(list(c.taus) == sorted(c.taus), "taus", "must be ascending")
    if c.regime == "transport":
        _require(c.d >= 2, "d", "transport flows need d >= 2")


def resolve_config(regime: str, overrides: Optional[dict] = None) -> RunConfig:
    """Expand regime defaults and apply ``overrides`` (a config document)."""
    overrides = dict(overrides or {})
    if "regime" in overrides and overrides.pop("regime") != regime:
        raise ConfigError("regime", "config document names a different regime")
    known = {f.name for f in fields(RunConfig)}
    for key in overrides:
        if key not in known:
            raise ConfigError(key, "unknown field")
    d = overrides.get("d", 2)
    _require(_is_int(d) and d >= 1, "d", "must be a positive integer")
    base = _regime_defaults(regime, d)
    if isinstance(overrides.get("meta"), dict):
        overrides["meta"] = {"dim": d, **overrides["meta"]}
    base.update({k: _coerce(k, v) for k, v in overrides.items()})
    cfg = RunConfig(regime=regime, d=d, **{k: v for k, v in base.items() if k != "d"})
    _validate(cfg)
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return doc


# ---------------------------------------------------------------------------
# simulations


def _sub_m(cfg: RunConfig, K: int) -> int:
    return min(cfg.subsample_m, K) if cfg.subsample_m else math.ceil(K / 2)


def _row(cfg, seed, K, strategy, eps, delta, size, admitted, ms):
    return {"regime": cfg.regime, "seed": int(seed), "K": int(K), "strategy": strategy,
            "epsilon": float(eps), "delta_epsilon": float(delta), "set_size": int(size),
            "admitted": admitted, "runtime_ms": ms}


def _clock(cfg, t0):
    return round((time.perf_counter() - t0) * 1e3, 3) if cfg.timing else None


def _estimate(cfg: RunConfig, domains, strategy: str, seed: int):
    K = len(domains)
    if strategy == "naive":
        return naive_pool(domains)
    if strategy == "subsample":
        return uniform_subsample(domains, _sub_m(cfg, K), cfg.subsample_n, seed, step=K)
    _, res = match_domains(domains, cfg.tau, cfg.metric, cfg.init, cfg.tol, cfg.max_iter,
                           mu_star=cfg.meta.target, use_true_means=cfg.oracle_means)
    return res


def _grid_seed(cfg: RunConfig, seed: int) -> tuple[list, dict]:
    grid = cfg.K_grid if cfg.regime == "asymptotic" else (cfg.K,)
    domains = make_domains(cfg.meta, max(grid), cfg.sigma, cfg.n, seed)
    target = cfg.meta.target
    rows, extras = [], {}
    for strategy in STRATEGIES:
        prev = None
        for K in grid:
            t0 = time.perf_counter()
            res = _estimate(cfg, domains[:K], strategy, seed)
            eps = error_norm(res.mean_estimate, target)
            rows.append(_row(cfg, seed, K, strategy, eps, 0.0 if prev is None else eps - prev,
                             len(res.included_domains), None, _clock(cfg, t0)))
            prev = eps
        extras[strategy] = {"estimate": res.mean_estimate, "covariance": res.covariance_estimate,
                            "set_size": len(res.included_domains)}
    return rows, extras


def _addition_seed(cfg: RunConfig, seed: int) -> tuple[list, dict]:
    domains = make_domains(cfg.meta, cfg.K, cfg.sigma, cfg.n, seed)
    target = cfg.meta.target
    start = domains[: cfg.K_start]
    rows = []
    stats = {"admitted": 0, "rejected": 0, "rejected_nonzero_delta": 0,
             "centroid_bound_violations": 0, "max_centroid_bound_ratio": 0.0}
    finals = {}
    for strategy in STRATEGIES:
        t0 = time.perf_counter()
        if strategy == "matching":
            prev, res = match_domains(start, cfg.tau, cfg.metric, cfg.init, cfg.tol, cfg.max_iter,
                                      mu_star=target, use_true_means=cfg.oracle_means)
        else:
            prev = res = _estimate(cfg, start, strategy, seed)
        eps = error_norm(res.mean_estimate, target)
        rows.append(_row(cfg, seed, cfg.K_start, strategy, eps, 0.0, len(res.included_domains),
                         None, _clock(cfg, t0)))
        for K in range(cfg.K_start + 1, cfg.K + 1):
            t0 = time.perf_counter()
            step = add_domain_step(prev, domains[K - 1], strategy, mu_star=target,
                                   domains=domains[: K - 1], m=_sub_m(cfg, K),
                                   n=cfg.subsample_n, seed=seed, refine=cfg.refine)
            if strategy == "matching":
                if step.admitted:
                    stats["admitted"] += 1
                    moved = float(np.linalg.norm(step.state.centroid - prev.centroid))
                    bound = cfg.tau / (cfg.metric.m_M * (len(prev.matched) + 1))
                    stats["centroid_bound_violations"] += int(moved > bound)
                    stats["max_centroid_bound_ratio"] = max(stats["max_centroid_bound_ratio"],
                                                            moved / bound)
                else:
                    stats["rejected"] += 1
                    stats["rejected_nonzero_delta"] += int(step.delta_epsilon != 0.0)
                prev = step.state
            else:
                prev = step.result
            rows.append(_row(cfg, seed, K, strategy, step.epsilon, step.delta_epsilon,
                             len(step.result.included_domains), bool(step.admitted),
                             _clock(cfg, t0)))
        finals[strategy] = {"estimate": step.result.mean_estimate}
    return rows, {"addition": stats, **finals}


# ---------------------------------------------------------------------------
# audits


def _check(cfg, seed, name, value, lower=None, upper=None):
    value = float(value)
    ok = (lower is None or value >= lower) and (upper is None or value <= upper)
    return {"regime": cfg.regime, "seed": int(seed), "check": name, "value": value,
            "lower": lower, "upper": upper, "passed": bool(ok)}


_BAND_METRICS = (MetricSpec.euclidean(), MetricSpec.scaled(0.5), MetricSpec.scaled(2.0),
                 MetricSpec.geodesic_chord())


def band_audit(trials: int, seed: int, d: int = 2) -> dict:
    """Randomized soundness check of the admission bands.

    Each trial draws a metric, ``eps_K``, ``tau``, a centroid within ``eps_K``
    of the target and a candidate mean, then applies the admission rule.
    Counts admissions beyond the exclusion radius and rejections inside the
    inclusion radius (both must be zero), plus how many trials fell in each
    band so that an empty band cannot pass silently.
    """
    rng = rng_for(707, seed)
    out = {"exclusion_violations": 0, "inclusion_violations": 0,
           "exclusion_trials": 0, "inclusion_trials": 0}
    which = rng.integers(0, len(_BAND_METRICS), size=trials)
    for mi, metric in enumerate(_BAND_METRICS):
        cnt = int(np.sum(which == mi))
        if cnt == 0:
            continue
        eps = rng.uniform(0.0, 1.0, cnt)
        tau = rng.uniform(0.05, 2.0, cnt)
        u = rng.standard_normal((cnt, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        c = u * (eps * rng.random(cnt))[:, None]
        excl = eps + tau / metric.m_M
        incl = tau / metric.L_M - eps
        w = rng.standard_normal((cnt, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        r = rng.uniform(0.0, 1.5 * excl)
        x = w * r[:, None]
        admitted = metric_eval_rows(metric, x - c) < tau
        beyond = r > excl
        inside = (incl > 0) & (r < incl)
        out["exclusion_trials"] += int(beyond.sum())
        out["inclusion_trials"] += int(inside.sum())
        out["exclusion_violations"] += int(np.sum(admitted & beyond))
        out["inclusion_violations"] += int(np.sum(~admitted & inside))
    return out


def exchangeability_audit(cfg: RunConfig, seed: int, K: int = 10, n: int = 40) -> int:
    """Number of permutations whose naive or matching output differs in any bit."""
    mismatches = 0
    for t in range(cfg.perm_trials):
        domains = make_domains(cfg.meta, K, cfg.sigma, n, seed * 1000 + t)
        ref_n = naive_pool(domains)
        ref_s, ref_m = match_domains(domains, cfg.tau, cfg.metric, cfg.init, cfg.tol, cfg.max_iter,
                                     mu_star=cfg.meta.target)
        rng = rng_for(808, seed, t)
        for _ in range(cfg.permutations):
            perm = [domains[i] for i in rng.permutation(K)]
            pn = naive_pool(perm)
            ps, pm = match_domains(perm, cfg.tau, cfg.metric, cfg.init, cfg.tol, cfg.max_iter,
                                   mu_star=cfg.meta.target)
            same = (pn.mean_estimate.tobytes() == ref_n.mean_estimate.tobytes()
                    and pn.covariance_estimate.tobytes() == ref_n.covariance_estimate.tobytes()
                    and pm.mean_estimate.tobytes() == ref_m.mean_estimate.tobytes()
                    and pm.covariance_estimate.tobytes() == ref_m.covariance_estimate.tobytes()
                    and ps.matched == ref_s.matched and ps.iterations == ref_s.iterations)
            mismatches += int(not same)
    return mismatches


def _properties_seed(cfg: RunConfig, seed: int) -> tuple[list, dict]:
    rows = []
    bands = band_audit(cfg.band_trials, seed, cfg.d)
    rows.append(_check(cfg, seed, "band_exclusion_violations", bands["exclusion_violations"], 0, 0))
    rows.append(_check(cfg, seed, "band_inclusion_violations", bands["inclusion_violations"], 0, 0))
    rows.append(_check(cfg, seed, "band_exclusion_trials", bands["exclusion_trials"], 1))
    rows.append(_check(cfg, seed, "band_inclusion_trials", bands["inclusion_trials"], 1))
    rows.append(_check(cfg, seed, "permutation_mismatches", exchangeability_audit(cfg, seed), 0, 0))

    domains = make_domains(cfg.meta, cfg.K, cfg.sigma, cfg.n, seed)
    state, _ = match_domains(domains, cfg.tau, cfg.metric, cfg.init, cfg.tol, cfg.max_iter,
                             mu_star=cfg.meta.target)
    rep = matched_set_report(state, domains, cfg.taus, cfg.bootstrap, seed)
    rows.append(_check(cfg, seed, "monotonicity_failures",
                       sum(not ok for *_, ok in rep.monotone), 0, 0))
    rows.append(_check(cfg, seed, "norm_violations", sum(not ok for *_, ok in rep.norm_checks), 0, 0))
    rows.append(_check(cfg, seed, "variance_violations",
                       sum(not ok for *_, ok in rep.variance_checks), 0, 0))
    if rep.decay_exponent is not None:
        rows.append(_check(cfg, seed, "decay_exponent", rep.decay_exponent, 1.5, 2.5))
    return rows, {"notices": rep.notices}


def _transport_seed(cfg: RunConfig, seed: int) -> tuple[list, dict]:
    var_bad = mean_bad = 0
    worst_ratio = worst_rt = 0.0
    for i in range(cfg.flow_count):
        flow = random_flow(cfg.d, cfg.flow_layers, seed, index=i)
        c_z = rng_for(909, seed, i).standard_normal(cfg.d)
        rep = verify_transport(flow, c_z, cfg.tau, cfg.ball_samples, seed, index=i)
        var_bad += int(rep.variance_lhs > rep.variance_bound)
        mean_bad += int(rep.mean_shift > rep.mean_bound)
        worst_ratio = max(worst_ratio, rep.variance_lhs / rep.variance_bound)
        Z = sample_ball(c_z, cfg.tau, cfg.ball_samples, rng_for(910, seed, i))
        worst_rt = max(worst_rt, float(np.max(np.abs(flow.inverse(flow.forward(Z)) - Z))))
    rows = [_check(cfg, seed, "variance_violations", var_bad, 0, 0),
            _check(cfg, seed, "mean_shift_violations", mean_bad, 0, 0),
            _check(cfg, seed, "max_variance_ratio", worst_ratio, 0.0, 1.0),
            _check(cfg, seed, "max_roundtrip_error", worst_rt, 0.0, 1e-8)]
    return rows, {}


_SEED_RUNNERS = {"asymptotic": _grid_seed, "symmetric": _grid_seed, "addition": _addition_seed,
                 "properties": _properties_seed, "transport": _transport_seed}


def run_seed(cfg: RunConfig, seed: int) -> tuple[list, dict]:
    """Rows and per-seed extras for one seed; a pure function of (cfg, seed)."""
    return _SEED_RUNNERS[cfg.regime](cfg, seed)


# ---------------------------------------------------------------------------
# tables


@dataclass
class ResultTable:
    regime: str
    config: RunConfig
    rows: list
    summary: dict = field(default_factory=dict)

    @property
    def columns(self) -> tuple:
        return CSV_HEADER if self.regime in SIMULATIONS else AUDIT_HEADER

    def select(self, **where) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in where.items())]


def _sort_key(row):
    if "strategy" in row:
        return (row["seed"], row["K"], row["strategy"])
    return (row["seed"], row["check"])


def _mean_std(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "count": int(v.size)}


def _summarize(cfg: RunConfig, rows: list, extras: dict) -> dict:
    if cfg.regime not in SIMULATIONS:
        return {"all_passed": all(r["passed"] for r in rows),
                "failed": sorted({r["check"] for r in rows if not r["passed"]})}
    final_K = max(r["K"] for r in rows)
    summary = {"final_K": final_K, "final_epsilon": {}, "bias_norm": {}}
    target = cfg.meta.target
    for strategy in STRATEGIES:
        eps = [r["epsilon"] for r in rows if r["strategy"] == strategy and r["K"] == final_K]
        summary["final_epsilon"][strategy] = _mean_std(eps)
        est = np.mean([extras[s][strategy]["estimate"] for s in cfg.seeds], axis=0)
        summary["bias_norm"][strategy] = error_norm(est, target)
    if cfg.regime in ("asymptotic", "symmetric"):
        Sigma_mu = meta_covariance(cfg.meta)
        summary["set_size"] = {s: _mean_std([extras[x][s]["set_size"] for x in cfg.seeds])
                               for s in STRATEGIES}
        cov = {s: np.mean([extras[x][s]["covariance"] for x in cfg.seeds], axis=0)
               for s in ("naive", "matching")}
        summary["covariance_rel_err"] = {
            "naive_vs_pool_limit": relative_frobenius(
                cov["naive"], limit_covariance(cfg.sigma, Sigma_mu, "pool_limit")),
            "matching_vs_match_limit": relative_frobenius(
                cov["matching"], limit_covariance(cfg.sigma, Sigma_mu, "match_limit")),
        }
        summary["meta_covariance"] = Sigma_mu.tolist()
    if cfg.regime == "addition":
        agg = {}
        for s in cfg.seeds:
            for k, v in extras[s]["addition"].items():
                agg[k] = max(agg.get(k, 0), v) if k.startswith("max_") else agg.get(k, 0) + v
        summary["matching_steps"] = agg
    return summary


def run_regime(cfg: RunConfig) -> ResultTable:
    """Run every seed (serially or across ``cfg.workers`` processes)."""
    _validate(cfg)
    seeds = list(cfg.seeds)
    if cfg.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(seeds))) as pool:
            outs = list(pool.map(run_seed, [cfg] * len(seeds), seeds))
    else:
        outs = [run_seed(cfg, s) for s in seeds]
    rows = sorted((r for rs, _ in outs for r in rs), key=_sort_key)
    extras = {s: ex for s, (_, ex) in zip(seeds, outs)}
    return ResultTable(cfg.regime, cfg, rows, _summarize(cfg, rows, extras))


# ---------------------------------------------------------------------------
# emission


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(table: ResultTable, fmt: str) -> str:
    if not table.rows:
        raise ValueError("refusing to emit an empty result table")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([_cell(r[c]) for c in table.columns])
        return buf.getvalue()
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "regime": table.regime,
               "config": table.config.to_dict(), "columns": list(table.columns),
               "rows": table.rows, "summary": table.summary}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")


def config_echo(table: ResultTable) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "regime": table.regime,
           "config": table.config.to_dict(), "summary": table.summary}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit(table: ResultTable, fmt: str, path=None) -> str:
    """Render ``table``; when ``path`` is given also write it there.

    CSV output keeps the fixed header as its first line, so the resolved
    config and summary go to a sidecar ``<path>.config.json``.
    """
    text = render(table, fmt)
    if path is not None:
        path = Path(path)
        path.write_text(text)
        if fmt == "csv":
            Path(str(path) + ".config.json").write_text(config_echo(table))
    return text
