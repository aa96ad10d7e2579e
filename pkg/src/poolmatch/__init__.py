"""Pooling heterogeneous data domains: naive pooling, uniform subsampling
and centroid matching, plus hypersphere and flow-transport tools."""
from .evaluation import DaInput, Trajectory, covariance_limit_check, da_score, error_norm
from .flows import FlowMap, build_flow, random_flow, verify_transport
from .harness import ConfigError, ResultTable, RunConfig, emit, resolve_config, run_regime
from .meta import Domain, MetaSpec, make_domains, meta_covariance, sample_domain_means
from .metrics import MetricSpec, metric_eval, tau_bands
from .pooling import (MatchState, PooledResult, add_domain_step, match_domains,
                      matched_set_report, naive_pool, uniform_subsample)
from .sphere import (ModeBank, SphereState, adaptive_assign, ema_centroid_update,
                     geodesic_distance, multimodal_assign, vaca_reweight)

__all__ = [
    "DaInput",
    "Trajectory",
    "covariance_limit_check",
    "da_score",
    "error_norm",
    "FlowMap",
    "build_flow",
    "random_flow",
    "verify_transport",
    "ConfigError",
    "ResultTable",
    "RunConfig",
    "emit",
    "resolve_config",
    "run_regime",
    "Domain",
    "MetaSpec",
    "make_domains",
    "meta_covariance",
    "sample_domain_means",
    "MetricSpec",
    "metric_eval",
    "tau_bands",
    "MatchState",
    "PooledResult",
    "add_domain_step",
    "match_domains",
    "matched_set_report",
    "naive_pool",
    "uniform_subsample",
    "ModeBank",
    "SphereState",
    "adaptive_assign",
    "ema_centroid_update",
    "geodesic_distance",
    "multimodal_assign",
    "vaca_reweight",
]

__version__ = "0.1.0"
