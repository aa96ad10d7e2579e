"""Sweep the matching radius on the asymptotic regime.

For each tau, reports matching's mean final error and matched-set size at
the largest K next to naive pooling, plus the admission bands implied by
the mean matching error.

    python3 scripts/sweep_tau.py --taus 0.4 0.8 1.2 1.6 2.4 --metric euclidean
"""
import argparse

from poolmatch.harness import resolve_config, run_regime
from poolmatch.metrics import MetricSpec, tau_bands


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--taus", type=float, nargs="+", default=[0.4, 0.8, 1.2, 1.6, 2.0, 2.4, 3.2])
    ap.add_argument("--metric", choices=("euclidean", "geodesic_chord"), default="euclidean")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    metric = MetricSpec(args.metric)
    print(f"{'tau':>5} {'naive':>8} {'matching':>9} {'|S|':>6} {'exclusion':>10} {'inclusion':>10}")
    for tau in args.taus:
        cfg = resolve_config("asymptotic", {"tau": tau, "metric": metric.to_dict(),
                                            "seeds": list(range(args.seeds)),
                                            "workers": args.workers})
        s = run_regime(cfg).summary
        eps = s["final_epsilon"]["matching"]["mean"]
        band = tau_bands(metric, eps, tau)
        incl = "-" if band.inclusion_radius is None else f"{band.inclusion_radius:.3f}"
        print(f"{tau:5.2f} {s['final_epsilon']['naive']['mean']:8.4f} {eps:9.4f} "
              f"{s['set_size']['matching']['mean']:6.1f} {band.exclusion_radius:10.3f} {incl:>10}")


if __name__ == "__main__":
    main()
