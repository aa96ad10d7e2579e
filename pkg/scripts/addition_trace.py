"""Per-step error trace of the domain-addition regime for one seed.

Prints epsilon after each added domain for every strategy, marks outlier
domains and matching rejections, and scores the last five matching steps
(converted to a 0-100 "performance" 100 * (1 - eps)) with the DA score.

    python3 scripts/addition_trace.py --seed 3 --tau 1.1
"""
import argparse

from poolmatch.evaluation import da_score
from poolmatch.harness import resolve_config, run_regime
from poolmatch.meta import outlier_indices


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tau", type=float, default=1.1)
    ap.add_argument("--sigma", type=float, default=0.8)
    ap.add_argument("--refine", action="store_true", help="rerun the fixed point on admission")
    args = ap.parse_args()

    cfg = resolve_config("addition", {"seeds": [args.seed], "tau": args.tau, "sigma": args.sigma,
                                      "refine": args.refine})
    table = run_regime(cfg)
    outliers = set(outlier_indices(cfg.meta.every, cfg.K))
    by = {s: {r["K"]: r for r in table.select(strategy=s)} for s in ("naive", "subsample", "matching")}
    print(f"{'K':>3} {'out':>3} {'naive':>8} {'subsample':>10} {'matching':>9}  admitted  |S|")
    for K in range(cfg.K_start, cfg.K + 1):
        m = by["matching"][K]
        flag = "*" if K in outliers else ""
        adm = "" if m["admitted"] is None else ("yes" if m["admitted"] else "no")
        print(f"{K:>3} {flag:>3} {by['naive'][K]['epsilon']:8.4f} {by['subsample'][K]['epsilon']:10.4f} "
              f"{m['epsilon']:9.4f}  {adm:>8}  {m['set_size']:>3}")
    for s in by:
        perf = [100 * (1 - by[s][K]["epsilon"]) for K in range(cfg.K - 4, cfg.K + 1)]
        print(f"DA score over the last five steps, {s}: {da_score(perf):.3f}")


if __name__ == "__main__":
    main()
