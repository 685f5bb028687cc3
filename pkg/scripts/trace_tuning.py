"""How far the eigenvalue-floor heuristic for tr(A) lands from the truth.

    python scripts/trace_tuning.py --n 100 --m 400 --seeds 20
"""
import argparse
import warnings

import numpy as np

from tvkron.harness import Scenario
from tvkron.temporal import tune_trace_a


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=400)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--no-balance", action="store_true")
    args = p.parse_args()

    print("topology     mean ratio   predicted 1 + tau_B/tau_A")
    for topology in ("ar1", "ma", "star_block"):
        ratios, predicted = [], []
        for seed in range(args.seeds):
            real = Scenario(n=args.n, topology_a=topology, a_block_size=10,
                            balance_b=not args.no_balance).build(args.m, seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est = tune_trace_a(real.sample())
            tau_a = real.model.a.trace / args.m
            tau_b = np.mean(np.trace(real.model.b.matrices, axis1=1, axis2=2)) / args.n
            ratios.append(est / real.model.a.trace)
            predicted.append(1 + tau_b / tau_a)
        print(f"{topology:<12s} {np.mean(ratios):.3f}        {np.mean(predicted):.3f}")


if __name__ == "__main__":
    main()
