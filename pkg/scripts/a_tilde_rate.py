"""Elementwise error of A_tilde as the number of rows n grows, at fixed m.

    python scripts/a_tilde_rate.py --m 200 --seeds 20
"""
import argparse

import numpy as np

from tvkron.harness import Scenario
from tvkron.kernelsmooth import Kernel, bandwidth_rule
from tvkron.temporal import form_a_tilde


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--n", type=int, nargs="+", default=[25, 50, 100, 200])
    p.add_argument("--topology-a", default="ar1")
    args = p.parse_args()

    kernel = Kernel("epanechnikov", bandwidth_rule(args.m))
    prev = None
    print("n      median max|A~ - A|   shrink")
    for n in args.n:
        errs = []
        for seed in range(args.seeds):
            real = Scenario(n=n, b_edges=n, topology_a=args.topology_a).build(args.m, seed)
            a_tilde = form_a_tilde(real.sample(), real.model.a.trace, kernel)
            errs.append(np.max(np.abs(a_tilde - real.model.a.matrix)))
        med = float(np.median(errs))
        print(f"{n:<6d} {med:.4f}              {'' if prev is None else f'{prev / med:.3f}'}")
        prev = med


if __name__ == "__main__":
    main()
