"""Bias of the kernel-smoothed covariance versus bandwidth.

Exact expectations (no Monte Carlo): E[S(t0)] = sum_i w_i(t0) B(i/m) when the
trace correction uses the true tr(A) and A has a constant diagonal.

    python scripts/kernel_bias.py --m 4000
"""
import argparse

import numpy as np

from tvkron.kernelsmooth import Kernel, make_weights

CURVES = {
    "linear": lambda t: 1.0 + t,
    "quadratic": lambda t: 1.0 + t * t,
    "sine": lambda t: 1.0 + np.sin(3 * t),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--m", type=int, default=4000)
    p.add_argument("--kernel", default="epanechnikov")
    args = p.parse_args()
    t = np.arange(1, args.m + 1) / args.m
    hs = (0.4, 0.2, 0.1, 0.05)
    for t0 in (0.0, 0.5):
        print(f"\nt0 = {t0}")
        print("curve       " + "  ".join(f"h={h:<7g}" for h in hs) + "  shrink per halving")
        for name, f in CURVES.items():
            bias = [abs(np.dot(make_weights(Kernel(args.kernel, h), t0, args.m).weights, f(t)) - f(t0))
                    for h in hs]
            shrink = [b0 / b1 if b1 > 0 else float("inf") for b0, b1 in zip(bias, bias[1:])]
            print(f"{name:<11s} " + "  ".join(f"{b:.2e}" for b in bias) + "  "
                  + ", ".join(f"{s:.2f}" for s in shrink))


if __name__ == "__main__":
    main()
