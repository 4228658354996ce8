"""Sweep the single-outlier lower bound over M for the three binary pairs.

Writes CSV to stdout: pair index, M, lower bound, and the limiting value
2B.  Feed the output to any plotting tool to see the three curves climb
toward their horizontal asymptotes.
"""
import argparse

import numpy as np

from outlier_testing.exponents import thm_single_lower_bound
from outlier_testing.simplex import Pmf, bhattacharyya

PAIRS = [
    (Pmf(np.array([0.3, 0.7])), Pmf(np.array([0.7, 0.3]))),
    (Pmf(np.array([0.35, 0.65])), Pmf(np.array([0.65, 0.35]))),
    (Pmf(np.array([0.4, 0.6])), Pmf(np.array([0.6, 0.4]))),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--m-min", type=int, default=3)
    parser.add_argument("--m-max", type=int, default=200)
    args = parser.parse_args()

    print("pair,m,lower_bound,two_b")
    for idx, (mu, pi) in enumerate(PAIRS, start=1):
        two_b = 2 * bhattacharyya(mu, pi)
        for m in range(args.m_min, args.m_max + 1):
            val = thm_single_lower_bound(mu, pi, m).value
            print(f"{idx},{m},{val:.12g},{two_b:.12g}")


if __name__ == "__main__":
    main()
