"""
Log-Sobolev constants across the exponent line.

Estimates the optimal p-logSob constant of a few small chains on a grid of
exponents, compares with the Poincare constant, and shows the pointwise
ordering of the self-dual ratios that makes the constants monotone in p.
"""

import numpy as np

from revhyp.logsob import estimate_constant, monotonicity_audit, poincare_constant
from revhyp.measure import ProbabilitySpace
from revhyp.semigroup import random_generator, simple_generator, spectral_gap


def constants_table(G, grid, name):
    print(f"\n{name}: gap = {spectral_gap(G):.4f}, 2/gap = {2 * poincare_constant(G):.4f}")
    for p in grid:
        est = estimate_constant(G, p, seed=1)
        print(f"  p = {p:5.2f}   C_hat = {est.c_hat:.5f}   ({est.method})")


if __name__ == "__main__":
    grid = [0.0, 0.5, 1.0, 1.5, 2.0]

    # uniform two-point space: every constant equals 2
    constants_table(simple_generator(ProbabilitySpace.uniform(2)), grid, "uniform coin")

    # biased coin, the constants spread out
    constants_table(simple_generator(ProbabilitySpace.two_point(0.1)), grid, "coin with bias 0.1")

    G = random_generator(5, np.random.default_rng(7), density=0.6)
    constants_table(G, grid, "random reversible chain on 5 states")

    audit = monotonicity_audit(G, grid=grid, seed=1)
    print("\naudit (pointwise ratio ordering and monotone constants):")
    for k, v in audit.items():
        if not isinstance(v, (list, dict)):
            print(f"  {k}: {v}")
