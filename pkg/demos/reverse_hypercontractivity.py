"""
Reverse hypercontractivity: thresholds and a numerical search for violations.

For a pair of exponents q < p < 1 the inequality ||T_t f||_q >= ||f||_p
holds for t above a critical time.  We compare the closed-form threshold
families with the empirical critical time found by bisection.
"""

import math

from revhyp.hypercon import HyperQuery, critical_time, eta, theta, threshold, verify
from revhyp.measure import ProbabilitySpace
from revhyp.semigroup import simple_generator

PAIRS = [(0.5, 0.0), (0.9, 0.1), (0.0, -1.0), (-0.5, -2.0)]


if __name__ == "__main__":
    G = simple_generator(ProbabilitySpace.uniform(2))
    print(f"{'p':>5} {'q':>5} {'borell':>8} {'strong':>8} {'simple':>8} {'empirical':>10}")
    for p, q in PAIRS:
        fam = [threshold(f, p, q) for f in ("borell", "simple-strong", "simple")]
        t_star, _ = critical_time(G, "reverse", p, q, restarts=8)
        print(f"{p:5.2f} {q:5.2f} " + " ".join(f"{v:8.4f}" for v in fam) + f" {t_star:10.4f}")

    # the uniform coin is the Gaussian-like extreme: its critical time matches the sharpest family
    print(f"\nhalf log 2 = {math.log(2) / 2:.4f}")

    # below the threshold a witness exists
    v = verify(G, HyperQuery("reverse", 0.5, 0.0, 0.1))
    print(f"t = 0.1: {v.status}, deficit {v.deficit:.3e}, witness {v.witness.values}")

    print(f"\ntheta(-1) = {theta(-1.0):.12f} (19/27 = {19 / 27:.12f})")
    for q in (-1e-1, -1e-2, -1e-3):
        print(f"eta({q:g}) = {eta(q):.10e}   -q/2 - q^2/4 = {-q / 2 - q * q / 4:.10e}")
