"""
Classical chains: spectral gaps and estimated 1-logSob constants.

Builds the shuffles, the urn model, an Ising box and the truncated queue,
then prints the gap, the Poincare lower bound 2/gap on the 1-logSob
constant, the numerical estimate and the literature bounds.
"""

from revhyp.chains import ChainSpec, build, known_constant_bounds
from revhyp.logsob import estimate_constant
from revhyp.semigroup import spectral_gap

SPECS = [
    ChainSpec("random-transposition", {"n": 4}),
    ChainSpec("top-to-random", {"n": 4}),
    ChainSpec("bernoulli-laplace", {"n": 5, "r": 2}),
    ChainSpec("product-walk", {"n": 3, "weights": [1, 1]}),
    ChainSpec("spanning-tree-walk", {"vertices": 4, "edges": [[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]]}),
    ChainSpec("glauber-ising", {"shape": [2, 3], "beta": 0.3, "h": 0.0, "rates": "heat-bath"}),
    ChainSpec("qq-infinity-truncated", {"lam": 2.0, "N": 60}),
]


if __name__ == "__main__":
    for spec in SPECS:
        G = build(spec)
        gap = spectral_gap(G)
        line = f"{spec.kind:22s} states={G.size:4d} gap={gap:.4f} 2/gap={2 / gap:8.4f}"
        if G.size <= 120:
            line += f" C1_hat={estimate_constant(G, 1.0, seed=0).c_hat:8.4f}"
        b = known_constant_bounds(spec)
        if b and b["upper"] is not None:
            line += f"  [{b['p']}-logSob bounds: lower={b['lower']}, upper={b['upper']:g}]"
        print(line)
