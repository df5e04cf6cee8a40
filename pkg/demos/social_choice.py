"""
Influences, the paradox probability and pivotal voters.

Majority on three voters under uniform rankings gives the classical
Condorcet probability 1/18; a dictator never produces a cycle.
"""

from revhyp import social_choice as sc

if __name__ == "__main__":
    law = sc.RankingDistribution.uniform()
    for n in (3, 5, 7):
        maj = sc.CubeFunction.majority(n)
        px = sc.paradox_probability(maj, maj, maj, law)["px"]
        print(f"majority n={n}: influence of voter 1 = {sc.influence(maj, 1):.4f}, PX = {px:.5f}")
    print(f"1/18 = {1 / 18:.5f}")

    d = sc.CubeFunction.dictator(5)
    print(f"dictator: PX = {sc.paradox_probability(d, d, d, law)['px']:.2e}")

    maj = sc.CubeFunction.majority(5)
    mc = sc.paradox_probability(maj, maj, maj, law, mc=200_000, seed=1)
    print(f"majority n=5 by sampling: {mc['px']:.5f} in [{mc['ci_lo']:.5f}, {mc['ci_hi']:.5f}]")

    r = sc.pivotal_intersection_exact(maj, maj, law, 1, 2)
    print(f"\npivotal voters 1 and 2: P = {r['probability']:.4f}, eps = {r['eps']:.4f}, "
          f"alpha = {r['alpha']:.4f}, bound = {r['bound']:.3e}")

    for p in (0.1, 0.5, 0.9):
        f = sc.CubeFunction.majority(5, bias=p)
        print(f"bias {p}: influence {sc.influence(f, 1):.4f}, Fourier weight {sc.variance_influence(f, 1):.4f}")
