"""
Non-interactive correlation distillation with m-sided dice.

k players each see a noisy copy of a uniform string in {0..m-1}^n and
output a face.  Agreement probability decays polynomially in k; we
estimate it for plurality and fit the log-log slope.
"""

from revhyp import nicd

if __name__ == "__main__":
    cfg = nicd.NicdConfig(m=2, n=1, k=2, rho=0.5)
    print("dictator, two players, rho=0.5:",
          nicd.agreement_probability(cfg, nicd.Protocol(2, 1, "dictator"))["estimate"])

    cfg = nicd.NicdConfig(m=3, n=5, k=3, rho=0.6)
    P = nicd.Protocol(3, 5, "plurality")
    print(f"plurality m=3 n=5 k=3: exact {nicd.exact_agreement(cfg, P):.6f}, "
          f"Holder bound {nicd.holder_bound(cfg, P):.6f}")

    sweep = nicd.plurality_lower_sweep(3, 0.8, [2, 4, 8, 16, 32, 64], n=101, trials=20_000, seed=0)
    print("\n  k   estimate   99% interval          envelope")
    for r in sweep["rows"]:
        print(f"{r['k']:3d}   {r['estimate']:.4f}   [{r['ci_lo']:.4f}, {r['ci_hi']:.4f}]   {r['envelope']:.4f}")
    print(f"log-log slope {sweep['slope']:.3f}, admissible exponent {nicd.admissible_beta(0.8):.3f}")
