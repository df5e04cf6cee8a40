import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from revhyp import social_choice as sc
from revhyp.measure import DomainError
from revhyp.mixing import NoBoundError

seeds = st.integers(0, 2 ** 32 - 1)


def _random_bool(n, rng, bias=0.5):
    return sc.CubeFunction(n, bias, rng.choice([-1.0, 1.0], size=2 ** n))


def _random_law(rng, mix=0.5):
    names = ["".join(r) for r in itertools.permutations("abc")]
    p = (1 - mix) * rng.dirichlet(np.ones(6)) + mix / 6
    return sc.RankingDistribution(3, dict(zip(names, p / p.sum())))


def _coef_oracle(f):
    # inner products with explicit basis functions
    pts = sc.cube_points(f.n)
    w = np.prod(np.where(pts > 0, f.bias, 1 - f.bias), axis=1)
    psi = (pts - (2 * f.bias - 1)) / (2 * np.sqrt(f.bias * (1 - f.bias)))
    out = []
    for S in range(2 ** f.n):
        chi = np.prod(np.where((S >> np.arange(f.n)) & 1, psi, 1.0), axis=1)
        out.append(float(w @ (f.table * chi)))
    return np.array(out)


@given(seeds, st.integers(1, 6), st.sampled_from([0.1, 0.5, 0.9]))
def test_coefficients_and_parseval(seed, n, p):
    rng = np.random.default_rng(seed)
    f = sc.CubeFunction(n, p, rng.uniform(-1, 1, 2 ** n))
    np.testing.assert_allclose(f.coefficients(), _coef_oracle(f), atol=1e-12)
    assert sc.parseval_gap(f) <= 1e-10


@given(seeds, st.integers(1, 6), st.sampled_from([0.1, 0.5, 0.9]))
def test_influence_sandwich(seed, n, p):
    rng = np.random.default_rng(seed)
    f = _random_bool(n, rng, p)
    for i in range(1, n + 1):
        val = sc.influence(f, i)
        I = sc.variance_influence(f, i)
        assert I - 1e-10 <= val <= I / (4 * p * (1 - p)) + 1e-10


def test_influence_examples():
    d = sc.CubeFunction.dictator(3)
    assert [sc.influence(d, i) for i in (1, 2, 3)] == [1.0, 0.0, 0.0]
    m = sc.CubeFunction.majority(3)
    assert all(math.isclose(sc.influence(m, i), 0.5) for i in (1, 2, 3))
    c = sc.CubeFunction(3, 0.3, np.ones(8))
    assert sc.influence(c, 2) == 0.0
    assert sc.low_degree_influence(m, 1, 1) == pytest.approx(0.25)


def test_table_bit_order():
    # coordinate 1 is the least significant bit
    f = sc.CubeFunction.dictator(2, i=1)
    assert f.table.tolist() == [-1, 1, -1, 1]


def test_ranking_law_alpha_roundtrip(rng):
    law = _random_law(rng)
    again = sc.RankingDistribution.from_dict(law.to_dict())
    assert again.alpha == law.alpha
    assert math.isclose(law.alpha, min(law.probs.values()))
    with pytest.raises(DomainError):
        sc.RankingDistribution(3, {"abc": 1.0})


@given(seeds)
def test_correlation_bound(seed):
    law = _random_law(np.random.default_rng(seed), mix=0.3)
    assert abs(law.correlation()) <= 1 - 4 * law.alpha + 1e-12


def test_px_examples(rng):
    one = sc.CubeFunction(2, 0.5, np.ones(4))
    law = _random_law(rng)
    assert sc.paradox_probability(one, one, one, law)["px"] == 1.0
    d = sc.CubeFunction.dictator(3)
    assert abs(sc.paradox_probability(d, d, d, law)["px"]) <= 1e-15
    m = sc.CubeFunction.majority(3)
    # Condorcet: 1/18 for three voters under the uniform law
    assert math.isclose(sc.paradox_probability(m, m, m, sc.RankingDistribution.uniform())["px"], 1 / 18)


@given(seeds, st.integers(1, 4))
def test_px_matches_bruteforce(seed, n):
    rng = np.random.default_rng(seed)
    law = _random_law(rng)
    fs = [_random_bool(n, rng) for _ in range(3)]
    a = sc.paradox_probability(*fs, law)["px"]
    b = sc.paradox_bruteforce(*fs, law)
    assert abs(a - b) <= 1e-12


def test_px_mc_interval(rng):
    law = _random_law(rng)
    fs = [_random_bool(5, rng) for _ in range(3)]
    ex = sc.paradox_probability(*fs, law)["px"]
    mc = sc.paradox_probability(*fs, law, mc=50_000, seed=1)
    assert mc["ci_lo"] <= ex <= mc["ci_hi"]


def _pivotal_oracle(f_ab, f_bc, law, i, j):
    n = f_ab.n
    names = law.rankings
    total = 0.0
    for prof in itertools.product(range(6), repeat=n):
        xab = [law.pair_sign(names[r], "a", "b") for r in prof]
        xbc = [law.pair_sign(names[r], "b", "c") for r in prof]

        def idx(x):
            return sum(1 << k for k, v in enumerate(x) if v > 0)

        ia, ib = idx(xab), idx(xbc)
        piv_a = f_ab.table[ia] != f_ab.table[ia ^ (1 << (i - 1))]
        piv_b = f_bc.table[ib] != f_bc.table[ib ^ (1 << (j - 1))]
        if piv_a and piv_b:
            total += math.prod(law.probs[names[r]] for r in prof)
    return total


@pytest.mark.parametrize("seed", range(5))
def test_pivotal_exact_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    law = _random_law(rng)
    fa, fb = _random_bool(3, rng), _random_bool(3, rng)
    r = sc.pivotal_intersection_exact(fa, fb, law, 1, 2)
    assert math.isclose(r["probability"], _pivotal_oracle(fa, fb, law, 1, 2), abs_tol=1e-12)
    assert r["holds"]


def test_pivotal_bound_values():
    assert sc.pivotal_intersection_bound(1.0, 0.3) == 1.0
    assert math.isclose(sc.pivotal_intersection_bound(0.1, 0.75), 1e-3)
    with pytest.raises(NoBoundError):
        sc.pivotal_intersection_bound(0.1, 0.0)


def test_delta_formula():
    eps, alpha, C = 0.1, 0.5, 1.0
    direct = -C * alpha ** -7 * 2 ** (alpha ** -2) * math.log(1 / eps) ** 2 / eps ** (2 + 1 / (2 * alpha ** 2))
    assert math.isclose(sc.log_delta_for_epsilon(eps, alpha, C), direct, rel_tol=1e-12)
    assert math.isclose(sc.delta_for_epsilon(eps, alpha, C), math.exp(direct), rel_tol=1e-9)
    # approaches 1 as eps -> 1
    assert sc.delta_for_epsilon(1 - 1e-9, 0.9, 1.0) > 0.999
    vals = [sc.log_delta_for_epsilon(e, 0.5, 1.0) for e in (0.5, 0.3, 0.1, 0.05)]
    assert vals == sorted(vals, reverse=True)
