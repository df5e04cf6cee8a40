import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from revhyp.measure import ProbabilitySpace
from revhyp.semigroup import (DecompositionError, Generator, GeneratorValidationError, MarkovKernel,
                              ReducibleWarning, TensorGenerator, dirichlet_form, heat_operator,
                              kernel_alpha, kernel_decompose, random_generator, recompose,
                              simple_generator, spectral_gap, validate_generator)

seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds, st.integers(2, 7), st.floats(0.0, 5.0))
def test_heat_matches_expm(seed, n, t):
    rng = np.random.default_rng(seed)
    G = random_generator(n, rng, density=0.5)
    v = rng.normal(size=n)
    np.testing.assert_allclose(G.heat(t, v), expm(-t * G.L) @ v, atol=1e-9)


@given(seeds, st.integers(2, 7))
def test_generator_axioms(seed, n):
    rng = np.random.default_rng(seed)
    G = random_generator(n, rng)
    mu = G.space.mu
    np.testing.assert_allclose(G.L.sum(axis=1), 0, atol=1e-10)
    flux = mu[:, None] * G.L
    np.testing.assert_allclose(flux, flux.T, atol=1e-10)
    f, g = rng.normal(size=n), rng.normal(size=n)
    assert math.isclose(G.dirichlet(f, g), G.dirichlet(g, f), rel_tol=1e-9, abs_tol=1e-9)
    assert G.dirichlet(f, f) >= -1e-12
    assert math.isclose(dirichlet_form(G, f, g), dirichlet_form(G, f, g, route="pairs"),
                        rel_tol=1e-9, abs_tol=1e-9)


@given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_semigroup_property_and_markov(seed, s, t):
    rng = np.random.default_rng(seed)
    G = random_generator(4, rng)
    v = rng.normal(size=4)
    np.testing.assert_allclose(G.heat(s + t, v), G.heat(s, G.heat(t, v)), atol=1e-9)
    P = G.heat_matrix(t)
    assert P.min() >= -1e-12
    np.testing.assert_allclose(P.sum(axis=1), 1, atol=1e-10)
    # stationarity
    np.testing.assert_allclose(G.space.mu @ P, G.space.mu, atol=1e-10)


def test_validation_lists_violations():
    sp = ProbabilitySpace.uniform(2)
    with pytest.raises(GeneratorValidationError):
        validate_generator(np.array([[1.0, 0.0], [0.0, 0.0]]), sp)
    with pytest.raises(GeneratorValidationError):
        validate_generator(np.array([[1.0, -1.0], [-2.0, 2.0]]), sp)


def test_simple_generator_gap_and_heat():
    sp = ProbabilitySpace.two_point(0.2)
    G = simple_generator(sp)
    assert math.isclose(spectral_gap(G), 1.0)
    f = np.array([1.0, 3.0])
    expected = math.exp(-0.7) * f + (1 - math.exp(-0.7)) * (sp.mu @ f)
    np.testing.assert_allclose(heat_operator(G, 0.7, f), expected)


def test_reducible_warns():
    sp = ProbabilitySpace.uniform(2)
    G = Generator(sp, np.zeros((2, 2)))
    with pytest.warns(ReducibleWarning):
        assert spectral_gap(G) == 0.0


def test_tensor_generator_matches_materialized(rng):
    A = random_generator(2, rng)
    B = random_generator(3, rng)
    T = TensorGenerator([A, B], rates=[0.5, 2.0])
    M = T.materialize()
    v = rng.normal(size=6)
    np.testing.assert_allclose(T.heat(1.3, v), M.heat(1.3, v), atol=1e-10)
    np.testing.assert_allclose(T.apply(v), M.L @ v, atol=1e-10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert math.isclose(spectral_gap(T), spectral_gap(M), rel_tol=1e-9)


def test_generator_roundtrip():
    G = random_generator(4, np.random.default_rng(0))
    H = Generator.from_dict(G.to_dict())
    assert np.array_equal(G.L, H.L)
    assert np.array_equal(G.space.mu, H.space.mu)


@given(seeds, st.floats(0.05, 0.95))
def test_kernel_decomposition_roundtrip(seed, a):
    rng = np.random.default_rng(seed)
    sp = ProbabilitySpace.from_weights(rng.dirichlet(np.ones(3)) + 0.05)
    R = rng.dirichlet(np.ones(3), size=3)
    K = MarkovKernel(sp, (1 - a) * R + a * np.tile(sp.mu, (3, 1)))
    alpha, astar = kernel_alpha(K)
    assert alpha >= a * (1 - 1e-9) * min(1.0, float(np.min(sp.mu / K.nu)))
    S, astar2 = kernel_decompose(K)
    assert astar2 == astar
    assert S.K.min() >= 0
    np.testing.assert_allclose(recompose(S, astar), K.K, atol=1e-10)


def test_kernel_alpha_zero_rejected():
    sp = ProbabilitySpace.uniform(2)
    K = MarkovKernel(sp, [[0.0, 1.0], [0.5, 0.5]])
    assert kernel_alpha(K)[0] == 0.0
    with pytest.raises(DecompositionError):
        kernel_decompose(K)
