import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bifurcate import _core
from bifurcate.estimate import (Kernel1D, PreconditionError, bandwidth, dev_ker_bound,
                                expected_denominator, expected_numerator, nw_fit,
                                transition_density_fit)
from bifurcate.kernel import Drift, InitialLaw, NBARModel, Noise, lineage_kernel, nbar_kernel
from bifurcate.simulate import TreeSample, simulate_tree
from oracles import epanechnikov, nw_naive

SHAPES = ["epanechnikov", "triangular", "quartic"]


def tree(values):
    return TreeSample(int(math.log2(len(values) + 1)) - 1, np.array([np.nan] + list(values)), (0, 0))


@pytest.mark.parametrize("shape", SHAPES)
def test_kernel_properties(shape):
    k = Kernel1D(shape)
    assert k.integral() == pytest.approx(1.0, abs=1e-9)
    u = np.linspace(-1.5, 1.5, 300_001)
    v = k(u)
    assert np.all(v >= 0)
    assert np.all(v[np.abs(u) > k.R] == 0)
    assert v.max() == pytest.approx(k.supK, rel=1e-9)
    slopes = np.abs(np.diff(v) / np.diff(u))
    assert slopes.max() <= k.lipK * (1 + 1e-6)
    assert slopes.max() == pytest.approx(k.lipK, rel=1e-3)


def test_default_kernel_constants():
    k = Kernel1D()
    assert (k.shape, k.R, k.lipK, k.supK) == ("epanechnikov", 1.0, 1.5, 0.75)
    with pytest.raises(ValueError):
        Kernel1D("gaussian")


def test_bandwidth_definition():
    assert bandwidth(10, 0.2) == 2047 ** -0.2
    for a in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            bandwidth(5, a)


def test_constant_responses():
    m = NBARModel(Drift.linear(0.0, 3.0), Drift.linear(0.0, -1.0), Noise("gaussian", 0.0),
                  InitialLaw("gaussian", 0.0, 1.0))
    s = simulate_tree(nbar_kernel(m), 6, 0)
    fit = nw_fit(s, Kernel1D(), 0.2, np.linspace(-2, 4, 25))
    assert np.allclose(fit.f0hat[fit.defined], 3.0, atol=1e-14)
    assert np.allclose(fit.f1hat[fit.defined], -1.0, atol=1e-14)


def test_single_pair():
    fit = nw_fit(tree([0.0, 5.0, -2.0]), Kernel1D(), 0.2, [0.0, 10.0])
    assert fit.f0hat[0] == 5.0 and fit.f1hat[0] == -2.0
    assert fit.count == 1
    assert not fit.defined[1] and math.isnan(fit.f0hat[1])


def test_undefined_where_no_design_point():
    fit = nw_fit(tree([0.0, 1.0, 1.0]), Kernel1D(), 0.5, [0.0, 3.0])
    assert fit.defined.tolist() == [True, False]
    assert fit.Dtilde[1] == 0.0


def test_zero_noise_lipschitz_bound(zero_noise_bar):
    s = simulate_tree(nbar_kernel(zero_noise_bar), 12, 0)
    k = Kernel1D()
    grid = np.linspace(0, 2, 41)
    fit = nw_fit(s, k, 0.2, grid, model=zero_noise_bar)
    err = np.abs(fit.f0hat - zero_noise_bar.f0(grid))[fit.defined]
    assert fit.defined.any()
    assert err.max() <= 0.4 * k.R * fit.h + 1e-12


def test_decomposition_identity(linear_bar, zero_noise_bar):
    for model in (zero_noise_bar, linear_bar):
        s = simulate_tree(nbar_kernel(model), 10, 4)
        grid = np.linspace(-1, 3, 41)
        for target, f in (("f0", model.f0), ("f1", model.f1)):
            fit = nw_fit(s, Kernel1D(), 0.2, grid, target=target, model=model)
            est = fit.f0hat if target == "f0" else fit.f1hat
            d = fit.defined
            lhs = est[d] - f(grid[d])
            rhs = (fit.Ntilde[d] + fit.Mtilde[d]) / fit.Dtilde[d]
            np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10)
        if model is zero_noise_bar:
            assert np.all(fit.Mtilde == 0)


def test_matches_naive_loop(linear_bar):
    s = simulate_tree(nbar_kernel(linear_bar), 7, 2)
    grid = np.linspace(-0.5, 2.5, 13)
    fit = nw_fit(s, Kernel1D(), 0.2, grid)
    X = s.values[1:1 << 7]
    Y0 = s.values[2:1 << 8:2]
    for j, x in enumerate(grid):
        ref = nw_naive(X, Y0, x, fit.h, epanechnikov)
        if math.isnan(ref):
            assert not fit.defined[j]
        else:
            assert fit.f0hat[j] == pytest.approx(ref, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(-50, 50))
def test_translation_equivariance(seed, c):
    # every node is both a design point and a response, so translate the whole tree and the grid
    base = simulate_tree(nbar_kernel(NBARModel(Drift.linear(0.5, 0.2), Drift.linear(0.2, 0.1),
                                               Noise("gaussian", 1.0))), 6, seed)
    shifted = TreeSample(6, base.values + c, base.seed)
    grid = np.linspace(-2, 2, 9)
    a = nw_fit(base, Kernel1D(), 0.2, grid)
    b = nw_fit(shifted, Kernel1D(), 0.2, grid + c)
    assert np.array_equal(a.defined, b.defined)
    np.testing.assert_allclose(b.f0hat[a.defined], a.f0hat[a.defined] + c, rtol=1e-9, atol=1e-8)
    np.testing.assert_allclose(b.f1hat[a.defined], a.f1hat[a.defined] + c, rtol=1e-9, atol=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.floats(-50, 50), st.sampled_from([0, 1, 2]))
def test_response_shift_equivariance_of_kernel_sums(seed, c, code):
    # with the design held fixed, shifting every response shifts the ratio by c
    rng = np.random.default_rng(seed)
    X, Y0, Y1 = rng.normal(size=(3, 200))
    grid = np.linspace(-2, 2, 9)
    D, S0, S1 = _core.nw_sums(X, Y0, Y1, grid, 0.5, code)
    D2, T0, _ = _core.nw_sums(X, Y0 + c, Y1, grid, 0.5, code)
    d = D > 0
    assert np.array_equal(D, D2)
    np.testing.assert_allclose(T0[d] / D[d], S0[d] / D[d] + c, rtol=1e-9, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(SHAPES), st.floats(0.05, 0.9))
def test_convex_combination(seed, shape, alpha):
    s = simulate_tree(nbar_kernel(NBARModel(Drift.tanh(0.8), Drift.linear(0.3), Noise("uniform", 1.0))),
                      7, seed)
    fit = nw_fit(s, Kernel1D(shape), alpha, np.linspace(-2, 2, 17))
    Y0 = s.values[2::2]
    d = fit.defined
    assert np.all(fit.f0hat[d] >= Y0.min() - 1e-12) and np.all(fit.f0hat[d] <= Y0.max() + 1e-12)


def test_transition_single_triple():
    k = Kernel1D()
    fit = transition_density_fit(tree([0.0, 1.0, 2.0]), k, 0.2, [[0.0, 1.0, 2.0]])
    h = 3 ** -0.2
    assert fit.fhat[0] == pytest.approx(0.75**3 / (1 * h), rel=1e-14)
    assert fit.fhat_h3[0] == pytest.approx(0.75**3 / (1 * h**3), rel=1e-14)
    assert fit.Phat[0] == pytest.approx(0.75**2, rel=1e-14)
    assert fit.Phat_h3[0] == pytest.approx(0.75**2 / h**2, rel=1e-14)


def test_transition_nonnegative_and_on_curve(zero_noise_bar):
    s = simulate_tree(nbar_kernel(zero_noise_bar), 12, 0)
    xs = np.linspace(0.2, 1.8, 9)
    on = np.column_stack([xs, zero_noise_bar.f0(xs), zero_noise_bar.f1(xs)])
    off = on + np.array([0.0, 1.0, -1.0])
    k = Kernel1D()
    fon = transition_density_fit(s, k, 0.2, on)
    foff = transition_density_fit(s, k, 0.2, off)
    assert np.all(fon.fhat >= 0) and np.all(foff.fhat >= 0)
    assert np.all(foff.fhat == 0)
    assert np.all(fon.fhat[fon.defined] > 0)
    with pytest.raises(ValueError):
        transition_density_fit(s, k, 0.2, [[0.0, 1.0]])


@pytest.fixture
def bar_expectations(linear_bar):
    k = Kernel1D()
    ED = expected_denominator(linear_bar, k, 0.2, 10, 1.15, replicates=40)
    EN = expected_numerator(linear_bar, k, 0.2, 10, 1.15, replicates=40)
    return k, ED.mean, EN


def test_dev_ker_bound_monotone_and_bounded(linear_bar, bar_expectations):
    k, ED, EN = bar_expectations
    vals = [dev_ker_bound(linear_bar, k, 0.2, 10, r, ED, EN).value for r in (0.5, 1.0, 2.0)]
    assert all(math.isfinite(v) for v in vals)
    assert vals[0] > vals[1] > vals[2]
    for r in np.geomspace(0.01, 1e6, 40):
        b = dev_ker_bound(linear_bar, k, 0.2, 10, r, ED, EN)
        assert 0 <= b.value <= 4
        assert b.tag == "constants assembled from proof"


def test_dev_ker_bound_large_level_limit(linear_bar, bar_expectations):
    k, ED, EN = bar_expectations
    big = dev_ker_bound(linear_bar, k, 0.2, 10, 1e8, ED, EN)
    assert big.noise_term == 0.0
    # the drift exponent tends to C' E(D)^2 |T| h^4 / C'' as the level grows
    limit = 2 * math.exp(-big.C_prime * ED**2 * big.tree_size * big.h**4 / big.C_second)
    assert big.drift_term == pytest.approx(limit, rel=1e-6)


def test_dev_ker_bound_preconditions(linear_bar):
    k = Kernel1D()
    with pytest.raises(PreconditionError, match="alpha"):
        dev_ker_bound(linear_bar, k, 0.3, 10, 1.0, 0.3, 0.0)
    with pytest.raises(PreconditionError, match="level"):
        dev_ker_bound(linear_bar, k, 0.2, 10, 0.1, 0.3, 0.5)
    steep = NBARModel(Drift.linear(0.8), Drift.linear(0.8))
    with pytest.raises(PreconditionError, match="sqrt") as exc:
        dev_ker_bound(steep, k, 0.3, 10, 1.0, 0.3, 0.0)
    assert "alpha" in str(exc.value)


def test_expected_denominator_zero_away_from_mass(zero_noise_bar):
    est = expected_denominator(zero_noise_bar, Kernel1D(), 0.2, 8, 50.0, replicates=5)
    assert est.mean == 0.0 and est.ci_hi == 0.0


def test_expected_denominator_deterministic(linear_bar):
    a = expected_denominator(linear_bar, Kernel1D(), 0.2, 6, 1.0, replicates=10, master=3, threads=1)
    b = expected_denominator(linear_bar, Kernel1D(), 0.2, 6, 1.0, replicates=10, master=3, threads=4)
    assert a.mean == b.mean and np.array_equal(a.values, b.values)


def test_expected_denominator_near_invariant_density():
    # f0 = f1 = x/2, N(0,1) noise: the invariant law is N(0, 4/3); start from it
    model = NBARModel(Drift.linear(0.5), Drift.linear(0.5), Noise("gaussian", 1.0),
                      InitialLaw("gaussian", 0.0, math.sqrt(4 / 3)))
    x = 0.3
    est = expected_denominator(model, Kernel1D(), 0.2, 12, x, replicates=30)
    # histogram density of a long lineage chain as the oracle
    states = lineage_kernel(nbar_kernel(model)).run(_core.stream_key(99, 0), np.zeros(200), 2200, 200)
    width = 0.1
    chain_density = np.mean(np.abs(states - x) < width / 2) / width
    assert est.mean == pytest.approx(chain_density, rel=0.05)
