import math

import numpy as np
import pytest
from scipy import stats

from bifurcate import _core
from bifurcate.kernel import (Drift, InitialLaw, NBARModel, Noise, RegularityMeta,
                              empirical_contraction, lineage_kernel, nbar_kernel)
from bifurcate.metrics import wasserstein_p


def uniforms(n, seed=1, coord=0):
    key = _core.stream_key(seed, 0)
    return _core.counter_uniforms(key, (np.arange(n, dtype=np.uint64) << np.uint64(2)) | np.uint64(coord))


def test_deterministic_sample(zero_noise_bar):
    k = nbar_kernel(zero_noise_bar)
    y, z = k.sample(np.array([2.0]), uniforms(1), uniforms(1, coord=1))
    assert y[0] == pytest.approx(1.8, abs=1e-15)
    assert z[0] == pytest.approx(1.1, abs=1e-15)


def test_zero_drift_gives_independent_standard_normals():
    k = nbar_kernel(NBARModel(Drift.linear(0, 0), Drift.linear(0, 0), Noise("gaussian", 1.0)))
    n = 50_000
    y, z = k.sample(np.full(n, 3.0), uniforms(n, 2), uniforms(n, 2, coord=1))
    assert stats.kstest(y, "norm").pvalue > 1e-3
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(np.corrcoef(y, z)[0, 1]) < 4 / math.sqrt(n)


def test_marginal_mean_law_of_large_numbers(linear_bar):
    k = nbar_kernel(linear_bar)
    n = 100_000
    x = 2.5
    draws = k.marginal(0, np.full(n, x), uniforms(n, 3))
    assert abs(draws.mean() - (0.4 * x + 1)) <= 3 / math.sqrt(n)


def test_marginal_matches_sample_coordinate(linear_bar):
    k = nbar_kernel(linear_bar)
    n = 20_000
    y, _ = k.sample(np.full(n, 1.0), uniforms(n, 4), uniforms(n, 4, coord=1))
    m0 = k.marginal(0, np.full(n, 1.0), uniforms(n, 5))
    assert wasserstein_p(y, m0, 1) < 0.05


def test_meta_from_model(linear_bar):
    meta = linear_bar.meta
    assert (meta.r0, meta.r1, meta.q, meta.C, meta.C_eps) == (0.4, 0.3, 0.7, 1.0, 1.0)


def test_meta_takes_max_of_noise_and_initial_constants():
    m = NBARModel(Drift.linear(0.1), Drift.linear(0.1), Noise("uniform", 0.5),
                  InitialLaw("gaussian", 0.0, 2.0))
    assert m.meta.C == 4.0 and m.meta.C_eps == 0.25


def test_regularity_meta_rejects_marginal_above_q():
    with pytest.raises(ValueError):
        RegularityMeta(0.5, 0.1, 0.4, 1.0)
    with pytest.raises(ValueError):
        RegularityMeta(0.1, 0.1, 0.4, math.inf)


def test_unknown_noise_family_rejected():
    with pytest.raises(ValueError, match="T1 constant"):
        Noise("cauchy", 1.0)


@pytest.mark.parametrize("noise", [Noise("gaussian", 1.3), Noise("uniform", 0.7),
                                   Noise("truncated_gaussian", 1.0, 1.5)])
def test_noise_is_centered_with_declared_variance(noise):
    u = (np.arange(200_000) + 0.5) / 200_000  # stratified: deterministic quadrature
    e = noise.from_uniform(u)
    assert abs(e.mean()) < 1e-12
    assert e.var() == pytest.approx(noise.variance, rel=1e-3)


def test_truncated_noise_stays_inside():
    e = Noise("truncated_gaussian", 2.0, 1.5).from_uniform(uniforms(10_000, 6))
    assert np.all(np.abs(e) <= 3.0)


def test_lineage_coin_is_fair(linear_bar):
    n = 100_000
    coins = uniforms(n, 7, coord=_core.COORD_COIN) < 0.5
    assert 0.49 <= coins.mean() <= 0.51


def test_lineage_with_equal_branches_matches_p0():
    m = NBARModel(Drift.linear(0.5, 1.0), Drift.linear(0.5, 1.0), Noise("gaussian", 1.0))
    k = nbar_kernel(m)
    n = 20_000
    q = lineage_kernel(k).run(_core.stream_key(8, 0), np.full(n, 2.0), 1, 1)[0]
    p0 = k.marginal(0, np.full(n, 2.0), uniforms(n, 9))
    assert wasserstein_p(q, p0, 1) < 0.05


def test_lineage_chain_mean_converges_to_fixed_point(linear_bar):
    # 1000 chains x 1000 post-burn-in steps = 10^6 transitions
    states = lineage_kernel(nbar_kernel(linear_bar)).run(_core.stream_key(10, 0), np.zeros(1000), 1100, 101)
    chain_means = states.mean(axis=0)
    se = chain_means.std(ddof=1) / math.sqrt(chain_means.size)
    assert abs(chain_means.mean() - 15 / 13) < 4 * se + 1e-3


def test_lineage_mean_stabilizes_across_doubling_horizons():
    m = NBARModel(Drift.tanh(0.6, 0.2), Drift.tanh(0.6, 0.2), Noise("uniform", 1.0))
    sampler = lineage_kernel(nbar_kernel(m))
    means = []
    for steps in (200, 400, 800):
        s = sampler.run(_core.stream_key(11, steps), np.zeros(500), steps, steps // 2)
        means.append(s.mean())
    assert abs(means[1] - means[0]) < 0.02 and abs(means[2] - means[1]) < 0.02


def test_generic_lineage_path_matches_compiled_counters(linear_bar):
    fast = lineage_kernel(nbar_kernel(linear_bar))
    custom = NBARModel(Drift.custom(lambda x: 0.4 * x + 1.0, 0.4),
                       Drift.custom(lambda x: 0.3 * x + 0.5, 0.3), Noise("gaussian", 1.0))
    slow = lineage_kernel(nbar_kernel(custom))
    key = _core.stream_key(12, 0)
    a = fast.run(key, np.linspace(-1, 1, 17), 30, 10)
    b = slow.run(key, np.linspace(-1, 1, 17), 30, 10)
    np.testing.assert_array_equal(a, b)


def test_contraction_deterministic_is_exact():
    m = NBARModel(Drift.linear(0.4), Drift.linear(0.3), Noise("gaussian", 0.0))
    est = empirical_contraction(nbar_kernel(m), 0.0, 1.0, 0, draws=100)
    assert est.ratio == pytest.approx(0.4, abs=1e-15)


def test_contraction_rejects_equal_points(linear_bar):
    with pytest.raises(ValueError):
        empirical_contraction(nbar_kernel(linear_bar), 1.0, 1.0, 0, draws=10)


@pytest.mark.parametrize("branch, r", [(0, 0.4), (1, 0.3), ("joint", 0.7)])
def test_contraction_with_noise_within_declared_constant(linear_bar, branch, r):
    est = empirical_contraction(nbar_kernel(linear_bar), 0.0, 1.0, branch, draws=100_000, seed=13)
    assert est.ratio <= est.coupling_ratio + 1e-12
    # 99% one-sided allowance
    assert est.ratio <= r + 2.576 * est.halfwidth + 1e-12


def test_tanh_drift_lipschitz_diagnostic():
    d = Drift.tanh(0.8, 0.1)
    assert d.lip == 0.8
    assert d.lip_on_grid(-3, 3) == pytest.approx(0.8, rel=1e-4)
