import math

import pytest

from bifurcate.bounds import gamma_n, tau_n
from bifurcate.harness import (ExperimentSpec, clopper_pearson, exact_centre, replicate_means,
                               run_bias_check, run_contraction_check, run_laplace_check,
                               run_tail_check, select_kappa, slack_verdict, stationary_mean_affine,
                               tail_verdict)
from bifurcate.kernel import Drift, InitialLaw, NBARModel, Noise
from bifurcate.simulate import Functional
from oracles import gaussian_two_sided_tail


def test_tail_verdict_rules():
    assert tail_verdict(0.0, 0.1, 0.1) == "dominated"
    assert tail_verdict(0.2, 0.3, 0.1) == "violated"
    assert tail_verdict(0.05, 0.3, 0.1) == "inconclusive"


def test_slack_verdict_rounding():
    assert slack_verdict(1.0 + 4e-16, 0.0, 1.0) == "dominated"
    assert slack_verdict(1.0 + 1e-9, 0.0, 1.0) == "violated"
    assert slack_verdict(1.1, 0.2, 1.0) == "inconclusive"


def test_clopper_pearson_edges():
    lo, hi = clopper_pearson(0, 100)
    assert lo == 0.0 and hi == pytest.approx(1 - 0.005 ** (1 / 100), rel=1e-9)
    lo, hi = clopper_pearson(100, 100)
    assert hi == 1.0 and lo == pytest.approx(0.005 ** (1 / 100), rel=1e-9)


def test_spec_validation(linear_bar):
    with pytest.raises(ValueError):
        ExperimentSpec(linear_bar, 3, 1)
    with pytest.raises(ValueError):
        ExperimentSpec(linear_bar, 3, 10, index="path")
    with pytest.raises(ValueError):
        ExperimentSpec(linear_bar, 3, 10, t_grid=(0.2, 0.1))
    with pytest.raises(ValueError):
        ExperimentSpec(linear_bar, 3, 10, checks=("tail", "magic"))


def test_kappa_selection(linear_bar):
    node = {i: ExperimentSpec(linear_bar, 6, 10, index=i) for i in ("generation", "tree")}
    assert select_kappa(node["generation"])[:2] == (gamma_n(1, 0.7, 1, 6), "gamma_n")
    assert select_kappa(node["tree"])[:2] == (tau_n(1, 0.7, 1, 6), "tau_n")
    g = Functional.innovation(linear_bar)
    assert select_kappa(ExperimentSpec(linear_bar, 6, 10, g, "generation"))[1] == "gamma_prime_n"
    k, src, flags = select_kappa(ExperimentSpec(linear_bar, 6, 10, g, "tree"))
    assert src == "tau_prime_n" and "tau_prime_n" in flags
    assert ExperimentSpec(linear_bar, 6, 10, g).sim_depth == 7
    assert select_kappa(ExperimentSpec(linear_bar, 6, 10, kappa_override=0.5))[:2] == (0.5, "override")


def test_exact_centre(linear_bar):
    assert exact_centre(ExperimentSpec(linear_bar, 2, 10, index="generation")) == pytest.approx(1.0125)
    assert exact_centre(ExperimentSpec(linear_bar, 2, 10, Functional.innovation(linear_bar))) == 0.0
    m = NBARModel(Drift.tanh(0.5), Drift.linear(0.5))
    assert exact_centre(ExperimentSpec(m, 2, 10)) is None


def test_zero_noise_is_dominated_with_exact_zero_tail(zero_noise_bar):
    spec = ExperimentSpec(zero_noise_bar, 8, 20)
    reps = run_tail_check(spec)
    assert [r.centering for r in reps] == ["replicate_mean", "exact"]
    exact = reps[1]
    assert exact.sigma_hat == 0.0
    assert exact.ci_hi == [0.0] * len(exact.t)
    assert exact.all_dominated
    assert all(r.all_dominated for r in run_laplace_check(spec))


def test_iid_control_matches_known_tail(iid_model):
    spec = ExperimentSpec(iid_model, 8, 4000, index="generation", t_grid=(0.02, 0.05, 0.08), master_seed=3)
    rep = run_tail_check(spec)[1]
    assert rep.centering == "exact" and rep.centre == 0.0
    for t, lo, hi in zip(rep.t, rep.ci_lo, rep.ci_hi):
        assert lo <= gaussian_two_sided_tail(t, 1 / 16) <= hi
    assert rep.all_dominated


def test_too_small_kappa_is_detected(iid_model):
    # the variance of the G_8 mean is 1/256; a tenth of it must be caught, the full value must not
    var = 1 / 256
    base = dict(model=iid_model, depth=8, replicates=4000, index="generation", master_seed=5)
    small = ExperimentSpec(**base, kappa_override=var / 10)
    right = ExperimentSpec(**base, kappa_override=var)
    means = replicate_means(small)
    assert run_tail_check(small, means)[0].any_violated
    assert run_laplace_check(small, means)[0].any_violated
    for kappa in (var, 2 * var, 10 * var):
        ok = ExperimentSpec(**base, kappa_override=kappa)
        assert run_tail_check(ok, means)[0].all_dominated
        lap = run_laplace_check(ok, means)[0]
        # at kappa = var the Gaussian Laplace transform meets the bound with equality
        assert lap.all_dominated if kappa > var else not lap.any_violated


def test_laplace_at_zero_is_one(linear_bar):
    spec = ExperimentSpec(linear_bar, 5, 200)
    for rep in run_laplace_check(spec):
        mid = len(rep.t) // 2
        assert rep.t[mid] == 0.0 and rep.lhs[mid] == pytest.approx(1.0, abs=1e-15)
        assert len(rep.t) == 21


def test_centering_consistency(linear_bar):
    spec = ExperimentSpec(linear_bar, 7, 1000, master_seed=11)
    mean_rep, exact_rep = run_tail_check(spec)
    se = mean_rep.sigma_hat / math.sqrt(spec.replicates)
    assert abs(mean_rep.centre - exact_rep.centre) < 4 * se
    for i in range(len(mean_rep.t)):
        width = min(mean_rep.ci_hi[i] - mean_rep.ci_lo[i], exact_rep.ci_hi[i] - exact_rep.ci_lo[i])
        assert abs(mean_rep.p_hat[i] - exact_rep.p_hat[i]) <= width


def test_thread_count_does_not_change_results(linear_bar):
    a = ExperimentSpec(linear_bar, 6, 64, master_seed=2, threads=1)
    b = ExperimentSpec(linear_bar, 6, 64, master_seed=2, threads=5)
    assert replicate_means(a).tobytes() == replicate_means(b).tobytes()
    da = [r.as_dict() for r in run_laplace_check(a)]
    db = [r.as_dict() for r in run_laplace_check(b)]
    for x, y in zip(da, db):
        assert x["lhs"] == y["lhs"] and x["se"] == y["se"]


def test_stationary_mean(linear_bar):
    assert stationary_mean_affine(linear_bar) == pytest.approx(15 / 13, rel=1e-15)
    with pytest.raises(ValueError):
        stationary_mean_affine(NBARModel(Drift.tanh(0.5), Drift.linear(0.5)))


def test_bias_from_stationary_start_is_small():
    # f0 = f1 = x/2 + 1, N(0,1): invariant law N(2, 4/3); start there and the bias is zero
    m = NBARModel(Drift.linear(0.5, 1.0), Drift.linear(0.5, 1.0), Noise("gaussian", 1.0),
                  InitialLaw("gaussian", 2.0, math.sqrt(4 / 3)))
    rep = run_bias_check(m, 8, 400, chains=500, chain_steps=200, burn_in=100, master_seed=1)
    assert rep.pi_exact == pytest.approx(2.0)
    assert rep.bias_exact <= rep.allowance_exact
    assert rep.verdict == "dominated" and rep.verdict_exact == "dominated"
    assert rep.as_dict()["kind"] == "bias"


def test_bias_rejects_non_contracting():
    m = NBARModel(Drift.linear(1.0), Drift.linear(1.0))
    with pytest.raises(ValueError):
        run_bias_check(m, 3, 10)


def test_contraction_zero_steps_is_one(linear_bar):
    rep = run_contraction_check(linear_bar, 0, 0.0, 4.0, draws=1000)
    assert rep.ratio == 1.0 and rep.bound == 1.0 and rep.verdict == "dominated"


@pytest.mark.parametrize("m", [1, 3, 6])
def test_contraction_zero_noise_is_exact(m):
    model = NBARModel(Drift.linear(0.4, 1.0), Drift.linear(0.4, -2.0), Noise("gaussian", 0.0))
    rep = run_contraction_check(model, m, 0.0, 4.0, draws=1000)
    assert rep.ratio == pytest.approx(0.4**m, rel=1e-12)
    assert rep.halfwidth == pytest.approx(0.0, abs=1e-12)
    assert rep.bound == pytest.approx(0.4**m, rel=1e-12)
    assert rep.verdict == "dominated"


def test_contraction_argument_checks(linear_bar):
    with pytest.raises(ValueError):
        run_contraction_check(linear_bar, 2, 0.0, 4.0, draws=10)
    with pytest.raises(ValueError):
        run_contraction_check(linear_bar, 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        run_contraction_check(linear_bar, -1, 0.0, 1.0)
