import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import gaussian_kde, norm
from hypothesis import given, strategies as st
from deepbf.errors import InvalidParameterError, NoOracleError
from deepbf.evalkit import (AbcEvaluator, BfSampleSet, ConstantEvaluator, EstimatorEvaluator, ExactEvaluator, Kde, evaluate,
                            estimated_prior, kde_grid, kl_between_samples, kl_weighted, mse_log_bf, mse_surprise,
                            mse_surprise_from_samples, posterior_model_prob, posterior_model_prob_log, roc_auc,
                            simulate_samples, spearman_weighted, surprise)
from deepbf.models import make_builtin_pair
from deepbf.rankabc import AbcConfig
from deepbf.rngdist import new_stream

@pytest.fixture
def truth():
    g = new_stream(2).generator
    return g.normal(size = 300), g.normal(1., 2., size = 300)

def test_mse_constant_offset(truth):
    t1, t2 = truth
    s = BfSampleSet(t1 + 0.5, t2 - 0.5, t1, t2)
    assert mse_log_bf(s).value == pytest.approx(0.25)
    assert mse_log_bf(s).excluded == 0

def test_mse_excludes_infinite_estimates(truth):
    t1, t2 = truth
    est = t1.copy()
    est[:3] = np.inf
    result = mse_log_bf(BfSampleSet(est, t2, t1, t2))
    assert result.value == 0.
    assert result.excluded == 3

def test_spearman_monotone(truth):
    t1, t2 = truth
    assert spearman_weighted(BfSampleSet(np.exp(t1), 3 * t2 + 1, t1, t2)).value == pytest.approx(1.)
    assert spearman_weighted(BfSampleSet(-t1, -t2, t1, t2)).value == pytest.approx(-1.)

def test_spearman_constant_vector(truth):
    t1, t2 = truth
    result = spearman_weighted(BfSampleSet(np.zeros(300), t2, t1, t2))
    assert result.degenerate
    assert result.value == pytest.approx(0.5)

def test_spearman_with_ties():
    s = BfSampleSet([1., 2., 2., 3.], [0., 1.], [1., 2., 3., 4.], [0., 1.])
    # midranks 1, 2.5, 2.5, 4 against 1, 2, 3, 4
    assert spearman_weighted(s).value == pytest.approx(0.5 * 0.9486832980505138 + 0.5)

def test_metrics_need_truth():
    s = BfSampleSet([1., 2.], [0., 1.])
    for metric in (mse_log_bf, spearman_weighted, kl_weighted, mse_surprise_from_samples):
        with pytest.raises(NoOracleError):
            metric(s)

def test_sample_set_validation():
    with pytest.raises(InvalidParameterError):
        BfSampleSet([], [1.])
    with pytest.raises(InvalidParameterError):
        BfSampleSet([1.], [1.], [1.], None)
    with pytest.raises(InvalidParameterError):
        BfSampleSet([1., 2.], [1.], [1.], [1.])

def test_kde_integrates_to_one():
    kde = Kde(new_stream(3).generator.normal(size = 2000))
    grid = kde_grid(kde)
    assert trapezoid(kde(grid), grid) == pytest.approx(1., abs = 1e-2)

def test_kde_matches_scipy():
    samples = new_stream(8).generator.gamma(2., 1., size = 500)
    kde = Kde(samples)
    grid = np.linspace(-1., 12., 200)
    reference = gaussian_kde(samples, bw_method = 1.06 * len(samples) ** -0.2)
    assert kde.bandwidth == pytest.approx(1.06 * np.std(samples, ddof = 1) * len(samples) ** -0.2)
    np.testing.assert_allclose(kde(grid), reference(grid), rtol = 1e-10, atol = 1e-300)

def test_kde_fallback_bandwidth():
    kde = Kde([2., 2., 2., np.inf])
    assert kde.bandwidth == 1e-3
    assert kde.excluded == 1
    grid = np.array([2., 2.001, 5.])
    np.testing.assert_allclose(kde(grid), norm.pdf(grid, 2., 1e-3))
    with pytest.raises(InvalidParameterError):
        Kde([1., 2.], bandwidth = 0.)

def test_kl_values():
    g = new_stream(4).generator
    a = g.normal(size = 5000)
    assert kl_between_samples(a, a) == 0.
    assert kl_between_samples(a, g.normal(10., 1., size = 5000)) > 1.
    assert kl_between_samples(a, g.normal(1., 1., size = 5000)) == pytest.approx(0.5, abs = 0.05)

def test_kl_weighted(truth):
    t1, t2 = truth
    total, (k1, k2) = kl_weighted(BfSampleSet(t1, t2 + 3., t1, t2))
    assert k1 == 0. and k2 > 0.
    assert total == pytest.approx(0.5 * k2)

def test_posterior_model_prob():
    assert posterior_model_prob(1., (0.5, 0.5)) == 0.5
    assert posterior_model_prob(np.inf, (0.5, 0.5)) == 1.
    assert posterior_model_prob(0., (0.5, 0.5)) == 0.
    assert posterior_model_prob(3., (0.25, 0.75)) == pytest.approx(0.5)
    assert np.allclose(posterior_model_prob_log(np.log([0.5, 2., 9.]), (0.3, 0.7)),
                       posterior_model_prob([0.5, 2., 9.], (0.3, 0.7)))
    with pytest.raises(InvalidParameterError):
        posterior_model_prob(-1., (0.5, 0.5))

def test_estimated_prior_of_constant_estimators(data1):
    assert estimated_prior(ConstantEvaluator(2, 1.), data1, 100, new_stream(0)) == 0.5
    assert estimated_prior(ConstantEvaluator(2, np.inf), data1, 100, new_stream(0)) == 1.
    assert estimated_prior(ConstantEvaluator(2, 0.), data1, 100, new_stream(0)) == 0.
    with pytest.raises(InvalidParameterError):
        estimated_prior(ConstantEvaluator(2, 1.), data1, 0, new_stream(0))

@pytest.mark.parametrize('name', ['data1', 'data3'])
def test_estimated_prior_of_exact_evaluator(name):
    pair = make_builtin_pair(name)
    assert 0.45 <= estimated_prior(ExactEvaluator(pair, 2), pair, 3000, new_stream(11)) <= 0.55

def test_surprise_hand_case():
    sims = [1., 2., 3.]
    assert surprise(2., sims, sims) == surprise(2.5, sims, [1., 2., 3.1])
    pair = surprise(2., sims, sims)
    assert (pair.p1, pair.p2) == (pytest.approx(1 / 3), pytest.approx(2 / 3))
    low, high = surprise(0., sims, sims), surprise(10., sims, sims)
    assert (low.p1, low.p2) == (1., 0.)
    assert (high.p1, high.p2) == (0., 1.)
    with pytest.raises(InvalidParameterError):
        surprise(1., [], sims)

@given(st.floats(-5, 5), st.floats(-5, 5))
def test_surprise_monotone(a, b):
    a, b = min(a, b), max(a, b)
    g = new_stream(5).generator
    sims_m1, sims_m2 = g.normal(size = 50), g.normal(size = 50)
    lo, hi = surprise(a, sims_m1, sims_m2), surprise(b, sims_m1, sims_m2)
    assert lo.p1 >= hi.p1 and lo.p2 <= hi.p2

def test_mse_surprise_is_rank_based(truth):
    t1, t2 = truth
    assert mse_surprise_from_samples(BfSampleSet(2 * t1 + 1, np.exp(t2), t1, t2)) == 0.
    assert mse_surprise_from_samples(BfSampleSet(-t1, -t2, t1, t2)) > 0.

def test_mse_surprise_of_exact_evaluator(data3):
    exact = ExactEvaluator(data3, 4)
    assert mse_surprise(exact, exact, data3, 200, new_stream(1)) == 0.

def test_roc_hand_cases():
    assert roc_auc([3., 4.], [1., 2.]).auc == 1.
    assert roc_auc([1., 2.], [1., 2.]).auc == 0.5
    assert roc_auc([1., 2., 3.], [0., 1.5, 2.5]).auc == pytest.approx(6 / 9)
    assert roc_auc([1., 2., 3.], [0., 1., 2.5]).auc == pytest.approx(6.5 / 9)
    with pytest.raises(InvalidParameterError):
        roc_auc([], [1.])

def test_roc_curve_and_invariance():
    g = new_stream(6).generator
    s1, s2 = g.normal(1., 1., 200), g.normal(size = 200)
    roc = roc_auc(s1, s2)
    assert roc.curve()[0] == (0., 0.) and roc.curve()[-1] == (1., 1.)
    assert np.all(np.diff(roc.fpr) >= 0) and np.all(np.diff(roc.tpr) >= 0)
    assert roc_auc(np.exp(s1), np.exp(s2)).auc == roc.auc
    assert trapezoid(roc.tpr, roc.fpr) == pytest.approx(roc.auc)

def test_simulate_samples_streams(data1):
    s = simulate_samples(ConstantEvaluator(2, 2.), data1, 40, new_stream(3), ExactEvaluator(data1, 2))
    assert s.est_m1.shape == s.true_m1.shape == (40, )
    assert np.all(s.est_m1 == np.log(2.))
    again = simulate_samples(ConstantEvaluator(2, 2.), data1, 40, new_stream(3), ExactEvaluator(data1, 2))
    assert np.array_equal(s.true_m2, again.true_m2)

def test_evaluate_exact_against_itself(data1):
    report, samples = evaluate(ExactEvaluator(data1, 2), data1, 300, new_stream(0), method = 'exact')
    assert report.mse_log_bf == 0. and report.mse_excluded == 0
    assert report.spearman == pytest.approx(1.)
    assert report.kl == 0.
    assert report.auc_estimated == report.auc_exact
    assert report.mse_surprise == 0.
    assert report.estimated_prior_m1 + report.estimated_prior_m2 == pytest.approx(1.)
    frame = report.to_frame()
    assert list(frame.columns) == ['name', 'value', 'model', 'n', 'seed']
    assert set(frame['name']) >= {'estimated_prior', 'auc_estimated', 'mse_log_bf', 'spearman', 'kl', 'auc_exact', 'mse_surprise'}
    assert list(samples.to_frame().columns) == ['model', 'true_log_bf', 'est_log_bf']

def test_evaluate_without_oracle():
    pair = make_builtin_pair('mpt', {'n_participants' : 2})
    report, samples = evaluate(ConstantEvaluator(12, 1.), pair, 30, new_stream(0))
    assert report.spearman is None and report.auc_exact is None
    assert report.auc_estimated == 0.5
    assert report.estimated_prior_m1 == 0.5
    assert not samples.has_truth

def test_evaluate_estimator(data1, random_estimator):
    est = random_estimator(2)
    report, samples = evaluate(est, data1, 100, new_stream(0))
    exact = simulate_samples(EstimatorEvaluator(est), data1, 100, new_stream(0), ExactEvaluator(data1, 2))
    assert np.array_equal(samples.est_m1, exact.est_m1) and np.array_equal(samples.true_m2, exact.true_m2)
    assert report.n == 2 and report.method == 'deepbf'
    assert -1. <= report.spearman <= 1.
    assert 0. <= report.auc_estimated <= 1.

def test_abc_evaluator_draws_fresh_tables(data3):
    evaluator = AbcEvaluator(data3, 2, AbcConfig(total_samples = 200, strata = 4, per_stratum_keep = 10, final_keep = 20),
                             new_stream(0))
    queries = np.array([[0.5, 0.5], [2., 1.]])
    first = evaluator.log_bf(queries)
    evaluator.log_bf(queries)
    assert evaluator.calls == 2
    assert first.shape == (2, )
    assert np.all(np.abs(first) <= np.log(21.) + 1e-12)
