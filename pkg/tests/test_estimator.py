import json
import numpy as np
import pytest
import torch
from dataclasses import replace
from hypothesis import given, strategies as st
from deepbf.errors import ConfigError, InvalidParameterError, NumericError, ShapeMismatchError
from deepbf.estimator import (BfEstimator, TrainConfig, bf_transform, checkpoint_document, estimate_bf, estimate_bf_batch,
                              estimate_log_bf, estimate_log_bf_batch, intrinsic_bf, load_estimator, partial_bf,
                              posterior_bf, save_estimator, train, training_subsets)
from deepbf.evalkit import evaluate
from deepbf.models import ModelPair, exact_log_bf, exact_log_pbf, exact_log_posterior_bf, simulate_batch
from deepbf.nn import ArchSpec, build_network
from deepbf.rngdist import new_stream

SMALL = TrainConfig(iterations = 20, minibatch_per_model = 16, arch = ArchSpec(width = 8, depth = 1), holdout = 100)

@given(st.floats(0., 10.))
def test_half_maps_to_one(eps):
    assert bf_transform(0.5, eps) == 1.

@given(st.floats(1e-6, 1 - 1e-6))
def test_transform_reciprocal(d):
    assert bf_transform(d) * bf_transform(1 - d) == pytest.approx(1., rel = 1e-8)

@pytest.mark.parametrize('eps', [0., 1e-6, 0.1])
def test_transform_increasing(eps):
    values = bf_transform(np.linspace(0.001, 0.999, 1001), eps)
    assert np.all(np.diff(values) > 0)

def test_transform_limits():
    assert bf_transform(1.) == np.inf
    assert bf_transform(0.) == 0.
    assert bf_transform(1., 0.1) == pytest.approx(11.)
    assert bf_transform(0., 0.1) == pytest.approx(1 / 11)

def test_overflow_surfaces_as_infinity():
    net = build_network(ArchSpec(width = 8, depth = 1), 2, new_stream(0))
    with torch.no_grad():
        net.layers[-1].weight.zero_()
        net.layers[-1].bias.fill_(1000.)
    est = BfEstimator(net, 2)
    assert estimate_bf(est, [0., 1.]) == np.inf
    assert estimate_log_bf(est, [0., 1.]) == 1000.
    assert np.isfinite(estimate_bf(est.with_eps(1e-6), [0., 1.]))

@pytest.mark.parametrize('eps', [0., 1e-6, 0.5])
def test_log_variant_agrees(random_estimator, eps):
    est = random_estimator(3, eps = eps)
    rows = new_stream(1).generator.normal(size = (10, 3))
    assert np.allclose(np.log(estimate_bf_batch(est, rows)), estimate_log_bf_batch(est, rows), rtol = 1e-12, atol = 1e-12)

def test_eps_keeps_estimates_finite_and_positive(random_estimator):
    est = random_estimator(3, eps = 1e-6)
    values = estimate_bf_batch(est, new_stream(2).generator.normal(0., 100., size = (50, 3)))
    assert np.all(np.isfinite(values) & (values > 0))

def test_length_mismatch(constant_estimator):
    est = constant_estimator(2)
    with pytest.raises(ShapeMismatchError):
        estimate_bf(est, [0., 1., 2.])
    with pytest.raises(ShapeMismatchError):
        estimate_bf_batch(est, np.zeros((3, 4)))

def test_estimator_validation():
    net = build_network(ArchSpec(width = 4, depth = 0), 2, new_stream(0))
    with pytest.raises(InvalidParameterError):
        BfEstimator(net, 2, direction = 3)
    with pytest.raises(InvalidParameterError):
        BfEstimator(net, 2, eps = -1.)
    bnn = build_network(ArchSpec('BNN', depth = 0), 2, new_stream(0))
    with pytest.raises(InvalidParameterError):
        BfEstimator(bnn, 2)
    with pytest.raises(ShapeMismatchError):
        BfEstimator(bnn, 2, reference = np.zeros((10, 3)))

@pytest.mark.parametrize('kwargs', [{'iterations' : 0}, {'minibatch_per_model' : 1}, {'restarts' : 0},
                                    {'restarts' : 2, 'holdout' : 0}, {'learning_rate' : 0.}])
def test_train_config_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        TrainConfig(**kwargs)

def test_single_step(data1):
    cfg = TrainConfig(iterations = 1, minibatch_per_model = 2, arch = ArchSpec(width = 8, depth = 0), holdout = 0)
    est = train(data1, 2, cfg, new_stream(0))
    assert est.adam.t == 1
    assert est.diagnostics['steps'] == 1
    assert len(est.diagnostics['loss_trace']) == 1
    assert est.net.frozen
    assert est.diagnostics['holdout_accuracy'] is None and est.diagnostics['restart_accuracy'] == []

def test_single_restart_scores_the_returned_network(data1):
    est = train(data1, 2, SMALL, new_stream(0))
    assert est.diagnostics['selected_restart'] == 0
    assert est.diagnostics['restart_accuracy'] == [est.diagnostics['holdout_accuracy']]
    assert 0. <= est.diagnostics['holdout_accuracy'] <= 1.
    assert est.diagnostics['holdout_loss'] > 0.

def test_training_is_deterministic(data1, tmp_path):
    cfg = replace(SMALL, restarts = 2)
    a = train(data1, 2, cfg, new_stream(0))
    b = train(data1, 2, cfg, new_stream(0))
    save_estimator(a, tmp_path / 'a.json')
    save_estimator(b, tmp_path / 'b.json')
    assert (tmp_path / 'a.json').read_bytes() == (tmp_path / 'b.json').read_bytes()
    c = train(data1, 2, cfg, new_stream(1))
    assert json.dumps(checkpoint_document(a)) != json.dumps(checkpoint_document(c))

def test_restart_selection(data1):
    est = train(data1, 2, replace(SMALL, restarts = 3), new_stream(0))
    accuracy = est.diagnostics['restart_accuracy']
    assert len(accuracy) == 3
    assert est.diagnostics['selected_restart'] == int(np.argmax(accuracy))
    assert est.diagnostics['holdout_accuracy'] == max(accuracy)

def test_bnn_queries_are_independent_of_batch(data1):
    cfg = replace(SMALL, arch = ArchSpec('BNN', depth = 1, first_width = 8, floor = 4), eval_reference_batch = 20)
    est = train(data1, 2, cfg, new_stream(0))
    assert est.reference.shape == (20, 2)
    rows = simulate_batch(data1.m1, 5, 2, new_stream(3))
    batch = estimate_log_bf_batch(est, rows)
    assert np.array_equal(batch, [estimate_log_bf(est, r) for r in rows])
    assert np.array_equal(batch[2:], estimate_log_bf_batch(est, rows[2:]))

@pytest.mark.parametrize('arch', [ArchSpec(width = 8, depth = 1), ArchSpec('BNN', depth = 1, first_width = 8, floor = 4),
                                  ArchSpec('DeepSet', width = 8, depth = 0, inner_widths = (8, ))])
def test_checkpoint_round_trip(data1, tmp_path, arch):
    cfg = replace(SMALL, arch = arch, eval_reference_batch = 10)
    est = train(data1, 3, cfg, new_stream(0), direction = 2, eps = 1e-6)
    path = tmp_path / 'est.json'
    save_estimator(est, path, 'abc123')
    loaded = load_estimator(path)
    assert (loaded.n, loaded.direction, loaded.eps) == (3, 2, 1e-6)
    assert loaded.config == est.config
    assert loaded.pair.describe() == data1.describe()
    assert loaded.diagnostics == est.diagnostics
    rows = simulate_batch(data1.m2, 6, 3, new_stream(1))
    assert np.array_equal(estimate_log_bf_batch(loaded, rows), estimate_log_bf_batch(est, rows))
    assert json.loads(path.read_text())['config_hash'] == 'abc123'

def test_rejects_foreign_document(tmp_path):
    path = tmp_path / 'other.json'
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ConfigError):
        load_estimator(path)

def test_partial_bf_is_product_of_factors(random_estimator):
    full, sub = random_estimator(4, 1, seed = 1), random_estimator(2, 2, seed = 2)
    y = np.array([0.3, -1.2, 2., 0.])
    assert partial_bf(full, sub, y, [0, 2]) == estimate_bf(full, y) * estimate_bf(sub, y[[0, 2]])

def test_partial_bf_with_unit_second_factor(random_estimator, constant_estimator):
    full = random_estimator(3, 1)
    y = np.array([1., 2., 3.])
    assert partial_bf(full, constant_estimator(1, direction = 2), y, [1]) == estimate_bf(full, y)

def test_partial_bf_checks(random_estimator):
    full, sub = random_estimator(4, 1), random_estimator(2, 2)
    y = np.zeros(4)
    with pytest.raises(InvalidParameterError):
        partial_bf(full, random_estimator(2, 1), y, [0, 1])
    with pytest.raises(ShapeMismatchError):
        partial_bf(full, sub, y, [0, 1, 2])
    with pytest.raises(ShapeMismatchError):
        partial_bf(full, sub, np.zeros(3), [0, 1])
    with pytest.raises(InvalidParameterError):
        partial_bf(full, sub, y, [0, 4])

def test_posterior_bf(random_estimator, constant_estimator):
    double, rev = random_estimator(6, 1, seed = 3), random_estimator(3, 2, seed = 4)
    y = np.array([0.5, 1.5, -2.])
    assert posterior_bf(double, rev, y) == partial_bf(double, rev, np.concatenate([y, y]), [0, 1, 2])
    assert posterior_bf(constant_estimator(6), constant_estimator(3, direction = 2), y) == 1.
    with pytest.raises(ShapeMismatchError):
        posterior_bf(random_estimator(5, 1), rev, y)

def test_training_subsets():
    assert training_subsets(4, 2, 10).tolist() == [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
    sampled = training_subsets(10, 3, 20, new_stream(0))
    assert sampled.shape == (20, 3)
    assert len({tuple(s) for s in sampled.tolist()}) == 20
    assert np.all(np.diff(sampled, axis = 1) > 0)
    assert np.array_equal(sampled, training_subsets(10, 3, 20, new_stream(0)))
    with pytest.raises(InvalidParameterError):
        training_subsets(10, 3, 20)
    with pytest.raises(InvalidParameterError):
        training_subsets(3, 3, 20)

@pytest.mark.parametrize('mode', ['arithmetic', 'geometric'])
def test_intrinsic_with_equal_factors(random_estimator, constant_estimator, mode):
    full = random_estimator(4, 1)
    y = np.array([1., 0., 2., 5.])
    value = intrinsic_bf(full, constant_estimator(2, bf = 3., direction = 2), y, 2, mode)
    assert value == pytest.approx(3. * estimate_bf(full, y), rel = 1e-12)

def test_intrinsic_two_term_average(random_estimator):
    full, sub = random_estimator(2, 1, seed = 5), random_estimator(1, 2, seed = 6)
    y = np.array([0.4, -0.8])
    bf = estimate_bf(full, y)
    factors = [estimate_bf(sub, y[[0]]), estimate_bf(sub, y[[1]])]
    assert intrinsic_bf(full, sub, y, 1, 'arithmetic') == pytest.approx(bf * np.mean(factors), rel = 1e-12)
    assert intrinsic_bf(full, sub, y, 1, 'geometric') == pytest.approx(bf * np.sqrt(factors[0] * factors[1]), rel = 1e-12)

def test_geometric_never_exceeds_arithmetic(random_estimator):
    stream = new_stream(9)
    for case in range(100):
        full, sub = random_estimator(5, 1, seed = case), random_estimator(2, 2, seed = 1000 + case)
        y = stream.generator.normal(size = 5)
        geometric = intrinsic_bf(full, sub, y, 2, 'geometric')
        arithmetic = intrinsic_bf(full, sub, y, 2, 'arithmetic')
        assert geometric <= arithmetic * (1 + 1e-12)

@pytest.mark.parametrize('mode', ['arithmetic', 'geometric'])
def test_intrinsic_rejects_opposite_saturation(constant_estimator, mode):
    y = np.array([1., 0., 2., 5.])
    full = constant_estimator(4, bf = np.inf)
    with pytest.raises(NumericError, match = 'opposite directions'):
        intrinsic_bf(full, constant_estimator(2, bf = 0., direction = 2), y, 2, mode)
    assert intrinsic_bf(full, constant_estimator(2, bf = 3., direction = 2), y, 2, mode) == np.inf

def test_intrinsic_checks(random_estimator):
    full, sub = random_estimator(4, 1), random_estimator(2, 2)
    with pytest.raises(InvalidParameterError):
        intrinsic_bf(full, sub, np.zeros(4), 2, 'harmonic')
    with pytest.raises(ShapeMismatchError):
        intrinsic_bf(full, sub, np.zeros(4), 3)

# Desk-scale training runs; minutes each.

DESK = TrainConfig(iterations = 40000, minibatch_per_model = 200)

def _sign_agreement(samples):
    est = np.concatenate([samples.est_m1, samples.est_m2])
    true = np.concatenate([samples.true_m1, samples.true_m2])
    return np.mean(np.sign(est) == np.sign(true))

@pytest.mark.slow
@pytest.mark.parametrize('name, n', [('data1', 2), ('data3', 2), ('data3', 8)])
def test_desk_scale_gates(name, n, request):
    pair = request.getfixturevalue(name)
    est = train(pair, n, DESK, new_stream(0))
    report, samples = evaluate(est, pair, 1500, new_stream(0, 3))
    assert report.spearman >= 0.9
    assert abs(report.auc_estimated - report.auc_exact) <= 0.03
    assert 0.45 <= report.estimated_prior_m1 <= 0.55
    assert _sign_agreement(samples) >= 0.9

@pytest.mark.slow
def test_identical_models_give_even_odds(data1):
    pair = ModelPair(data1.m1, data1.m1)
    est = train(pair, 2, DESK, new_stream(0))
    held_out = simulate_batch(data1.m1, 3000, 2, new_stream(1))
    assert abs(estimate_log_bf_batch(est, held_out).mean()) <= 0.2

@pytest.mark.slow
def test_data3_single_observation(data3):
    est = train(data3, 1, DESK, new_stream(0))
    assert 1 / 1.5 <= estimate_bf(est, [0.]) / np.exp(exact_log_bf(data3, [0.])) <= 1.5

@pytest.mark.slow
def test_partial_bf_against_exact(data1):
    full = train(data1, 2, DESK, new_stream(0))
    sub = train(data1, 1, DESK, new_stream(1), direction = 2)
    y = np.array([1., 2.])
    ratio = partial_bf(full, sub, y, [0]) / np.exp(exact_log_pbf(data1, y, [0]))
    assert 0.5 <= ratio <= 2

@pytest.mark.slow
def test_posterior_bf_against_exact(data3):
    double = train(data3, 2, DESK, new_stream(0))
    rev = train(data3, 1, DESK, new_stream(1), direction = 2)
    ratio = posterior_bf(double, rev, [0.]) / np.exp(exact_log_posterior_bf(data3, [0.]))
    assert 0.5 <= ratio <= 2

def test_full_scale_preset():
    cfg = TrainConfig.full_scale(restarts = 3)
    assert (cfg.iterations, cfg.minibatch_per_model, cfg.restarts) == (400000, 200, 3)
