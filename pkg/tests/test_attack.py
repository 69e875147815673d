"""
Test module for the hyperplane attack.
"""

import unittest
import os
import math
from unittest.mock import patch

import numpy as np

# Import the modules to test
import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fedsgd_leakage.attack import (
    CLASSIFIER_BIAS, COMPARISON_PROJECTION, AttackConfig, HyperplaneAttack, ReconstructionResult, SearchState,
    Strip, alpha_coefficients, class_bias_gradients, compute_observations, craft_malicious_params, empty_biases,
    epsilon_for_confidence, infer_label, initial_interval, reconstruct_batch, round_bound, run_attack,
    strips_equal, update_hyperplanes, update_search_state
)
from fedsgd_leakage.data import FeatureBounds, gen_synthetic
from fedsgd_leakage.cah_baseline import CahConfig, run_cah_attack
from fedsgd_leakage.experiment_runner import predict_rounds
from fedsgd_leakage.federation import ClientConfig, LocalSteps
from fedsgd_leakage.metrics import match_reconstructions
from fedsgd_leakage.model import Batch, GradientReport, batch_gradient, forward_batch, per_sample_bias_grads
from fedsgd_leakage.exceptions import ProtocolError, ValidationError


def make_config(d=4, neurons=8, class_count=3, **kwargs):
    return AttackConfig(
        neurons=neurons,
        class_count=class_count,
        rounds=kwargs.pop("rounds", 10),
        feature_bounds=FeatureBounds.uniform(-1.0, 1.0, d),
        **kwargs
    )


def strip(g, h, bias):
    return Strip(np.asarray(g, dtype=np.float64), float(h), float(bias))


def exact_strips(inputs, per_sample_h, biases):
    """Strips whose activating sets grow by one input each, as a full-batch client reports them."""
    n = inputs.shape[0]
    strips = []
    for k in range(n):
        h = per_sample_h[:k + 1]
        db = float(np.sum(h)) / n
        dW = (h[:, None] * inputs[:k + 1]).sum(axis=0) / n
        strips.append(Strip(dW / db, db, biases[k]))
    return strips


class TestAttackConfig(unittest.TestCase):
    """Test attack configuration checks."""

    def test_defaults(self):
        cfg = make_config()
        self.assertEqual(cfg.weight_mode, "standard")
        self.assertEqual(cfg.g_equal_tol, 1e-9)
        self.assertEqual(cfg.comparison_mode, "exact")

    def test_robust_modes_use_projection(self):
        self.assertEqual(make_config(weight_mode="noise_robust").comparison_mode, COMPARISON_PROJECTION)

    def test_rejects_bad_values(self):
        with self.assertRaises(ValidationError):
            make_config(neurons=0)
        with self.assertRaises(ValidationError):
            make_config(rounds=0)
        with self.assertRaises(ValidationError):
            make_config(class_count=1)
        with self.assertRaises(ValidationError):
            make_config(weight_mode="adaptive")


class TestCrafting(unittest.TestCase):
    """Test malicious parameter crafting."""

    def test_standard_rows_and_columns_identical(self):
        params = craft_malicious_params(6, make_config(d=6, neurons=5, class_count=4))
        first, last = params.layers[0], params.layers[-1]
        for i in range(1, 5):
            np.testing.assert_array_equal(first.weights[i], first.weights[0])
            np.testing.assert_array_equal(last.weights[:, i], last.weights[:, 0])
        np.testing.assert_array_equal(last.biases, np.full(4, CLASSIFIER_BIAS))
        np.testing.assert_array_equal(first.biases, np.zeros(5))

    def test_classifier_column_distinct(self):
        for seed in range(20):
            params = craft_malicious_params(3, make_config(d=3, class_count=10, rng_seed=seed))
            v = params.layers[-1].weights[:, 0]
            self.assertGreaterEqual(np.min(np.abs(v - v.mean())), 1e-8)
            self.assertGreaterEqual(np.min(np.diff(np.sort(v))), 1e-8)

    def test_deterministic_in_seed(self):
        cfg = make_config(rng_seed=7)
        a = craft_malicious_params(4, cfg)
        b = craft_malicious_params(4, cfg)
        np.testing.assert_array_equal(a.layers[0].weights, b.layers[0].weights)
        np.testing.assert_array_equal(a.layers[1].weights, b.layers[1].weights)

    def test_local_steps_robust_levels(self):
        params = craft_malicious_params(7, make_config(d=7, class_count=10, weight_mode="local_steps_robust"))
        v = params.layers[-1].weights[:, 0]
        self.assertTrue(np.all(np.abs(v[:5] - 1e5) <= 0.05))
        self.assertTrue(np.all(np.abs(v[5:] - (1e5 - 1e-2)) <= 0.05))
        w = params.layers[0].weights[0]
        self.assertTrue(np.all((w[0::2] >= 1.0) & (w[0::2] <= 2.0)))
        self.assertTrue(np.all((w[1::2] >= -2.0) & (w[1::2] <= -1.0)))

    def test_noise_robust_levels(self):
        params = craft_malicious_params(4, make_config(class_count=6, weight_mode="noise_robust"))
        v = params.layers[-1].weights[:, 0]
        self.assertTrue(np.all(np.abs(v[:3] - 1e5) <= 0.05))
        self.assertTrue(np.all(np.abs(v[3:] - (1e5 - 1e3)) <= 0.05))

    def test_hidden_layers(self):
        params = craft_malicious_params(4, make_config(neurons=6, hidden_widths=(5, 3)))
        self.assertEqual(params.depth, 4)
        hidden = params.layers[1]
        self.assertEqual(hidden.weights.shape, (5, 6))
        for i in range(1, 6):
            np.testing.assert_array_equal(hidden.weights[:, i], hidden.weights[:, 0])
        np.testing.assert_allclose(hidden.biases, 1e-3 * hidden.weights[:, 0])
        self.assertTrue(np.any(hidden.weights[:, 0] > 0))


class TestUniformBiasGradient(unittest.TestCase):
    """Test that crafted parameters decouple the bias derivative from the bias."""

    def check_batch(self, hidden_widths):
        d, N, C = 5, 12, 4
        params = craft_malicious_params(d, make_config(d=d, neurons=N, class_count=C, hidden_widths=hidden_widths))
        rng = np.random.default_rng(1)
        batch = Batch(rng.uniform(-1.0, 1.0, (20, d)), rng.integers(0, C, 20), C)
        params = params.with_first_layer_biases(np.linspace(-0.5, 0.5, N))

        grads = per_sample_bias_grads(params, batch)
        active = forward_batch(params, batch.inputs)[1] > 0
        expected = class_bias_gradients(params)

        checked = 0
        for j in range(batch.size):
            row = grads[j][active[j]]
            self.assertTrue(np.all(grads[j][~active[j]] == 0.0))
            if row.size == 0:
                continue
            target = expected[batch.labels[j]]
            self.assertLessEqual(float(np.max(np.abs(row - target))), 1e-10)
            spread = float(np.max(row) - np.min(row))
            self.assertLessEqual(spread, 1e-12 * abs(target))
            checked += 1
        self.assertGreater(checked, 0)

    def test_two_layer(self):
        self.check_batch(())

    def test_with_hidden_layers(self):
        self.check_batch((6,))

    def test_class_values_formula(self):
        params = craft_malicious_params(3, make_config(d=3, class_count=5))
        v = params.layers[-1].weights[:, 0]
        np.testing.assert_allclose(class_bias_gradients(params), v.mean() - v, rtol=0, atol=1e-15)


class TestInitialInterval(unittest.TestCase):
    """Test the starting search range."""

    def test_unit_square(self):
        low, high = initial_interval(np.array([1.0, 1.0]), FeatureBounds.uniform(0.0, 1.0, 2))
        self.assertEqual((low, high), (-2.0, 0.0))

    def test_sign_flip(self):
        low, high = initial_interval(np.array([-1.0]), FeatureBounds.uniform(-1.0, 1.0, 1))
        self.assertEqual((low, high), (-1.0, 1.0))

    def test_contains_random_boundaries(self):
        rng = np.random.default_rng(4)
        bounds = FeatureBounds(np.array([-1.0, 0.0, 2.0]), np.array([1.0, 3.0, 2.5]))
        w = rng.normal(size=3)
        low, high = initial_interval(w, bounds)
        samples = rng.uniform(bounds.lows, bounds.highs, (100000, 3))
        boundaries = -(samples @ w)
        self.assertTrue(np.all(boundaries >= low))
        self.assertTrue(np.all(boundaries <= high))

    def test_dimension_mismatch(self):
        with self.assertRaises(ValidationError):
            initial_interval(np.ones(3), FeatureBounds.uniform(0.0, 1.0, 2))


class TestUpdateHyperplanes(unittest.TestCase):
    """Test bias placement over live intervals."""

    def test_single_interval(self):
        biases = update_hyperplanes(SearchState(intervals=[(0.0, 1.0)]), 3)
        np.testing.assert_allclose(biases, [0.25, 0.5, 0.75])

    def test_midpoint(self):
        np.testing.assert_allclose(update_hyperplanes(SearchState(intervals=[(0.0, 2.0)]), 1), [1.0])

    def test_longer_interval_gets_extra_point(self):
        biases = update_hyperplanes(SearchState(intervals=[(10.0, 12.0), (0.0, 4.0)]), 3)
        np.testing.assert_allclose(biases, [4.0 / 3.0, 8.0 / 3.0, 11.0])

    def test_counts_and_interior(self):
        intervals = [(0.0, 1.0), (2.0, 2.5), (3.0, 6.0), (7.0, 7.1)]
        biases = update_hyperplanes(SearchState(intervals=intervals), 10)
        self.assertEqual(biases.shape, (10,))
        self.assertTrue(np.all(np.diff(biases) > 0))
        per_interval = [int(np.sum((biases > lo) & (biases < hi))) for lo, hi in intervals]
        self.assertEqual(sum(per_interval), 10)
        # 10 = 4 * 2 + 2: the two longest get three points
        self.assertEqual(per_interval, [3, 2, 3, 2])

    def test_more_intervals_than_neurons(self):
        state = SearchState(intervals=[(0.0, 1.0), (2.0, 5.0), (10.0, 12.0)])
        np.testing.assert_allclose(update_hyperplanes(state, 2), [3.5, 11.0])

    def test_no_interval(self):
        with self.assertRaises(ValidationError):
            update_hyperplanes(SearchState(), 4)


class TestComputeObservations(unittest.TestCase):
    """Test strip extraction from a client gradient."""

    def setUp(self):
        self.d = 3
        self.params = craft_malicious_params(self.d, make_config(d=self.d, neurons=3, class_count=3, rng_seed=2))
        rng = np.random.default_rng(8)
        self.batch = Batch(rng.uniform(-1.0, 1.0, (2, self.d)), np.array([0, 1]), 3)
        w = self.params.layers[0].weights[0]
        boundaries = -(self.batch.inputs @ w)
        self.order = np.argsort(boundaries)
        low, high = np.sort(boundaries)
        self.biases = np.array([low - 1.0, 0.5 * (low + high), high + 1.0])
        self.crafted = self.params.with_first_layer_biases(self.biases)
        self.report = batch_gradient(self.crafted, self.batch)

    def test_inactive_neuron_skipped(self):
        strips = compute_observations(self.report, self.biases, h_floor=1e-30)
        self.assertEqual(len(strips), 2)
        self.assertEqual([s.bias for s in strips], list(self.biases[1:]))

    def test_single_input_isolated(self):
        strips = compute_observations(self.report, self.biases, h_floor=1e-30)
        first = self.batch.inputs[self.order[0]]
        self.assertLessEqual(float(np.max(np.abs(strips[0].g - first))), 1e-10)

    def test_two_inputs_mix_by_alpha(self):
        strips = compute_observations(self.report, self.biases, h_floor=1e-30)
        h = per_sample_bias_grads(self.crafted, self.batch)[:, 2]
        expected = (h[0] * self.batch.inputs[0] + h[1] * self.batch.inputs[1]) / (h[0] + h[1])
        np.testing.assert_allclose(strips[1].g, expected, rtol=1e-9, atol=1e-12)
        self.assertAlmostEqual(strips[1].h, float(np.mean(h)), places=14)

    def test_cancelling_set_kept(self):
        dW = np.array([[0.0, 0.0], [0.3, -0.2], [1.0, 1.0]])
        db = np.array([0.0, 0.0, 0.5])
        report = GradientReport([(dW, db), (np.zeros((3, 3)), np.zeros(3))])
        biases = np.array([0.0, 1.0, 2.0])
        strips = compute_observations(report, biases, h_floor=1e-30)
        self.assertEqual([s.bias for s in strips], [1.0, 2.0])
        np.testing.assert_array_equal(strips[0].p, dW[1])
        np.testing.assert_array_equal(strips[0].g, np.zeros(2))
        self.assertEqual(empty_biases(report, biases, h_floor=1e-30), [0.0])


class TestStripsEqual(unittest.TestCase):
    """Test strip comparison."""

    def test_reflexive(self):
        a = strip([0.3, -1.2, 2.0], 0.05, 1.0)
        self.assertTrue(strips_equal(a, a))
        self.assertTrue(strips_equal(a, a, COMPARISON_PROJECTION))

    def test_small_g_difference_detected(self):
        a = strip([0.3, -1.2, 2.0], 0.05, 1.0)
        b = strip([0.3, -1.2 + 1e-3, 2.0], 0.05, 2.0)
        self.assertFalse(strips_equal(a, b, g_equal_tol=1e-9))

    def test_h_difference_detected(self):
        a = strip([1.0, 2.0], 0.05, 1.0)
        b = strip([1.0, 2.0], 0.06, 2.0)
        self.assertFalse(strips_equal(a, b))

    def test_same_activating_set_from_client(self):
        params = craft_malicious_params(4, make_config(neurons=2, rng_seed=3))
        batch = Batch(np.array([[0.1, 0.2, -0.3, 0.4], [-0.5, 0.1, 0.0, 0.2]]), np.array([0, 2]), 3)
        boundaries = -(batch.inputs @ params.layers[0].weights[0])
        top = float(np.max(boundaries))
        biases = np.array([top + 0.1, top + 0.7])
        report = batch_gradient(params.with_first_layer_biases(biases), batch)
        a, b = compute_observations(report, biases)
        self.assertTrue(strips_equal(a, b, g_equal_tol=1e-9))

    def test_projection_mode(self):
        a = strip([1.0, 2.0, 3.0], 0.1, 1.0)
        self.assertTrue(strips_equal(a, strip([2.0, 4.0, 6.0], 0.2, 2.0), COMPARISON_PROJECTION))
        self.assertFalse(strips_equal(a, strip([3.0, 0.0, -1.0], 0.2, 2.0), COMPARISON_PROJECTION))

    def test_cancelling_sets_compared_by_weight_gradient(self):
        zero = np.zeros(2)
        a = Strip(zero, 0.0, 1.0, np.array([0.3, -0.2]))
        b = Strip(zero, 0.0, 2.0, np.array([0.1, 0.4]))
        self.assertFalse(strips_equal(a, b))
        self.assertTrue(strips_equal(a, Strip(zero, 0.0, 3.0, np.array([0.3, -0.2]))))

    def test_projection_noise_floor(self):
        a = strip([1.0, 2.0], 10.0, 1.0)
        b = strip([1.01, 2.0], 10.001, 2.0)
        self.assertTrue(strips_equal(a, b, COMPARISON_PROJECTION, noise_floor=0.5))
        self.assertFalse(strips_equal(a, b, COMPARISON_PROJECTION))


class TestUpdateSearchState(unittest.TestCase):
    """Test merging observations into the search state."""

    def test_all_equal_finishes(self):
        strips = [strip([1.0, 2.0], 0.1, b) for b in (0.0, 1.0, 2.0)]
        state = update_search_state(SearchState(intervals=[(0.0, 2.0)]), strips)
        self.assertEqual(state.intervals, [])
        self.assertTrue(state.finished)
        self.assertEqual(len(state.representatives), 1)

    def test_one_boundary_between_runs(self):
        strips = [strip([1.0, 2.0], 0.1, 0.0), strip([1.0, 2.0], 0.1, 1.0), strip([5.0, -1.0], 0.3, 2.0)]
        state = update_search_state(SearchState(), strips)
        self.assertEqual(state.intervals, [(1.0, 2.0)])
        self.assertEqual([s.bias for s in state.representatives], [1.0, 2.0])
        self.assertIn(2.0, [s.bias for s in state.strips])

    def test_narrow_gap_is_collision(self):
        strips = [strip([1.0, 2.0], 0.1, 0.0), strip([5.0, -1.0], 0.3, 0.5)]
        state = update_search_state(SearchState(epsilon=1.0), strips)
        self.assertEqual(state.intervals, [])
        self.assertEqual(state.collisions, 1)

    def test_floor_gap_and_empty_biases(self):
        state = SearchState(floor_bias=-1.0)
        first = update_search_state(state, [strip([1.0, 1.0], 0.2, 0.0)])
        self.assertEqual(first.intervals, [(-1.0, 0.0)])
        raised = update_search_state(state, [strip([1.0, 1.0], 0.2, 0.0)], empty=[-0.5, 3.0])
        self.assertEqual(raised.floor_bias, -0.5)
        self.assertEqual(raised.intervals, [(-0.5, 0.0)])

    def test_sample_count_reached_closes_gaps(self):
        state = SearchState(floor_bias=0.0, sample_count=1)
        closed = update_search_state(state, [strip([1.0, 1.0], 0.15, 1.0)])
        self.assertEqual(closed.intervals, [])
        self.assertTrue(closed.isolated)
        self.assertEqual(closed.settled, 1)

    def test_class_sum_match_does_not_close_gap(self):
        v = np.array([0.31, -0.12, 0.07, -0.2])
        class_values = v.mean() - v
        labels = [3, 1, 0, 2, 2]
        # class values sum to zero, so these five jump like one sample of class 2
        h = float(np.sum(class_values[labels])) / 5
        self.assertAlmostEqual(h, class_values[2] / 5, places=15)
        state = SearchState(floor_bias=0.0, sample_count=5)
        open_state = update_search_state(state, [strip([1.0, 1.0], h, 1.0)])
        self.assertEqual(open_state.intervals, [(0.0, 1.0)])
        self.assertFalse(open_state.isolated)

    def test_gaps_capped_at_sample_count(self):
        heights = [1.0, 1.001, 3.0, 3.001, 6.0, 6.002]
        strips = [strip([1.0, 0.0], h, k + 1.0) for k, h in enumerate(heights)]
        state = update_search_state(SearchState(floor_bias=0.0, sample_count=3), strips)
        self.assertTrue(state.isolated)
        self.assertEqual(state.intervals, [])
        self.assertEqual([s.bias for s in state.representatives], [2.0, 4.0, 6.0])
        self.assertEqual(state.settled, 3)

    def test_noise_floor_merges_runs(self):
        a = strip([1.0, 2.0], 10.0, 1.0)
        b = strip([1.0 + 1e-4, 2.0], 10.0 + 1e-3, 2.0)
        state = SearchState(
            floor_bias=0.0, mode=COMPARISON_PROJECTION, noise_floor=0.5, intervals=[(0.0, 3.0)]
        )
        merged = update_search_state(state, [a, b])
        self.assertEqual(len(merged.representatives), 1)
        self.assertEqual(merged.intervals, [(0.0, 1.0)])

    def test_unsorted_input(self):
        strips = [strip([5.0, -1.0], 0.3, 2.0), strip([1.0, 2.0], 0.1, 0.0)]
        state = update_search_state(SearchState(), strips)
        self.assertEqual([s.bias for s in state.strips], [0.0, 2.0])


class TestReconstruction(unittest.TestCase):
    """Test batch reconstruction from isolating strips."""

    def test_single_input(self):
        g = np.array([0.25, -1.5, 3.0])
        result = reconstruct_batch([strip(g, 0.07, 1.0)], n=1)
        self.assertEqual(result.count, 1)
        np.testing.assert_allclose(result.recovered_inputs[0], g, rtol=1e-15, atol=0)

    def test_three_gaussian_inputs(self):
        rng = np.random.default_rng(12)
        inputs = rng.normal(size=(3, 6))
        class_values = np.array([0.12, -0.05, -0.08])
        labels = np.array([1, 0, 2])
        strips = exact_strips(inputs, class_values[labels], [0.5, 1.5, 2.5])

        result = reconstruct_batch(strips, n=3, class_values=class_values)
        self.assertEqual(result.count, 3)
        self.assertLessEqual(float(np.max(np.abs(result.recovered_inputs - inputs))), 1e-9)
        self.assertEqual(result.recovered_labels, [1, 0, 2])
        self.assertEqual(result.collisions, 0)

    def test_alpha_identity(self):
        rng = np.random.default_rng(13)
        inputs = rng.normal(size=(12, 4))
        # all positive, so no prefix of the batch sums to zero
        class_values = np.array([0.2, 0.05, 0.11, 0.31])
        h_true = class_values[rng.integers(0, 4, 12)]
        strips = exact_strips(inputs, h_true, list(np.arange(12.0)))
        result = reconstruct_batch(strips, n=12, class_values=class_values)
        np.testing.assert_allclose(
            alpha_coefficients(result.per_input_bias_grad), alpha_coefficients(h_true), rtol=0, atol=1e-10
        )

    def test_double_jump_flagged(self):
        rng = np.random.default_rng(14)
        inputs = rng.normal(size=(4, 5))
        class_values = np.array([0.3, -0.07, -0.23])
        h = class_values[np.array([0, 1, 1, 2])]
        strips = exact_strips(inputs, h, [0.0, 1.0, 2.0, 3.0])
        del strips[1]

        result = reconstruct_batch(strips, n=4, class_values=class_values)
        self.assertEqual(result.collisions, 1)
        self.assertEqual(result.count, 2)
        np.testing.assert_allclose(result.recovered_inputs[0], inputs[0], atol=1e-9)
        np.testing.assert_allclose(result.recovered_inputs[1], inputs[3], atol=1e-9)

    def test_empty(self):
        result = reconstruct_batch([])
        self.assertEqual(result.count, 0)

    def test_capped_at_sample_count(self):
        rng = np.random.default_rng(15)
        inputs = rng.normal(size=(4, 3))
        class_values = np.array([0.3, -0.07, -0.23])
        strips = exact_strips(inputs, class_values[np.array([0, 1, 2, 0])], [0.0, 1.0, 2.0, 3.0])

        result = reconstruct_batch(strips, n=4, class_values=class_values, sample_count=2)
        self.assertEqual(result.count, 2)
        self.assertEqual(result.collisions, 2)
        self.assertEqual(result.sample_count, 2)
        for x in result.recovered_inputs:
            self.assertLessEqual(float(np.min(np.max(np.abs(inputs - x), axis=1))), 1e-9)

    def test_result_rejects_excess_inputs(self):
        with self.assertRaises(ValidationError):
            ReconstructionResult(np.zeros((3, 2)), [None] * 3, [0.0] * 3, [0.0] * 3, sample_count=2)


class TestAlphaCoefficients(unittest.TestCase):
    """Test mixing weights."""

    def test_columns_sum_to_one(self):
        alphas = alpha_coefficients([0.3, -0.1, 0.25, 0.05])
        np.testing.assert_allclose(alphas.sum(axis=0), np.ones(4))
        self.assertTrue(np.all(np.tril(alphas, k=-1) == 0.0))
        self.assertEqual(alphas[0, 0], 1.0)


class TestInferLabel(unittest.TestCase):
    """Test label inference."""

    def test_exact_match(self):
        v = np.array([1.0, 2.0, 3.0])
        self.assertEqual(infer_label(v.mean() - 3.0, v), 2)

    def test_ambiguous(self):
        self.assertIsNone(infer_label(0.5, np.array([1.0, 2.0, 3.0])))

    def test_from_simulated_sample(self):
        params = craft_malicious_params(4, make_config(class_count=5, rng_seed=6))
        params = params.with_first_layer_biases(np.full(8, 50.0))
        v = params.layers[-1].weights[:, 0]
        x = np.array([0.1, -0.4, 0.3, 0.9])
        for y in range(5):
            h = per_sample_bias_grads(params, Batch(x[None, :], np.array([y]), 5))[0, 0]
            self.assertEqual(infer_label(h, v), y)


class TestRoundBound(unittest.TestCase):
    """Test the round-count bound."""

    def test_immediate(self):
        self.assertEqual(round_bound(1.0, 1, 1, 1.0), 1)

    def test_binary_base(self):
        self.assertEqual(round_bound(1024.0, 64, 64, 1.0 / 64.0), 11)

    def test_larger_base(self):
        # base floor(64/16) + 1 = 5, ratio 1e4 / 64
        expected = math.ceil(math.log(1e4 / 64.0, 5)) + 1
        self.assertEqual(round_bound(1e4, 64, 16, 1.0), expected)

    def test_rejects(self):
        with self.assertRaises(ValidationError):
            round_bound(1.0, 4, 4, 0.0)
        with self.assertRaises(ValidationError):
            round_bound(1.0, 2, 4, 0.1)


class TestEpsilonForConfidence(unittest.TestCase):
    """Test the separation gap for a target failure probability."""

    def test_unit(self):
        self.assertAlmostEqual(epsilon_for_confidence(1.0, 1, 1.0 / math.sqrt(2.0 * math.pi)), 1.0, places=12)

    def test_value(self):
        self.assertAlmostEqual(epsilon_for_confidence(0.5, 10, 0.01), 1.2533141373155e-4, places=15)

    def test_rejects(self):
        with self.assertRaises(ValidationError):
            epsilon_for_confidence(0.0, 4, 0.1)
        with self.assertRaises(ValidationError):
            epsilon_for_confidence(1.0, 4, 1.0)

    def test_projection_pairs_separated(self):
        rng = np.random.default_rng(21)
        n, d, delta = 10, 5, 0.1
        points = rng.normal(size=(n, d))
        diffs = points[:, None, :] - points[None, :, :]
        distances = np.linalg.norm(diffs, axis=2)[np.triu_indices(n, k=1)]
        eps = epsilon_for_confidence(float(distances.min()), n, delta)

        failures = 0
        for _ in range(1000):
            projections = np.sort(points @ rng.normal(size=d))
            if np.min(np.diff(projections)) < eps:
                failures += 1
        self.assertLessEqual(failures / 1000.0, delta)


class TestHyperplaneAttack(unittest.TestCase):
    """Test the full attack against a simulated client."""

    def run_gauss(self, n=16, d=8, neurons=64, rounds=20, seed=3, track_isolation=False, client=None, **kwargs):
        batch, bounds = gen_synthetic("gauss", n, d, 4, seed)
        cfg = AttackConfig(
            neurons=neurons, class_count=4, rounds=rounds, feature_bounds=bounds, rng_seed=seed, **kwargs
        )
        attack = HyperplaneAttack(cfg)
        client_config = ClientConfig(batch, **(client or {}))
        return batch, attack, attack.run(client_config, track_isolation=track_isolation)

    def assert_full_recovery(self, batch, result):
        self.assertEqual(result.count, batch.size)
        for x, label in zip(result.recovered_inputs, result.recovered_labels):
            errors = np.max(np.abs(batch.inputs - x), axis=1)
            j = int(np.argmin(errors))
            self.assertLessEqual(float(errors[j]), 1e-6)
            self.assertEqual(label, int(batch.labels[j]))

    def test_gaussian_batch_recovered(self):
        batch, attack, result = self.run_gauss()
        self.assert_full_recovery(batch, result)
        self.assertLessEqual(result.rounds_used, 20)
        self.assertEqual(result.unresolved_intervals, 0)
        self.assertEqual(result.collisions, 0)
        self.assertEqual(result.batch_size_estimate, batch.size)
        self.assertEqual(len(attack.history), result.rounds_used)

    def test_single_input_one_round(self):
        batch, _, result = self.run_gauss(n=1, neurons=4, rounds=1)
        self.assertEqual(result.rounds_used, 1)
        self.assert_full_recovery(batch, result)

    def test_isolation_round_tracked(self):
        _, _, result = self.run_gauss(track_isolation=True)
        self.assertIsNotNone(result.isolation_round)
        self.assertLessEqual(result.isolation_round, result.rounds_used)

    def test_run_attack_matches_class(self):
        batch, bounds = gen_synthetic("cube", 6, 3, 3, 9)
        cfg = AttackConfig(neurons=16, class_count=3, rounds=15, feature_bounds=bounds, rng_seed=1)
        result = run_attack(ClientConfig(batch), cfg)
        self.assert_full_recovery(batch, result)

    def test_other_seed_recovered(self):
        batch, _, result = self.run_gauss(seed=11)
        self.assert_full_recovery(batch, result)
        self.assertEqual(result.sample_count, batch.size)

    def test_hidden_layer_recovered(self):
        batch, attack, result = self.run_gauss(hidden_widths=(8,))
        self.assertEqual(attack.params.depth, 3)
        self.assert_full_recovery(batch, result)

    def test_noise_robust_mode(self):
        for noise_std in (0.0, 1e-3):
            batch, _, result = self.run_gauss(weight_mode="noise_robust", client={"noise_std": noise_std})
            self.assertLessEqual(result.count, batch.size)
            self.assertLessEqual(result.unresolved_intervals, batch.size)
            stats = match_reconstructions(batch, result.recovered_inputs)
            self.assertEqual(stats.n_recovered_exact, batch.size)

    def test_local_steps_robust_mode(self):
        batch, attack, result = self.run_gauss(
            n=8, d=6, neurons=32, rounds=8, weight_mode="local_steps_robust",
            client={"mode": LocalSteps(2, 4, 1e-3)}
        )
        self.assertGreater(len(attack.history), 0)
        self.assertLessEqual(result.count, 8)
        self.assertLessEqual(result.unresolved_intervals, 8)

    def test_noisy_client_stays_within_batch(self):
        batch, _, result = self.run_gauss(client={"noise_std": 1e-3})
        self.assertLessEqual(result.count, batch.size)
        self.assertLessEqual(result.unresolved_intervals, batch.size)
        self.assertEqual(result.sample_count, batch.size)

    def test_noise_robust_beats_trap_weights(self):
        batch, bounds = gen_synthetic("gauss", 16, 8, 4, 5)
        hp_fractions, cah_fractions = [], []
        for noise_std in (0.0, 1e-4, 1e-3):
            client = ClientConfig(batch, noise_std=noise_std, rng_seed=5)
            cfg = AttackConfig(
                neurons=64, class_count=4, rounds=20, feature_bounds=bounds, weight_mode="noise_robust", rng_seed=5
            )
            result = run_attack(client, cfg)
            hp_fractions.append(match_reconstructions(batch, result.recovered_inputs).fraction)
            cah = run_cah_attack(client, CahConfig.for_modality("tabular", neurons=64, class_count=4))
            cah_fractions.append(cah.count / batch.size)

        self.assertTrue(all(a >= b for a, b in zip(hp_fractions, hp_fractions[1:])))
        for hp, cah in zip(hp_fractions, cah_fractions):
            self.assertGreaterEqual(hp, cah)
        self.assertGreater(hp_fractions[-1], cah_fractions[-1])

    def test_isolation_within_round_bound(self):
        within = 0
        for seed in range(20):
            batch, attack, result = self.run_gauss(n=8, d=4, neurons=32, rounds=30, seed=seed, track_isolation=True)
            bounds = gen_synthetic("gauss", 8, 4, 4, seed)[1]
            w = attack.params.layers[0].weights[0]
            _, predicted = predict_rounds(batch.inputs, w, bounds, 32)
            if result.isolation_round is not None and predicted is not None and result.isolation_round <= predicted:
                within += 1
        self.assertGreaterEqual(within, 19)

    def test_dimension_mismatch(self):
        batch, _ = gen_synthetic("gauss", 4, 3, 3, 0)
        with self.assertRaises(ValidationError):
            HyperplaneAttack(make_config(d=5)).run(ClientConfig(batch))

    def test_malformed_response(self):
        batch, bounds = gen_synthetic("gauss", 4, 3, 3, 0)
        cfg = AttackConfig(neurons=8, class_count=3, rounds=3, feature_bounds=bounds)
        with patch("fedsgd_leakage.attack.FederatedClient") as client_cls:
            client_cls.return_value.respond.return_value.matches.return_value = False
            with self.assertRaises(ProtocolError):
                HyperplaneAttack(cfg).run(ClientConfig(batch))


if __name__ == '__main__':
    unittest.main(verbosity=2)
