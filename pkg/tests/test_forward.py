"""Benchmark construction, whitening and scaling."""

import numpy as np
import pytest

from hbsparse.forward import (
    DeconvolutionConfig,
    InverseProblem,
    apply_scaled_forward,
    build_problem,
    difference_matrix,
    increments_to_signal,
    kernel_eval,
    sensitivity_vartheta,
    signal_to_increments,
)

import oracles


class TestKernel:
    def test_peak(self):
        assert kernel_eval(0.0, DeconvolutionConfig()) == pytest.approx(6.2)

    def test_one_width_out(self):
        cfg = DeconvolutionConfig()
        assert kernel_eval(cfg.kernel_width, cfg) == pytest.approx(
            6.2 * np.exp(-0.5), rel=1e-12
        )

    def test_far_tail_vanishes(self):
        cfg = DeconvolutionConfig()
        assert kernel_eval(10 * cfg.kernel_width, cfg) < 2e-21


class TestConfigValidation:
    def test_default_is_valid(self):
        DeconvolutionConfig().validate()

    def test_observation_layout_must_fit(self):
        with pytest.raises(ValueError, match="obs_stride"):
            DeconvolutionConfig(n=64, m=22, obs_stride=6).validate()

    def test_fine_mesh_at_least_coarse(self):
        with pytest.raises(ValueError, match="fine_n"):
            DeconvolutionConfig(fine_n=64).validate()

    def test_jump_locations_increasing(self):
        with pytest.raises(ValueError, match="increasing"):
            DeconvolutionConfig(signal_jumps=((0.5, 1.0), (0.2, 1.0))).validate()

    def test_jump_locations_interior(self):
        with pytest.raises(ValueError, match="inside"):
            DeconvolutionConfig(signal_jumps=((1.5, 1.0),)).validate()

    def test_observation_times_hit_every_sixth_node(self):
        cfg = DeconvolutionConfig()
        nodes = cfg.coarse_nodes()
        times = cfg.observation_times()
        assert times.shape == (22,)
        np.testing.assert_allclose(times, nodes[::6][:22])
        # probe positions used by the diagnostics default
        assert nodes[29] == pytest.approx(0.23, abs=0.005)
        assert nodes[49] == pytest.approx(0.39, abs=0.005)


class TestBuildProblem:
    def test_zero_signal_gives_pure_noise(self):
        cfg = DeconvolutionConfig(signal_jumps=(), rng_seed=5)
        prob, truth = build_problem(cfg)
        np.testing.assert_array_equal(truth.b_noiseless, 0.0)
        noise = prob.b_hat * prob.sigma
        assert np.std(noise) == pytest.approx(cfg.sigma, rel=0.5)

    def test_peak_matrix_entry(self):
        prob, _ = build_problem(DeconvolutionConfig())
        # undo the increment map and whitening to recover the raw matrix
        a_raw = (prob.a_hat @ prob.diff_mat) * prob.sigma
        assert a_raw.max() == pytest.approx(6.2 / 128, rel=1e-12)

    def test_noiseless_data_matches_double_loop(self):
        cfg = DeconvolutionConfig(fine_n=500)
        _, truth = build_problem(cfg)
        want = oracles.dense_fine_grid_convolution(cfg)
        np.testing.assert_allclose(truth.b_noiseless, want, atol=1e-12)

    def test_same_grid_inverse_crime_residual(self):
        cfg = DeconvolutionConfig(fine_n=128)
        prob, truth = build_problem(cfg)
        resid = truth.b_noiseless / cfg.sigma - prob.a_hat @ truth.x_true
        assert np.abs(resid).max() <= 1e-10

    def test_deterministic_given_seed(self):
        a = build_problem(DeconvolutionConfig(rng_seed=3))[0]
        b = build_problem(DeconvolutionConfig(rng_seed=3))[0]
        np.testing.assert_array_equal(a.b_hat, b.b_hat)
        np.testing.assert_array_equal(a.a_hat, b.a_hat)

    def test_noise_std_over_many_seeds(self):
        cfg0 = DeconvolutionConfig()
        _, truth = build_problem(cfg0)
        draws = []
        for seed in range(10_000):
            prob, _ = build_problem(DeconvolutionConfig(rng_seed=seed))
            draws.append(prob.b_hat * prob.sigma - truth.b_noiseless)
        pooled = np.concatenate(draws)
        assert np.std(pooled) == pytest.approx(cfg0.sigma, rel=0.02)


class TestIncrementMap:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(128)
        np.testing.assert_allclose(
            increments_to_signal(signal_to_increments(z)), z, atol=1e-12
        )

    def test_matrix_agrees_with_cumsum(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(32)
        lmat = difference_matrix(32)
        np.testing.assert_allclose(
            np.linalg.solve(lmat, x), increments_to_signal(x), atol=1e-12
        )

    def test_ground_truth_consistency(self):
        _, truth = build_problem(DeconvolutionConfig())
        np.testing.assert_allclose(
            increments_to_signal(truth.x_true), truth.z_true, atol=1e-12
        )


class TestScaledForward:
    def test_zero_input(self):
        prob, _ = build_problem(DeconvolutionConfig())
        np.testing.assert_array_equal(
            apply_scaled_forward(np.zeros(prob.n), prob, 1.0), 0.0
        )

    def test_identity_scaling(self):
        prob, _ = build_problem(DeconvolutionConfig())
        rng = np.random.default_rng(2)
        xi = rng.standard_normal(prob.n)
        np.testing.assert_allclose(
            apply_scaled_forward(xi, prob, 1.0), prob.a_hat @ xi, atol=1e-12
        )

    def test_scalar_factor(self):
        prob, _ = build_problem(DeconvolutionConfig())
        rng = np.random.default_rng(3)
        xi = rng.standard_normal(prob.n)
        np.testing.assert_allclose(
            apply_scaled_forward(xi, prob, 4.0),
            2.0 * (prob.a_hat @ xi),
            rtol=1e-12,
        )

    def test_dimension_mismatch(self):
        prob, _ = build_problem(DeconvolutionConfig())
        with pytest.raises(ValueError):
            apply_scaled_forward(np.zeros(3), prob, 1.0)


class TestSensitivityScaling:
    def test_unit_columns(self):
        prob = InverseProblem.from_matrices(np.eye(3), np.zeros(3))
        np.testing.assert_allclose(sensitivity_vartheta(prob, 1.0), 1.0)

    def test_diagonal_two_by_two(self):
        prob = InverseProblem.from_matrices(np.diag([1.0, 2.0]), np.zeros(2))
        np.testing.assert_allclose(
            sensitivity_vartheta(prob, 4.0), [4.0, 1.0], rtol=1e-14
        )

    def test_benchmark_identity(self):
        prob, _ = build_problem(DeconvolutionConfig())
        vt = sensitivity_vartheta(prob, 2.5)
        colsq = np.sum(prob.a_hat**2, axis=0)
        np.testing.assert_allclose(vt * colsq, 2.5, rtol=1e-12)

    def test_zero_column_reported(self):
        mat = np.ones((3, 4))
        mat[:, 2] = 0.0
        prob = InverseProblem.from_matrices(mat, np.zeros(3))
        with pytest.raises(ZeroDivisionError, match="index 2"):
            sensitivity_vartheta(prob, 1.0)
