import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latquant.lattice import LatticeBasis, babai_nearest_plane, round_half_even
from latquant.linalg import RankDeficient, invert_lower_triangular, ql_decompose
from latquant.quantize import (
    QuantConfig,
    cross_layer_target,
    gptq_quantize,
    gptq_quantize_recursive,
    quantize_matrix,
    regularize,
    resolve_mu,
    scaled_quantize,
)


class TestQuantConfig:
    def test_defaults(self):
        cfg = QuantConfig()
        assert cfg.mu == 0.0 and cfg.alpha == 1.0 and cfg.algorithm == "gptq"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mu": -1.0},
            {"mu": "later"},
            {"alpha": 0.0},
            {"alpha": -2.0},
            {"rounding": "half-up"},
            {"clamp": (3, 1)},
            {"algorithm": "rounding"},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            QuantConfig(**kwargs)


class TestRegularize:
    def test_no_data_at_all(self):
        out = regularize(np.zeros((0, 2)), 1.0)
        np.testing.assert_array_equal(out, np.eye(2))

    def test_gram_matrix_identity(self, make_instance):
        x, _ = make_instance(9)
        mu = 0.37
        xr = regularize(x, mu)
        lhs = xr.T @ xr
        rhs = x.T @ x + mu ** 2 * np.eye(x.shape[1])
        assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()

    def test_fixes_rank_deficiency(self):
        xr = regularize(np.array([[1.0, 1.0]]), 0.5)
        assert xr.shape == (3, 2)
        ql_decompose(xr)  # must not raise

    def test_requires_positive_mu(self):
        with pytest.raises(ValueError):
            regularize(np.eye(2), 0.0)


class TestResolveMu:
    def test_auto_uses_mean_gram_diagonal(self):
        x = np.array([[2.0, 0.0], [0.0, 1.0]])
        # diag(X^T X) = (4, 1), mean 2.5
        assert resolve_mu(x, "auto") == pytest.approx(np.sqrt(0.025), rel=1e-12)

    def test_passthrough(self):
        assert resolve_mu(np.eye(2), 0.25) == 0.25


class TestGptq:
    def test_identity_is_elementwise_rounding(self):
        res = gptq_quantize(np.eye(4), np.array([0.2, -0.7, 3.5, 1.1]))
        np.testing.assert_array_equal(res.v, [0, -1, 4, 1])  # 3.5 -> 4: ties to even
        assert res.error_l2 == pytest.approx(np.sqrt(0.04 + 0.09 + 0.25 + 0.01), rel=1e-12)

    def test_worked_instance_matches_greedy_lattice_sweep(self, worked_basis):
        w = np.array([-1.2, 0.8])
        res = gptq_quantize(worked_basis, w)
        np.testing.assert_array_equal(res.v, [-1, 1])
        lattice = babai_nearest_plane(LatticeBasis(worked_basis), w)
        np.testing.assert_array_equal(res.v, lattice.v)
        assert res.error_l2 == pytest.approx(lattice.error_l2, rel=1e-12)

    def test_huge_mu_degenerates_to_plain_rounding(self, make_instance):
        x, w = make_instance(17)
        cfg = QuantConfig(mu=1e8 * np.abs(x).max())
        res = gptq_quantize(x, w, cfg)
        np.testing.assert_array_equal(res.v, np.rint(w).astype(np.int64))

    def test_huge_mu_works_on_rank_deficient_input(self):
        x = np.array([[1.0, 1.0, 1.0]])  # k = 1 < n = 3
        w = np.array([0.4, 1.6, -2.2])
        res = gptq_quantize(x, w, QuantConfig(mu=1e8))
        np.testing.assert_array_equal(res.v, [0, 2, -2])

    def test_rank_deficient_without_mu_raises(self):
        x = np.array([[1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(RankDeficient, match="regularize"):
            gptq_quantize(x, np.array([0.3, 0.4]))

    def test_stabilized_coordinates_are_exact(self, make_instance):
        x, w = make_instance(23)
        res = gptq_quantize(x, w)
        n = w.size
        history = res.w_history
        assert len(history) == n + 1
        for j in range(n + 1):
            for i in range(min(j, n)):
                assert history[j][i] == float(res.v[i])  # exact, no tolerance
        np.testing.assert_array_equal(history[-1], res.v.astype(float))

    def test_regularized_error_reported_separately(self, make_instance):
        x, w = make_instance(29)
        res = gptq_quantize(x, w, QuantConfig(mu=0.5))
        xr = regularize(x, 0.5)
        diff = w - res.v
        assert res.error_l2 == pytest.approx(np.linalg.norm(x @ diff), rel=1e-12)
        assert res.error_regularized == pytest.approx(np.linalg.norm(xr @ diff), rel=1e-12)
        assert res.error_regularized >= res.error_l2


class TestRecursiveVariants:
    def test_identity(self):
        for variant in ("gptq_rec", "babai_proj_rec"):
            res = gptq_quantize_recursive(np.eye(2), np.array([0.4, 1.6]), variant=variant)
            np.testing.assert_array_equal(res.v, [0, 2])

    def test_worked_instance_first_coefficient(self, worked_basis):
        w = np.array([-1.2, 0.8])
        res = gptq_quantize_recursive(worked_basis, w, variant="babai_proj_rec")
        np.testing.assert_array_equal(res.v, [-1, 1])
        # the data-space coefficient <t, Q_1>/L_11 collapses to w_1
        assert res.step_coeffs[0] == pytest.approx(w[0], abs=1e-12)

    @pytest.mark.parametrize("seed", range(60))
    def test_agrees_with_sequential_loop(self, seed, make_instance):
        x, w = make_instance(seed, n_max=6, k_extra=6)
        ref = gptq_quantize(x, w)
        for variant in ("gptq_rec", "babai_proj_rec"):
            rec = gptq_quantize_recursive(x, w, variant=variant)
            if not ref.fragile and not rec.fragile:
                np.testing.assert_array_equal(rec.v, ref.v)

    def test_rejects_unknown_variant(self):
        with pytest.raises(ValueError):
            gptq_quantize_recursive(np.eye(2), np.zeros(2), variant="babai")


class TestStructuralIdentities:
    @pytest.mark.parametrize("seed", range(20))
    def test_first_coefficient_identity(self, seed, make_instance):
        # <X w, Q_1> / L_11 == w_1
        x, w = make_instance(seed)
        f = ql_decompose(x)
        coeff = (x @ w) @ f.q[:, 0] / f.l[0, 0]
        assert abs(coeff - w[0]) <= 1e-10

    @pytest.mark.parametrize("seed", range(20))
    def test_suffix_factor_identity(self, seed, make_instance):
        # inverting the trailing block of L equals the trailing block of L^-1
        x, _ = make_instance(seed, n_max=8)
        f = ql_decompose(x)
        if f.l.shape[0] < 2:
            return
        lhs = invert_lower_triangular(f.l[1:, 1:])
        rhs = f.l_inv[1:, 1:]
        assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())

    @pytest.mark.parametrize("seed", range(20))
    def test_suffix_ql_is_suffix_of_ql(self, seed, make_instance):
        x, _ = make_instance(seed, n_max=8)
        if x.shape[1] < 2:
            return
        f = ql_decompose(x)
        f_suffix = ql_decompose(x[:, 1:])
        np.testing.assert_allclose(f_suffix.q, f.q[:, 1:], atol=1e-9)
        np.testing.assert_allclose(f_suffix.l, f.l[1:, 1:], atol=1e-9)

    @pytest.mark.parametrize("seed", range(20))
    def test_recursion_step_shifts_target_along_q1(self, seed, make_instance):
        # the suffix product differs from (X w - v_1 X_1) only along Q_1,
        # with coefficient (v_1 - w_1) / L~_11
        x, w = make_instance(seed)
        f = ql_decompose(x)
        lt = f.l_inv
        v1 = round_half_even(w[0])
        kappa = (v1 - w[0]) / lt[0, 0]
        w_next = w + kappa * lt[:, 0]
        d = x[:, 1:] @ w_next[1:] - (x @ w - v1 * x[:, 0])
        q1 = f.q[:, 0]
        parallel = float(d @ q1)
        orthogonal = d - parallel * q1
        assert np.linalg.norm(orthogonal) <= 1e-9 * np.linalg.norm(x)
        assert abs(parallel - kappa) <= 1e-9


class TestScaledQuantize:
    def test_alpha_one_matches_plain(self, make_instance):
        x, w = make_instance(31)
        a = scaled_quantize(x, w, QuantConfig(alpha=1.0))
        b = gptq_quantize(x, w)
        np.testing.assert_array_equal(a.v, b.v)
        assert a.error_l2 == pytest.approx(b.error_l2, rel=1e-12)

    def test_half_grid(self):
        res = scaled_quantize(np.eye(2), np.array([0.3, 0.8]), QuantConfig(alpha=0.5))
        np.testing.assert_array_equal(res.v, [1, 2])
        np.testing.assert_allclose(res.values, [0.5, 1.0], atol=1e-15)

    @given(st.integers(0, 10_000), st.floats(0.01, 100.0))
    @settings(max_examples=60, deadline=None)
    def test_scale_invariance(self, seed, c):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        k = n + int(rng.integers(0, 5))
        x = rng.uniform(-1.0, 1.0, (k, n))
        w = rng.uniform(-2.0, 2.0, n)
        alpha = 0.25
        base = scaled_quantize(x, w, QuantConfig(alpha=alpha))
        scaled = scaled_quantize(x, c * w, QuantConfig(alpha=c * alpha))
        if not base.fragile and not scaled.fragile:
            np.testing.assert_array_equal(base.v, scaled.v)

    def test_algorithm_dispatch(self, make_instance):
        x, w = make_instance(37)
        outs = {
            algo: scaled_quantize(x, w, QuantConfig(alpha=0.3, algorithm=algo)).v
            for algo in ("gptq", "gptq_rec", "babai", "babai_proj_rec")
        }
        ref = outs["gptq"]
        for v in outs.values():
            np.testing.assert_array_equal(v, ref)

    def test_clamp_applied_after_run(self):
        res = scaled_quantize(
            np.eye(3), np.array([5.4, -3.9, 0.2]), QuantConfig(clamp=(-2, 2))
        )
        np.testing.assert_array_equal(res.v, [2, -2, 0])
        np.testing.assert_allclose(res.values, [2.0, -2.0, 0.0], atol=1e-15)
        # clamping moved v away from the optimum; error is recomputed
        assert res.error_l2 == pytest.approx(np.linalg.norm([3.4, -1.9, 0.2]), rel=1e-12)


class TestQuantizeMatrix:
    def test_identical_rows_identical_outputs(self, make_instance):
        x, w = make_instance(41)
        weights = np.vstack([w, w, w])
        v, _ = quantize_matrix(weights, x)
        np.testing.assert_array_equal(v[0], v[1])
        np.testing.assert_array_equal(v[0], v[2])

    def test_identity_calibration(self):
        weights = np.array([[0.4, 1.6], [-0.7, 2.2]])
        v, rep = quantize_matrix(weights, np.eye(2), QuantConfig(alpha=1.0))
        np.testing.assert_array_equal(v, np.rint(weights).astype(np.int64))
        assert rep.total_error_l2 == pytest.approx(
            np.linalg.norm(weights - np.rint(weights)), rel=1e-12
        )

    def test_total_error_is_row_sum(self, make_instance):
        rng = np.random.default_rng(43)
        x = rng.uniform(-1.0, 1.0, (8, 3))
        weights = rng.uniform(-2.0, 2.0, (4, 3))
        v, rep = quantize_matrix(weights, x)
        row_errs = [gptq_quantize(x, weights[i]).error_l2 for i in range(4)]
        for i in range(4):
            np.testing.assert_array_equal(v[i], gptq_quantize(x, weights[i]).v)
        assert rep.total_error_l2 ** 2 == pytest.approx(
            sum(e ** 2 for e in row_errs), rel=1e-12
        )

    def test_thread_count_does_not_change_output(self):
        rng = np.random.default_rng(47)
        x = rng.uniform(-1.0, 1.0, (10, 4))
        weights = rng.uniform(-2.0, 2.0, (16, 4))
        v1, rep1 = quantize_matrix(weights, x, threads=1)
        v4, rep4 = quantize_matrix(weights, x, threads=4)
        np.testing.assert_array_equal(v1, v4)
        np.testing.assert_array_equal(rep1.row_errors, rep4.row_errors)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="columns"):
            quantize_matrix(np.zeros((2, 3)), np.eye(2))


class TestCrossLayer:
    def test_same_lattice_reduces_to_single_layer(self, make_instance):
        x, w = make_instance(51)
        out = cross_layer_target(x, x, w)
        ref = gptq_quantize(x, w)
        np.testing.assert_array_equal(out.result.v, ref.v)
        assert np.abs(out.w_hat - w).max() <= 1e-10
        assert out.routes_agree
        assert out.off_span_residual <= 1e-10

    def test_rescaled_lattice(self):
        out = cross_layer_target(np.eye(2), 2.0 * np.eye(2), np.array([0.4, 1.6]))
        np.testing.assert_allclose(out.w_hat, [0.2, 0.8], atol=1e-12)
        np.testing.assert_array_equal(out.result.v, [0, 1])

    @pytest.mark.parametrize("seed", range(40))
    def test_route_equality_on_perturbed_lattices(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1.0, 1.0, (8, 3))
        x_hat = x + 0.01 * rng.standard_normal((8, 3))
        w = rng.uniform(-2.0, 2.0, 3)
        out = cross_layer_target(x, x_hat, w)
        assert out.routes_agree
        assert out.off_span_residual > 0  # the target really is off-span

    @pytest.mark.parametrize("seed", range(15))
    def test_route_equality_survives_regularization(self, seed):
        rng = np.random.default_rng(1000 + seed)
        x = rng.uniform(-1.0, 1.0, (6, 4))
        x_hat = x + 0.05 * rng.standard_normal((6, 4))
        w = rng.uniform(-2.0, 2.0, 4)
        out = cross_layer_target(x, x_hat, w, QuantConfig(mu=0.3))
        assert out.routes_agree

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shapes differ"):
            cross_layer_target(np.eye(2), np.eye(3), np.zeros(2))
