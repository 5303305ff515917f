"""Numerical kernels: logistic IRLS, least squares, quadrature, poly bases."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynmte.dgp import DgpSpec, simulate
from dynmte.errors import SeparationError, SingularDesignError, ValidationError
from dynmte.numkit import (
    PolyBasis,
    fit_logistic,
    gauss_legendre,
    sigmoid,
    solve_least_squares,
)
from dynmte.streams import substream


class TestSigmoid:
    def test_center(self):
        assert sigmoid(np.array(0.0)) == 0.5

    def test_extreme_arguments_do_not_overflow(self):
        out = sigmoid(np.array([-800.0, 800.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == 0.0
        assert out[1] == 1.0

    def test_symmetry(self):
        t = np.linspace(-20, 20, 41)
        np.testing.assert_allclose(sigmoid(-t), 1.0 - sigmoid(t), atol=1e-15)


class TestFitLogistic:
    def test_intercept_only_half_ones(self):
        design = np.ones((50, 1))
        response = np.repeat([0.0, 1.0], 25)
        fit = fit_logistic(design, response)
        assert fit.converged
        assert abs(fit.coef[0]) <= 1e-8

    def test_recovers_first_period_propensity_coefficients(self):
        spec = DgpSpec(n=100_000)
        data = simulate(spec, substream(0, 0))
        xc = data.x - np.array([spec.p_x1, spec.p_x2, spec.x3_mean])
        design = np.column_stack([np.ones(data.n), data.z[:, 0], xc])
        fit = fit_logistic(design, data.d[:, 0])
        truth = np.array([0.0, 1.0, *spec.alpha])
        assert fit.converged
        assert np.max(np.abs(fit.coef - truth)) <= 0.05

    def test_all_ones_response_raises_separation(self):
        rng = substream(1, 0).generator()
        design = np.column_stack([np.ones(40), rng.normal(size=40)])
        with pytest.raises(SeparationError):
            fit_logistic(design, np.ones(40))

    def test_separated_covariate_raises(self):
        t = np.linspace(-2.0, 2.0, 60)
        design = np.column_stack([np.ones(60), t])
        with pytest.raises(SeparationError):
            fit_logistic(design, (t > 0).astype(float))

    def test_duplicate_column_raises_singular(self):
        rng = substream(2, 0).generator()
        z = rng.normal(size=80)
        design = np.column_stack([np.ones(80), z, z])
        response = (rng.random(80) < sigmoid(z)).astype(float)
        with pytest.raises(SingularDesignError):
            fit_logistic(design, response)

    def test_zero_column_rejected(self):
        design = np.column_stack([np.ones(30), np.zeros(30)])
        response = np.repeat([0.0, 1.0], 15)
        with pytest.raises(ValidationError, match="column 1"):
            fit_logistic(design, response)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            fit_logistic(np.ones((10, 2)), np.zeros(9))

    def test_loglik_nondecreasing_across_iterations(self):
        rng = substream(3, 0).generator()
        design = np.column_stack([np.ones(200), rng.normal(size=(200, 2))])
        eta = design @ np.array([0.3, -0.8, 0.5])
        response = (rng.random(200) < sigmoid(eta)).astype(float)
        logliks = [
            fit_logistic(design, response, max_iter=k).loglik for k in range(1, 8)
        ]
        # nondecreasing up to the accepted float-noise slack
        assert all(
            b >= a - 1e-9 * (1.0 + abs(a)) for a, b in zip(logliks, logliks[1:])
        )

    def test_converged_fit_has_small_gradient(self):
        rng = substream(4, 0).generator()
        design = np.column_stack([np.ones(500), rng.normal(size=(500, 2))])
        eta = design @ np.array([-0.2, 0.6, -0.4])
        response = (rng.random(500) < sigmoid(eta)).astype(float)
        fit = fit_logistic(design, response)
        assert fit.converged
        grad = design.T @ (response - fit.predict(design))
        assert np.max(np.abs(grad)) <= 1e-8

    def test_predictions_strictly_inside_unit_interval(self):
        rng = substream(5, 0).generator()
        design = np.column_stack([np.ones(300), rng.normal(size=300)])
        response = (rng.random(300) < 0.5).astype(float)
        p = fit_logistic(design, response).predict(design)
        assert np.all(p > 0.0) and np.all(p < 1.0)


class TestSolveLeastSquares:
    def test_identity_design(self):
        fit = solve_least_squares(np.eye(3), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(fit.coef, [1.0, 2.0, 3.0], atol=1e-12)
        assert fit.rank == 3
        assert not fit.rank_deficient

    def test_duplicate_column_flags_rank_and_keeps_projection(self):
        rng = substream(6, 0).generator()
        z = rng.normal(size=50)
        design = np.column_stack([np.ones(50), z, z])
        response = 2.0 + 3.0 * z
        fit = solve_least_squares(design, response)
        assert fit.rank_deficient
        assert fit.rank == 2
        np.testing.assert_allclose(design @ fit.coef, response, atol=1e-10)

    def test_matches_normal_equations_oracle(self):
        rng = substream(7, 0).generator()
        design = rng.normal(size=(100, 5))
        response = rng.normal(size=100)
        fit = solve_least_squares(design, response)
        oracle = np.linalg.solve(design.T @ design, design.T @ response)
        assert np.max(np.abs(fit.coef - oracle)) <= 1e-8

    def test_residual_orthogonal_to_columns(self):
        rng = substream(8, 0).generator()
        design = rng.normal(size=(80, 4))
        response = rng.normal(size=80)
        fit = solve_least_squares(design, response)
        resid = response - design @ fit.coef
        scale = np.max(np.abs(design.T @ response)) + 1.0
        assert np.max(np.abs(design.T @ resid)) <= 1e-8 * scale

    def test_underdetermined_rejected(self):
        with pytest.raises(ValidationError):
            solve_least_squares(np.ones((2, 3)), np.ones(2))


class TestGaussLegendre:
    @pytest.mark.parametrize("n_nodes,a,b", [(1, 0.0, 1.0), (8, -2.0, 5.0), (64, 0.0, 0.25)])
    def test_weights_sum_to_interval_length(self, n_nodes, a, b):
        _, w = gauss_legendre(n_nodes, a, b)
        assert abs(np.sum(w) - (b - a)) <= 1e-12 * max(1.0, b - a)

    def test_constant_integral(self):
        x, w = gauss_legendre(3)
        assert abs(np.sum(w * np.ones_like(x)) - 1.0) <= 1e-14

    def test_linear_integral_two_nodes(self):
        x, w = gauss_legendre(2)
        assert abs(np.sum(w * x) - 0.5) <= 1e-14

    def test_degree_seven_integral_four_nodes(self):
        x, w = gauss_legendre(4)
        assert abs(np.sum(w * x**7) - 0.125) <= 1e-12

    def test_nodes_inside_interval(self):
        x, _ = gauss_legendre(16, 0.2, 0.9)
        assert np.all(x > 0.2) and np.all(x < 0.9)

    @pytest.mark.parametrize("bad", [0, -3])
    def test_bad_node_count_rejected(self, bad):
        with pytest.raises(ValidationError):
            gauss_legendre(bad)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValidationError):
            gauss_legendre(4, 1.0, 1.0)

    @given(
        n_nodes=st.integers(min_value=1, max_value=12),
        data=st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_exact_for_polynomials_up_to_degree_2n_minus_1(self, n_nodes, data):
        degree = data.draw(st.integers(min_value=0, max_value=2 * n_nodes - 1))
        coefs = data.draw(
            st.lists(
                st.floats(min_value=-4.0, max_value=4.0),
                min_size=degree + 1,
                max_size=degree + 1,
            )
        )
        x, w = gauss_legendre(n_nodes)
        approx = float(np.sum(w * np.polynomial.polynomial.polyval(x, coefs)))
        exact = float(sum(c / (k + 1) for k, c in enumerate(coefs)))
        assert abs(approx - exact) <= 1e-12 * (1.0 + abs(exact))


class TestPolyBasis:
    def test_term_count(self):
        for degree in range(5):
            assert PolyBasis(degree).size == (degree + 1) ** 2

    def test_negative_degree_rejected(self):
        with pytest.raises(ValidationError):
            PolyBasis(-1)

    def test_degree_one_eval_layout(self):
        basis = PolyBasis(1)
        assert basis.terms == ((0, 0), (0, 1), (1, 0), (1, 1))
        out = basis.eval(0.3, 0.7)
        np.testing.assert_allclose(out, [1.0, 0.7, 0.3, 0.21], atol=1e-15)

    def test_eval_broadcasts_over_arrays(self):
        basis = PolyBasis(2)
        v1 = np.linspace(0.1, 0.9, 7)
        out = basis.eval(v1, 0.5)
        assert out.shape == (7, 9)

    def test_constant_term_antiderivative_treated_treated(self):
        basis = PolyBasis(0)
        out = basis.antiderivative(0.4, 0.6, (1, 1))
        assert abs(out[0] - 0.24) <= 1e-15

    def test_constant_term_antiderivative_untreated_treated(self):
        basis = PolyBasis(0)
        out = basis.antiderivative(0.4, 0.6, (0, 1))
        assert abs(out[0] - 0.36) <= 1e-15

    def test_bilinear_partial_along_axis_one(self):
        basis = PolyBasis(1)
        idx = basis.terms.index((1, 1))
        assert abs(basis.partial(0.5, 0.5, axis=1)[idx] - 0.5) <= 1e-15

    def test_partial_matches_finite_difference(self):
        basis = PolyBasis(3)
        v1, v2, h = 0.5, 0.5, 1e-5
        analytic = basis.partial(v1, v2, axis=1)
        fd = (basis.eval(v1 + h, v2) - basis.eval(v1 - h, v2)) / (2 * h)
        nonzero = np.abs(analytic) > 1e-12
        rel = np.abs(fd[nonzero] - analytic[nonzero]) / np.abs(analytic[nonzero])
        assert np.max(rel) <= 1e-8

    def test_bad_axis_rejected(self):
        with pytest.raises(ValidationError):
            PolyBasis(1).partial(0.5, 0.5, axis=3)

    def test_cross_partial_of_bilinear_term(self):
        basis = PolyBasis(1)
        idx = basis.terms.index((1, 1))
        assert abs(basis.cross_partial(0.5, 0.5)[idx] - 1.0) <= 1e-15

    @pytest.mark.parametrize("seq", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_antideriv_cross_partial_equals_signed_eval(self, seq):
        basis = PolyBasis(3)
        rng = substream(9, 0).generator()
        points = rng.random((10, 2))
        sign = (-1.0) ** (2 - sum(seq))
        for p1, p2 in points:
            lhs = basis.antideriv_cross_partial(p1, p2, seq)
            rhs = sign * basis.eval(p1, p2)
            rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
            assert np.max(rel) <= 1e-10

    def test_box_integral_matches_quadrature(self):
        basis = PolyBasis(4)
        x, w = gauss_legendre(8)
        v1, v2 = np.meshgrid(x, x, indexing="ij")
        vals = basis.eval(v1.ravel(), v2.ravel())
        weights = np.outer(w, w).ravel()
        quad = weights @ vals
        assert np.max(np.abs(quad - basis.box_integral())) <= 1e-12

    def test_antiderivative_over_full_square_matches_box_integral(self):
        basis = PolyBasis(3)
        full = basis.antiderivative(1.0, 1.0, (1, 1))
        np.testing.assert_allclose(full, basis.box_integral(), atol=1e-15)

    @given(
        degree=st.integers(min_value=0, max_value=4),
        p1=st.floats(min_value=0.01, max_value=0.99),
        p2=st.floats(min_value=0.01, max_value=0.99),
        d1=st.integers(min_value=0, max_value=1),
        d2=st.integers(min_value=0, max_value=1),
    )
    @settings(max_examples=80, deadline=None)
    def test_sign_rule_duality_property(self, degree, p1, p2, d1, d2):
        basis = PolyBasis(degree)
        sign = (-1.0) ** ((1 - d1) + (1 - d2))
        lhs = basis.antideriv_cross_partial(p1, p2, (d1, d2))
        rhs = sign * basis.eval(p1, p2)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))

    @given(
        degree=st.integers(min_value=0, max_value=3),
        p1=st.floats(min_value=0.0, max_value=1.0),
        p2=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_treated_and_untreated_pieces_sum_to_full_integral(self, degree, p1, p2):
        basis = PolyBasis(degree)
        total = sum(
            basis.antiderivative(p1, p2, seq)
            for seq in [(0, 0), (0, 1), (1, 0), (1, 1)]
        )
        assert np.max(np.abs(total - basis.box_integral())) <= 1e-12
