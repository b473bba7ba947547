"""Tests for the trust-region LP subproblem: standard-form assembly,
optimality against independent solvers, unboundedness detection, and the
minimum-norm tie-break."""

import numpy as np
import pytest

from scvxkit import (
    SubproblemError,
    TrustRegionSubproblem,
    build_lp,
    linearize,
    solve_min_norm_step,
    solve_subproblem,
)
from scvxkit.subproblem import lp_solve

import oracles


def random_composite(rng, n=None):
    n = n or int(rng.integers(1, 5))
    n_cost = int(rng.integers(1, 4))
    n_eq = int(rng.integers(0, 4))
    n_ineq = int(rng.integers(0, 4))
    dim = n_cost + n_eq + n_ineq
    g0 = rng.normal(size=dim) * 2.0
    a_mat = rng.normal(size=(dim, n))
    weight = float(rng.choice([1.0, 2.0, 5.0, 10.0]))
    return oracles.affine_composite(g0, a_mat, n_cost, n_eq, weight), n_cost, n_eq

class TestBuildLp:
    def test_sizes_and_bounds(self, rng):
        for _ in range(25):
            comp, n_cost, n_eq = random_composite(rng)
            n = comp.g.input_dim
            n_ineq = comp.psi.n_ineq
            lin = linearize(comp, rng.normal(size=n))
            radius = float(rng.uniform(0.1, 3.0))
            lp = build_lp(TrustRegionSubproblem(lin, radius))
            assert lp.n_variables == n + n_eq + n_ineq
            assert lp.n_rows == 2 * n_eq + n_ineq
            assert lp.n_step == n
            assert lp.n_trust_bounds == 2 * n
            np.testing.assert_allclose(lp.lb[:n], -radius)
            np.testing.assert_allclose(lp.ub[:n], radius)
            assert np.all(lp.lb[n:] == 0.0)
            assert np.all(np.isinf(lp.ub[n:]))
            # Aux variable costs all carry the penalty weight.
            np.testing.assert_allclose(lp.c[n:], comp.psi.penalty_weight)

    def test_offset_is_cost_component_sum(self, rng):
        comp, n_cost, _ = random_composite(rng)
        n = comp.g.input_dim
        z = rng.normal(size=n)
        lin = linearize(comp, z)
        lp = build_lp(TrustRegionSubproblem(lin, 1.0))
        assert lp.objective_offset == pytest.approx(lin.g_value[:n_cost].sum(), abs=1e-12)

    def test_model_value_of_matches_linearization(self, rng):
        for _ in range(20):
            comp, _, _ = random_composite(rng)
            n = comp.g.input_dim
            lin = linearize(comp, rng.normal(size=n))
            sub = TrustRegionSubproblem(lin, 1.5)
            lp = build_lp(sub)
            sol = lp_solve(lp)
            step = sol.x[:n]
            # At an optimal vertex the aux variables are tight, so the LP
            # objective equals the true model value at the recovered step.
            assert lp.model_value_of(sol.x) == pytest.approx(lin.model_value(step), abs=1e-8)
            assert sol.objective == pytest.approx(lin.model_value(step), abs=1e-8)

    def test_bad_radius_rejected(self):
        comp, _, _ = random_composite(np.random.default_rng(0))
        lin = linearize(comp, np.zeros(comp.g.input_dim))
        for radius in (0.0, -1.0, np.inf, np.nan):
            with pytest.raises(ValueError):
                TrustRegionSubproblem(lin, radius)


class TestOptimality:
    def test_matches_scipy_on_random_instances(self, rng):
        for _ in range(40):
            comp, n_cost, n_eq = random_composite(rng)
            n = comp.g.input_dim
            z = rng.normal(size=n)
            lin = linearize(comp, z)
            radius = float(rng.uniform(0.2, 2.5))
            sol = solve_subproblem(TrustRegionSubproblem(lin, radius))
            ref = oracles.scipy_model_min(lin.g_value, lin.g_jacobian,
                                          n_cost, n_eq, comp.psi.penalty_weight, radius)
            assert sol.status == "optimal"
            assert sol.model_value == pytest.approx(ref, abs=1e-7)
            assert np.max(np.abs(sol.step)) <= radius + 1e-9

    def test_matches_grid_on_lattice_instances(self, rng):
        for _ in range(20):
            comp, radius = oracles.lattice_model_instance(rng)
            n = comp.g.input_dim
            lin = linearize(comp, np.zeros(n))
            sol = solve_subproblem(TrustRegionSubproblem(lin, radius))
            grid_min, _ = oracles.model_min_on_grid(
                lin.g_value, lin.g_jacobian, comp.psi.n_cost, comp.psi.n_eq,
                comp.psi.penalty_weight, radius)
            assert sol.model_value == pytest.approx(grid_min, abs=1e-9)

    def test_predicted_decrease_never_negative(self, rng):
        for _ in range(30):
            comp, _, _ = random_composite(rng)
            n = comp.g.input_dim
            lin = linearize(comp, rng.normal(size=n))
            sol = solve_subproblem(TrustRegionSubproblem(lin, float(rng.uniform(0.1, 2.0))))
            assert sol.predicted_decrease >= -1e-9

    def test_stationary_point_of_sharp_abs(self):
        # J = 2|z| at its minimizer: the zero step is optimal at any radius.
        comp = oracles.abs_composite(2.0)
        lin = linearize(comp, np.zeros(1))
        sol = solve_subproblem(TrustRegionSubproblem(lin, 5.0))
        assert sol.predicted_decrease == pytest.approx(0.0, abs=1e-10)
        assert sol.model_value == pytest.approx(0.0, abs=1e-10)

    def test_linear_cost_hits_box_corner(self):
        comp = oracles.linear_composite([3.0, -4.0])
        lin = linearize(comp, np.array([0.5, -0.5]))
        sol = solve_subproblem(TrustRegionSubproblem(lin, 1.0))
        np.testing.assert_allclose(sol.step, [-1.0, 1.0], atol=1e-9)
        # One unit of trust region buys the 1-norm of the gradient.
        assert sol.predicted_decrease == pytest.approx(7.0, abs=1e-9)


class TestUnboundedDetection:
    def test_linear_model_flagged_unbounded(self):
        comp = oracles.linear_composite([1.0])
        lin = linearize(comp, np.zeros(1))
        sub = TrustRegionSubproblem(lin, 1.0, radius_infinite=True)
        sol = solve_subproblem(sub)
        assert sol.status == "unbounded"
        # The optimizer was pushed at least half way into the huge box.
        assert sol.predicted_decrease >= 0.5 * sub.effective_radius

    def test_sharp_model_stays_optimal(self):
        comp = oracles.abs_composite(2.0)
        lin = linearize(comp, np.zeros(1))
        sol = solve_subproblem(TrustRegionSubproblem(lin, 1.0, radius_infinite=True))
        assert sol.status == "optimal"
        assert np.max(np.abs(sol.step)) < 1e-6

    def test_quasi_infinite_radius_scales_with_base_point(self):
        comp = oracles.abs_composite(2.0)
        near = TrustRegionSubproblem(linearize(comp, np.zeros(1)), 1.0, radius_infinite=True)
        far = TrustRegionSubproblem(linearize(comp, np.array([50.0])), 1.0, radius_infinite=True)
        assert far.effective_radius > near.effective_radius
        assert near.effective_radius >= 1e6


class TestMinNormStep:
    def test_flat_model_returns_zero_step(self, rng):
        # Constant map: every step is optimal, only the zero step is minimal.
        comp = oracles.affine_composite([1.0], np.zeros((1, 3)), 1, 0, 1.0)
        lin = linearize(comp, rng.normal(size=3))
        sub = TrustRegionSubproblem(lin, 2.0)
        sol = solve_min_norm_step(sub)
        assert sol.status == "optimal"
        assert np.max(np.abs(sol.step)) < 1e-7

    def test_degenerate_direction_squeezed(self):
        # Model |d0| ignores d1 entirely; min-norm must not wander in d1.
        a_mat = np.array([[1.0, 0.0]])
        comp = oracles.affine_composite([0.0], a_mat, 0, 1, 3.0)
        lin = linearize(comp, np.zeros(2))
        sol = solve_min_norm_step(TrustRegionSubproblem(lin, 1.0))
        assert np.max(np.abs(sol.step)) < 1e-7

    def test_value_stays_near_optimum(self, rng):
        for _ in range(15):
            comp, n_cost, n_eq = random_composite(rng)
            n = comp.g.input_dim
            lin = linearize(comp, rng.normal(size=n))
            sub = TrustRegionSubproblem(lin, 1.0)
            plain = solve_subproblem(sub)
            mn = solve_min_norm_step(sub)
            assert mn.status == "optimal"
            tol = 1e-6 * (1.0 + abs(plain.model_value))
            assert mn.model_value <= plain.model_value + tol
            assert np.max(np.abs(mn.step)) <= np.max(np.abs(plain.step)) + 1e-7

    def test_descending_model_reported_unbounded(self):
        comp = oracles.linear_composite([1.0])
        lin = linearize(comp, np.zeros(1))
        sub = TrustRegionSubproblem(lin, 1.0, radius_infinite=True)
        sol = solve_min_norm_step(sub)
        assert sol.status == "unbounded"
        assert np.max(np.abs(sol.step)) >= 0.5 * sub.effective_radius


class TestFailurePropagation:
    def test_iteration_limit_becomes_subproblem_error(self, rng):
        comp, _, _ = random_composite(rng, n=4)
        lin = linearize(comp, rng.normal(size=4))
        lp = build_lp(TrustRegionSubproblem(lin, 1.0))
        with pytest.raises(SubproblemError) as err:
            lp_solve(lp, max_iter=1)
        exc = err.value
        assert exc.iterations <= 1
        if exc.best_step is not None:
            assert exc.best_step.size == 4
