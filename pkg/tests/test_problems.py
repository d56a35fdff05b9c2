import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmkaczmarz.linop import adjoint_mismatch, as_dense
from lmkaczmarz.model import estimate_tangential_cone
from lmkaczmarz.problems import (
    GAMMA_PROFILES,
    PROBLEMS,
    build_block_linear,
    build_elliptic_1d,
    integration_matrix,
    list_problems,
    make_experiment_instance,
    solve_state,
)


class TestIntegrationMatrix:
    def test_ones_integrate_to_midpoints(self):
        n = 10
        np.testing.assert_allclose(integration_matrix(n) @ np.ones(n), (np.arange(n) + 0.5) / n, rtol=1e-14)

    def test_linear_function_oracle(self):
        # full cells are exact for t; the trailing half cell adds h^2/8
        n = 16
        t = (np.arange(n) + 0.5) / n
        np.testing.assert_allclose(integration_matrix(n) @ t, t**2 / 2 + 1 / (8 * n**2), atol=1e-14)


class TestBlockLinear:
    def test_ill_conditioned(self, block_problem):
        A = np.vstack([block_problem.kernel[b] for b in block_problem.blocks])
        assert np.linalg.cond(A) > 1e3

    def test_blocks_partition_rows(self, block_problem):
        rows = np.concatenate([np.arange(64)[b] for b in block_problem.blocks])
        np.testing.assert_array_equal(rows, np.arange(64))
        assert all(b.stop > b.start for b in block_problem.blocks)

    def test_too_many_blocks(self):
        with pytest.raises(ValueError):
            build_block_linear(4, 5)
        with pytest.raises(ValueError):
            build_block_linear(4, 0)

    def test_single_block(self):
        p = build_block_linear(16, 1)
        assert p.family.N == 1
        np.testing.assert_allclose(as_dense(p.family.linearize(0, p.x0)), integration_matrix(16))

    def test_C_is_largest_block_norm(self, block_problem):
        fam = block_problem.family
        want = max(np.linalg.norm(as_dense(fam.linearize(i, block_problem.x0)), 2) for i in range(fam.N))
        np.testing.assert_allclose(fam.lipschitz_bound, want, rtol=1e-12)
        np.testing.assert_allclose(block_problem.C, want, rtol=1e-12)

    def test_truth_reproduces_data(self, block_problem):
        fam = block_problem.family
        for i in range(fam.N):
            assert np.linalg.norm(fam.evaluate(i, block_problem.x_true) - block_problem.exact_y[i]) <= 1e-12

    def test_truth_is_normalized(self, block_problem):
        np.testing.assert_allclose(np.max(np.abs(block_problem.x_true)), np.sqrt(1 / 64), rtol=1e-14)

    def test_cone_constant_vanishes(self, block_problem):
        fam = block_problem.family
        assert estimate_tangential_cone(fam, 2, block_problem.x_true, 0.5, n_samples=10) <= 1e-10

    def test_arrays_are_read_only(self, block_problem):
        with pytest.raises(ValueError):
            block_problem.x_true[0] = 1.0


class TestSolveState:
    @pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
    def test_constant_coefficient_oracle(self, c):
        """Three-point scheme is exact for the quadratic t(1-t)/(2c)."""
        n = 20
        t = np.arange(n + 1) / n
        u = solve_state(np.full(n, c), np.ones(n - 1))
        np.testing.assert_allclose(u, t * (1 - t) / (2 * c), atol=1e-13)

    def test_dirichlet_data_linear_solution(self):
        n = 12
        t = np.arange(n + 1) / n
        u = solve_state(np.full(n, 2.0), np.zeros(n - 1), left=1.0, right=3.0)
        np.testing.assert_allclose(u, 1.0 + 2.0 * t, atol=1e-13)

    def test_symmetry(self):
        n = 32
        tc = (np.arange(n) + 0.5) / n
        gamma = 1.0 + 0.3 * np.cos(2 * np.pi * tc)
        tn = np.arange(1, n) / n
        f = np.exp(-((tn - 0.5) / 0.1) ** 2)
        u = solve_state(gamma, f)
        np.testing.assert_allclose(u, u[::-1], atol=1e-13)
        flux = gamma * np.diff(u)
        np.testing.assert_allclose(flux, -flux[::-1], atol=1e-13)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_maximum_principle(self, seed):
        rng = np.random.default_rng(seed)
        n = 24
        u = solve_state(rng.uniform(0.2, 5.0, n), rng.uniform(0.0, 1.0, n - 1))
        assert np.all(u >= -1e-14)


class TestElliptic:
    def test_load_centres(self):
        p = build_elliptic_1d(32, 4)
        np.testing.assert_allclose(p.load_centers, [0.125, 0.375, 0.625, 0.875])
        assert all(f.sum() > 0 for f in p.loads)

    @pytest.mark.parametrize("fixture", ["elliptic_problem", "flux_problem"])
    def test_adjoint_consistency(self, fixture, request):
        p = request.getfixturevalue(fixture)
        for i in range(p.family.N):
            assert adjoint_mismatch(p.family.linearize(i, p.x0), n_probes=5, seed=i) <= 1e-10

    @pytest.mark.parametrize("parametrization", ["resistivity", "conductivity"])
    @pytest.mark.parametrize("measurement", ["full-field", "boundary-flux"])
    def test_derivative_matches_central_differences(self, parametrization, measurement):
        p = build_elliptic_1d(24, 3, "bump", measurement=measurement, parametrization=parametrization)
        fam = p.family
        x = np.asarray(p.family.ground_truth)
        d = np.random.default_rng(0).standard_normal(x.size) * x
        eps = 1e-5
        for i in range(fam.N):
            fd = (fam.evaluate(i, x + eps * d) - fam.evaluate(i, x - eps * d)) / (2 * eps)
            jd = fam.linearize(i, x) @ d
            assert np.linalg.norm(fd - jd) <= 1e-6 * max(np.linalg.norm(jd), 1e-12)

    def test_gamma_roundtrip(self, elliptic_problem):
        p = elliptic_problem
        np.testing.assert_allclose(p.to_gamma(p.family.ground_truth), p.gamma_true, rtol=1e-14)
        np.testing.assert_allclose(p.from_gamma(p.gamma_true), p.family.ground_truth, rtol=1e-14)
        np.testing.assert_allclose(p.to_gamma(p.x0), np.ones(p.n_cells), rtol=1e-14)

    def test_truth_reproduces_data(self, elliptic_problem):
        fam = elliptic_problem.family
        for i in range(fam.N):
            np.testing.assert_allclose(fam.evaluate(i, fam.ground_truth), elliptic_problem.exact_y[i], rtol=1e-13)

    def test_box_contains_truth_and_start(self, elliptic_problem):
        fam = elliptic_problem.family
        for x in (fam.ground_truth, elliptic_problem.x0):
            assert np.all(fam.lower <= x) and np.all(x <= fam.upper)

    def test_fine_grid_data_gap_shrinks_with_h(self):
        def gap(n):
            coarse, fine = build_elliptic_1d(n, 9), build_elliptic_1d(n, 9, data_grid_factor=2)
            return max(np.linalg.norm(a - b) / np.linalg.norm(a) for a, b in zip(coarse.exact_y, fine.exact_y))

        g64, g128 = gap(64), gap(128)
        assert 0 < g64 < 0.1
        assert g128 < 0.6 * g64

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_cells=4),
            dict(profile="wave"),
            dict(measurement="pointwise"),
            dict(gamma_bounds=(1.0, 0.5)),
            dict(gamma_bounds=(1.2, 5.0)),
            dict(gamma0=10.0),
            dict(parametrization="log"),
        ],
    )
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(ValueError):
            build_elliptic_1d(**{"n_cells": 16, "N": 2, **kwargs})

    @pytest.mark.parametrize("profile", sorted(GAMMA_PROFILES))
    def test_profiles_are_admissible(self, profile):
        p = build_elliptic_1d(16, 2, profile)
        assert p.gamma_true.min() > 0.2 and p.gamma_true.max() < 5.0


class TestRegistry:
    def test_listing(self):
        assert set(list_problems()) == set(PROBLEMS)

    def test_unknown_id(self):
        with pytest.raises(KeyError):
            make_experiment_instance("no-such-problem")

    def test_determinism(self):
        a = make_experiment_instance("block-linear-64", 0.05, seed=4)
        b = make_experiment_instance("block-linear-64", 0.05, seed=4)
        for ya, yb in zip(a.data.y_delta, b.data.y_delta):
            np.testing.assert_array_equal(ya, yb)
        np.testing.assert_array_equal(a.x0, b.x0)

    def test_zero_noise(self):
        inst = make_experiment_instance("block-linear-16-single", 0.0)
        assert inst.data.is_exact

    def test_noise_level(self):
        inst = make_experiment_instance("elliptic1d-9loads", 0.05, seed=1)
        for y, d in zip(inst.data.exact_y, inst.data.delta):
            np.testing.assert_allclose(d, 0.05 * np.linalg.norm(y), rtol=1e-12)
