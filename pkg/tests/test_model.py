import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmkaczmarz.linop import NORM_SAFETY, LinearMap
from lmkaczmarz.model import (
    DomainViolation,
    NoisyData,
    OperatorFamily,
    estimate_tangential_cone,
    make_noisy_data,
    noise_directions,
    residual,
)

from .conftest import affine_family


def _square_family(lower=None, upper=None):
    """Componentwise ``F(x) = x**2`` as a single equation."""
    return OperatorFamily(
        n_equations=1,
        dim_x=3,
        dim_y=(3,),
        evaluate_i=lambda i, x: x**2,
        linearize_i=lambda i, x: LinearMap(3, 3, lambda u: 2 * x * u, lambda w: 2 * x * w),
        eta=0.5,
        lower=lower,
        upper=upper,
    )


class TestOperatorFamily:
    def test_validation(self):
        ev = lambda i, x: x  # noqa: E731
        lin = lambda i, x: LinearMap.identity(2)  # noqa: E731
        with pytest.raises(ValueError):
            OperatorFamily(0, 2, (), ev, lin)
        with pytest.raises(ValueError):
            OperatorFamily(2, 2, (2,), ev, lin)
        with pytest.raises(ValueError):
            OperatorFamily(1, 2, (2,), ev, lin, eta=1.0)

    def test_domain_violation_carries_location(self):
        fam = _square_family(lower=np.zeros(3), upper=np.ones(3))
        with pytest.raises(DomainViolation) as info:
            fam.evaluate(0, np.array([0.5, 1.5, 0.5]))
        assert info.value.index == 1 and info.value.bound == "upper"
        with pytest.raises(DomainViolation) as info:
            fam.linearize(0, np.array([-0.1, 0.5, 0.5]))
        assert info.value.index == 0 and info.value.bound == "lower"

    def test_point_and_index_checks(self, small_affine):
        fam, _ = small_affine
        with pytest.raises(ValueError):
            fam.evaluate(0, np.ones(5))
        with pytest.raises(IndexError):
            fam.evaluate(fam.N, np.ones(fam.dim_x))

    def test_bounds_are_read_only(self):
        fam = _square_family(lower=np.zeros(3))
        with pytest.raises(ValueError):
            fam.lower[0] = 1.0

    def test_bound_C(self, small_affine):
        fam, _ = small_affine
        assert fam.bound_C(np.zeros(fam.dim_x)) == fam.lipschitz_bound
        sq = _square_family()
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(sq.bound_C(x), NORM_SAFETY * 4.0, rtol=1e-8)


class TestNoisyData:
    def test_exact(self):
        d = NoisyData.exact([np.ones(2), np.zeros(3)])
        assert d.is_exact and d.delta_min == 0.0
        np.testing.assert_array_equal(d.y_delta[0], d.exact_y[0])

    @settings(max_examples=30, deadline=None)
    @given(rel=st.floats(0.0, 0.5), seed=st.integers(0, 2**16))
    def test_noise_norm_is_exact(self, rel, seed):
        y = [np.linspace(1, 2, 5), np.array([3.0, -4.0])]
        d = make_noisy_data(y, rel, seed)
        for i in range(2):
            np.testing.assert_allclose(np.linalg.norm(d.y_delta[i] - y[i]), rel * np.linalg.norm(y[i]), rtol=1e-12, atol=1e-15)
            assert d.delta[i] == pytest.approx(rel * np.linalg.norm(y[i]))

    def test_seed_determinism(self):
        y = [np.ones(4)]
        a, b, c = make_noisy_data(y, 0.1, 1), make_noisy_data(y, 0.1, 1), make_noisy_data(y, 0.1, 2)
        np.testing.assert_array_equal(a.y_delta[0], b.y_delta[0])
        assert not np.array_equal(a.y_delta[0], c.y_delta[0])

    def test_shared_direction_scales_linearly(self):
        y = [np.arange(1.0, 6.0)]
        dirs = noise_directions(y, 4)
        a = make_noisy_data(y, 0.04, 4, directions=dirs)
        b = make_noisy_data(y, 0.01, 4, directions=dirs)
        np.testing.assert_allclose(a.y_delta[0] - y[0], 4.0 * (b.y_delta[0] - y[0]), rtol=1e-12)

    def test_invalid_noise(self):
        with pytest.raises(ValueError):
            make_noisy_data([np.ones(2)], -0.1, 0)
        with pytest.raises(ValueError):
            make_noisy_data([np.array([np.inf, 1.0])], 0.1, 0)

    def test_zero_noise_is_exact(self):
        d = make_noisy_data([np.ones(3)], 0.0, 0)
        assert d.is_exact


class TestResidual:
    def test_residual_sign_and_norm(self, small_affine):
        fam, y = small_affine
        data = NoisyData.exact(y)
        x = np.ones(fam.dim_x)
        r, n = residual(fam, 1, x, data)
        np.testing.assert_allclose(r, y[1] - fam.evaluate(1, x))
        assert n == pytest.approx(np.linalg.norm(r))


class TestTangentialCone:
    def test_affine_family_is_zero(self, small_affine):
        fam, _ = small_affine
        assert estimate_tangential_cone(fam, 0, np.zeros(fam.dim_x), 1.0, n_samples=20) <= 1e-10

    def test_square_map_bound(self):
        """For F(x) = x^2 the ratio is at most max|xb - x| / min|xb + x| <= rho/(c - rho)."""
        fam = _square_family()
        c, rho = 2.0, 0.5
        est = estimate_tangential_cone(fam, 0, np.full(3, c), rho, n_samples=200, seed=1)
        assert 0.0 < est <= rho / (c - rho)

    def test_constant_family_has_no_samples(self):
        fam = OperatorFamily(1, 2, (1,), lambda i, x: np.zeros(1), lambda i, x: LinearMap.zero(2, 1))
        with pytest.raises(ValueError, match="no informative samples"):
            estimate_tangential_cone(fam, 0, np.zeros(2), 1.0, n_samples=5)

    def test_box_rejection(self):
        fam, _ = affine_family([np.eye(2)], np.zeros(2), lower=np.zeros(2), upper=np.ones(2))
        with pytest.raises(ValueError, match="admissible"):
            estimate_tangential_cone(fam, 0, np.full(2, 10.0), 0.5, n_samples=2)
