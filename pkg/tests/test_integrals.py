"""Grid approximations of the path integrals."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fractional_ou.basis import DriftFunction, fourier_basis
from fractional_ou.fbm import SamplePath, Seed, sample_fbm
from fractional_ou.integrals import (
    LEFT,
    STIELTJES_RULE,
    TRAPEZOID,
    basis_integrals,
    integral_phi_dB,
    integral_phi_dX,
    integral_phi_X_dt,
    integral_X_dX,
    integral_X_sq_dt,
    rs_integral,
)
from fractional_ou.model import ModelParams, simulate, zero_driver


def identity_path(n_nodes, T=1.0):
    return SamplePath(0.0, T / (n_nodes - 1), np.linspace(0.0, T, n_nodes))


class TestRiemannStieltjes:
    @pytest.mark.parametrize("rule", [LEFT, TRAPEZOID])
    def test_constant_integrand_telescopes(self, rule):
        B = sample_fbm(300, 0.01, 0.7, Seed(1))
        r = rs_integral(np.full(301, 2.5), B, rule)
        assert r.value == pytest.approx(2.5 * (B.values[-1] - B.values[0]), rel=1e-12)
        assert r.rule == rule and r.n_nodes == 301

    @pytest.mark.parametrize("N", [10, 100, 1000])
    def test_left_sum_closed_form(self, N):
        # N steps: sum_{k<N} (k/N)(1/N) = (N-1)/(2N)
        path = identity_path(N + 1)
        r = rs_integral(path.times, path, LEFT)
        assert r.value == pytest.approx((N - 1) / (2 * N), rel=1e-12)
        assert abs(r.value - 0.5) <= 1.0 / N

    def test_trapezoid_exact_for_linear(self):
        path = identity_path(17)
        assert rs_integral(path.times, path, TRAPEZOID).value == pytest.approx(0.5, abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rs_integral(np.ones(5), identity_path(6))

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            rs_integral(np.ones(6), identity_path(6), "midpoint")

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 1000))
    def test_linear_in_integrand(self, a, b, seed):
        B = sample_fbm(64, 0.05, 0.7, Seed(seed))
        f = np.sin(B.times)
        g = B.times**2
        lhs = rs_integral(a * f + b * g, B).value
        rhs = a * rs_integral(f, B).value + b * rs_integral(g, B).value
        assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * 100)

    @pytest.mark.slow
    def test_variance_of_terminal_value(self):
        T, n = 4.0, 400
        vals = [integral_phi_dB(fourier_basis(0), 0, sample_fbm(n, T / n, 0.7, Seed(2, r))) for r in range(2000)]
        var = np.var(vals, ddof=1)
        assert var == pytest.approx(T**1.4, rel=3 * np.sqrt(2 / 1999))


class TestBasisFunctionals:
    @pytest.fixture
    def noiseless_pair(self):
        b = fourier_basis(1)
        pr = ModelParams(0.7, 0.8, 1.0, 1.0, DriftFunction(b, (1.0, 0.5, -0.5)))
        T, n = 3.0, 4096
        return simulate(pr, T, n, driver=zero_driver(T, n)), pr

    def test_constant_function_gives_increment(self):
        pair = simulate(
            ModelParams(0.7, 0.5, 1.0, 0.3, DriftFunction(fourier_basis(0), (1.0,))), 2.0, 200, Seed(4)
        )
        X = pair.X
        assert integral_phi_dX(fourier_basis(0), 0, X) == pytest.approx(X.values[-1] - X.values[0], rel=1e-12)

    def test_smooth_path_matches_adaptive_quadrature(self, noiseless_pair):
        pair, pr = noiseless_pair
        b = pr.basis
        # X' = alpha X + L on the smooth path; interpolate X with a cubic spline for the oracle
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(pair.X.times, pair.X.values)
        dspline = spline.derivative()
        for i in (1, 2):
            phi = b.function(i)
            oracle, _ = integrate.quad(lambda t: phi(t) * dspline(t), 0, pair.T, limit=400)
            assert integral_phi_dX(b, i, pair.X) == pytest.approx(oracle, abs=1e-4)

    def test_refinement_is_cauchy(self):
        b = fourier_basis(1)
        pr = ModelParams(0.7, 0.5, 1.0, 1.0, DriftFunction(b, (1.0, 0.5, -0.5)))
        T, n = 2.0, 2**14
        pair = simulate(pr, T, n, Seed(5))
        vals = []
        for sub in (16, 8, 4, 2, 1):
            X = SamplePath(0.0, pair.X.dt * sub, pair.X.values[::sub])
            vals.append(integral_phi_dX(b, 1, X))
        diffs = np.abs(np.diff(vals))
        assert diffs[-1] < diffs[0]

    def test_index_checked(self):
        with pytest.raises(IndexError):
            integral_phi_dX(fourier_basis(1), 3, identity_path(5))

    def test_vectorised_functionals_match_single(self, noiseless_pair):
        pair, pr = noiseless_pair
        d_int, x_int = basis_integrals(pr.basis, pair.X)
        for i in range(3):
            assert d_int[i] == pytest.approx(integral_phi_dX(pr.basis, i, pair.X, STIELTJES_RULE), rel=1e-12)
            assert x_int[i] == pytest.approx(integral_phi_X_dt(pr.basis, i, pair.X), rel=1e-12)


class TestChainRule:
    def test_constant(self):
        assert integral_X_dX(SamplePath(0.0, 0.1, np.full(5, 3.0))) == 0.0

    def test_identity(self):
        assert integral_X_dX(identity_path(11)) == pytest.approx(0.5)

    def test_trapezoid_sum_is_exact(self):
        pair = simulate(ModelParams(0.7, 0.5, 1.0, 1.0, DriftFunction(fourier_basis(0), (0.0,))), 3.0, 300, Seed(6))
        X = pair.X
        assert rs_integral(X.values, X, TRAPEZOID).value == pytest.approx(integral_X_dX(X), rel=1e-12)

    def test_left_sum_converges(self):
        pr = ModelParams(0.7, 0.5, 1.0, 1.0, DriftFunction(fourier_basis(0), (0.0,)))
        T, n = 2.0, 2**14
        pair = simulate(pr, T, n, Seed(7))
        exact = integral_X_dX(pair.X)
        errs = []
        for sub in (16, 8, 4, 2, 1):
            X = SamplePath(0.0, pair.X.dt * sub, pair.X.values[::sub])
            errs.append(abs(rs_integral(X.values, X, LEFT).value - exact))
        assert all(a > b for a, b in zip(errs, errs[1:]))


class TestLebesgue:
    def test_constant(self):
        X = SamplePath(0.0, 5.0 / 50, np.ones(51))
        assert integral_phi_X_dt(fourier_basis(0), 0, X) == pytest.approx(5.0)
        assert integral_X_sq_dt(X) == pytest.approx(5.0)

    def test_linear(self):
        X = identity_path(101)
        assert integral_phi_X_dt(fourier_basis(0), 0, X) == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("N", [101, 1001])
    def test_square(self, N):
        X = identity_path(N)
        assert integral_X_sq_dt(X) == pytest.approx(1 / 3, abs=1.0 / (N - 1) ** 2)

    def test_exponential_trend_accuracy(self):
        # Simpson keeps the e^{2at} trend error far below the trapezoid's (a dt)^2/3
        a, T, n = 1.0, 10.0, 4096
        t = np.linspace(0, T, n + 1)
        X = SamplePath(0.0, T / n, np.exp(a * t))
        exact = np.expm1(2 * a * T) / (2 * a)
        assert abs(integral_X_sq_dt(X) / exact - 1) < 1e-3 * (a * T / n) ** 2
