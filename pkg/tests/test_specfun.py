"""Special-function tests.

The Whittaker evaluator is checked three independent ways: frozen
arbitrary-precision oracle values (mpmath, computed offline and pinned),
the Gradshteyn-Ryzhik-type closure against a direct theta-integral, and
internal agreement between the scalar adaptive path and the vectorized
panel path.
"""

import math

import numpy as np
import pytest

from covbounds.errors import DomainError, UnsupportedRegime
from covbounds.quadrature import Domain, integrate
from covbounds.specfun import (
    log_beta,
    log_gamma,
    log_sum_exp_signed,
    whittaker_w_log,
    whittaker_w_log_many,
)

# log W_{kappa,mu}(z) at 40-digit precision (mpmath.whitw), frozen
MPMATH_LOG_W = {
    (-0.5, 0.5, 1.0): -0.88430958712097223635,
    (-2.0, -0.5, 0.5): -2.0034188276607186352,
    (-2.0, -0.5, 2.0): -3.9061560936215263507,
    (-2.0, -0.5, 8.0): -8.7313651436100272325,
    (-2.5, 0.0, 2.0): -4.8767304926305530048,
    (-2.0, -0.5, 50.0): -32.937520324894774004,
    (-3.0, 0.5, 2.0): -5.7722006800683951592,
    (0.25, 0.25, 3.0): -1.2253469278329725772,
    (-1.5, 0.8, 4.0): -4.6469575542558704421,
    (252.0, -254.5, 250.0): 1381.6215048776314701,
}


class TestLogGamma:
    def test_exact_points(self):
        assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-14)
        assert log_gamma(3.0) == pytest.approx(math.log(2.0), rel=1e-13)
        assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-13)

    @pytest.mark.parametrize("x", [0.5, 1.5, 3.0, 10.0])
    def test_recurrence(self, x):
        assert log_gamma(x + 1.0) - log_gamma(x) == pytest.approx(
            math.log(x), abs=1e-12
        )

    def test_array_input(self):
        out = log_gamma(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out, [0.0, 0.0, math.log(2.0)], atol=1e-13)

    def test_domain(self):
        with pytest.raises(DomainError):
            log_gamma(0.0)
        with pytest.raises(DomainError):
            log_gamma(-2.0)
        with pytest.raises(DomainError):
            log_gamma(math.inf)


class TestLogBeta:
    def test_exact_points(self):
        assert log_beta(1.0, 1.0) == pytest.approx(0.0, abs=1e-14)
        assert log_beta(3.0, 3.0) == pytest.approx(math.log(1.0 / 30.0), rel=1e-13)
        assert log_beta(0.5, 0.5) == pytest.approx(math.log(math.pi), rel=1e-13)

    def test_domain(self):
        with pytest.raises(DomainError):
            log_beta(0.0, 1.0)
        with pytest.raises(DomainError):
            log_beta(1.0, -1.0)


class TestWhittakerScalar:
    def test_elementary_reduction(self):
        # kappa = mu + 1/2 collapses to z^{mu+1/2} e^{-z/2}
        assert whittaker_w_log(1.0, 0.5, 2.0) == pytest.approx(
            math.log(2.0) - 1.0, abs=1e-12
        )
        assert whittaker_w_log(0.5, 0.0, 5.0) == pytest.approx(
            0.5 * math.log(5.0) - 2.5, abs=1e-12
        )

    @pytest.mark.parametrize("key", sorted(MPMATH_LOG_W))
    def test_against_frozen_oracle(self, key):
        kappa, mu, z = key
        got = whittaker_w_log(kappa, mu, z)
        assert got == pytest.approx(MPMATH_LOG_W[key], abs=2e-9)

    def test_symmetry_in_mu(self):
        assert whittaker_w_log(-1.0, 0.7, 3.0) == pytest.approx(
            whittaker_w_log(-1.0, -0.7, 3.0), abs=1e-10
        )

    def test_direct_integral_example(self):
        # W_{-1,1/2}(1) = e^{1/2} * int_0^1 e^{-1/theta} dtheta
        lhs = integrate(lambda th: np.exp(-1.0 / th), Domain.finite(1e-300, 1.0))
        assert whittaker_w_log(-1.0, 0.5, 1.0) == pytest.approx(
            0.5 + math.log(lhs.value), abs=1e-9
        )

    def test_monotone_decay(self):
        xi = (8 - 18 + 2) / 4.0
        mu = (6 - 8) / 4.0
        vals = [whittaker_w_log(xi, mu, z) for z in [10.0, 20.0, 40.0, 80.0]]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            whittaker_w_log(1.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            whittaker_w_log(1.0, 1.0, -3.0)
        with pytest.raises(DomainError):
            whittaker_w_log(math.nan, 1.0, 1.0)

    def test_unsupported_regime(self):
        with pytest.raises(UnsupportedRegime):
            whittaker_w_log(3.0, 1.0, 2.0)


class TestWhittakerVectorized:
    @pytest.mark.parametrize("a,n", [(3.0, 2), (3.0, 8), (3.0, 64), (3.0, 1024), (4.0, 16)])
    def test_matches_scalar_on_case_study_shapes(self, a, n):
        xi = (n - 6 * a + 2) / 4.0
        mu = (2 * a - n) / 4.0
        z = np.geomspace(0.05 * max(n, 2), 2.5 * max(n, 2), 9)
        vec = whittaker_w_log_many(xi, mu, z)
        ref = np.array([whittaker_w_log(xi, mu, zi) for zi in z])
        np.testing.assert_allclose(vec, ref, rtol=0, atol=5e-9)

    def test_moment_index_shapes(self):
        # numerator shapes used by posterior moments at a=3, N=8
        for kappa, mu in [(-2.5, 0.0), (-3.0, 0.5), (-1.0, -1.5), (-0.5, -2.5), (0.0, -0.5)]:
            z = np.geomspace(0.2, 40.0, 7)
            vec = whittaker_w_log_many(kappa, mu, z)
            ref = np.array([whittaker_w_log(kappa, mu, zi) for zi in z])
            np.testing.assert_allclose(vec, ref, rtol=0, atol=5e-9)

    def test_elementary_branch(self):
        z = np.array([0.5, 2.0, 9.0])
        out = whittaker_w_log_many(1.0, 0.5, z)
        np.testing.assert_allclose(out, np.log(z) - 0.5 * z, atol=1e-13)

    @pytest.mark.parametrize("n", [10, 14, 64, 1024])
    def test_flat_origin_shapes(self, n):
        # the (1-theta)^-2 moment shape at a=3 has a_U=1 with c>0
        xi = (n - 16) / 4.0
        mu = (6 - n) / 4.0
        z = np.geomspace(1e-4 * n, 10.0 * n, 11)
        vec = whittaker_w_log_many(xi + 2.0, mu, z)
        ref = np.array([whittaker_w_log(xi + 2.0, mu, zi) for zi in z])
        np.testing.assert_allclose(vec, ref, rtol=0, atol=5e-9)

    def test_tiny_argument_decade_stretch(self):
        # slow log-decay tails at tiny z exceed the fixed ladder and
        # must reroute to the adaptive path without accuracy loss
        kap, mu = (8 - 18 + 2) / 4.0 + 1.0, (6 - 8) / 4.0 - 1.0
        z = np.geomspace(1e-9, 1e-3, 7)
        vec = whittaker_w_log_many(kap, mu, z)
        ref = np.array([whittaker_w_log(kap, mu, zi) for zi in z])
        np.testing.assert_allclose(vec, ref, rtol=0, atol=5e-9)

    def test_fallback_below_unit_exponent(self):
        # a_U = 0.5 routes through the scalar path and must agree exactly
        z = np.array([0.7, 3.0, 11.0])
        vec = whittaker_w_log_many(0.25, 0.25, z)
        ref = np.array([whittaker_w_log(0.25, 0.25, zi) for zi in z])
        np.testing.assert_allclose(vec, ref, rtol=0, atol=0)

    def test_scalar_input_roundtrip(self):
        v = whittaker_w_log_many(-2.0, -0.5, 2.0)
        assert isinstance(v, float)
        assert v == pytest.approx(MPMATH_LOG_W[(-2.0, -0.5, 2.0)], abs=2e-9)

    def test_empty_and_domain(self):
        assert whittaker_w_log_many(-2.0, -0.5, np.array([])).size == 0
        with pytest.raises(DomainError):
            whittaker_w_log_many(-2.0, -0.5, np.array([1.0, -1.0]))


def gr_identity_sides(a, n, t):
    """Both sides of the Beta-exponential integral identity, as logs."""
    nu = a - 0.5 * n
    mu = a
    kappa = (1.0 - 2.0 * mu - nu) / 2.0

    def integrand(th):
        with np.errstate(divide="ignore"):
            lv = (nu - 1.0) * np.log(th) + (mu - 1.0) * np.log1p(-th) - t / th
        return np.where(lv < -745.0, 0.0, np.exp(lv))

    lhs = integrate(integrand, Domain.finite(1e-300, 1.0), rel_tol=1e-12)
    log_lhs = math.log(lhs.value)
    log_rhs = (
        0.5 * (nu - 1.0) * math.log(t)
        - 0.5 * t
        + log_gamma(mu)
        + whittaker_w_log(kappa, 0.5 * nu, t)
    )
    return log_lhs, log_rhs


class TestGrIdentityClosure:
    @pytest.mark.parametrize("a", [2.5, 3.0, 4.0])
    @pytest.mark.parametrize("n", [2, 8, 16, 64])
    @pytest.mark.parametrize("t", [0.1, 1.0, 5.0, 20.0])
    def test_closure_grid(self, a, n, t):
        log_lhs, log_rhs = gr_identity_sides(a, n, t)
        assert log_lhs == pytest.approx(log_rhs, abs=1e-8)


class TestLogSumExpSigned:
    def test_plain_sum(self):
        la, sg = log_sum_exp_signed(np.log([1.0, 2.0, 3.0]), [1.0, 1.0, 1.0])
        assert sg == 1.0
        assert la == pytest.approx(math.log(6.0), rel=1e-14)

    def test_cancellation_sign(self):
        la, sg = log_sum_exp_signed(np.log([5.0, 2.0]), [-1.0, 1.0])
        assert sg == -1.0
        assert la == pytest.approx(math.log(3.0), rel=1e-14)

    def test_exact_zero(self):
        la, sg = log_sum_exp_signed(np.log([2.0, 2.0]), [1.0, -1.0])
        assert sg == 0.0
        assert la == -math.inf

    def test_columnwise_over_terms(self):
        # rows are terms, columns independent problems
        lt = np.array([[0.0, 2.0], [0.0, 2.0]])
        sg = np.array([[1.0, 1.0], [1.0, -1.0]])
        la, s = log_sum_exp_signed(lt, sg)
        np.testing.assert_allclose(s, [1.0, 0.0])
        assert la[0] == pytest.approx(math.log(2.0), rel=1e-14)
        assert la[1] == -math.inf
