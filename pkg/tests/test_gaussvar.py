"""Gaussian-variance case study: densities, estimators, bounds.

Closed forms are cross-examined against independent quadrature oracles
built from integrate/integrate_multi, never against themselves.
"""

import math

import numpy as np
import pytest
from scipy.special import gammaln

import covbounds.gaussvar as gv
from covbounds.engine import (
    conditional_moments,
    equality_check,
    phi_cr,
    tblb,
    wwf_membership,
)
from covbounds.errors import DomainError, UnsupportedRegime
from covbounds.model import JointModel
from covbounds.quadrature import Domain, integrate, integrate_multi
from covbounds.specfun import whittaker_w_log


P8 = gv.CaseParams(a=3.0, n=8)
P16 = gv.CaseParams(a=3.0, n=16)


def posterior_ratio_oracle(p, t, power=1.0):
    """E[theta^power | t] by adaptive quadrature of the joint."""
    mode = float(np.clip(gv.map_estimate(p, 2.0 * t / p.n), 1e-9, 1 - 1e-9))
    shift = float(gv.log_joint_t(p, mode, t))

    def rows(th):
        lv = gv.log_joint_t(p, th, t) - shift
        w = np.where(lv < -745.0, 0.0, np.exp(np.minimum(lv, 700.0)))
        return np.stack([w, th ** power * w])

    (z, mo), _, _ = integrate_multi(rows, Domain.finite(0.0, 1.0), rel_tol=1e-11)
    return mo / z


class TestCaseParams:
    def test_prior_variance(self):
        assert P8.sigma_pi_sq == pytest.approx(1.0 / 28.0, rel=1e-15)
        assert P8.mu_pi == 0.5

    def test_index_helpers(self):
        assert P8.xi == pytest.approx(-2.0)
        assert P8.mu_w == pytest.approx(-0.5)

    def test_rejects_bad_shape(self):
        with pytest.raises(DomainError):
            gv.CaseParams(a=0.0, n=8)
        with pytest.raises(DomainError):
            gv.CaseParams(a=float("nan"), n=8)
        with pytest.raises(DomainError):
            gv.CaseParams(a=3.0, n=0)

    def test_small_shape_allowed_for_estimators(self):
        p = gv.CaseParams(a=1.0, n=4)
        assert gv.map_estimate(p, 0.5) > 0.0


class TestSuffStat:
    def test_gamma_relation_exact(self):
        s = gv.SuffStat.from_t(3.0, 8)
        assert s.gamma == 2.0 * 3.0 / 8

    def test_roundtrip(self):
        s = gv.SuffStat.from_gamma(0.5, 16)
        assert s.t == 4.0
        assert gv.SuffStat.from_t(s.t, 16).gamma == 0.5

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            gv.SuffStat(t=-1.0, gamma=-0.25)


class TestMapEstimate:
    def test_coefficients_and_value_generic_branch(self):
        c = gv.map_coefficients(P16, 0.5)
        assert c.alpha == pytest.approx(0.5)
        assert c.beta == pytest.approx(1.25)
        disc = c.beta ** 2 - 4 * c.alpha * c.gamma
        assert disc == pytest.approx(0.5625)
        assert gv.map_estimate(P16, 0.5) == pytest.approx(0.5, rel=1e-14)

    def test_vanishing_alpha_branch(self):
        # N = 4(a-1) makes the quadratic degenerate
        assert gv.map_estimate(P8, 0.5) == pytest.approx(0.5, rel=1e-14)

    def test_degenerate_observation(self):
        assert gv.map_estimate(P16, 0.0) == 0.0
        assert gv.map_estimate(P8, 0.0) == 0.0

    def test_stationary_point_of_log_joint(self):
        for p in (P16, gv.CaseParams(2.5, 32), gv.CaseParams(4.0, 8)):
            for gam in (0.05, 0.3, 0.8, 1.5):
                th = gv.map_estimate(p, gam)
                if 0.0 < th < 1.0:
                    t = 0.5 * p.n * gam
                    assert abs(gv.score(p, th, t)) < 1e-9 * max(1.0, p.n / th)

    def test_vectorized_and_clamped(self):
        g = np.array([0.0, 0.1, 0.5, 2.0, 25.0])
        out = gv.map_estimate(P16, g)
        assert out.shape == g.shape
        assert np.all((out >= 0.0) & (out <= 1.0))
        assert np.all(np.diff(out) >= 0.0)

    def test_rejects_negative_gamma(self):
        with pytest.raises(DomainError):
            gv.map_estimate(P8, -0.1)


class TestMlEstimate:
    def test_identity_including_out_of_support(self):
        assert gv.ml_estimate(0.5) == 0.5
        assert gv.ml_estimate(0.0) == 0.0
        assert gv.ml_estimate(1.7) == 1.7

    def test_array_copy(self):
        g = np.array([0.1, 0.9])
        out = gv.ml_estimate(g)
        out[0] = 7.0
        assert g[0] == 0.1


class TestLogJoint:
    def test_sum_of_parts(self):
        # log joint = log likelihood + log prior, assembled separately
        p = gv.CaseParams(3.0, 2)
        th, t = 0.5, 0.5
        log_lik = -0.5 * p.n * math.log(2 * math.pi * th) - t / th
        log_prior = (
            float(gammaln(2 * p.a) - 2 * gammaln(p.a))
            + (p.a - 1) * math.log(th * (1 - th))
        )
        assert gv.log_joint(p, th, t) == pytest.approx(
            log_lik + log_prior, rel=1e-14
        )

    def test_uniform_prior_reduces_to_likelihood(self):
        p = gv.CaseParams(1.0, 4)
        th, t = 0.3, 1.2
        log_lik = -0.5 * p.n * math.log(2 * math.pi * th) - t / th
        assert gv.log_joint(p, th, t) == pytest.approx(log_lik, rel=1e-14)

    def test_outside_support(self):
        out = gv.log_joint(P8, np.array([-0.1, 0.0, 0.5, 1.0, 1.1]), 2.0)
        assert np.isinf(out[[0, 1, 3, 4]]).all()
        assert np.isfinite(out[2])

    def test_t_space_joint_recovers_marginal(self):
        # integrating theta out of log_joint_t must give the t-marginal
        for t in (0.5, 2.0, 8.0):
            shift = float(gv.log_joint_t(P8, gv.map_estimate(P8, 2 * t / 8), t))
            res = integrate(
                lambda th: np.exp(
                    np.maximum(gv.log_joint_t(P8, th, t) - shift, -745.0)
                ),
                Domain.finite(0.0, 1.0),
                rel_tol=1e-10,
            )
            mass = res.value * math.exp(shift)
            assert mass == pytest.approx(
                gv.marginal_t_density(P8, t), rel=1e-8
            )


class TestPosteriorPdf:
    def test_normalized(self):
        res = integrate(
            lambda th: gv.posterior_pdf(P8, th, 2.0),
            Domain.finite(0.0, 1.0),
            rel_tol=1e-10,
        )
        assert res.value == pytest.approx(1.0, abs=1e-8)

    def test_ratio_matches_joint_ratio(self):
        t = 2.0
        r = gv.posterior_pdf(P8, 0.6, t) / gv.posterior_pdf(P8, 0.3, t)
        lr = gv.log_joint(P8, 0.6, t) - gv.log_joint(P8, 0.3, t)
        assert r == pytest.approx(math.exp(lr), rel=1e-12)

    def test_zero_outside_support(self):
        vals = gv.posterior_pdf(P8, np.array([-0.2, 1.2]), 2.0)
        assert np.all(vals == 0.0)


class TestMarginalTDensity:
    def test_total_mass(self):
        res = integrate(
            lambda t: gv.marginal_t_density(P8, np.maximum(t, 1e-300)),
            Domain.semi_infinite(0.0),
            rel_tol=1e-9,
            initial_breaks=[0.5, 2.0, 8.0],
        )
        assert res.value == pytest.approx(1.0, abs=1e-7)

    def test_chi_square_mixture_oracle(self):
        # density of t as a scale mixture of chi-square shells
        t = 2.0
        n = P8.n

        def mixture(th):
            log_prior = (
                -float(gammaln(P8.a) * 2 - gammaln(2 * P8.a))
                + (P8.a - 1) * np.log(th * (1 - th))
            )
            log_shell = (
                -0.5 * n * np.log(th)
                + (0.5 * n - 1) * math.log(t)
                - t / th
                - float(gammaln(0.5 * n))
            )
            return np.exp(log_prior + log_shell)

        res = integrate(mixture, Domain.finite(0.0, 1.0), rel_tol=1e-10)
        assert gv.marginal_t_density(P8, t) == pytest.approx(
            res.value, rel=1e-7
        )

    def test_mean_of_t(self):
        res = integrate(
            lambda t: t * gv.marginal_t_density(P8, np.maximum(t, 1e-300)),
            Domain.semi_infinite(0.0),
            rel_tol=1e-9,
            initial_breaks=[0.5, 2.0, 8.0],
        )
        assert res.value == pytest.approx(P8.n / 4.0, rel=1e-7)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            gv.marginal_t_density(P8, 0.0)


class TestMmseEstimate:
    def test_quadrature_ratio_oracle(self):
        val = gv.mmse_estimate(P8, 2.0)
        assert 0.0 < val < 1.0
        assert val == pytest.approx(posterior_ratio_oracle(P8, 2.0), rel=1e-6)

    def test_monotone_in_t(self):
        tg = np.geomspace(0.05, 40.0, 25)
        vals = np.array([gv.mmse_estimate(P8, t) for t in tg])
        assert np.all(np.diff(vals) > 0.0)

    def test_consistency_at_large_n(self):
        p = gv.CaseParams(3.0, 2048)
        theta0 = 0.4
        assert gv.mmse_estimate(p, 0.5 * p.n * theta0) == pytest.approx(
            theta0, abs=0.02
        )

    def test_rejects_nonpositive_t(self):
        with pytest.raises(DomainError):
            gv.mmse_estimate(P8, 0.0)


class TestMmseBatch:
    def test_matches_scalar(self):
        tg = np.array([0.5, 2.0, 8.0])
        many = gv.mmse_estimate_many(P8, tg)
        singles = np.array([gv.mmse_estimate(P8, t) for t in tg])
        np.testing.assert_allclose(many, singles, rtol=1e-12)

    def test_partition_independent(self):
        rng = np.random.default_rng(11)
        t = rng.beta(3, 3, 64) * rng.standard_gamma(4.0, 64)
        whole = gv.mmse_estimate_many(P8, t)
        halves = np.concatenate(
            [gv.mmse_estimate_many(P8, t[:13]), gv.mmse_estimate_many(P8, t[13:])]
        )
        assert np.array_equal(whole, halves)

    def test_check_rule_tracks_closed_form(self):
        # the 64-point rule stays within the fallback trigger wherever
        # draws can realistically land, so a healthy closed form wins
        for n in (2, 8, 64, 1024, 8192):
            p = gv.CaseParams(3.0, n)
            tg = n * np.array([0.01, 0.05, 0.125, 0.25, 0.5, 1.1, 2.4])
            closed = np.array([gv.mmse_estimate(p, t) for t in tg])
            check = gv.mmse_quadrature_many(p, tg)
            assert np.max(np.abs(check - closed) / closed) < 3e-5

    def test_quadrature_only_route_accuracy(self):
        val = gv.mmse_quadrature(P8, 2.0)
        assert val == pytest.approx(posterior_ratio_oracle(P8, 2.0), rel=1e-6)

    def test_degenerate_t(self):
        # t=0 carries the small-N rule to the exact Beta-mean limit
        p2 = gv.CaseParams(3.0, 2)
        assert gv.mmse_estimate_many(p2, 0.0) == pytest.approx(0.4, abs=1e-9)


class TestPosteriorMoment:
    def test_theta_matches_mmse(self):
        assert gv.posterior_moment(P8, 2.0, "theta") == pytest.approx(
            gv.mmse_estimate(P8, 2.0), rel=1e-14
        )

    def test_theta2_whittaker_form(self):
        t = 2.0
        expected = math.exp(
            math.log(t)
            + whittaker_w_log(P8.xi - 1.0, P8.mu_w + 1.0, t)
            - whittaker_w_log(P8.xi, P8.mu_w, t)
        )
        assert gv.posterior_moment(P8, t, "theta2") == pytest.approx(
            expected, rel=1e-13
        )

    @pytest.mark.parametrize("t", [0.5, 2.0, 8.0])
    @pytest.mark.parametrize(
        "kind,power",
        [
            ("theta", 1.0),
            ("theta2", 2.0),
            ("theta^-2", -2.0),
            ("theta^-3", -3.0),
        ],
    )
    def test_power_moments_vs_quadrature(self, t, kind, power):
        assert gv.posterior_moment(P8, t, kind) == pytest.approx(
            posterior_ratio_oracle(P8, t, power), rel=1e-6
        )

    @pytest.mark.parametrize("t", [0.5, 2.0, 8.0])
    def test_reciprocal_complement_vs_quadrature(self, t):
        mode = float(np.clip(gv.map_estimate(P8, t / 4), 1e-9, 1 - 1e-9))
        shift = float(gv.log_joint_t(P8, mode, t))

        def rows(th):
            lv = gv.log_joint_t(P8, th, t) - shift
            w = np.where(lv < -745.0, 0.0, np.exp(np.minimum(lv, 700.0)))
            return np.stack([w, w / (1.0 - th) ** 2])

        (z, mo), _, _ = integrate_multi(
            rows, Domain.finite(0.0, 1.0), rel_tol=1e-11
        )
        assert gv.posterior_moment(P8, t, "(1-theta)^-2") == pytest.approx(
            mo / z, rel=1e-6
        )

    def test_variance_nonnegative(self):
        for t in (0.1, 1.0, 10.0, 50.0):
            m1 = gv.posterior_moment(P8, t, "theta")
            m2 = gv.posterior_moment(P8, t, "theta2")
            assert m2 - m1 * m1 > 0.0

    def test_divergent_moment_rejected(self):
        p = gv.CaseParams(2.0, 8)
        with pytest.raises(UnsupportedRegime):
            gv.posterior_moment(p, 2.0, "(1-theta)^-2")

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            gv.posterior_moment(P8, 2.0, "theta^5")


class TestBayesianInformation:
    def test_closed_values(self):
        assert gv.bfim(P16) == pytest.approx(120.0, rel=1e-14)
        assert gv.bfim(P8) == pytest.approx(80.0, rel=1e-14)
        assert gv.bcrb(P8) == pytest.approx(1.0 / 80.0, rel=1e-14)

    def test_matches_nested_quadrature(self):
        # E_{t,theta}[score^2] assembled from the tower over t
        def fx_weighted(t):
            tn = np.atleast_1d(t)
            pt = gv.marginal_t_density(P8, np.maximum(tn, 1e-300))
            out = np.array(
                [gv.posterior_fisher(P8, float(tv)) for tv in tn]
            )
            return out * pt

        res = integrate(
            fx_weighted,
            Domain.semi_infinite(0.0),
            rel_tol=1e-8,
            initial_breaks=[0.5, 2.0, 8.0],
        )
        assert res.value == pytest.approx(gv.bfim(P8), rel=1e-6)

    def test_regime_guard(self):
        with pytest.raises(UnsupportedRegime):
            gv.bfim(gv.CaseParams(2.0, 8))
        with pytest.raises(UnsupportedRegime):
            gv.bcrb(gv.CaseParams(1.5, 8))


class TestEcrb:
    def test_prior_moment_identity(self):
        # E[2 theta^2 / N] = (2/N)(sigma_pi^2 + 1/4)
        for p in (P8, P16, gv.CaseParams(2.5, 64)):
            expected = (2.0 / p.n) * (p.sigma_pi_sq + 0.25)
            assert gv.ecrb(p) == pytest.approx(expected, rel=1e-14)

    def test_closed_value(self):
        assert gv.ecrb(P8) == pytest.approx(4.0 / 56.0, rel=1e-14)


class TestPosteriorFisher:
    @pytest.mark.parametrize("t", [0.5, 2.0, 8.0])
    def test_matches_score_quadrature(self, t):
        mode = float(np.clip(gv.map_estimate(P8, t / 4), 1e-9, 1 - 1e-9))
        shift = float(gv.log_joint_t(P8, mode, t))

        def rows(th):
            lv = gv.log_joint_t(P8, th, t) - shift
            w = np.where(lv < -745.0, 0.0, np.exp(np.minimum(lv, 700.0)))
            s = gv.score(P8, th, t)
            return np.stack([w, s * s * w])

        (z, sq), _, _ = integrate_multi(
            rows, Domain.finite(0.0, 1.0), rel_tol=1e-11
        )
        assert gv.posterior_fisher(P8, t) == pytest.approx(sq / z, rel=1e-6)

    def test_positive_on_grid(self):
        for t in np.geomspace(0.02, 60.0, 20):
            assert gv.posterior_fisher(P8, float(t)) > 0.0

    def test_regime_guard(self):
        with pytest.raises(UnsupportedRegime):
            gv.posterior_fisher(gv.CaseParams(2.0, 8), 1.0)


class TestTbcrb:
    @pytest.mark.parametrize("n", [2, 8, 64])
    def test_dual_route_agreement(self, n):
        p = gv.CaseParams(3.0, n)
        closed = gv.tbcrb(p, method="closed_form")
        engine = gv.tbcrb(p, method="engine")
        assert closed == pytest.approx(engine, rel=1e-5)
        assert gv.bcrb(p) <= closed

    def test_ratio_to_ecrb_tends_to_one(self):
        p = gv.CaseParams(3.0, 4096)
        ratio = gv.tbcrb(p) / gv.ecrb(p)
        assert 0.95 <= ratio <= 1.05

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            gv.tbcrb(P8, method="guess")

    def test_regime_guard(self):
        with pytest.raises(UnsupportedRegime):
            gv.tbcrb(gv.CaseParams(2.0, 8))


class TestMmseValue:
    def test_dual_route_agreement(self):
        quad = gv.mmse_value(P8, method="quadrature")
        closed = gv.mmse_value(P8, method="closed_form")
        assert closed == pytest.approx(quad, rel=1e-4)
        assert gv.mmse_value(P8) == quad  # quadrature is the default

    def test_bounded_by_prior_variance(self):
        for n in (2, 8, 64):
            p = gv.CaseParams(3.0, n)
            assert gv.mmse_value(p) <= p.sigma_pi_sq + 1e-12

    @pytest.mark.parametrize("n", [2, 8, 64, 512])
    def test_dominates_tbcrb(self, n):
        p = gv.CaseParams(3.0, n)
        assert gv.mmse_value(p) >= gv.tbcrb(p)

    def test_regime_guard(self):
        with pytest.raises(UnsupportedRegime):
            gv.mmse_value(gv.CaseParams(2.0, 8))

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            gv.mmse_value(P8, method="exact")


class TestAsymptoticPosterior:
    def test_normalized(self):
        p = gv.CaseParams(3.0, 256)
        t = 0.2 * p.n
        for form in ("profile", "gaussian"):
            res = integrate(
                lambda th: gv.asymptotic_posterior(p, th, t, form),
                Domain.finite(0.0, 1.0),
                rel_tol=1e-9,
            )
            assert res.value == pytest.approx(1.0, abs=1e-6)

    def test_both_forms_peak_at_gamma(self):
        p = gv.CaseParams(3.0, 1024)
        gam = 0.4
        t = 0.5 * p.n * gam
        th = np.linspace(0.3, 0.5, 4001)
        for form in ("profile", "gaussian"):
            d = gv.asymptotic_posterior(p, th, t, form)
            assert th[np.argmax(d)] == pytest.approx(gam, abs=1e-3)

    @pytest.mark.parametrize("form", ["profile", "gaussian"])
    def test_sup_norm_decreasing(self, form):
        gam = 0.4
        sups = []
        for n in (64, 256, 1024, 4096):
            p = gv.CaseParams(3.0, n)
            t = 0.5 * n * gam
            grid = np.linspace(1e-6, 1 - 1e-6, 4001)
            exact = gv.posterior_pdf(p, grid, t)
            approx = gv.asymptotic_posterior(p, grid, t, form)
            sups.append(np.max(np.abs(exact - approx)) / np.max(exact))
        assert all(b < a for a, b in zip(sups, sups[1:]))
        # skew decays like 1/sqrt(N): a few percent by N=1024, and the
        # gaussian form is inside 2% of the posterior around N=8192
        assert sups[2] < 0.06

    def test_gaussian_window_agreement_large_n(self):
        p = gv.CaseParams(3.0, 8192)
        gam = 0.4
        t = 0.5 * p.n * gam
        sd = gam * math.sqrt(2.0 / p.n)
        w = np.linspace(gam - 3 * sd, gam + 3 * sd, 2001)
        exact = gv.posterior_pdf(p, w, t)
        approx = gv.asymptotic_posterior(p, w, t, "gaussian")
        assert np.max(np.abs(exact - approx)) / np.max(exact) < 0.02

    def test_unknown_form(self):
        with pytest.raises(DomainError):
            gv.asymptotic_posterior(P8, 0.5, 2.0, "laplace")


class TestModelBridge:
    def test_conditional_q_equals_posterior_fisher(self):
        m = gv.make_model(P8)
        cm = conditional_moments(m, 2.0)
        assert cm.q_cond[0, 0] == pytest.approx(
            gv.posterior_fisher(P8, 2.0), rel=1e-6
        )
        assert cm.log_px == pytest.approx(
            math.log(gv.marginal_t_density(P8, 2.0)), abs=1e-9
        )

    def test_score_family_membership(self):
        rep = wwf_membership(gv.make_model(P8), [1.0, 4.0])
        assert rep.passed
        assert np.max(np.abs(rep.means)) < 1e-7

    def test_phi_cr_is_analytic_score(self):
        m = gv.make_model(P16)
        f = phi_cr(m)
        t = 0.5 * P16.n * 0.5
        assert f(t, 0.3) == pytest.approx(gv.score(P16, 0.3, t), rel=1e-12)

    def test_phi_cr_finite_difference_route(self):
        m = gv.make_model(P16)
        bare = JointModel(
            log_joint=m.log_joint,
            theta_support=Domain.finite(0.0, 1.0),
            g=m.g,
            phi=m.phi,
        )
        f = phi_cr(bare)
        t = 4.0
        assert f(t, 0.3) == pytest.approx(gv.score(P16, 0.3, t), rel=1e-5)

    def test_bound_depends_on_x(self):
        rep = equality_check(gv.make_model(P8), [0.5, 2.0, 8.0])
        assert rep.verdict == "depends_on_x"
        assert rep.max_deviation > 1e-3

    def test_engine_diagnostics_recover_bcrb(self):
        rep = tblb(gv.make_model(P8), gv.t_grid_expectation(P8), tol=1e-10)
        assert rep.kind == "tighter"
        assert rep.diagnostics["classical_bound"][0, 0] == pytest.approx(
            gv.bcrb(P8), rel=1e-6
        )


class TestOrderingChain:
    @pytest.mark.parametrize("n", [8, 16, 64, 256])
    def test_strict_chain(self, n):
        p = gv.CaseParams(3.0, n)
        b, tb, mm = gv.bcrb(p), gv.tbcrb(p), gv.mmse_value(p)
        assert b < tb < mm

    def test_small_n_bounds_nearly_coincide(self):
        p = gv.CaseParams(3.0, 2)
        assert abs(gv.tbcrb(p) - gv.bcrb(p)) / gv.bcrb(p) < 0.15
