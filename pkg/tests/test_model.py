"""Model-container tests: probe grids, shape lifting, and the
three-part sanity validation (finiteness, normalizability, phi rank)."""

import math

import numpy as np
import pytest

from covbounds.errors import DomainError
from covbounds.model import (
    BoundMatrices,
    JointModel,
    probe_grid,
    validate_model,
)
from covbounds.quadrature import Domain


def uniform_model(dim_m=1):
    # p(x, theta) = 1/2 per x in {0, 1}, theta uniform on (0, 1)
    def log_joint(x, th):
        return np.full_like(np.asarray(th, dtype=float), math.log(0.5))

    def phi(x, th):
        th = np.asarray(th, dtype=float)
        u = math.sqrt(12.0) * (th - 0.5)
        if dim_m == 1:
            return u
        w = math.sqrt(180.0) * (th * th - th + 1.0 / 6.0)
        return np.stack([u, w])

    return JointModel(
        log_joint=log_joint,
        theta_support=Domain.finite(0.0, 1.0),
        g=lambda th: np.asarray(th, dtype=float),
        phi=phi,
        dim_m=dim_m,
    )


class TestJointModel:
    def test_dim_guard(self):
        with pytest.raises(DomainError):
            JointModel(
                log_joint=lambda x, th: th,
                theta_support=Domain.finite(0.0, 1.0),
                g=lambda th: th,
                phi=lambda x, th: th,
                dim_l=0,
            )

    def test_support_callable_variant(self):
        m = JointModel(
            log_joint=lambda x, th: th,
            theta_support=lambda x: Domain.finite(0.0, float(x)),
            g=lambda th: th,
            phi=lambda x, th: th,
        )
        assert m.support(2.0).hi == 2.0
        assert m.support(5.0).hi == 5.0

    def test_with_phi_swaps_family_only(self):
        m = uniform_model()
        m2 = m.with_phi(lambda x, th: np.asarray(th) ** 2, dim_m=1)
        th = np.array([0.25, 0.5])
        np.testing.assert_allclose(m2.phi(0.0, th), th ** 2)
        assert m2.g is m.g
        assert m2.log_joint is m.log_joint

    def test_row_lifting(self):
        m = uniform_model()
        th = np.linspace(0.1, 0.9, 5)
        rows = m.phi_rows(0.0, th)
        assert rows.shape == (1, 5)
        g = m.g_rows(th)
        assert g.shape == (1, 5)

    def test_row_shape_mismatch_raises(self):
        m = uniform_model(dim_m=2).with_phi(lambda x, th: np.asarray(th), dim_m=2)
        with pytest.raises(DomainError):
            m.phi_rows(0.0, np.array([0.2, 0.4]))


class TestBoundMatrices:
    def test_accepts_consistent_shapes(self):
        bm = BoundMatrices(R=np.ones((1, 2)), Q=np.eye(2))
        assert bm.R.shape == (1, 2)

    def test_rejects_shape_and_nonfinite(self):
        with pytest.raises(DomainError):
            BoundMatrices(R=np.ones((1, 3)), Q=np.eye(2))
        with pytest.raises(DomainError):
            BoundMatrices(R=np.array([[np.nan]]), Q=np.eye(1))


class TestProbeGrid:
    def test_finite_grid_strictly_interior(self):
        g = probe_grid(Domain.finite(2.0, 3.0), n=33)
        assert g.size == 33
        assert np.all(g > 2.0) and np.all(g < 3.0)
        assert np.all(np.diff(g) > 0)

    def test_semi_infinite_coverage(self):
        g = probe_grid(Domain.semi_infinite(1.0), n=257)
        assert np.all(g > 1.0)
        assert g.max() > 100.0  # reaches far out
        assert g.min() < 1.01  # and close to the edge

    def test_infinite_two_sided(self):
        g = probe_grid(Domain.infinite(), n=257)
        assert g.min() < -50.0 and g.max() > 50.0

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            probe_grid(Domain.finite(0.0, 1.0), n=0)


class TestValidateModel:
    def test_clean_model_passes(self):
        m = uniform_model(dim_m=2)
        rep = validate_model(m, [(0.0, [0.2, 0.5, 0.8]), (1.0, [0.3, 0.7])])
        assert rep.passed
        assert rep.finite_log_joint and rep.normalizable and rep.phi_independent
        assert rep.messages == ()

    def test_dependent_phi_fails_rank(self):
        def phi(x, th):
            th = np.asarray(th, dtype=float)
            u = th - 0.5
            return np.stack([u, 2.0 * u])  # second component is a multiple

        m = uniform_model(dim_m=2).with_phi(phi, dim_m=2)
        rep = validate_model(m, [(0.0, [0.2, 0.5, 0.8]), (1.0, [0.3, 0.7])])
        assert not rep.phi_independent
        assert not rep.passed
        assert any("independent" in msg for msg in rep.messages)

    def test_nonfinite_log_joint_reported(self):
        base = uniform_model()

        def bad_log_joint(x, th):
            th = np.asarray(th, dtype=float)
            out = np.full_like(th, math.log(0.5))
            return np.where(th > 0.6, np.nan, out)

        m = JointModel(
            log_joint=bad_log_joint,
            theta_support=base.theta_support,
            g=base.g,
            phi=base.phi,
        )
        rep = validate_model(m, [(0.0, [0.2, 0.7])])
        assert not rep.finite_log_joint
        assert any("not finite" in msg for msg in rep.messages)

    def test_probe_outside_support_reported(self):
        m = uniform_model()
        rep = validate_model(m, [(0.0, [0.5, 1.5])])
        assert not rep.finite_log_joint
        assert any("outside support" in msg for msg in rep.messages)

    def test_non_normalizable_flagged(self):
        # constant density over an unbounded support has no finite mass
        m = JointModel(
            log_joint=lambda x, th: np.zeros_like(np.asarray(th, dtype=float)),
            theta_support=Domain.semi_infinite(0.0),
            g=lambda th: np.asarray(th, dtype=float),
            phi=lambda x, th: np.asarray(th, dtype=float) - 1.0,
        )
        rep = validate_model(m, [(0.0, [1.0, 2.0])])
        assert not rep.normalizable
        assert not rep.passed

    def test_needs_probes(self):
        with pytest.raises(DomainError):
            validate_model(uniform_model(), [])
