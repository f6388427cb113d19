"""Conjugate exponential families and estimator-efficiency tests.

An estimator ghat of g(theta) attains the tighter bound exactly when
ghat(x) - g(theta) = v(x) * d/dtheta log p(theta|x) for some positive
v(x). scalar_efficiency_test fits that relation at a fixed x and
reports how badly it fails; natural_efficient_pair constructs the
(g, ghat) pair that satisfies it with constant v whenever theta is a
natural parameter; gaussian_posterior_fit handles the g(theta)=theta
special case, where efficiency means a Gaussian posterior. The
linear-Gaussian conjugate model ties all three together and is the one
family here where every bound collapses to the posterior variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .engine import GridExpectation
from .errors import DegenerateFit, DomainError, NotNaturalParameter
from .model import JointModel
from .quadrature import Domain

__all__ = [
    "ExpFamSpec",
    "ConjugateHyper",
    "EfficiencyReport",
    "GaussianConjugate",
    "conjugate_update",
    "scalar_efficiency_test",
    "natural_efficient_pair",
    "gaussian_posterior_fit",
    "posterior_quantile_grid",
    "make_gaussian_conjugate",
]


@dataclass(frozen=True)
class ExpFamSpec:
    """Likelihood p(x|theta) = h(x) exp[eta(theta).t(x) - A(theta)].

    log_h maps an x summary to log h(x); eta and t_stat return
    length-J vectors; log_partition is A(theta), whose finiteness on
    the parameter set is the caller's declaration.
    """

    log_h: Callable
    eta: Callable
    t_stat: Callable
    log_partition: Callable

    def log_likelihood(self, x_summary, theta: float) -> float:
        e = np.atleast_1d(np.asarray(self.eta(theta), dtype=float))
        t = np.atleast_1d(np.asarray(self.t_stat(x_summary), dtype=float))
        if e.shape != t.shape:
            raise DomainError(
                f"eta and t_stat dimensions disagree: {e.shape} vs {t.shape}"
            )
        return float(self.log_h(x_summary)) + float(e @ t) - float(
            self.log_partition(theta)
        )


@dataclass(frozen=True)
class ConjugateHyper:
    """Prior p(theta; lam, mu) propto exp[eta(theta).mu - lam*A(theta)]."""

    lam: float
    mu: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if mu.ndim != 1 or not np.all(np.isfinite(mu)):
            raise DomainError(f"mu must be a finite vector, got {self.mu!r}")
        if not math.isfinite(self.lam):
            raise DomainError(f"lam must be finite, got {self.lam!r}")
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class EfficiencyReport:
    is_efficient: bool
    deviation: float
    fitted_ghat: float
    fitted_v: float


def conjugate_update(hyper: ConjugateHyper, t_of_x) -> ConjugateHyper:
    """Posterior hyperparameters after observing one x with statistic t(x)."""
    t = np.atleast_1d(np.asarray(t_of_x, dtype=float))
    if t.shape != hyper.mu.shape:
        raise DomainError(
            f"statistic length {t.shape} does not match mu {hyper.mu.shape}"
        )
    return ConjugateHyper(lam=hyper.lam + 1.0, mu=hyper.mu + t)


def _eval_on_grid(fn: Callable, grid: np.ndarray) -> np.ndarray:
    # accept scalar-only callables as well as vectorized ones
    try:
        out = np.asarray(fn(grid), dtype=float)
        if out.shape == grid.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(t)) for t in grid])


def scalar_efficiency_test(score: Callable, g: Callable, theta_grid,
                           tol: float = 1e-6) -> EfficiencyReport:
    """Least-squares check of score(theta) = (ghat - g(theta)) / v at one x.

    The fit is linear in the unknowns (ghat/v, 1/v); deviation is the
    RMS residual divided by the RMS score, so it is exactly zero on
    the efficient family and scale-free otherwise.
    """
    th = np.asarray(theta_grid, dtype=float)
    s = _eval_on_grid(score, th)
    gv = _eval_on_grid(g, th)
    keep = np.isfinite(s) & np.isfinite(gv)
    s, gv = s[keep], gv[keep]
    if s.size < 10:
        raise DomainError(
            f"need at least 10 grid points with finite score, got {s.size}"
        )
    spread = float(np.max(gv) - np.min(gv))
    if spread <= 1e-12 * max(1.0, float(np.max(np.abs(gv)))):
        raise DegenerateFit("g is constant on the grid")
    rms_s = math.sqrt(float(np.mean(s * s)))
    if rms_s == 0.0:
        raise DegenerateFit("score vanishes on the grid")
    design = np.column_stack([np.ones_like(gv), -gv])
    coef, *_ = np.linalg.lstsq(design, s, rcond=None)
    alpha, beta = float(coef[0]), float(coef[1])
    if beta <= 0.0:
        raise DegenerateFit(f"fitted 1/v is not positive ({beta:.3e})")
    resid = s - design @ coef
    deviation = math.sqrt(float(np.mean(resid * resid))) / rms_s
    return EfficiencyReport(
        is_efficient=bool(deviation < tol),
        deviation=deviation,
        fitted_ghat=alpha / beta,
        fitted_v=1.0 / beta,
    )


def natural_efficient_pair(spec: ExpFamSpec, hyper: ConjugateHyper, c,
                           theta_probe=(0.25, 0.5, 0.75),
                           fd_step: float = 1e-4):
    """The (g, ghat) pair that is efficient when eta is affine in theta.

    g(theta) = (lam + 1) dA/dtheta and ghat(x) = c.t(x), additive
    constants dropped. dA/dtheta comes from 5-point central
    differences with step fd_step * max(1, |theta|).
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != hyper.mu.shape:
        raise DomainError(
            f"direction length {c.shape} does not match mu {hyper.mu.shape}"
        )
    p1, p2, p3 = (float(t) for t in theta_probe)
    if not p1 < p2 < p3:
        raise DomainError("theta_probe must be three increasing points")
    e1, e2, e3 = (
        np.atleast_1d(np.asarray(spec.eta(t), dtype=float)) for t in (p1, p2, p3)
    )
    slope_lo = (e2 - e1) / (p2 - p1)
    slope_hi = (e3 - e2) / (p3 - p2)
    scale = max(1.0, float(np.max(np.abs([slope_lo, slope_hi]))))
    if float(np.max(np.abs(slope_hi - slope_lo))) > 1e-8 * scale:
        raise NotNaturalParameter(
            "eta is not affine in theta on the probe points"
        )
    lam1 = hyper.lam + 1.0
    a_fn = spec.log_partition

    def g(theta):
        th = np.asarray(theta, dtype=float)
        h = fd_step * np.maximum(1.0, np.abs(th))
        d = (
            _eval_on_grid(a_fn, th - 2.0 * h)
            - 8.0 * _eval_on_grid(a_fn, th - h)
            + 8.0 * _eval_on_grid(a_fn, th + h)
            - _eval_on_grid(a_fn, th + 2.0 * h)
        ) / (12.0 * h)
        return lam1 * d if np.ndim(theta) else float(lam1 * d)

    def ghat(x_summary):
        t = np.atleast_1d(np.asarray(spec.t_stat(x_summary), dtype=float))
        return float(c @ t)

    return g, ghat


def gaussian_posterior_fit(posterior_logpdf: Callable, theta_grid,
                           tol: float = 1e-6) -> dict:
    """Quadratic fit of a log-posterior; exact iff the posterior is Gaussian.

    Returns the implied mean and variance plus the sup-norm residual
    of the fit over the grid (the additive constant is fitted, so
    normalization of the input does not matter).
    """
    th = np.asarray(theta_grid, dtype=float)
    lp = _eval_on_grid(posterior_logpdf, th)
    keep = np.isfinite(lp)
    th, lp = th[keep], lp[keep]
    if th.size < 5:
        raise DomainError(
            f"need at least 5 grid points with finite log-pdf, got {th.size}"
        )
    center = float(np.mean(th))
    z = th - center
    design = np.column_stack([np.ones_like(z), z, z * z])
    coef, *_ = np.linalg.lstsq(design, lp, rcond=None)
    curv = float(coef[2])
    if curv >= 0.0:
        raise DegenerateFit(f"fitted log-density is not concave ({curv:.3e})")
    resid = lp - design @ coef
    sup = float(np.max(np.abs(resid)))
    return {
        "mean": center - float(coef[1]) / (2.0 * curv),
        "variance": -1.0 / (2.0 * curv),
        "sup_deviation": sup,
        "is_gaussian": bool(sup < tol),
    }


def posterior_quantile_grid(logpdf: Callable, lo: float, hi: float,
                            points: int = 64, probe: int = 4097) -> np.ndarray:
    """Equal-mass theta grid: the (k+1/2)/points quantiles of the density.

    Concentrates points where the posterior mass is, which uniform
    grids fail to do at large sample sizes. logpdf may be
    unnormalized; [lo, hi] must cover the central mass.
    """
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise DomainError(f"need finite lo < hi, got [{lo}, {hi}]")
    if points < 2:
        raise DomainError(f"need at least 2 grid points, got {points}")
    # zoom onto the mass before inverting: a concentrated posterior can
    # occupy a handful of probe points of the full window otherwise
    for _ in range(3):
        dense = np.linspace(lo, hi, probe)
        lp = _eval_on_grid(logpdf, dense)
        lp = np.where(np.isfinite(lp), lp, -np.inf)
        top = float(np.max(lp))
        if not math.isfinite(top):
            raise DomainError("log-pdf is -inf on the entire window")
        live = np.nonzero(lp > top - 46.0)[0]
        new_lo = dense[max(live[0] - 1, 0)]
        new_hi = dense[min(live[-1] + 1, probe - 1)]
        if (new_hi - new_lo) > 0.9 * (hi - lo):
            break
        lo, hi = float(new_lo), float(new_hi)
    w = np.exp(lp - top)
    steps = 0.5 * (w[1:] + w[:-1]) * np.diff(dense)
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    if cdf[-1] <= 0.0:
        raise DomainError("density mass underflowed on the window")
    cdf /= cdf[-1]
    q = (np.arange(points) + 0.5) / points
    return np.interp(q, cdf, dense)


@dataclass(frozen=True)
class GaussianConjugate:
    """Gaussian location model: x_i = theta + w_i with the conjugate prior.

    n observations with noise variance noise_var, prior N(0, prior_var)
    on theta; the sufficient statistic is s = sum x_i. The posterior is
    Gaussian with x-independent variance, so the tighter and classical
    bounds coincide with the posterior variance exactly.
    """

    n: int
    prior_var: float
    noise_var: float

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"need n >= 1 observations, got {self.n}")
        if not (self.prior_var > 0.0 and self.noise_var > 0.0):
            raise DomainError("prior_var and noise_var must be positive")

    @property
    def posterior_var(self) -> float:
        return 1.0 / (self.n / self.noise_var + 1.0 / self.prior_var)

    def posterior_mean(self, s: float) -> float:
        return self.posterior_var * s / self.noise_var

    def log_joint(self, s, theta):
        th = np.asarray(theta, dtype=float)
        nv, pv = self.noise_var, self.prior_var
        ll = (
            -0.5 * (s - self.n * th) ** 2 / (self.n * nv)
            - 0.5 * math.log(2.0 * math.pi * self.n * nv)
        )
        lp = -0.5 * th * th / pv - 0.5 * math.log(2.0 * math.pi * pv)
        out = ll + lp
        return out if np.ndim(theta) else float(out)

    def score(self, s, theta):
        th = np.asarray(theta, dtype=float)
        out = (self.posterior_mean(s) - th) / self.posterior_var
        return out if np.ndim(theta) else float(out)

    def spec(self) -> ExpFamSpec:
        nv = self.noise_var

        def log_h(s):
            return (
                -0.5 * s * s / (self.n * nv)
                - 0.5 * math.log(2.0 * math.pi * self.n * nv)
            )

        return ExpFamSpec(
            log_h=log_h,
            eta=lambda th: np.array([th], dtype=float),
            t_stat=lambda s: np.array([s / nv], dtype=float),
            log_partition=lambda th: 0.5 * self.n * th * th / nv,
        )

    def hyper(self) -> ConjugateHyper:
        return ConjugateHyper(
            lam=self.noise_var / (self.n * self.prior_var), mu=np.zeros(1)
        )

    def model(self) -> JointModel:
        def fam(s, theta):
            return self.score(s, np.asarray(theta, dtype=float))

        return JointModel(
            log_joint=self.log_joint,
            theta_support=Domain.infinite(),
            g=lambda theta: np.asarray(theta, dtype=float),
            phi=fam,
            dim_l=1,
            dim_m=1,
            score=fam,
        )

    def s_expectation(self, points_per_panel: int = 16) -> GridExpectation:
        sd = math.sqrt(self.n ** 2 * self.prior_var + self.n * self.noise_var)
        edges = sd * np.array([-8.0, -4.0, -2.0, -1.0, -0.5, 0.0,
                               0.5, 1.0, 2.0, 4.0, 8.0])
        x, w = np.polynomial.legendre.leggauss(points_per_panel)
        pts, wts = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            pts.append(0.5 * (lo + hi) + half * x)
            wts.append(half * w)
        return GridExpectation(
            points=np.concatenate(pts), weights=np.concatenate(wts)
        )


def make_gaussian_conjugate(prior_var: float = 1.0, noise_var: float = 1.0,
                            n: int = 4) -> GaussianConjugate:
    return GaussianConjugate(n=n, prior_var=prior_var, noise_var=noise_var)
