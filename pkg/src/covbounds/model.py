"""Estimation-problem interface consumed by the bound computations.

A problem is described by its log joint density over (x, theta), the
theta support given x, the estimand g(theta), and a generating family
phi(x, theta). Everything downstream (conditional moments, classical
and tighter bounds, membership/equality diagnostics) works through this
container, so exotic models only need to fill in these callables.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DomainError
from .quadrature import Domain, integrate

__all__ = [
    "JointModel",
    "XSampler",
    "BoundMatrices",
    "ValidationReport",
    "validate_model",
    "probe_grid",
]


@dataclass(frozen=True)
class JointModel:
    """Immutable description of one estimation problem.

    log_joint(x_summary, theta) -> log p(x, theta), vectorized over a
    theta array at fixed x, -inf off the support. theta_support is
    either a Domain or a callable x_summary -> Domain for models whose
    support depends on x. g(theta) is the estimand, phi(x_summary,
    theta) the generating family; for dim_m > 1, phi returns an
    (M, n) array over a length-n theta array. score, when supplied,
    is d/dtheta log_joint (equal to the posterior score) and lets
    phi_cr skip finite differences.
    """

    log_joint: Callable
    theta_support: Union[Domain, Callable]
    g: Callable
    phi: Callable
    dim_l: int = 1
    dim_m: int = 1
    score: Optional[Callable] = None

    def __post_init__(self):
        if self.dim_l < 1 or self.dim_m < 1:
            raise DomainError("dim_l and dim_m must be at least 1")

    def support(self, x_summary) -> Domain:
        if isinstance(self.theta_support, Domain):
            return self.theta_support
        return self.theta_support(x_summary)

    def with_phi(self, phi: Callable, dim_m: Optional[int] = None) -> "JointModel":
        """Same problem, different generating family."""
        return dataclasses.replace(
            self, phi=phi, dim_m=self.dim_m if dim_m is None else dim_m
        )

    def g_rows(self, theta: np.ndarray) -> np.ndarray:
        """g evaluated as an (L, n) array regardless of callable shape."""
        return _as_rows(self.g(theta), self.dim_l, theta.size, "g")

    def phi_rows(self, x_summary, theta: np.ndarray) -> np.ndarray:
        """phi evaluated as an (M, n) array regardless of callable shape."""
        return _as_rows(self.phi(x_summary, theta), self.dim_m, theta.size, "phi")


def _as_rows(values, rows: int, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1 and rows == 1:
        arr = arr[None, :]
    if arr.shape != (rows, n):
        raise DomainError(
            f"{name} returned shape {arr.shape}, expected ({rows}, {n})"
        )
    return arr


@dataclass(frozen=True)
class XSampler:
    """Draws x summaries distributed as p(x), via theta ~ p then x | theta."""

    draw: Callable  # rng -> x_summary


@dataclass(frozen=True)
class BoundMatrices:
    """Global moments R = E[g phi^T] (L x M) and Q = E[phi phi^T] (M x M)."""

    R: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.R, dtype=float)
        q = np.asarray(self.Q, dtype=float)
        if r.ndim != 2 or q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DomainError("R must be L x M and Q must be M x M")
        if r.shape[1] != q.shape[0]:
            raise DomainError("R and Q disagree on M")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(q))):
            raise DomainError("bound moments must be finite")
        object.__setattr__(self, "R", r)
        object.__setattr__(self, "Q", q)


def probe_grid(domain: Domain, n: int = 257) -> np.ndarray:
    """Interior points spread over a support of any kind.

    Uniform in the same rational transform quadrature uses, so
    unbounded supports get coverage from deep near the finite edge out
    to large magnitudes.
    """
    if n < 1:
        raise DomainError("probe count must be positive")
    u = np.linspace(0.0, 1.0, n + 2)[1:-1]
    if domain.kind == "finite":
        return domain.lo + (domain.hi - domain.lo) * u
    if domain.kind == "semi_infinite":
        return domain.lo + u / (1.0 - u)
    v = 2.0 * u - 1.0
    return v / (1.0 - v * v)


@dataclass(frozen=True)
class ValidationReport:
    finite_log_joint: bool
    normalizable: bool
    phi_independent: bool
    messages: tuple

    @property
    def passed(self) -> bool:
        return self.finite_log_joint and self.normalizable and self.phi_independent


def validate_model(m: JointModel, probe_points: Sequence) -> ValidationReport:
    """Sanity checks over (x_summary, theta) probe pairs.

    Checks that log_joint is finite at every on-support probe, that
    exp(log_joint) has finite positive theta-mass at each distinct x,
    and that the phi components are linearly independent (Gram rank M
    over the probes). Failures are reported, never raised.
    """
    probes = list(probe_points)
    if not probes:
        raise DomainError("validate_model needs at least one probe point")

    messages = []
    finite_ok = True
    phi_block_rows = []

    for x_summary, theta in probes:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        sup = m.support(x_summary)
        if not all(sup.contains(v) for v in th):
            finite_ok = False
            messages.append(f"probe theta={theta!r} outside support at x={x_summary!r}")
            continue
        lj = np.atleast_1d(np.asarray(m.log_joint(x_summary, th), dtype=float))
        if not np.all(np.isfinite(lj)):
            finite_ok = False
            messages.append(f"log_joint not finite at x={x_summary!r}, theta={theta!r}")
        try:
            phi_block_rows.append(m.phi_rows(x_summary, th).T)
        except DomainError as exc:
            messages.append(str(exc))

    # per-x mass of exp(log_joint), computed with a max-shift so the
    # check works at any density scale
    normal_ok = True
    seen = []
    for x_summary, _ in probes:
        key = repr(x_summary)
        if key in seen:
            continue
        seen.append(key)
        sup = m.support(x_summary)
        grid = probe_grid(sup)
        lj = np.asarray(m.log_joint(x_summary, grid), dtype=float)
        lj = np.where(np.isnan(lj), -np.inf, lj)
        shift = float(np.max(lj))
        if not np.isfinite(shift):
            normal_ok = False
            messages.append(f"no density mass found at x={x_summary!r}")
            continue
        try:
            res = integrate(
                lambda th: _exp_shifted(m.log_joint(x_summary, th), shift),
                sup,
                rel_tol=1e-8,
                initial_breaks=[float(grid[np.argmax(lj)])],
            )
        except Exception as exc:  # quadrature failures are findings here
            normal_ok = False
            messages.append(f"mass quadrature failed at x={x_summary!r}: {exc}")
            continue
        if not (np.isfinite(res.value) and res.value > 0.0):
            normal_ok = False
            messages.append(f"non-normalizable density at x={x_summary!r}")

    indep_ok = True
    if phi_block_rows:
        block = np.vstack(phi_block_rows)  # (total probes, M)
        sv = np.linalg.svd(block, compute_uv=False)
        if sv.size < m.dim_m or sv[-1] <= 1e-10 * max(sv[0], 1e-300):
            indep_ok = False
            messages.append(
                f"phi components not linearly independent on probes "
                f"(rank < {m.dim_m})"
            )
    else:
        indep_ok = False
        messages.append("phi could not be evaluated on any probe")

    return ValidationReport(
        finite_log_joint=finite_ok,
        normalizable=normal_ok,
        phi_independent=indep_ok,
        messages=tuple(messages),
    )


def _exp_shifted(log_values, shift: float) -> np.ndarray:
    lv = np.asarray(log_values, dtype=float) - shift
    lv = np.where(np.isnan(lv), -np.inf, lv)
    return np.where(lv < -745.0, 0.0, np.exp(np.minimum(lv, 700.0)))
