"""Classical and tighter lower bounds from covariance inequalities.

The classical bound is R Q^{-1} R^T built from the global moments
R = E[g phi^T], Q = E[phi phi^T]. The tighter variant applies the same
inequality conditionally on x and averages the per-x bound over p(x);
everything is computed from joint-density integrals only, so no
posterior normalization is ever needed:

    R_tilde(x) = int g(theta) phi(x,theta)^T p(x,theta) dtheta
    Q_tilde(x) = int phi phi^T p(x,theta) dtheta
    tighter    = E_x[ (R_tilde/p) (Q_tilde/p)^{-1} (R_tilde/p)^T ]

with p(x) = int p(x,theta) dtheta falling out of the same quadrature
pass. Specializing phi to the posterior score gives the BCRB/TBCRB pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, SingularQ
from .model import JointModel, XSampler, probe_grid
from .quadrature import integrate_multi

__all__ = [
    "ConditionalMoments",
    "BoundReport",
    "SamplerExpectation",
    "GridExpectation",
    "blb_classical",
    "conditional_moments",
    "tblb",
    "phi_cr",
    "phi_bz",
    "equality_check",
    "EqualityReport",
    "wwf_membership",
    "MembershipReport",
]

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ConditionalMoments:
    """Joint-density moments at one x.

    r_cond and q_cond are the conditional moments R_tilde/p(x) and
    Q_tilde/p(x); they are the numerically safe representation because
    the density scale cancels. The unnormalized R_tilde/Q_tilde are
    recovered on demand and can under/overflow when |log_px| is huge.
    """

    r_cond: np.ndarray  # (L, M)
    q_cond: np.ndarray  # (M, M)
    log_px: float
    err_est: float  # worst relative quadrature error across entries

    @property
    def r_tilde(self) -> np.ndarray:
        return self.r_cond * math.exp(self.log_px)

    @property
    def q_tilde(self) -> np.ndarray:
        return self.q_cond * math.exp(self.log_px)


@dataclass(frozen=True)
class BoundReport:
    bound: np.ndarray  # (L, L) symmetric PSD
    kind: str  # classical | tighter | bcrb | tbcrb
    diagnostics: dict


@dataclass(frozen=True)
class SamplerExpectation:
    """Monte-Carlo E_x[.] with a declared draw count and seed."""

    sampler: XSampler
    draws: int
    seed: int


@dataclass(frozen=True)
class GridExpectation:
    """Deterministic E_x[.] from x points and dx-quadrature weights.

    weights satisfy sum_i w_i f(x_i) ~= int f(x) dx; for discrete x
    supports use counting weights of 1 and let p(x) carry the masses.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.shape != w.shape or pts.ndim != 1 or pts.size == 0:
            raise DomainError("points and weights must be matching 1-D arrays")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise DomainError("weights must be finite and nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)


def blb_classical(R, Q) -> np.ndarray:
    """Classical bound R Q^{-1} R^T from global moments, symmetrized."""
    r = np.atleast_2d(np.asarray(R, dtype=float))
    q = np.atleast_2d(np.asarray(Q, dtype=float))
    if q.shape[0] != q.shape[1] or r.shape[1] != q.shape[0]:
        raise DomainError("need R of shape (L, M) and Q of shape (M, M)")
    if not np.allclose(q, q.T, rtol=1e-8, atol=1e-12 * max(1.0, float(np.abs(q).max()))):
        raise DomainError("Q must be symmetric")
    k, _ = _solve_spd(q, r)
    bound = r @ k.T
    return 0.5 * (bound + bound.T)


def _solve_spd(q: np.ndarray, r: np.ndarray):
    """K = r q^{-1} through an eigendecomposition with a condition guard."""
    qs = 0.5 * (q + q.T)
    w, v = np.linalg.eigh(qs)
    w_max = float(w.max()) if w.size else 0.0
    w_min = float(w.min()) if w.size else 0.0
    cond = math.inf if w_min <= 0.0 else w_max / w_min
    if w_min <= 0.0 or cond > COND_LIMIT:
        raise SingularQ(
            f"Q condition number {cond:.3e} exceeds the {COND_LIMIT:.0e} guard",
            cond=cond,
        )
    k = (r @ v) / w @ v.T
    return k, cond


def _zoomed_shift(m: JointModel, x_summary):
    """Max of log_joint over theta and its location, by grid plus zoom."""
    sup = m.support(x_summary)
    grid = probe_grid(sup)
    lj = np.asarray(m.log_joint(x_summary, grid), dtype=float)
    lj = np.where(np.isnan(lj), -np.inf, lj)
    i0 = int(np.argmax(lj))
    shift = float(lj[i0])
    if not np.isfinite(shift):
        raise DomainError(f"log_joint carries no mass at x={x_summary!r}")
    lo = float(grid[max(i0 - 1, 0)])
    hi = float(grid[min(i0 + 1, grid.size - 1)])
    mode = float(grid[i0])
    for _ in range(3):
        sub = np.linspace(lo, hi, 65)
        ls = np.asarray(m.log_joint(x_summary, sub), dtype=float)
        ls = np.where(np.isnan(ls), -np.inf, ls)
        j = int(np.argmax(ls))
        if float(ls[j]) > shift:
            shift = float(ls[j])
            mode = float(sub[j])
        lo = float(sub[max(j - 1, 0)])
        hi = float(sub[min(j + 1, sub.size - 1)])
    return shift, mode


def _weighted_rows(m: JointModel, x_summary, shift: float, row_fn: Callable):
    def f(theta):
        lv = np.asarray(m.log_joint(x_summary, theta), dtype=float) - shift
        lv = np.where(np.isnan(lv), -np.inf, lv)
        w = np.where(lv < -745.0, 0.0, np.exp(np.minimum(lv, 700.0)))
        rows = row_fn(theta)
        # kill 0*inf from features that blow up where the density is dead
        rows = np.where(w[None, :] == 0.0, 0.0, rows)
        return rows * w[None, :]

    return f


def conditional_moments(m: JointModel, x_summary, tol: float = 1e-9) -> ConditionalMoments:
    """R_tilde, Q_tilde, log p(x) from a single stacked quadrature pass."""
    L, M = m.dim_l, m.dim_m
    iu, ju = np.triu_indices(M)

    def row_fn(theta):
        th = np.asarray(theta, dtype=float)
        g = m.g_rows(th)
        ph = m.phi_rows(x_summary, th)
        gphi = (g[:, None, :] * ph[None, :, :]).reshape(L * M, th.size)
        phiphi = ph[iu] * ph[ju]
        return np.concatenate([np.ones((1, th.size)), gphi, phiphi], axis=0)

    shift, mode = _zoomed_shift(m, x_summary)
    sup = m.support(x_summary)
    values, errs, _ = integrate_multi(
        _weighted_rows(m, x_summary, shift, row_fn),
        sup,
        rel_tol=tol,
        initial_breaks=[mode],
    )
    z = float(values[0])
    if not (z > 0.0 and np.isfinite(z)):
        raise DomainError(f"vanishing joint mass at x={x_summary!r}")

    r_cond = values[1:1 + L * M].reshape(L, M) / z
    q_flat = values[1 + L * M:] / z
    q_cond = np.zeros((M, M))
    q_cond[iu, ju] = q_flat
    q_cond[ju, iu] = q_flat
    scale = float(np.max(np.abs(values))) + 1e-300
    err_est = float(np.max(errs / np.maximum(np.abs(values), 1e-6 * scale)))
    return ConditionalMoments(
        r_cond=r_cond,
        q_cond=q_cond,
        log_px=shift + math.log(z),
        err_est=err_est,
    )


def tblb(m: JointModel, x_expectation, tol: float = 1e-9) -> BoundReport:
    """Tighter bound E_x[R_cond Q_cond^{-1} R_cond^T].

    With a GridExpectation the average is the deterministic integral
    sum_i w_i R_tilde Q_tilde^{-1} R_tilde^T; any singular Q aborts.
    With a SamplerExpectation it is a seeded Monte-Carlo mean over
    draws from p(x); isolated singular-Q draws are dropped and counted,
    and more than 0.1% of them fails the run. Diagnostics carry the
    global moments and the classical bound assembled from the same
    pass, so tighter-vs-classical comparisons share every sample.
    """
    L, M = m.dim_l, m.dim_m
    if isinstance(x_expectation, GridExpectation):
        pts = x_expectation.points
        wts = x_expectation.weights
        moments = []
        for x in pts.tolist():
            try:
                moments.append(conditional_moments(m, x, tol))
            except SingularQ as exc:
                raise SingularQ(f"singular Q at x={x!r}: {exc}", cond=exc.cond)
        log_px = np.array([cm.log_px for cm in moments])
        s = float(np.max(log_px))
        rel_p = np.exp(log_px - s)  # p(x_i) * e^{-s}

        tight = np.zeros((L, L))
        r_glob = np.zeros((L, M))
        q_glob = np.zeros((M, M))
        conds = []
        for cm, w, rp, x in zip(moments, wts, rel_p, pts.tolist()):
            try:
                k, cond = _solve_spd(cm.q_cond, cm.r_cond)
            except SingularQ as exc:
                raise SingularQ(f"singular Q at x={x!r}: {exc}", cond=exc.cond)
            conds.append(cond)
            tight += (w * rp) * (cm.r_cond @ k.T)
            r_glob += (w * rp) * cm.r_cond
            q_glob += (w * rp) * cm.q_cond
        scale = math.exp(s)
        tight *= scale
        r_glob *= scale
        q_glob *= scale
        diag = {
            "n_points": int(pts.size),
            "n_singular": 0,
            "x_mass": float(np.sum(wts * rel_p) * scale),
            "max_cond": float(max(conds)),
            "quad_err_max": float(max(cm.err_est for cm in moments)),
        }
    elif isinstance(x_expectation, SamplerExpectation):
        rng = np.random.default_rng(x_expectation.seed)
        n = int(x_expectation.draws)
        if n < 1:
            raise DomainError("need at least one draw")
        tight = np.zeros((L, L))
        r_glob = np.zeros((L, M))
        q_glob = np.zeros((M, M))
        conds = [1.0]
        err_max = 0.0
        skipped = 0
        for _ in range(n):
            x = x_expectation.sampler.draw(rng)
            try:
                cm = conditional_moments(m, x, tol)
                k, cond = _solve_spd(cm.q_cond, cm.r_cond)
            except SingularQ:
                skipped += 1
                continue
            conds.append(cond)
            err_max = max(err_max, cm.err_est)
            tight += cm.r_cond @ k.T
            r_glob += cm.r_cond
            q_glob += cm.q_cond
        if skipped > 0.001 * n:
            raise SingularQ(
                f"{skipped}/{n} draws had singular conditional Q", cond=None
            )
        used = n - skipped
        tight /= used
        r_glob /= used
        q_glob /= used
        diag = {
            "n_draws": n,
            "n_singular": skipped,
            "max_cond": float(max(conds)),
            "quad_err_max": err_max,
        }
    else:
        raise DomainError(
            "x_expectation must be a GridExpectation or SamplerExpectation"
        )

    tight = 0.5 * (tight + tight.T)
    diag["global_r"] = r_glob
    diag["global_q"] = q_glob
    diag["classical_bound"] = blb_classical(r_glob, q_glob)
    diag["min_eig"] = float(np.linalg.eigvalsh(tight).min())
    return BoundReport(bound=tight, kind="tighter", diagnostics=diag)


def phi_cr(m: JointModel) -> Callable:
    """Posterior-score generating family (the BCRB/TBCRB choice).

    Uses the model's analytic score when declared, otherwise central
    differences of log_joint with edge-aware step shrinking. Returns a
    callable phi(x_summary, theta) vectorized over theta, zero off
    the support.
    """
    if m.score is not None:
        analytic = m.score

        def fam(x_summary, theta):
            th = np.atleast_1d(np.asarray(theta, dtype=float))
            sup = m.support(x_summary)
            inside = _inside(sup, th)
            out = np.zeros(th.size)
            if inside.any():
                vals = np.asarray(analytic(x_summary, th[inside]), dtype=float)
                out[inside] = vals
            return out if np.ndim(theta) else float(out[0])

        return fam

    def fam(x_summary, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        sup = m.support(x_summary)
        inside = _inside(sup, th)
        out = np.zeros(th.size)
        if inside.any():
            ti = th[inside]
            h = 1e-6 * np.maximum(np.abs(ti), 1.0)
            if sup.kind in ("finite", "semi_infinite"):
                h = np.minimum(h, 0.5 * (ti - sup.lo))
            if sup.kind == "finite":
                h = np.minimum(h, 0.5 * (sup.hi - ti))
            up = np.asarray(m.log_joint(x_summary, ti + h), dtype=float)
            dn = np.asarray(m.log_joint(x_summary, ti - h), dtype=float)
            out[inside] = (up - dn) / (2.0 * h)
        return out if np.ndim(theta) else float(out[0])

    return fam


def _inside(sup, theta: np.ndarray) -> np.ndarray:
    if sup.kind == "finite":
        return (theta > sup.lo) & (theta < sup.hi)
    if sup.kind == "semi_infinite":
        return theta > sup.lo
    return np.isfinite(theta)


def phi_bz(m: JointModel, h: float, x_summary, theta):
    """Finite-shift generating function at one shift h.

    [p(theta+h|x) 1{theta+h in S} - p(theta|x) 1{theta-h in S}] / p(theta|x)
    evaluated through joint-density ratios; zero off-support. As h -> 0
    this recovers h times the posterior score.
    """
    if h == 0.0:
        raise DomainError("phi_bz needs a nonzero shift")
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    sup = m.support(x_summary)
    inside = _inside(sup, th)
    out = np.zeros(th.size)
    if inside.any():
        ti = th[inside]
        lj = np.asarray(m.log_joint(x_summary, ti), dtype=float)
        if np.any(~np.isfinite(lj)):
            bad = float(ti[np.argmax(~np.isfinite(lj))])
            raise DomainError(
                f"joint density vanishes at on-support theta={bad!r}"
            )
        plus_in = _inside(sup, ti + h)
        lj_plus = np.full(ti.size, -np.inf)
        if plus_in.any():
            lj_plus[plus_in] = np.asarray(
                m.log_joint(x_summary, ti[plus_in] + h), dtype=float
            )
        term1 = np.where(plus_in, np.exp(np.minimum(lj_plus - lj, 700.0)), 0.0)
        term2 = _inside(sup, ti - h).astype(float)
        out[inside] = term1 - term2
    return out if np.ndim(theta) else float(out[0])


@dataclass(frozen=True)
class EqualityReport:
    verdict: str  # "equal" | "depends_on_x"
    max_deviation: float


def equality_check(m: JointModel, x_probes: Sequence, tol: float = 1e-8) -> EqualityReport:
    """Does R_cond Q_cond^{-1} depend on x?

    Constancy of that matrix across x is exactly the condition for the
    tighter and classical bounds to coincide; the report carries the
    max pairwise max-norm deviation across the probes.
    """
    probes = list(x_probes)
    if len(probes) < 2:
        raise DomainError("equality_check needs at least two x probes")
    ks = []
    for x in probes:
        cm = conditional_moments(m, x)
        k, _ = _solve_spd(cm.q_cond, cm.r_cond)
        ks.append(k)
    dev = 0.0
    for i in range(len(ks)):
        for j in range(i + 1, len(ks)):
            dev = max(dev, float(np.max(np.abs(ks[i] - ks[j]))))
    verdict = "equal" if dev < tol else "depends_on_x"
    return EqualityReport(verdict=verdict, max_deviation=dev)


@dataclass(frozen=True)
class MembershipReport:
    passed: bool
    max_abs: float
    means: np.ndarray  # (n_probes, M) posterior means of each phi component


def wwf_membership(m: JointModel, x_probes: Sequence, tol: float = 1e-7) -> MembershipReport:
    """Checks E_{theta|x}[phi_m] = 0 at each probe (family admissibility)."""
    probes = list(x_probes)
    if not probes:
        raise DomainError("wwf_membership needs at least one x probe")
    M = m.dim_m

    means = np.zeros((len(probes), M))
    for i, x in enumerate(probes):
        def row_fn(theta):
            th = np.asarray(theta, dtype=float)
            ph = m.phi_rows(x, th)
            return np.concatenate([np.ones((1, th.size)), ph], axis=0)

        shift, mode = _zoomed_shift(m, x)
        values, _, _ = integrate_multi(
            _weighted_rows(m, x, shift, row_fn),
            m.support(x),
            rel_tol=1e-10,
            abs_tol=1e-16,
            initial_breaks=[mode],
        )
        z = float(values[0])
        if not (z > 0.0 and np.isfinite(z)):
            raise DomainError(f"vanishing joint mass at x={x!r}")
        means[i] = values[1:] / z

    max_abs = float(np.max(np.abs(means)))
    return MembershipReport(passed=bool(max_abs < tol), max_abs=max_abs, means=means)
