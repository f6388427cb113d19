"""Monte-Carlo estimator benchmarking for the Gaussian-variance study.

Each trial draws theta from the Beta(a, a) prior and the sufficient
statistic t from its conditional Gamma law, evaluates the selected
estimators, and accumulates squared errors. Trials own counter-based
RNG substreams keyed by (seed, N, trial index), so the sample set is a
pure function of the seed and cannot depend on how trials are
partitioned across workers; every estimator path is elementwise, which
makes the emitted rows byte-stable for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, NonConvergent
from .gaussvar import (
    CaseParams,
    bcrb,
    ecrb,
    map_estimate,
    mmse_estimate_many,
    mmse_quadrature_many,
    mmse_value,
    tbcrb,
)

__all__ = [
    "ESTIMATOR_NAMES",
    "ExperimentConfig",
    "TrialRecord",
    "RmseRow",
    "trial_rng",
    "sample_prior",
    "sample_suffstat",
    "draw_trials",
    "run_trial",
    "estimate_batch",
    "run_experiment",
    "reproduce_fig1",
]

ESTIMATOR_NAMES = ("map", "ml", "mmse", "mmse_quadrature_fallback")

# failed trials tolerated per estimator before a row aborts
FAILURE_BUDGET = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    a: float
    n_list: tuple
    trials: int
    seed: int
    estimators: tuple = ("map", "ml", "mmse")

    def __post_init__(self):
        if not (np.isscalar(self.a) and math.isfinite(self.a) and self.a > 0.0):
            raise DomainError(f"prior shape a must be positive, got {self.a!r}")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise DomainError("n_list needs at least one sample count >= 1")
        if list(self.n_list) != sorted(self.n_list):
            raise DomainError("n_list must be sorted ascending")
        if self.trials < 100:
            raise DomainError(f"trials must be >= 100, got {self.trials}")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown or not self.estimators:
            raise DomainError(
                f"estimators must be a nonempty subset of {ESTIMATOR_NAMES}, "
                f"got {self.estimators!r}"
            )
        object.__setattr__(self, "seed", int(self.seed) & (2 ** 64 - 1))


@dataclass(frozen=True)
class TrialRecord:
    theta_true: float
    t: float
    estimates: dict
    sq_errors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sq_errors:
            object.__setattr__(
                self,
                "sq_errors",
                {
                    k: (v - self.theta_true) ** 2
                    for k, v in self.estimates.items()
                },
            )


@dataclass(frozen=True)
class RmseRow:
    n: int
    rmse: dict
    se: dict
    sqrt_bcrb: float
    sqrt_tbcrb: float
    sqrt_ecrb: float
    sqrt_mmse_theory: float


def trial_rng(seed: int, n: int, trial_index: int) -> np.random.Generator:
    """Counter-based substream for one trial; partition-independent."""
    ss = np.random.SeedSequence((int(seed), int(n), int(trial_index)))
    return np.random.Generator(np.random.Philox(ss))


def sample_prior(a: float, rng: np.random.Generator) -> float:
    """One Beta(a, a) draw built from two Gamma rejection draws."""
    g1 = rng.standard_gamma(a)
    g2 = rng.standard_gamma(a)
    return g1 / (g1 + g2)


def sample_suffstat(theta: float, n: int, rng: np.random.Generator) -> float:
    """t = (theta/2) * chi-square_n draw, via Gamma(n/2, scale 2)."""
    return theta * rng.standard_gamma(0.5 * n)


def _draw_block(a, n, seed, lo, hi):
    theta = np.empty(hi - lo)
    t = np.empty(hi - lo)
    for i in range(lo, hi):
        rng = trial_rng(seed, n, i)
        theta[i - lo] = sample_prior(a, rng)
        t[i - lo] = sample_suffstat(theta[i - lo], n, rng)
    return theta, t


def draw_trials(a: float, n: int, seed: int, trials: int):
    """(theta, t) arrays for trials 0..trials-1 of the (seed, n) stream.

    Same substreams run_experiment consumes, so estimates computed from
    these draws match the corresponding experiment rows exactly.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    return _draw_block(float(a), int(n), int(seed) & (2 ** 64 - 1), 0, int(trials))


def estimate_batch(p: CaseParams, estimator: str, t: np.ndarray) -> np.ndarray:
    """Vectorized estimates for one estimator name over a t block."""
    if estimator == "map":
        return map_estimate(p, 2.0 * t / p.n)
    if estimator == "ml":
        return 2.0 * t / p.n
    if estimator == "mmse":
        return mmse_estimate_many(p, t)
    if estimator == "mmse_quadrature_fallback":
        return mmse_quadrature_many(p, t)
    raise DomainError(f"unknown estimator {estimator!r}")


def run_trial(cfg: ExperimentConfig, n: int, trial_index: int) -> TrialRecord:
    """One trial end to end; the batch path reproduces this bitwise."""
    rng = trial_rng(cfg.seed, n, trial_index)
    theta = sample_prior(cfg.a, rng)
    t = sample_suffstat(theta, n, rng)
    p = CaseParams(a=cfg.a, n=n)
    one = np.array([t])
    estimates = {
        name: float(estimate_batch(p, name, one)[0])
        for name in cfg.estimators
    }
    return TrialRecord(theta_true=theta, t=t, estimates=estimates)


def _block_sq_errors(a, n, seed, lo, hi, estimators):
    theta, t = _draw_block(a, n, seed, lo, hi)
    p = CaseParams(a=a, n=n)
    out = {}
    for name in estimators:
        est = estimate_batch(p, name, t)
        out[name] = (est - theta) ** 2
    return out


@lru_cache(maxsize=None)
def _bound_columns(p: CaseParams):
    return (
        math.sqrt(bcrb(p)),
        math.sqrt(tbcrb(p, method="closed_form")),
        math.sqrt(ecrb(p)),
        math.sqrt(mmse_value(p, method="quadrature")),
    )


def _partition(trials: int, workers: int):
    step = -(-trials // workers)
    return [(lo, min(lo + step, trials)) for lo in range(0, trials, step)]


def run_experiment(cfg: ExperimentConfig, workers: int = 1):
    """RMSE rows for every N in the config.

    Per-trial squared errors are assembled in trial order into one
    array per estimator before any reduction happens, so means and
    standard errors see identical operand order for every worker
    count. Bound columns come from the closed forms and the
    quadrature-route MMSE, never from the trials.
    """
    if cfg.a <= 2.0:
        raise DomainError(
            f"bound columns need a > 2, got a={cfg.a} (estimator-only runs "
            "are not part of the row contract)"
        )
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    rows = []
    for n in cfg.n_list:
        parts = _partition(cfg.trials, workers)
        if workers == 1 or len(parts) == 1:
            blocks = [
                _block_sq_errors(cfg.a, n, cfg.seed, lo, hi, cfg.estimators)
                for lo, hi in parts
            ]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [
                    pool.submit(
                        _block_sq_errors, cfg.a, n, cfg.seed, lo, hi,
                        cfg.estimators,
                    )
                    for lo, hi in parts
                ]
                blocks = [f.result() for f in futs]
        rmse, se = {}, {}
        for name in cfg.estimators:
            sq = np.concatenate([b[name] for b in blocks])
            good = np.isfinite(sq)
            n_bad = int(sq.size - good.sum())
            if n_bad > FAILURE_BUDGET * cfg.trials:
                raise NonConvergent(
                    f"estimator {name} failed on {n_bad}/{cfg.trials} trials "
                    f"at N={n}"
                )
            kept = sq[good]
            mean_sq = float(np.mean(kept))
            r = math.sqrt(mean_sq)
            se_mean = float(np.std(kept, ddof=1)) / math.sqrt(kept.size)
            rmse[name] = r
            se[name] = se_mean / (2.0 * r) if r > 0.0 else 0.0
        p = CaseParams(a=cfg.a, n=n)
        sb, st, sec, sm = _bound_columns(p)
        rows.append(
            RmseRow(
                n=n, rmse=rmse, se=se, sqrt_bcrb=sb, sqrt_tbcrb=st,
                sqrt_ecrb=sec, sqrt_mmse_theory=sm,
            )
        )
    return rows


def reproduce_fig1(a: float = 3.0, trials: int = 20000, seed: int = 20220419,
                   workers: int = 1):
    """RMSE-versus-N benchmark over N = 2^1 .. 2^13.

    MAP, MMSE (closed form with the quadrature-ratio fallback), and ML
    against the square roots of BCRB, TBCRB, ECRB, and the model MMSE.
    """
    cfg = ExperimentConfig(
        a=a,
        n_list=tuple(2 ** k for k in range(1, 14)),
        trials=trials,
        seed=seed,
        estimators=("map", "ml", "mmse"),
    )
    return run_experiment(cfg, workers=workers)
