"""Bayesian lower bounds on estimator MSE from covariance inequalities.

Classical and tighter bounds (BLB/TBLB and their Cramer-Rao
specializations BCRB/TBCRB), Bayesian-efficiency diagnostics, and a
fully worked Gaussian-variance/Beta-prior case study with a reproducible
Monte-Carlo RMSE experiment.
"""

from .errors import (
    CovBoundsError,
    DegenerateFit,
    DomainError,
    NonConvergent,
    NonFiniteIntegrand,
    NotNaturalParameter,
    SingularQ,
    UnsupportedRegime,
)
from .quadrature import Domain, QuadResult, integrate, integrate_multi, integrate_weighted_t
from .specfun import log_beta, log_gamma, whittaker_w_log, whittaker_w_log_many
from .model import (
    BoundMatrices,
    JointModel,
    ValidationReport,
    XSampler,
    probe_grid,
    validate_model,
)
from .engine import (
    BoundReport,
    ConditionalMoments,
    EqualityReport,
    GridExpectation,
    MembershipReport,
    SamplerExpectation,
    blb_classical,
    conditional_moments,
    equality_check,
    phi_bz,
    phi_cr,
    tblb,
    wwf_membership,
)
from .gaussvar import (
    CaseParams,
    MapCoefficients,
    SuffStat,
    asymptotic_posterior,
    bcrb,
    bfim,
    ecrb,
    map_estimate,
    marginal_t_density,
    ml_estimate,
    mmse_estimate,
    mmse_estimate_many,
    mmse_value,
    posterior_fisher,
    posterior_moment,
    posterior_pdf,
    tbcrb,
)
from .expfam import (
    ConjugateHyper,
    EfficiencyReport,
    ExpFamSpec,
    GaussianConjugate,
    conjugate_update,
    gaussian_posterior_fit,
    make_gaussian_conjugate,
    natural_efficient_pair,
    posterior_quantile_grid,
    scalar_efficiency_test,
)
from .montecarlo import (
    ExperimentConfig,
    RmseRow,
    TrialRecord,
    draw_trials,
    reproduce_fig1,
    run_experiment,
    sample_prior,
    sample_suffstat,
)

__version__ = "0.1.0"
