"""Exception hierarchy shared across the package.

Every failure mode that callers are expected to branch on gets its own type;
anything else propagates as the underlying ValueError/ArithmeticError.
"""


class CovBoundsError(Exception):
    """Base class for all package-specific failures."""


class DomainError(CovBoundsError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class NonConvergent(CovBoundsError, RuntimeError):
    """Adaptive quadrature exhausted its evaluation budget.

    Carries the best partial estimate so diagnostics can report how far
    the refinement got before giving up.
    """

    def __init__(self, message, value=None, err_est=None, evals=None):
        super().__init__(message)
        self.value = value
        self.err_est = err_est
        self.evals = evals


class NonFiniteIntegrand(CovBoundsError, ValueError):
    """The integrand returned NaN or +/-inf at a quadrature node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class UnsupportedRegime(CovBoundsError, ValueError):
    """Parameters fall where the requested quantity does not exist.

    Typical source: prior-edge poles, e.g. the Bayesian information of the
    Beta(a, a) variance model diverges for a <= 2.
    """


class SingularQ(CovBoundsError, ValueError):
    """Generating-family Gram matrix is numerically singular.

    Raised when cond(Q) exceeds the inversion guard, so a bound built on
    Q^{-1} would be noise.
    """

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class NotNaturalParameter(CovBoundsError, ValueError):
    """eta(theta) is not affine in theta, so the natural-parameter
    efficient-pair construction does not apply."""


class DegenerateFit(CovBoundsError, ValueError):
    """A regression/fit target is degenerate (constant g, non-concave
    log-density, all-zero score), so the fitted quantities are undefined."""
