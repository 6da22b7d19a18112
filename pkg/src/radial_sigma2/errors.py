"""Exception types shared across the package."""


class RadialSigma2Error(Exception):
    """Base class for all package errors."""


class NotInFutureCone(RadialSigma2Error):
    """Point does not satisfy X_{n+1} > |X'|, so polar decomposition is undefined."""


class NotAdmissible(RadialSigma2Error):
    """Principal curvatures leave the positivity cone required by the operator."""


class SingularPoint(RadialSigma2Error):
    """ODE right-hand side evaluated at its singular locus (r = 0 or s <= 0)."""


class TrapViolation(RadialSigma2Error):
    """Trap inequality (n-2) sinh^2 s <= n h^2 sinh^2 r failed beyond tolerance."""


class StepUnderflow(RadialSigma2Error):
    """Adaptive step collapsed below the hard floor (1e-13)."""


class SeriesStartError(RadialSigma2Error):
    """Series start residual did not shrink under refinement as required."""


class OutOfRange(RadialSigma2Error):
    """Requested evaluation point lies outside the computed solution range."""


class NonPositivePrescription(RadialSigma2Error):
    """Curvature datum h evaluated to a non-positive value."""


class EnvelopeInvalid(RadialSigma2Error):
    """Measured tail variable escaped its own linear envelope bracket."""


class SamplerCapExceeded(RadialSigma2Error):
    """Sphere sampler density cap reached before sup/inf stabilized."""


class NonPositiveEnvelope(RadialSigma2Error):
    """Lower envelope dropped to a non-positive value after normalization."""


class MarginTooLarge(RadialSigma2Error):
    """Margin constant eps0 is not below the infimum of the upper envelope."""


class FitBudgetExceeded(RadialSigma2Error):
    """A smoothing window cannot meet its sup-error budget."""


class NotIntegrable(RadialSigma2Error):
    """Envelope deficit integrals are not numerically convergent."""


class InversionFailed(RadialSigma2Error):
    """Radial-map inversion root-find did not converge."""


class MetricDegenerate(RadialSigma2Error):
    """Induced metric lost positivity (graph not safely spacelike)."""


class ConfigError(RadialSigma2Error):
    """Run configuration is malformed or out of bounds."""


class FlatNearZeroWarning(UserWarning):
    """Prescription is not flagged constant near 0; series start is first-order only."""
