"""Exception types raised by the solvers and the driver."""


class S3Error(Exception):
    """Base class for solver failures."""


class InversionFailure(S3Error):
    """Newton inversion of a perturbed map did not converge."""


class DegenerateStart(S3Error):
    """Power iteration stalled; the start vector is (nearly) stable."""


class NonHyperbolicSample(S3Error):
    """Expansion along the computed unstable direction was not > 1."""


class WindowTooShort(S3Error):
    """A truncated Neumann solve left a residual above tolerance."""


class ContractionViolation(S3Error):
    """The lift cocycle does not contract over the window."""


class DerivativeUnavailable(S3Error):
    """No analytic or finite-difference unstable derivative is enabled."""


class NodeBudgetExceeded(S3Error):
    """Curve quadrature push count is inconsistent with the node count."""


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
