"""Domain errors raised by the analysis engine.

Every error carries a short machine-readable ``code`` and a ``details``
mapping so that the CLI and the HTTP API can emit the same structured body.
"""

from typing import Any, Dict, Optional


class FluidTailError(Exception):
    """Base class for all engine errors."""

    code = "fluidtail_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class InvalidParametersError(FluidTailError):
    code = "invalid_parameters"


class UnstableModelError(FluidTailError):
    code = "unstable"


class CutViolationError(FluidTailError):
    code = "cut_violation"


class PoleError(FluidTailError):
    code = "pole"


class AssumptionViolatedError(FluidTailError):
    code = "assumption_violated"


class CertificateNotFoundError(FluidTailError):
    code = "certificate_not_found"


class ZeroDenominatorError(FluidTailError):
    code = "zero_denominator"


class NegativeMassError(FluidTailError):
    code = "negative_mass"


class EigenSolverError(FluidTailError):
    code = "eigensolver_failure"


class BoundarySystemError(FluidTailError):
    code = "boundary_system_singular"


class IllConditionedFitError(FluidTailError):
    code = "ill_conditioned_fit"


class InsufficientSamplesError(FluidTailError):
    code = "insufficient_samples"
