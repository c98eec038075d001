"""Exception hierarchy.

Two families: `InputError` for malformed input (bad tables, out-of-range
parameters) and `CertificateError` for a check that ran and failed. The
CLI maps them to exit status 2 and 1 respectively.
"""


class CoarseGlueError(Exception):
    pass


class InputError(CoarseGlueError, ValueError):
    pass


class CertificateError(CoarseGlueError):
    """A certificate check failed.

    `witness` holds whatever identifies the failure (a pair of labels, a
    triple, a point), `stage` names the check.
    """

    def __init__(self, message, *, stage=None, witness=None, details=None):
        super().__init__(message)
        self.stage = stage
        self.witness = witness
        self.details = details or {}

    def as_dict(self):
        return {
            "stage": self.stage,
            "message": str(self),
            "witness": self.witness,
            "details": self.details,
        }


class MetricAxiomError(CertificateError):
    def __init__(self, violations):
        self.violations = list(violations)
        first = self.violations[0]
        super().__init__(
            f"{len(self.violations)} metric axiom violation(s); first: {first}",
            stage="validate_metric",
            witness=first.points,
            details={"violations": [v.as_dict() for v in self.violations]},
        )


class SeparationError(CertificateError):
    pass


class NormError(CertificateError):
    pass


class InfeasibleParameters(CertificateError):
    pass
