"""Exception hierarchy.

Every error carries a short machine-readable ``reason`` and maps onto one of
the CLI exit codes.
"""


class VShellError(Exception):
    reason = "error"
    exit_code = 1

    def __init__(self, message="", reason=None):
        super().__init__(message or self.reason)
        if reason is not None:
            self.reason = reason


class InvalidArgument(VShellError, ValueError):
    reason = "invalid-argument"
    exit_code = 2


class ConfigError(InvalidArgument):
    reason = "config-error"
    exit_code = 2


class SolverError(VShellError):
    exit_code = 3


class NonConvergence(SolverError):
    reason = "nonconvergence"


class EmptyShell(SolverError):
    reason = "empty-shell"


class BracketingFailure(SolverError):
    reason = "bracketing-failure"


class E0Nonnegative(SolverError):
    reason = "E0-nonnegative"


class SamplingFailure(SolverError):
    reason = "sampling-failure"


class WitnessFailure(SolverError):
    reason = "witness-failure"


class InvariantViolation(VShellError):
    reason = "invariant-violation"
    exit_code = 4


class IntegratorBlowup(InvariantViolation):
    reason = "integrator-blowup"

    def __init__(self, message="", time=None):
        super().__init__(message)
        self.time = time


class ConstraintViolation(InvariantViolation):
    reason = "constraint-violation"


class RecordFormatError(VShellError):
    reason = "bad-record"
    exit_code = 5
