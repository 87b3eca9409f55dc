class MomentError(Exception):
    """
    Base error of the package. Mirrors the ``HTTPException(status_code, detail)`` shape: every error knows the
    process exit code the command line should terminate with and a human readable detail.

    :param detail: Human readable description of the failure.
    :type detail: str
    """

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_dict(self) -> dict:
        """
        Machine readable form printed by the command line on stderr.

        :return: Error class name, detail and exit code.
        :rtype: dict
        """
        return {"error": type(self).__name__, "detail": self.detail, "exit_code": self.exit_code}


class DegreeTooLowError(MomentError):
    exit_code = 3


class DimensionMismatchError(MomentError):
    exit_code = 3


class NonSymmetricError(MomentError):
    exit_code = 2


class SolverFailureError(MomentError):
    """
    Raised when the conic solver stops without an optimal status. The last iterate is kept on ``solution``.
    """

    exit_code = 1

    def __init__(self, detail: str, solution=None):
        super().__init__(detail)
        self.solution = solution


class ExtractionFailedError(MomentError):
    exit_code = 1


class NotPositiveDefiniteError(MomentError):
    exit_code = 1

    def __init__(self, detail: str, eigenvalue: float):
        super().__init__(detail)
        self.eigenvalue = eigenvalue


class SpecParseError(MomentError):
    exit_code = 2

    def __init__(self, detail: str, position: int):
        super().__init__(f"{detail} (at position {position})")
        self.position = position


class UnsupportedMeasureError(MomentError):
    exit_code = 2


class MomentFileError(MomentError):
    exit_code = 2


class UnknownExampleError(MomentError):
    exit_code = 2


class InvalidProblemError(MomentError):
    exit_code = 2
