"""Exception hierarchy shared by every module."""


class DifobsError(Exception):
    """Base class for all library errors."""


class InvalidInputError(DifobsError, ValueError):
    pass


class InvalidParameterError(DifobsError, ValueError):
    pass


class SimulationDivergedError(DifobsError, ArithmeticError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"simulation diverged: non-finite state at step {step}")


class DegenerateDataError(DifobsError, ValueError):
    pass


class DegenerateLiftError(DifobsError, ValueError):
    def __init__(self, columns, rank, message=None):
        self.columns = list(columns)
        self.rank = rank
        super().__init__(
            message
            or f"lift matrix has rank {rank}; deficient embedding columns: {self.columns}"
        )


class DegenerateRegressionError(DifobsError, ValueError):
    pass


class UndefinedMetricError(DifobsError, ValueError):
    pass


class NumericError(DifobsError, ArithmeticError):
    pass


class StepTooLargeError(InvalidParameterError):
    def __init__(self, mode, max_dt, dt):
        self.mode = mode
        self.max_dt = max_dt
        super().__init__(
            f"dt_eff={dt:g} violates observer stability for mode {mode}; "
            f"dt_eff must be < {max_dt:.6g}"
        )


class InvalidModelError(DifobsError, ValueError):
    pass
