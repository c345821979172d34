"""Exception taxonomy shared across the package."""


class RiccatiSpectraError(Exception):
    """Base class for all package errors."""


class DimensionError(RiccatiSpectraError, ValueError):
    """Matrix arguments have inconsistent or invalid dimensions."""


class ContractError(RiccatiSpectraError, ValueError):
    """An operation precondition was violated by the caller."""


class DefinitenessError(ContractError):
    """A matrix required to be positive (semi)definite is not."""


class NumericalError(RiccatiSpectraError, RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""

    def __init__(self, message, matrix_norm=None):
        if matrix_norm is not None:
            message = f"{message} (matrix Frobenius norm {matrix_norm:.6g})"
        super().__init__(message)
        self.matrix_norm = matrix_norm


class NonConvergenceError(NumericalError):
    """An iteration stagnated before reaching its tolerance."""


class SolverError(NumericalError):
    """A linear solve failed (singular or ill-conditioned system)."""

    def __init__(self, message, condition_estimate=None):
        if condition_estimate is not None:
            message = f"{message} (condition estimate {condition_estimate:.3e})"
        super().__init__(message)
        self.condition_estimate = condition_estimate


class NoStabilizingSolutionError(RiccatiSpectraError, RuntimeError):
    """The Riccati equation has no stabilizing solution for this model.

    Distinct from :class:`NumericalError`: the input model itself rules a
    stabilizing solution out (e.g. a Hamiltonian eigenvalue on the
    imaginary axis), rather than the algorithm failing.
    """


class ModelRejectionError(RiccatiSpectraError, ValueError):
    """A system model violated one or more construction invariants.

    Carries the full list of violations and the validation report so the
    caller sees every problem at once, not just the first.
    """

    def __init__(self, violations, report=None):
        super().__init__("model rejected: " + "; ".join(violations))
        self.violations = list(violations)
        self.report = report


class PoleAtFrequencyError(RiccatiSpectraError, ValueError):
    """An evaluation frequency coincides with an imaginary-axis pole.

    Integrators must treat such points as integrable singularities and
    split the domain around them instead of evaluating there.
    """

    def __init__(self, omega, eigenvalue):
        super().__init__(
            f"frequency {omega:.12g} hits imaginary-axis eigenvalue {eigenvalue:.12g}"
        )
        self.omega = omega
        self.eigenvalue = eigenvalue


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to converge within its refinement cap."""

    def __init__(self, message, worst_interval=None):
        if worst_interval is not None:
            a, b, err = worst_interval
            message = f"{message} (worst subinterval [{a:.12g}, {b:.12g}], error {err:.3e})"
        super().__init__(message)
        self.worst_interval = worst_interval


class SimulationBlowUpError(RiccatiSpectraError, RuntimeError):
    """A time integration produced non-finite state."""

    def __init__(self, time, trial=None):
        if trial is None:
            super().__init__(f"integration blew up at t = {time:.6g}")
        else:
            super().__init__(f"simulation blew up in trial {trial} at t = {time:.6g}")
        self.trial = trial
        self.time = time
