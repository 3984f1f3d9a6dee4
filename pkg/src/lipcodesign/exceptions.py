"""Exception hierarchy shared by the solver, design and simulation layers."""


class CodesignError(Exception):
    """Base class for all errors raised by :mod:`lipcodesign`."""


class EigenvalueError(CodesignError):
    """The eigenvalue iteration did not converge or produced bad output."""


class SolvabilityError(CodesignError):
    """A Lyapunov operator is singular for the given spectrum."""


class NoCertificateError(CodesignError):
    """The quadratic matrix equation has no stabilizing solution.

    Raised when the associated Hamiltonian has eigenvalues on the imaginary
    axis, or when the computed solution is not positive definite where that
    is required. This is a property of the data, not a numerical accident.
    """


class ConditioningError(CodesignError):
    """The computation is too ill-conditioned to trust the result."""


class UncontrollableError(CodesignError):
    """The pair (A, B) does not have a full-rank controllability matrix."""


class InfeasibleSynthesisError(CodesignError):
    """The sufficient condition for the initial controller does not hold.

    Attributes
    ----------
    delta0 : float
        The computed distance value.
    threshold : float
        ``alpha * sqrt(1 + eta)``; synthesis requires ``delta0 > threshold``.
    """

    def __init__(self, message, delta0=float("nan"), threshold=float("nan")):
        super().__init__(message)
        self.delta0 = delta0
        self.threshold = threshold


class LineSearchStalled(CodesignError):
    """Backtracking exhausted its halving budget without sufficient decrease."""


class DivergenceError(CodesignError):
    """The simulated state norm blew up.

    Attributes
    ----------
    time : float
        Simulation time at which the state norm first exceeded the limit.
    """

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time
