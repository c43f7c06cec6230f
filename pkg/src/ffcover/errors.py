"""Exception hierarchy.

Validation failures derive from :class:`ValueError` so callers that only care
about bad input can catch that; numerical failures derive from
:class:`ArithmeticError`.
"""

from __future__ import annotations


class FFCoverError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FFCoverError, ValueError):
    """Input does not satisfy a documented precondition."""


class NumericalError(FFCoverError, ArithmeticError):
    """A numerical routine failed to reach its stated accuracy."""


# graph / kernel construction -------------------------------------------------

class NegativeWeight(ValidationError):
    pass


class ZeroOutDegree(ValidationError):
    def __init__(self, node: int):
        super().__init__(f"node {node} has zero out-weight")
        self.node = node


class NotStronglyConnected(ValidationError):
    def __init__(self, src: int, dst: int):
        super().__init__(f"node {dst} is not reachable from node {src}")
        self.pair = (src, dst)


class NotCirculation(ValidationError):
    pass


class AllZeroScores(ValidationError):
    pass


class StationaryNotConverged(NumericalError):
    def __init__(self, iterations: int, detail: str = ""):
        msg = f"stationary vector not converged after {iterations} iterations"
        super().__init__(msg + (f" ({detail})" if detail else ""))
        self.iterations = iterations


class NoExitEdge(ValidationError):
    pass


# numerical kernels -----------------------------------------------------------

class SolveNotConverged(NumericalError):
    def __init__(self, residual: float):
        super().__init__(f"transient solve failed, backward error {residual:.3e}")
        self.residual = residual


class DegenerateExit(NumericalError):
    """Every exit probability is zero, so the walk can never leave the set."""


class EigenNotConverged(NumericalError):
    pass


class ZeroLambda2(ValidationError):
    pass


# samplers --------------------------------------------------------------------

class StepBudgetExceeded(FFCoverError, RuntimeError):
    def __init__(self, budget: int):
        super().__init__(f"random walk exceeded the step budget of {budget}")
        self.budget = budget


class UnsupportedKernel(ValidationError):
    pass


class NotUnweighted(ValidationError):
    pass


# oracle ----------------------------------------------------------------------

class TooLarge(ValidationError):
    def __init__(self, m: int, limit: int):
        super().__init__(f"m={m} exceeds the enumeration budget of {limit} nodes")
        self.m = m


class SingularLaplacian(NumericalError):
    pass


class UnknownTree(FFCoverError, AssertionError):
    """A sampled tree is outside the enumerated support; always a bug."""


# dendrogram / cli ------------------------------------------------------------

class PrecisionNotPD(NumericalError):
    pass


class ZeroVariance(FFCoverError, ValueError):
    """ESS is undefined for a constant trace."""


class IngestError(ValidationError):
    pass


class GenerationFailed(FFCoverError, RuntimeError):
    pass
