"""Exception hierarchy shared by all ffgmix modules."""


class FFGError(Exception):
    """Base class for every error raised by ffgmix."""


class DimensionError(FFGError, ValueError):
    """Vector or matrix shapes do not agree."""


class DegenerateEvidenceError(FFGError, ArithmeticError):
    """Every hypothesis has zero evidence, so nothing can be normalized."""


class ConsistencyError(FFGError, ArithmeticError):
    """An internal numerical invariant was violated."""


class UnsupportedModelError(FFGError):
    """A message combination has no closed form in this engine."""


class GraphConstructionError(FFGError):
    """The factor graph is malformed."""


class ArityError(GraphConstructionError):
    """An edge or node would exceed its number of attachment points."""


class PortBoundError(GraphConstructionError):
    """The node port is already connected to an edge."""


class CyclicGraphError(GraphConstructionError):
    """The graph contains a cycle; only trees are supported."""


class ScheduleError(FFGError):
    """A schedule entry depends on a message that has not been computed."""


class InvalidReductionError(FFGError, ValueError):
    """Bayesian model reduction produced a non-positive concentration."""


class InvalidInputError(FFGError, ValueError):
    """Experiment input data is unusable, for example non-finite samples."""
