"""Message passing on acyclic factor graphs with evidence tracking and a mixture node."""

from .comparison import (
    BmcState,
    ComparisonResult,
    VmpState,
    bayesian_model_reduction,
    bma,
    bmc_online,
    bmc_online_step,
    bmc_variational,
    bms,
    compare,
    f_m_factor,
    free_energy_exact,
    mixture_free_energy,
)
from .distributions import (
    Categorical,
    Dirichlet,
    Flat,
    Gaussian,
    GaussianMixture,
    Message,
    PointMass,
    PointMassIndex,
    categorical_product,
    dirichlet_expected_log,
    dirichlet_mean,
    gaussian_log_pdf,
    gaussian_product,
    moment_match,
    normalize_log_weights,
    product,
)
from .errors import (
    ArityError,
    ConsistencyError,
    CyclicGraphError,
    DegenerateEvidenceError,
    DimensionError,
    FFGError,
    GraphConstructionError,
    InvalidInputError,
    InvalidReductionError,
    PortBoundError,
    ScheduleError,
    UnsupportedModelError,
)
from .graph import (
    Direction,
    FactorGraph,
    InferenceResult,
    Schedule,
    log_evidence_at_edge,
    log_evidence_at_node,
    run,
    schedule_sweep,
    validate,
)
from .mixture import MixtureNode, marginal_out, message_to_branch, message_to_m, message_to_out
from .nodes import (
    REAL,
    CategoricalFromProbs,
    Equality,
    FreeEnd,
    GaussianAR1,
    GaussianLikelihood,
    LogWeightFactor,
    Prior,
    Transition,
    categorical,
    prior_message,
    simplex,
)

__version__ = "0.1.0"

__all__ = [
    "ArityError",
    "bayesian_model_reduction",
    "bma",
    "bmc_online",
    "bmc_online_step",
    "bmc_variational",
    "BmcState",
    "bms",
    "categorical",
    "Categorical",
    "categorical_product",
    "CategoricalFromProbs",
    "compare",
    "ComparisonResult",
    "ConsistencyError",
    "CyclicGraphError",
    "DegenerateEvidenceError",
    "DimensionError",
    "Direction",
    "Dirichlet",
    "dirichlet_expected_log",
    "dirichlet_mean",
    "Equality",
    "f_m_factor",
    "FactorGraph",
    "FFGError",
    "Flat",
    "free_energy_exact",
    "FreeEnd",
    "Gaussian",
    "gaussian_log_pdf",
    "gaussian_product",
    "GaussianAR1",
    "GaussianLikelihood",
    "GaussianMixture",
    "GraphConstructionError",
    "InferenceResult",
    "InvalidInputError",
    "InvalidReductionError",
    "log_evidence_at_edge",
    "log_evidence_at_node",
    "LogWeightFactor",
    "marginal_out",
    "Message",
    "message_to_branch",
    "message_to_m",
    "message_to_out",
    "mixture_free_energy",
    "MixtureNode",
    "moment_match",
    "normalize_log_weights",
    "PointMass",
    "PointMassIndex",
    "PortBoundError",
    "Prior",
    "prior_message",
    "product",
    "REAL",
    "run",
    "Schedule",
    "schedule_sweep",
    "ScheduleError",
    "simplex",
    "Transition",
    "UnsupportedModelError",
    "validate",
    "VmpState",
]
