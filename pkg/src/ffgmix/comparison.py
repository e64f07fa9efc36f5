"""Bayesian model averaging, selection and combination over K candidate models.

Inputs are per-model log evidences, as produced by the mixture node's message
towards m (or, for combination, one row of them per observation). All
arithmetic stays in the log domain. Every argmax breaks ties towards the
lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, xlogy

from .distributions import (
    Categorical,
    Dirichlet,
    Message,
    PointMassIndex,
    dirichlet_expected_log,
    log_beta,
    logsumexp,
    normalize_log_weights,
)
from .errors import DimensionError, InvalidReductionError
from .nodes import categorical_from_probs_backward, categorical_from_probs_forward

DEFAULT_ONLINE_ALPHA = 10.0
DEFAULT_REDUCED_ALPHA = 1.0
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 200


@dataclass(frozen=True)
class ComparisonResult:
    log_evidences: np.ndarray
    posterior_m: Categorical | PointMassIndex
    free_energies: np.ndarray
    total_log_evidence: float
    free_energy: float


def _log_prior(prior: Categorical, k: int) -> np.ndarray:
    if prior.size != k:
        raise DimensionError(f"prior has {prior.size} entries for {k} models")
    with np.errstate(divide="ignore"):
        return np.log(prior.probabilities)


def f_m_factor(free_energies) -> np.ndarray:
    """Log weights of the terminal factor prod_k exp(-F_k)^{m_k}."""
    F = np.asarray(free_energies, dtype=float)
    if not np.all(np.isfinite(F)):
        raise ValueError(f"free energies must be finite: {F}")
    return -F


def free_energy_exact(result) -> float:
    """Free energy of an exact (acyclic) inference run: minus its log evidence."""
    if result.log_evidence is None:
        raise ValueError("inference result has no proper log evidence")
    return -result.log_evidence


def bma(log_evidences, prior: Categorical) -> Categorical:
    """Posterior over models, q(m) proportional to prior * evidence."""
    L = np.asarray(log_evidences, dtype=float)
    q, _ = normalize_log_weights(_log_prior(prior, L.size) + L)
    return q


def bms(log_evidences, prior: Categorical) -> PointMassIndex:
    """MAP model as a point mass; the argmax of the averaged posterior."""
    q = bma(log_evidences, prior)
    return PointMassIndex(int(np.argmax(q.probabilities)), q.size)


def mixture_free_energy(q_m, prior: Categorical, free_energies) -> float:
    """KL[q(m) || p(m)] + sum_k q(m_k) F_k for a posterior q(m) over K submodels."""
    q = np.asarray(q_m.probabilities if hasattr(q_m, "probabilities") else q_m, dtype=float)
    F = np.asarray(free_energies, dtype=float)
    log_p = _log_prior(prior, q.size)
    kl = float(np.sum(xlogy(q, q)) - np.sum(np.where(q > 0, q * log_p, 0.0)))
    return kl + float(np.sum(np.where(q > 0, q * F, 0.0)))


def compare(log_evidences, prior: Categorical, method: str = "bma") -> ComparisonResult:
    L = np.asarray(log_evidences, dtype=float)
    total = logsumexp(_log_prior(prior, L.size) + L)
    if method == "bma":
        posterior = bma(L, prior)
        free_energy = -total
    elif method == "bms":
        posterior = bms(L, prior)
        free_energy = mixture_free_energy(posterior.probabilities, prior, -L)
    else:
        raise ValueError(f"unknown comparison method {method!r}")
    return ComparisonResult(L, posterior, -L, total, free_energy)


# ------------------------------------------------------ online combination


@dataclass(frozen=True)
class BmcState:
    """Online model-combination state threaded through ``bmc_online_step``.

    ``log_evidence`` accumulates the one-step predictive evidences and
    ``free_energy`` the delta-constrained free energy of each assignment.
    """

    dirichlet: Dirichlet
    prior_alpha: np.ndarray
    assignments: tuple[int, ...] = ()
    log_evidence: float = 0.0
    free_energy: float = 0.0

    @classmethod
    def start(cls, prior_alpha) -> BmcState:
        a = np.array(prior_alpha, dtype=float)
        a.setflags(write=False)
        return cls(Dirichlet(a), a)


def bmc_online_step(state: BmcState, log_evidences, rng: np.random.Generator | None = None) -> BmcState:
    """Assign one observation to a model and update q(pi).

    The prior over the assignment is the Dirichlet mean; the assignment is the
    argmax of prior times evidence, or a draw from it when ``rng`` is given.
    The point-mass assignment sends pi the kernel pi_k, which adds one count to
    the selected concentration.
    """
    L = np.asarray(log_evidences, dtype=float)
    K = state.dirichlet.size
    if L.size != K:
        raise DimensionError(f"{L.size} evidences for {K} models")
    forward = categorical_from_probs_forward(Message(0.0, state.dirichlet))
    with np.errstate(divide="ignore"):
        log_prior = np.log(forward.body.probabilities)
    scores = log_prior + L
    posterior, step_log_evidence = normalize_log_weights(scores)
    if rng is None:
        k = int(np.argmax(posterior.probabilities))
    else:
        k = int(rng.choice(K, p=posterior.probabilities))
    kernel = categorical_from_probs_backward(Message(0.0, PointMassIndex(k, K))).body
    alpha = state.dirichlet.concentration + (kernel.concentration - 1.0)
    return BmcState(
        Dirichlet(alpha),
        state.prior_alpha,
        state.assignments + (k,),
        state.log_evidence + step_log_evidence,
        state.free_energy - float(scores[k]),
    )


def bmc_online(log_evidences, prior_alpha, rng: np.random.Generator | None = None) -> BmcState:
    state = BmcState.start(prior_alpha)
    for row in np.asarray(log_evidences, dtype=float):
        state = bmc_online_step(state, row, rng)
    return state


def bayesian_model_reduction(posterior: Dirichlet, old_prior_alpha, new_prior_alpha) -> Dirichlet:
    """Swap the prior of a conjugate Dirichlet posterior without refitting."""
    old = np.asarray(old_prior_alpha, dtype=float)
    new = np.asarray(new_prior_alpha, dtype=float)
    if old.shape != posterior.concentration.shape or new.shape != old.shape:
        raise DimensionError("prior and posterior sizes differ")
    c = posterior.concentration - old + new
    if np.any(c <= 0.0):
        raise InvalidReductionError(f"reduced concentration {c} is not positive")
    return Dirichlet(c)


# ------------------------------------------------- variational combination


@dataclass(frozen=True)
class VmpState:
    q_pi: Dirichlet
    q_m: np.ndarray
    vfe_trace: tuple[float, ...]
    converged: bool
    iterations: int = field(default=0)

    @property
    def free_energy(self) -> float:
        return self.vfe_trace[-1]


def dirichlet_kl(q: Dirichlet, p: Dirichlet) -> float:
    a, b = q.concentration, p.concentration
    return log_beta(b) - log_beta(a) + float((a - b) @ (digamma(a) - digamma(a.sum())))


def mean_field_vfe(q_m: np.ndarray, q_pi: Dirichlet, prior_alpha, log_evidences: np.ndarray) -> float:
    """KL[q(pi)||p(pi)] + sum_n E_q[ln q(m_n) - ln pi_{m_n} - ln p(y_n | m_n)]."""
    elog = dirichlet_expected_log(q_pi)
    kl_pi = dirichlet_kl(q_pi, Dirichlet(prior_alpha))
    data = xlogy(q_m, q_m) - q_m * (elog + log_evidences)
    return kl_pi + float(data.sum())


def _update_assignments(alpha: np.ndarray, log_evidences: np.ndarray) -> np.ndarray:
    logits = digamma(alpha) - digamma(alpha.sum()) + log_evidences
    logits = logits - logits.max(axis=1, keepdims=True)
    q = np.exp(logits)
    return q / q.sum(axis=1, keepdims=True)


def bmc_variational(
    log_evidences,
    prior_alpha,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> VmpState:
    """Mean-field q(pi) prod_n q(m_n) by coordinate descent.

    Starts from uniform q(m_n), alternates the q(pi) and q(m_n) updates and
    stops once the free energy changes by less than ``tol``. The trace holds
    the free energy after every full sweep; ``converged`` is False if
    ``max_iters`` ran out first.
    """
    L = np.asarray(log_evidences, dtype=float)
    if L.ndim != 2:
        raise DimensionError(f"expected an N x K matrix, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise ValueError("log evidences must be finite")
    alpha0 = np.asarray(prior_alpha, dtype=float)
    if alpha0.shape != (L.shape[1],):
        raise DimensionError(f"prior has shape {alpha0.shape} for {L.shape[1]} models")

    q = np.full(L.shape, 1.0 / L.shape[1])
    alpha = alpha0 + q.sum(axis=0)
    trace = [mean_field_vfe(q, Dirichlet(alpha), alpha0, L)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        q = _update_assignments(alpha, L)
        alpha = alpha0 + q.sum(axis=0)
        trace.append(mean_field_vfe(q, Dirichlet(alpha), alpha0, L))
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    q.setflags(write=False)
    return VmpState(Dirichlet(alpha), q, tuple(trace), converged, iterations)
