"""Sum-product rules for the standard factor nodes.

Each node kind names its ports, computes the outgoing message on one port from
the messages arriving on the others (``outgoing``), and evaluates the log of
the node-local integral of the factor against all incoming messages
(``log_evidence``). The rules themselves are module-level pure functions.

Port conventions:

=====================  =========================  ===============================
kind                   ports                      factor
=====================  =========================  ===============================
Prior                  out                        p(out)
GaussianLikelihood     y, s                       N(y | s, v)
GaussianAR1            next, prev                 N(next | rho * prev, q)
Transition             next, prev                 Cat(next | T prev)
CategoricalFromProbs   m, pi                      Cat(m | pi)
Equality               a, b, c                    delta(a - b) delta(a - c)
LogWeightFactor        out                        prod_k exp(w_k)^{out_k}
FreeEnd                out                        1
=====================  =========================  ===============================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .distributions import (
    VARIANCE_FLOOR,
    Categorical,
    Dirichlet,
    Flat,
    Gaussian,
    GaussianMixture,
    Message,
    PointMass,
    PointMassIndex,
    dirichlet_expected_log,
    dirichlet_mean,
    log_beta,
    logsumexp,
    normalize_log_weights,
    product,
)
from .errors import (
    DegenerateEvidenceError,
    DimensionError,
    GraphConstructionError,
    UnsupportedModelError,
)

Inbox = Mapping[str, Message]


@dataclass(frozen=True)
class VariableKind:
    """Domain of an edge variable: ``real``, ``categorical`` (K) or ``simplex`` (K)."""

    family: str
    size: int | None = None

    def accepts(self, other: VariableKind) -> bool:
        if self.family != other.family:
            return False
        return self.size is None or other.size is None or self.size == other.size


REAL = VariableKind("real")


def categorical(k: int) -> VariableKind:
    return VariableKind("categorical", k)


def simplex(k: int) -> VariableKind:
    return VariableKind("simplex", k)


def kind_of(d) -> VariableKind:
    """Edge kind implied by a distribution."""
    if isinstance(d, (Gaussian, GaussianMixture, PointMass, Flat)):
        return REAL
    if isinstance(d, (Categorical, PointMassIndex)):
        return categorical(d.size)
    if isinstance(d, Dirichlet):
        return simplex(d.size)
    raise TypeError(f"not a distribution: {d!r}")


class NodeKind:
    """Base class for factor node kinds."""

    ports: tuple[str, ...] = ()

    def port_kind(self, port: str) -> VariableKind | None:
        return None

    def check(self, edge_kinds: Mapping[str, VariableKind]) -> None:
        """Cross-port consistency check, run by graph validation."""

    def outgoing(self, port: str, inbox: Inbox) -> Message:
        raise NotImplementedError

    def log_evidence(self, inbox: Inbox) -> float:
        raise NotImplementedError


def _terminal_evidence(factor: Message, incoming: Message) -> float:
    body, log_z = product(factor.body, incoming.body)
    return factor.log_scale + incoming.log_scale + log_z


# --------------------------------------------------------------------- priors


def prior_message(node: Prior) -> Message:
    return Message(0.0, node.distribution)


@dataclass(frozen=True, eq=False)
class Prior(NodeKind):
    """Normalized leaf factor; a point-mass prior is how observations enter."""

    distribution: object
    ports = ("out",)

    def port_kind(self, port):
        return kind_of(self.distribution)

    def outgoing(self, port, inbox):
        return prior_message(self)

    def log_evidence(self, inbox):
        return _terminal_evidence(prior_message(self), inbox["out"])


@dataclass(frozen=True, eq=False)
class FreeEnd(NodeKind):
    """Terminal for a half-edge left unconstrained.

    A real edge receives the improper flat message; a categorical edge the
    all-ones vector, which is proper.
    """

    kind: VariableKind = REAL
    ports = ("out",)

    def port_kind(self, port):
        return self.kind

    def outgoing(self, port, inbox):
        if self.kind.family == "categorical":
            k = self.kind.size
            return Message(math.log(k), Categorical(np.full(k, 1.0 / k)))
        if self.kind.family == "real":
            return Message(0.0, Flat())
        raise UnsupportedModelError(f"free {self.kind.family} edges are not supported")

    def log_evidence(self, inbox):
        return _terminal_evidence(self.outgoing("out", inbox), inbox["out"])


@dataclass(frozen=True, eq=False)
class LogWeightFactor(NodeKind):
    """Scaled categorical terminal with fixed log weights (the model-performance factor)."""

    log_weights: tuple
    ports = ("out",)

    def __post_init__(self):
        object.__setattr__(self, "log_weights", tuple(float(w) for w in self.log_weights))

    def port_kind(self, port):
        return categorical(len(self.log_weights))

    def outgoing(self, port, inbox):
        cat, log_z = normalize_log_weights(self.log_weights)
        return Message(log_z, cat)

    def log_evidence(self, inbox):
        return _terminal_evidence(self.outgoing("out", inbox), inbox["out"])


# ------------------------------------------------------ linear Gaussian nodes


def _atoms(body) -> list[tuple[float, float, float]]:
    """(log weight, mean, variance) triples; a point mass has variance 0."""
    if isinstance(body, Gaussian):
        return [(0.0, body.mean, body.variance)]
    if isinstance(body, PointMass):
        return [(0.0, body.value, 0.0)]
    if isinstance(body, GaussianMixture):
        with np.errstate(divide="ignore"):
            logw = np.log(body.weights)
        return [(float(lw), c.mean, c.variance) for lw, c in zip(logw, body.components)]
    raise UnsupportedModelError(f"linear Gaussian node cannot take a {type(body).__name__} message")


def _from_atoms(atoms) -> tuple[object, float]:
    """Rebuild a normalized body from weighted Gaussian atoms; returns (body, log mass)."""
    if len(atoms) == 1:
        lw, m, v = atoms[0]
        return Gaussian(m, v), lw
    weights, log_z = normalize_log_weights([a[0] for a in atoms])
    return GaussianMixture(weights.probabilities, [Gaussian(m, v) for _, m, v in atoms]), log_z


def linear_gaussian_forward(rho: float, noise: float, msg: Message) -> Message:
    """Integrate N(out | rho * x, noise) against a message on x."""
    if isinstance(msg.body, Flat):
        if rho == 0.0:
            raise UnsupportedModelError("flat input through rho = 0 does not integrate")
        return Message(msg.log_scale - math.log(abs(rho)), Flat())
    atoms = [(lw, rho * m, rho * rho * v + noise) for lw, m, v in _atoms(msg.body)]
    body, log_z = _from_atoms(atoms)
    return Message(msg.log_scale + log_z, body)


def linear_gaussian_backward(rho: float, noise: float, msg: Message) -> Message:
    """Integrate N(out | rho * x, noise) against a message on out, as a function of x.

    N(rho x | m, v + noise) = N(x | m / rho, (v + noise) / rho^2) / |rho|; the
    1/|rho| residue goes into the log scale so the body stays normalized.
    """
    if isinstance(msg.body, Flat):
        return msg
    if rho == 0.0:
        raise ValueError("backward message through a linear Gaussian node needs rho != 0")
    atoms = [(lw, m / rho, (v + noise) / (rho * rho)) for lw, m, v in _atoms(msg.body)]
    body, log_z = _from_atoms(atoms)
    return Message(msg.log_scale + log_z - math.log(abs(rho)), body)


def linear_gaussian_evidence(rho: float, noise: float, out: Message, inp: Message) -> float:
    """log of the double integral of N(out | rho * in, noise) against both messages."""
    if isinstance(out.body, Flat):
        # the factor integrates to one over out
        return math.nan if isinstance(inp.body, Flat) else out.log_scale + inp.log_scale
    if isinstance(inp.body, Flat):
        return out.log_scale + inp.log_scale - math.log(abs(rho))
    terms = []
    for lw_o, m_o, v_o in _atoms(out.body):
        for lw_i, m_i, v_i in _atoms(inp.body):
            total = v_o + rho * rho * v_i + noise
            terms.append(lw_o + lw_i - 0.5 * (math.log(2 * math.pi * total) + (m_o - rho * m_i) ** 2 / total))
    return out.log_scale + inp.log_scale + logsumexp(terms)


def _check_variance(name, value):
    if not (VARIANCE_FLOOR <= value < math.inf):
        raise ValueError(f"{name} {value!r} is below the variance floor {VARIANCE_FLOOR}")


@dataclass(frozen=True)
class GaussianLikelihood(NodeKind):
    """N(y | s, noise_variance)."""

    noise_variance: float
    ports = ("y", "s")

    def __post_init__(self):
        _check_variance("noise_variance", self.noise_variance)

    def port_kind(self, port):
        return REAL

    def outgoing(self, port, inbox):
        if port == "y":
            return linear_gaussian_forward(1.0, self.noise_variance, inbox["s"])
        return linear_gaussian_backward(1.0, self.noise_variance, inbox["y"])

    def log_evidence(self, inbox):
        return linear_gaussian_evidence(1.0, self.noise_variance, inbox["y"], inbox["s"])


@dataclass(frozen=True)
class GaussianAR1(NodeKind):
    """N(next | rho * prev, process_variance)."""

    rho: float
    process_variance: float
    ports = ("next", "prev")

    def __post_init__(self):
        _check_variance("process_variance", self.process_variance)
        if not math.isfinite(self.rho):
            raise ValueError("rho must be finite")

    def port_kind(self, port):
        return REAL

    def outgoing(self, port, inbox):
        if port == "next":
            return linear_gaussian_forward(self.rho, self.process_variance, inbox["prev"])
        return linear_gaussian_backward(self.rho, self.process_variance, inbox["next"])

    def log_evidence(self, inbox):
        return linear_gaussian_evidence(self.rho, self.process_variance, inbox["next"], inbox["prev"])


# ------------------------------------------------------------ discrete nodes


def _probabilities(body, k: int) -> np.ndarray:
    if not isinstance(body, (Categorical, PointMassIndex)):
        raise UnsupportedModelError(f"expected a categorical message, got {type(body).__name__}")
    if body.size != k:
        raise DimensionError(f"message of size {body.size} on a port of size {k}")
    return body.probabilities


def _scaled_categorical(w: np.ndarray, log_scale: float) -> Message:
    total = w.sum()
    if not total > 0.0:
        raise DegenerateEvidenceError("message has zero mass")
    return Message(log_scale + math.log(total), Categorical(w / total))


def transition_forward(T: np.ndarray, msg: Message) -> Message:
    return _scaled_categorical(T @ _probabilities(msg.body, T.shape[1]), msg.log_scale)


def transition_backward(T: np.ndarray, msg: Message) -> Message:
    return _scaled_categorical(T.T @ _probabilities(msg.body, T.shape[0]), msg.log_scale)


@dataclass(frozen=True, eq=False)
class Transition(NodeKind):
    """Cat(next | T prev) with ``T[i, j] = p(next = i | prev = j)``."""

    matrix: np.ndarray
    ports = ("next", "prev")

    def __post_init__(self):
        T = np.array(self.matrix, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise DimensionError(f"transition matrix must be square, got shape {T.shape}")
        if np.any(T < 0.0) or np.any(np.abs(T.sum(axis=0) - 1.0) > 1e-12):
            raise ValueError("transition matrix must be column-stochastic")
        T.setflags(write=False)
        object.__setattr__(self, "matrix", T)

    def port_kind(self, port):
        return categorical(self.matrix.shape[0])

    def outgoing(self, port, inbox):
        if port == "next":
            return transition_forward(self.matrix, inbox["prev"])
        return transition_backward(self.matrix, inbox["next"])

    def log_evidence(self, inbox):
        k = self.matrix.shape[0]
        nxt, prev = inbox["next"], inbox["prev"]
        value = _probabilities(nxt.body, k) @ self.matrix @ _probabilities(prev.body, k)
        return nxt.log_scale + prev.log_scale + math.log(value)


def categorical_from_probs_forward(msg_pi: Message, variational: bool = False) -> Message:
    """Message towards m from a Dirichlet message on pi.

    Exact: Cat(alpha / sum(alpha)). Variational: geometric-mean weights
    exp(E[ln pi_k]) renormalized.
    """
    body = msg_pi.body
    if not isinstance(body, Dirichlet):
        raise UnsupportedModelError(f"expected a Dirichlet message on pi, got {type(body).__name__}")
    if variational:
        cat, _ = normalize_log_weights(dirichlet_expected_log(body))
        return Message(msg_pi.log_scale, cat)
    return Message(msg_pi.log_scale, dirichlet_mean(body))


def categorical_from_probs_backward(msg_m: Message, variational: bool = False) -> Message:
    """Message towards pi.

    A delta on outcome k gives the kernel pi_k = B(1 + e_k) Dir(pi | 1 + e_k).
    In variational mode a soft q(m) gives exp(E_q[ln Cat(m | pi)]) = Dir(1 + q) up to scale.
    """
    body = msg_m.body
    if isinstance(body, Categorical) and np.count_nonzero(body.probabilities) == 1:
        body = PointMassIndex(int(np.flatnonzero(body.probabilities)[0]), body.size)
    if isinstance(body, PointMassIndex):
        alpha = 1.0 + body.probabilities
        return Message(msg_m.log_scale + log_beta(alpha), Dirichlet(alpha))
    if variational and isinstance(body, Categorical):
        return Message(msg_m.log_scale, Dirichlet(1.0 + body.probabilities))
    raise UnsupportedModelError(
        "exact message towards pi from a soft categorical is a Dirichlet mixture; "
        "constrain m to a point mass or use variational mode"
    )


@dataclass(frozen=True)
class CategoricalFromProbs(NodeKind):
    """Cat(m | pi) linking a probability-vector edge to a categorical edge."""

    variational: bool = False
    ports = ("m", "pi")

    def port_kind(self, port):
        return VariableKind("categorical" if port == "m" else "simplex")

    def check(self, edge_kinds):
        if edge_kinds["m"].size != edge_kinds["pi"].size:
            raise GraphConstructionError("m and pi must have the same size")

    def outgoing(self, port, inbox):
        if port == "m":
            return categorical_from_probs_forward(inbox["pi"], self.variational)
        return categorical_from_probs_backward(inbox["m"], self.variational)

    def log_evidence(self, inbox):
        m, pi = inbox["m"], inbox["pi"]
        if not isinstance(pi.body, Dirichlet):
            raise UnsupportedModelError("node evidence needs a Dirichlet message on pi")
        p = _probabilities(m.body, pi.body.size)
        return m.log_scale + pi.log_scale + math.log(p @ dirichlet_mean(pi.body).probabilities)


# ------------------------------------------------------------------ equality


def equality_message(a: Message, b: Message) -> Message:
    body, log_z = product(a.body, b.body)
    if math.isnan(log_z):
        log_z = 0.0
    return Message(a.log_scale + b.log_scale + log_z, body)


@dataclass(frozen=True)
class Equality(NodeKind):
    """Ternary equality constraint; higher degree is built by chaining."""

    ports = ("a", "b", "c")

    def check(self, edge_kinds):
        kinds = set(edge_kinds.values())
        if len(kinds) != 1:
            raise GraphConstructionError(f"equality node joins different kinds: {sorted(map(str, kinds))}")

    def outgoing(self, port, inbox):
        a, b = (inbox[p] for p in self.ports if p != port)
        return equality_message(a, b)

    def log_evidence(self, inbox):
        ab = equality_message(inbox["a"], inbox["b"])
        c = inbox["c"]
        _, log_z = product(ab.body, c.body)
        return ab.log_scale + c.log_scale + log_z
