"""Mixture node: a switch between K submodels selected by a 1-of-K variable m.

Ports are ``out`` (the variable marginalized over the submodels), ``m`` and
``branch0 .. branch{K-1}`` (the same variable inside submodel k). The factor is
``prod_k delta(out - branch_k)^{m_k}``.

Outgoing messages:

* towards m: the scaled categorical with entries
  ``Z_k = integral of fwd(branch_k) * bwd(out)``, each Z_k including both
  messages' scale factors, so the entries are the submodel evidences;
* towards out: ``sum_k fwd(m)[k] * fwd(branch_k)``, a mixture weighted by the
  m message and the branch scale factors;
* towards branch k: ``bwd(out)``, unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .distributions import (
    Categorical,
    Flat,
    Gaussian,
    GaussianMixture,
    Message,
    PointMass,
    PointMassIndex,
    normalize_log_weights,
    product,
)
from .errors import (
    DegenerateEvidenceError,
    DimensionError,
    GraphConstructionError,
    UnsupportedModelError,
)
from .nodes import NodeKind, categorical

if TYPE_CHECKING:
    from .graph import InferenceResult


def branch_log_evidences(branch_forwards: Sequence[Message], backward_from_out: Message) -> np.ndarray:
    """log Z_k = log of the integral of fwd(branch_k) * bwd(out), scale factors included."""
    out = np.empty(len(branch_forwards))
    for k, fwd in enumerate(branch_forwards):
        try:
            _, log_z = product(fwd.body, backward_from_out.body)
        except DegenerateEvidenceError:
            log_z = -math.inf
        if math.isnan(log_z):
            raise UnsupportedModelError(f"branch {k} and the out edge both carry improper messages")
        out[k] = fwd.log_scale + backward_from_out.log_scale + log_z
    return out


def message_to_m(branch_forwards: Sequence[Message], backward_from_out: Message) -> Message:
    """Scaled categorical over the submodel evidences.

    Raises ``DegenerateEvidenceError`` when every Z_k is zero.
    """
    log_z = branch_log_evidences(branch_forwards, backward_from_out)
    body, total = normalize_log_weights(log_z)
    return Message(total, body)


def _m_probabilities(m_forward: Message, k: int) -> np.ndarray:
    body = m_forward.body
    if not isinstance(body, (Categorical, PointMassIndex)):
        raise UnsupportedModelError(f"m must carry a categorical message, got {type(body).__name__}")
    if body.size != k:
        raise DimensionError(f"m has size {body.size} but the node has {k} branches")
    return body.probabilities


def mix(weights: np.ndarray, bodies: Sequence) -> object:
    """Convex combination of normalized bodies of one family.

    Categoricals mix into a categorical; Gaussians and Gaussian mixtures flatten
    into one Gaussian mixture. Zero-weight terms are dropped.
    """
    keep = [(w, b) for w, b in zip(weights, bodies) if w > 0.0]
    if len(keep) == 1:
        return keep[0][1]
    if all(isinstance(b, (Categorical, PointMassIndex)) for _, b in keep):
        return Categorical(sum(w * b.probabilities for w, b in keep))
    if all(isinstance(b, (Gaussian, GaussianMixture)) for _, b in keep):
        ws, comps = [], []
        for w, b in keep:
            if isinstance(b, Gaussian):
                ws.append(w)
                comps.append(b)
            else:
                ws.extend(w * b.weights)
                comps.extend(b.components)
        ws = np.asarray(ws)
        return GaussianMixture(ws / ws.sum(), comps)
    if all(isinstance(b, PointMass) for _, b in keep) and len({b.value for _, b in keep}) == 1:
        return keep[0][1]
    families = sorted({type(b).__name__ for _, b in keep})
    raise UnsupportedModelError(f"cannot mix message families {families}")


def message_to_out(m_forward: Message, branch_forwards: Sequence[Message]) -> Message:
    """Mixture of the branch messages weighted by fwd(m) and the branch scale factors.

    A point-mass m selects its branch exactly.
    """
    k = len(branch_forwards)
    if isinstance(m_forward.body, PointMassIndex):
        if m_forward.body.size != k:
            raise DimensionError(f"m has size {m_forward.body.size} but the node has {k} branches")
        return branch_forwards[m_forward.body.index].rescaled(m_forward.log_scale)
    p = _m_probabilities(m_forward, k)
    with np.errstate(divide="ignore"):
        scores = np.log(p) + np.array([b.log_scale for b in branch_forwards])
    weights, total = normalize_log_weights(scores)
    body = mix(weights.probabilities, [b.body for b in branch_forwards])
    return Message(m_forward.log_scale + total, body)


def message_to_branch(k: int, backward_from_out: Message) -> Message:
    return backward_from_out


def mixture_log_evidence(m_forward: Message, branch_forwards: Sequence[Message], backward_from_out: Message) -> float:
    """log of sum_k fwd(m)[k] Z_k, the node-local integral."""
    p = _m_probabilities(m_forward, len(branch_forwards))
    log_z = branch_log_evidences(branch_forwards, backward_from_out)
    with np.errstate(divide="ignore"):
        terms = np.log(p) + log_z
    top = terms.max()
    if top == -math.inf:
        return -math.inf
    return m_forward.log_scale + float(top + math.log(np.exp(terms - top).sum()))


@dataclass(frozen=True)
class MixtureNode(NodeKind):
    n_branches: int

    def __post_init__(self):
        if self.n_branches < 2:
            raise ValueError("a mixture node needs at least two branches")

    @property
    def ports(self):
        return ("out", "m") + self.branch_ports

    @property
    def branch_ports(self) -> tuple[str, ...]:
        return tuple(f"branch{k}" for k in range(self.n_branches))

    def port_kind(self, port):
        if port == "m":
            return categorical(self.n_branches)
        return None

    def check(self, edge_kinds):
        kinds = {edge_kinds[p] for p in ("out",) + self.branch_ports}
        if len(kinds) != 1:
            raise GraphConstructionError("mixture out and branch edges must share one kind")

    def _branches(self, inbox):
        return [inbox[p] for p in self.branch_ports]

    def outgoing(self, port, inbox):
        if port == "m":
            return message_to_m(self._branches(inbox), inbox["out"])
        if port == "out":
            return message_to_out(inbox["m"], self._branches(inbox))
        return message_to_branch(self.branch_ports.index(port), inbox["out"])

    def log_evidence(self, inbox):
        return mixture_log_evidence(inbox["m"], self._branches(inbox), inbox["out"])


def marginal_out(result: InferenceResult, node: int):
    """Posterior of the out variable as sum_k q(m_k) q(out | m_k).

    q(m) is the m-edge marginal and q(out | m_k) the normalized product of
    fwd(branch_k) and bwd(out); this is the per-branch route, independent of the
    out-edge marginal the engine reports directly.
    """
    graph = result.graph
    kind = graph.node_kind(node)
    if not isinstance(kind, MixtureNode):
        raise TypeError(f"node {node} is not a mixture node")
    ports = graph.node_edges(node)
    q_m = result.marginals[ports["m"]]
    out_edge = ports["out"]
    backward = result.incoming(node, out_edge)
    conditionals = []
    for p in kind.branch_ports:
        fwd = result.incoming(node, ports[p])
        body, log_z = product(fwd.body, backward.body)
        if isinstance(body, Flat) or math.isnan(log_z):
            raise UnsupportedModelError("branch posterior is improper")
        conditionals.append(body)
    return mix(q_m.probabilities, conditionals)
