"""Random graph generators and brute-force oracles shared by the test modules."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ffgmix import (
    CategoricalFromProbs,
    Categorical,
    Dirichlet,
    Equality,
    FactorGraph,
    Gaussian,
    GaussianAR1,
    GaussianLikelihood,
    MixtureNode,
    REAL,
    Prior,
    Transition,
    categorical,
    simplex,
)


def rel_gap(values) -> float:
    """Largest pairwise difference relative to max(1, |largest value|)."""
    v = np.asarray(list(values), dtype=float)
    return float((v.max() - v.min()) / max(1.0, np.abs(v).max()))


def assert_rel_close(a, b, tol):
    a, b = float(a), float(b)
    assert abs(a - b) <= tol * max(1.0, abs(a), abs(b)), f"{a!r} != {b!r} within {tol}"


def quad(f, lo=-np.inf, hi=np.inf, points=None):
    """Adaptive quadrature tight enough for 1e-10 relative checks."""
    if points is not None:
        lo, hi = min(points) - 60.0, max(points) + 60.0
        value, _ = integrate.quad(f, lo, hi, points=sorted(points), epsabs=0.0, epsrel=1e-13, limit=500)
        return value
    value, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500)
    return value


def random_stochastic(rng, k):
    return rng.dirichlet(np.ones(k), size=k).T


def random_probs(rng, k):
    return rng.dirichlet(np.ones(k))


def _open_edge(g, rng, node, port, kind):
    if rng.random() < 0.5:
        return g.add_edge((node, port), None, kind)
    return g.add_edge(None, (node, port), kind)


def _bound_node(g, edge):
    tail, head = g.endpoints(edge)
    return (tail or head)[0]


# ------------------------------------------------------- conjugate trees


def random_gaussian_tree(rng, max_edges=12, max_depth=6) -> FactorGraph:
    """Gaussian priors, likelihoods, AR(1) links and equality nodes in a random tree."""
    g = FactorGraph()
    root = g.add_node(Prior(Gaussian(rng.uniform(-3, 3), rng.uniform(0.5, 3))))
    open_ends = [(_open_edge(g, rng, root, "out", REAL), 0)]
    target = int(rng.integers(2, max_edges + 1))
    while open_ends:
        i = int(rng.integers(len(open_ends)))
        edge, depth = open_ends[i]
        room = target - g.n_edges
        if room < 1 or depth >= max_depth or rng.random() < 0.2:
            break
        open_ends.pop(i)
        choice = rng.integers(3) if room >= 2 else rng.integers(2)
        if choice == 0:
            node = g.add_node(GaussianAR1(rng.choice([-1, 1]) * rng.uniform(0.3, 1.5), rng.uniform(0.2, 2)))
            ports = ["next", "prev"]
        elif choice == 1:
            node = g.add_node(GaussianLikelihood(rng.uniform(0.2, 2)))
            ports = ["y", "s"]
        else:
            node = g.add_node(Equality())
            ports = ["a", "b", "c"]
        rng.shuffle(ports)
        g.attach(edge, node, ports[0])
        for p in ports[1:]:
            open_ends.append((_open_edge(g, rng, node, p, REAL), depth + 1))
    observed_at_equality = False
    for edge, _ in open_ends:
        r = rng.random()
        at_equality = isinstance(g.node_kind(_bound_node(g, edge)), Equality)
        if r < 0.5 and at_equality and observed_at_equality:
            r = 0.6  # two deltas joined by equalities would have zero overlap
        if r < 0.5:
            observed_at_equality |= at_equality
            g.observe(edge, rng.normal(0, 2))
        elif r < 0.8:
            g.attach(edge, g.add_node(Prior(Gaussian(rng.uniform(-3, 3), rng.uniform(0.5, 3)))), "out")
        else:
            g.declare_free(edge)
    return g


def random_categorical_tree(rng, max_edges=12, max_depth=6) -> FactorGraph:
    """Categorical priors, transitions and equality nodes over one alphabet size."""
    k = int(rng.integers(2, 5))
    kind = categorical(k)
    g = FactorGraph()
    root = g.add_node(Prior(Categorical(random_probs(rng, k))))
    open_ends = [(_open_edge(g, rng, root, "out", kind), 0)]
    target = int(rng.integers(2, max_edges + 1))
    while open_ends:
        i = int(rng.integers(len(open_ends)))
        edge, depth = open_ends[i]
        room = target - g.n_edges
        if room < 1 or depth >= max_depth or rng.random() < 0.2:
            break
        open_ends.pop(i)
        if room >= 2 and rng.random() < 0.5:
            node = g.add_node(Equality())
            ports = ["a", "b", "c"]
        else:
            node = g.add_node(Transition(random_stochastic(rng, k)))
            ports = ["next", "prev"]
        rng.shuffle(ports)
        g.attach(edge, node, ports[0])
        for p in ports[1:]:
            open_ends.append((_open_edge(g, rng, node, p, kind), depth + 1))
    observed_at_equality = False
    for edge, _ in open_ends:
        r = rng.random()
        at_equality = isinstance(g.node_kind(_bound_node(g, edge)), Equality)
        if r < 0.5 and at_equality and observed_at_equality:
            r = 0.6
        if r < 0.5:
            observed_at_equality |= at_equality
            g.observe(edge, int(rng.integers(k)))
        elif r < 0.8:
            g.attach(edge, g.add_node(Prior(Categorical(random_probs(rng, k)))), "out")
        else:
            g.declare_free(edge)
    return g


def random_dirichlet_tree(rng, max_edges=12) -> FactorGraph:
    """A Dirichlet prior on pi shared through equality nodes by observed Cat(m | pi) draws."""
    k = int(rng.integers(2, 5))
    g = FactorGraph()
    root = g.add_node(Prior(Dirichlet(rng.uniform(1, 5, size=k))))
    pi = _open_edge(g, rng, root, "out", simplex(k))
    while g.n_edges + 3 <= max_edges and rng.random() < 0.7:
        eq = g.add_node(Equality())
        ports = ["a", "b", "c"]
        rng.shuffle(ports)
        g.attach(pi, eq, ports[0])
        draw = _open_edge(g, rng, eq, ports[1], simplex(k))
        _observed_draw(g, rng, draw, k)
        pi = _open_edge(g, rng, eq, ports[2], simplex(k))
    if g.n_edges + 2 <= max_edges and rng.random() < 0.7:
        _observed_draw(g, rng, pi, k)
    else:
        g.attach(pi, g.add_node(Prior(Dirichlet(rng.uniform(1, 5, size=k)))), "out")
    return g


def _observed_draw(g, rng, pi_edge, k):
    link = g.add_node(CategoricalFromProbs())
    g.attach(pi_edge, link, "pi")
    m = _open_edge(g, rng, link, "m", categorical(k))
    g.observe(m, int(rng.integers(k)))


def random_conjugate_graph(rng, max_edges=12) -> FactorGraph:
    r = rng.random()
    if r < 0.45:
        return random_gaussian_tree(rng, max_edges)
    if r < 0.85:
        return random_categorical_tree(rng, max_edges)
    return random_dirichlet_tree(rng, max_edges)


def all_log_evidences(result) -> list[float]:
    """Every proper edge and node evidence outside mixture branches."""
    g = result.graph
    values = [v for e, v in result.edge_log_evidence.items() if v is not None and e not in g.conditional_edges]
    for n in g.node_ids():
        if n in g.conditional_nodes:
            continue
        v = result.node_log_evidence(n)
        if v is not None:
            values.append(v)
    return values


# ---------------------------------------------- discrete mixture with oracle


@dataclass
class DiscreteMixtureModel:
    """An all-discrete graph with one mixture node and its factor tables.

    Each factor belongs to a group: "m" (the selector side), "shared" (the
    out side) or a branch index k.
    """

    graph: FactorGraph = field(default_factory=FactorGraph)
    sizes: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    factors: list = field(default_factory=list)
    m_edge: int = -1
    out_edge: int = -1
    branch_edges: list = field(default_factory=list)

    def _new(self, rng, node, port, k, group):
        e = _open_edge(self.graph, rng, node, port, categorical(k))
        self.sizes[e] = k
        self.groups[e] = group
        return e

    def extend_transition(self, rng, edge, group):
        k = self.sizes[edge]
        T = random_stochastic(rng, k)
        node = self.graph.add_node(Transition(T))
        ports = ["next", "prev"]
        rng.shuffle(ports)
        self.graph.attach(edge, node, ports[0])
        new = self._new(rng, node, ports[1], k, group)
        nxt, prev = (edge, new) if ports[0] == "next" else (new, edge)
        self.factors.append((group, (nxt, prev), T))
        return new

    def extend_equality(self, rng, edge, group):
        k = self.sizes[edge]
        node = self.graph.add_node(Equality())
        ports = ["a", "b", "c"]
        rng.shuffle(ports)
        self.graph.attach(edge, node, ports[0])
        b = self._new(rng, node, ports[1], k, group)
        c = self._new(rng, node, ports[2], k, group)
        eye = np.zeros((k, k, k))
        for i in range(k):
            eye[i, i, i] = 1.0
        self.factors.append((group, (edge, b, c), eye))
        return [b, c]

    def terminate(self, rng, edge, group, allow_observe=True):
        k = self.sizes[edge]
        r = rng.random()
        if allow_observe and r < 0.4:
            v = int(rng.integers(k))
            self.graph.observe(edge, v)
            self.factors.append((group, (edge,), np.eye(k)[v]))
        elif r < 0.8:
            p = random_probs(rng, k)
            self.graph.attach(edge, self.graph.add_node(Prior(Categorical(p))), "out")
            self.factors.append((group, (edge,), p))
        else:
            self.graph.declare_free(edge)
            self.factors.append((group, (edge,), np.ones(k)))


def random_discrete_mixture(rng, max_edges=5, max_k=4) -> DiscreteMixtureModel:
    n_branches = int(rng.integers(2, 4))
    d = int(rng.integers(2, max_k + 1))
    model = DiscreteMixtureModel()
    g = model.graph
    mix = g.add_node(MixtureNode(n_branches))
    model.m_edge = model._new(rng, mix, "m", n_branches, "m")
    model.out_edge = model._new(rng, mix, "out", d, "shared")
    model.branch_edges = [model._new(rng, mix, f"branch{j}", d, j) for j in range(n_branches)]
    spare = max_edges - g.n_edges

    m_end = model.m_edge
    if spare >= 1 and rng.random() < 0.3:
        m_end = model.extend_transition(rng, m_end, "m")
        spare -= 1
    model.terminate(rng, m_end, "m")

    for j, e in enumerate(model.branch_edges):
        if spare >= 1 and rng.random() < 0.3:
            e = model.extend_transition(rng, e, j)
            spare -= 1
        model.terminate(rng, e, j, allow_observe=False)

    out_ends = [model.out_edge]
    if spare >= 2 and rng.random() < 0.4:
        out_ends = model.extend_equality(rng, model.out_edge, "shared")
        spare -= 2
    elif spare >= 1 and rng.random() < 0.5:
        out_ends = [model.extend_transition(rng, model.out_edge, "shared")]
        spare -= 1
    for e in out_ends:
        model.terminate(rng, e, "shared")
    return model


@dataclass
class EnumerationResult:
    log_evidence: float
    branch_log_evidence: list          # log Z_k, the submodel evidences
    marginals: dict                    # unconditional edges: posterior; branch edges: posterior given m = k


def _enumerate(model, groups, k):
    """Yield (assignment, selector-side weight, remaining weight) with m = k."""
    edges = [e for e, grp in model.groups.items() if grp in groups]
    factors = [f for f in model.factors if f[0] in groups]
    for values in itertools.product(*(range(model.sizes[e]) for e in edges)):
        x = dict(zip(edges, values))
        if model.m_edge in x and x[model.m_edge] != k:
            continue
        if x[model.out_edge] != x[model.branch_edges[k]]:
            continue
        w_m, w_rest = 1.0, 1.0
        for grp, vars_, table in factors:
            val = table[tuple(x[v] for v in vars_)]
            if grp == "m":
                w_m *= val
            else:
                w_rest *= val
        yield x, w_m, w_rest


def enumerate_mixture(model: DiscreteMixtureModel) -> EnumerationResult:
    """Exhaustive sum over the switching model prod_k [p_k(x)]^{m_k}.

    For m = k only the selector side, the shared side and branch k exist, and
    the mixture factor reduces to [out == branch_k]. Branch-edge marginals are
    conditioned on m = k; Z_k sums the shared side and branch k alone.
    """
    n_branches = len(model.branch_edges)
    totals = np.zeros(n_branches)
    z = np.zeros(n_branches)
    joint = {e: np.zeros(s) for e, s in model.sizes.items()}
    for k in range(n_branches):
        for x, w_m, w_rest in _enumerate(model, {"m", "shared", k}, k):
            w = w_m * w_rest
            totals[k] += w
            for e, v in x.items():
                if not model.groups[e] == k:
                    joint[e][v] += w
        # given m = k the selector side is a constant factor, so the branch
        # conditional needs only the shared side and branch k
        for x, _, w_rest in _enumerate(model, {"shared", k}, k):
            z[k] += w_rest
            for e, v in x.items():
                if model.groups[e] == k:
                    joint[e][v] += w_rest
    evidence = totals.sum()
    marginals = {}
    for e, grp in model.groups.items():
        marginals[e] = joint[e] / (evidence if isinstance(grp, str) else z[grp])
    with np.errstate(divide="ignore"):
        return EnumerationResult(math.log(evidence), list(np.log(z)), marginals)


def vad_oracle_filter(config, y) -> np.ndarray:
    """Two-hypothesis filter written from the recursions, bypassing the graph engine.

    Predict z with T and s with the AR(1) map, weigh the silence and speech
    observation densities, Kalman-update s under speech, then collapse s to
    the mean and variance of its two-component posterior.
    """
    T = np.asarray(config.transition, dtype=float)
    pz = np.array([1.0 - config.initial_speech, config.initial_speech])
    m, v = 0.0, config.process_variance / (1.0 - config.rho**2)
    r = config.observation_variance
    out = np.empty(len(y))
    for t, obs in enumerate(np.asarray(y, dtype=float)):
        prior_z = T @ pz
        m_pred = config.rho * m
        v_pred = config.rho**2 * v + config.process_variance
        dens = np.array([
            math.exp(-0.5 * obs**2 / (config.silence_variance + r)) / math.sqrt(2 * math.pi * (config.silence_variance + r)),
            math.exp(-0.5 * (obs - m_pred) ** 2 / (v_pred + r)) / math.sqrt(2 * math.pi * (v_pred + r)),
        ])
        pz = prior_z * dens / (prior_z @ dens)
        gain = v_pred / (v_pred + r)
        m_post = m_pred + gain * (obs - m_pred)
        v_post = (1.0 - gain) * v_pred
        m = pz[1] * m_post + pz[0] * m_pred
        v = pz[1] * (v_post + m_post**2) + pz[0] * (v_pred + m_pred**2) - m**2
        out[t] = pz[1]
    return out
