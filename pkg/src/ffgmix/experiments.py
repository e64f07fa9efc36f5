"""Data generators and runners for the two experiments exposed by the CLI.

Verification: observations from a three-component Gaussian mixture are
explained by a mixture node over three Gaussian prior branches feeding a
shared Gaussian likelihood. Per-observation branch evidences come from the
engine's message towards m and are then combined by averaging, selection,
online combination or variational combination.

Voice activity detection: a two-state sticky chain selects between an AR(1)
speech source and a white silence source, both seen through additive
observation noise. Filtering runs one small factor graph per sample and
collapses the source posterior to a single Gaussian after every step.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .comparison import (
    DEFAULT_ONLINE_ALPHA,
    DEFAULT_REDUCED_ALPHA,
    bayesian_model_reduction,
    bma,
    bmc_online_step,
    bmc_variational,
    bms,
    BmcState,
    mixture_free_energy,
)
from .distributions import (
    Categorical,
    Gaussian,
    GaussianMixture,
    PointMass,
    dirichlet_mean,
    logsumexp,
    moment_match,
    product,
)
from .errors import DimensionError, InvalidInputError
from .graph import Direction, FactorGraph, run, schedule_sweep
from .mixture import MixtureNode
from .nodes import GaussianAR1, GaussianLikelihood, Prior, Transition, categorical

METHODS = ("bma", "bms", "bmc-online", "bmc-vmp")
CHECKPOINTS = (1, 5, 10, 100, 1000)

SPEECH, SILENCE = 1, 0
DEFAULT_TRANSITION = ((0.99999, 1e-5), (1e-5, 0.99999))


# ------------------------------------------------------------------ results


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    totals: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "rows", "totals"],
    "additionalProperties": False,
    "properties": {
        "config": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {"type": "object", "additionalProperties": {"type": "number"}},
        },
        "totals": {"type": "object"},
    },
}


def _to_json(value):
    if isinstance(value, dict):
        return {k: _to_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_to_json(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def format_results(table: ResultTable, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "config": _to_json(table.config),
            "rows": [dict(zip(table.columns, _to_json(list(r)))) for r in table.rows],
            "totals": _to_json(table.totals),
        }
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write_results(table: ResultTable, path: str | os.PathLike, fmt: str = "csv") -> None:
    """Write ``table`` as CSV (header row first) or JSON ``{config, rows, totals}``.

    Output is a pure function of the table, so identical runs give identical bytes.
    OS errors are re-raised with the path attached.
    """
    text = format_results(table, fmt)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {os.fspath(path)}: {exc.strerror}") from exc


def read_results(path: str | os.PathLike, fmt: str = "csv") -> ResultTable:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if fmt == "json":
        doc = json.loads(text)
        rows = doc["rows"]
        columns = tuple(rows[0]) if rows else ()
        return ResultTable(columns, [tuple(r[c] for c in columns) for r in rows], doc["config"], doc["totals"])
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    reader = csv.reader(io.StringIO(text))
    columns = tuple(next(reader))
    rows = []
    for rec in reader:
        rows.append(tuple(int(v) if c in ("n", "t") else float(v) for c, v in zip(columns, rec)))
    return ResultTable(columns, rows)


# ------------------------------------------------------------- verification


@dataclass(frozen=True)
class VerificationConfig:
    n: int = 1000
    noise_variance: float = 5.0
    weights: tuple[float, ...] = (0.2, 0.5, 0.3)
    means: tuple[float, ...] = (-3.0, 0.0, 4.0)
    component_variance: float = 1.0
    method: str = "bma"
    seed: int = 0
    alpha: float | None = None
    reduce_to: float = DEFAULT_REDUCED_ALPHA
    checkpoints: tuple[int, ...] = CHECKPOINTS

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if len(self.weights) != len(self.means):
            raise DimensionError("weights and means differ in length")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be a probability vector: {self.weights}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.noise_variance < 0 or self.component_variance <= 0:
            raise ValueError("variances must be nonnegative (noise) and positive (components)")

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def prior_alpha(self) -> np.ndarray:
        if self.alpha is not None:
            a = self.alpha
        else:
            a = DEFAULT_ONLINE_ALPHA if self.method == "bmc-online" else DEFAULT_REDUCED_ALPHA
        return np.full(self.k, float(a))


def generate_verification_data(config: VerificationConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw ``n`` samples from sum_k w_k N(mu_k, component_variance + noise_variance)."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    labels = rng.choice(config.k, size=config.n, p=np.asarray(config.weights))
    sd = math.sqrt(config.component_variance + config.noise_variance)
    return np.asarray(config.means)[labels] + sd * rng.standard_normal(config.n)


class VerificationModel:
    """Single-observation graph: K prior branches -> mixture -> likelihood -> y.

    The graph is validated and scheduled once; ``log_evidences`` swaps the
    observed value and reruns the sweep.
    """

    def __init__(self, means: Sequence[float], component_variance: float, noise_variance: float):
        k = len(means)
        g = FactorGraph()
        mix = g.add_node(MixtureNode(k))
        self.m_prior = g.add_node(Prior(Categorical(np.full(k, 1.0 / k))))
        self.m_edge = g.add_edge((self.m_prior, "out"), (mix, "m"), categorical(k))
        for j, mu in enumerate(means):
            p = g.add_node(Prior(Gaussian(mu, component_variance)))
            g.add_edge((p, "out"), (mix, f"branch{j}"))
        if noise_variance > 0:
            like = g.add_node(GaussianLikelihood(noise_variance))
            g.add_edge((mix, "out"), (like, "s"))
            y = g.add_edge((like, "y"))
        else:
            # noiseless: y is the mixture output itself
            y = g.add_edge((mix, "out"))
        self.observation = g.observe(y, 0.0)
        self.graph = g
        self.schedule = schedule_sweep(g)
        self.k = k

    def log_evidences(self, y: float) -> np.ndarray:
        """Per-branch log Z_k read off the message the mixture node sends to m."""
        self.graph.set_terminal(self.observation, PointMass(y))
        result = run(self.graph, self.schedule, marginals=False)
        msg = result.incoming(self.m_prior, self.m_edge)
        with np.errstate(divide="ignore"):
            return np.log(msg.body.probabilities) + msg.log_scale


def verification_log_evidences(config: VerificationConfig, y: Sequence[float]) -> np.ndarray:
    """N x K matrix of ln p(y_n | m_k) computed by message passing."""
    model = VerificationModel(config.means, config.component_variance, config.noise_variance)
    return np.array([model.log_evidences(float(v)) for v in y])


def _verification_row(n: int, q: np.ndarray, log_evidence: float, free_energy: float) -> tuple:
    return (n, *[float(v) for v in q], float(log_evidence), float(free_energy))


def run_verification(config: VerificationConfig, y: Sequence[float] | None = None) -> ResultTable:
    """Apply the configured comparison method cumulatively and report checkpoints.

    Rows hold, at each checkpoint n, the posterior over the three components
    (q(m) for bma/bms, E[pi] for the combination methods), the log evidence
    and the free energy. For bmc-online q is the mean of the reduced posterior
    and the evidence is the sum of one-step predictive evidences; for bmc-vmp
    the log evidence column is the bound -F.
    """
    if y is None:
        y = generate_verification_data(config)
    y = np.asarray(y, dtype=float)
    L = verification_log_evidences(config, y)
    k = config.k
    prior = Categorical(np.full(k, 1.0 / k))
    checkpoints = [c for c in config.checkpoints if 1 <= c <= len(y)]
    columns = ("n", *[f"q{j + 1}" for j in range(k)], "log_evidence", "free_energy")
    table = ResultTable(columns, [], _config_dict(config), {})

    if config.method in ("bma", "bms"):
        cum = np.cumsum(L, axis=0)
        for c in checkpoints:
            total = logsumexp(np.log(prior.probabilities) + cum[c - 1])
            if config.method == "bma":
                q = bma(cum[c - 1], prior).probabilities
                F = -total
            else:
                q = bms(cum[c - 1], prior).probabilities
                F = mixture_free_energy(q, prior, -cum[c - 1])
            table.rows.append(_verification_row(c, q, total, F))
        table.totals = {"log_evidences": cum[-1].tolist()}
    elif config.method == "bmc-online":
        alpha0 = config.prior_alpha
        reduced_alpha = np.full(k, float(config.reduce_to))
        state = BmcState.start(alpha0)
        for n, row in enumerate(L, start=1):
            state = bmc_online_step(state, row)
            if n in checkpoints:
                reduced = bayesian_model_reduction(state.dirichlet, alpha0, reduced_alpha)
                q = dirichlet_mean(reduced).probabilities
                table.rows.append(_verification_row(n, q, state.log_evidence, state.free_energy))
        reduced = bayesian_model_reduction(state.dirichlet, alpha0, reduced_alpha)
        table.totals = {
            "prior_alpha": alpha0.tolist(),
            "dirichlet": state.dirichlet.concentration.tolist(),
            "reduced_alpha": reduced_alpha.tolist(),
            "reduced_dirichlet": reduced.concentration.tolist(),
            "counts": np.bincount(state.assignments, minlength=k).tolist(),
        }
    else:
        alpha0 = config.prior_alpha
        for c in checkpoints:
            vmp = bmc_variational(L[:c], alpha0)
            q = dirichlet_mean(vmp.q_pi).probabilities
            table.rows.append(_verification_row(c, q, -vmp.free_energy, vmp.free_energy))
        table.totals = {
            "prior_alpha": alpha0.tolist(),
            "dirichlet": vmp.q_pi.concentration.tolist(),
            "iterations": vmp.iterations,
            "converged": vmp.converged,
        }
    return table


def _config_dict(config) -> dict:
    d = asdict(config)
    for key, value in list(d.items()):
        if isinstance(value, tuple):
            d[key] = _to_json(value)
    return d


# ---------------------------------------------------------------------- VAD


@dataclass(frozen=True)
class VadConfig:
    """Voice activity detection model.

    ``rho`` and ``process_variance`` (speech AR(1) source) are our defaults;
    the remaining defaults are the reference model settings. Label 1 is speech.
    """

    rho: float = 0.95
    process_variance: float = 1.0
    silence_variance: float = 0.01
    observation_variance: float = 0.5
    transition: tuple[tuple[float, ...], ...] = DEFAULT_TRANSITION
    initial_speech: float = 0.5
    input_path: str | None = None
    segments: str | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("process_variance", "silence_variance", "observation_variance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < abs(self.rho):
            raise ValueError("rho must be nonzero")
        if not 0.0 <= self.initial_speech <= 1.0:
            raise ValueError("initial_speech must be a probability")
        Transition(np.asarray(self.transition, dtype=float))

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=float)

    @property
    def initial_source(self) -> Gaussian:
        # stationary AR(1) law when |rho| < 1, otherwise the one-step variance
        if abs(self.rho) < 1.0:
            return Gaussian(0.0, self.process_variance / (1.0 - self.rho**2))
        return Gaussian(0.0, self.process_variance)


def parse_segments(spec: str) -> list[tuple[int, int]]:
    """``"speech:2000,silence:2000"`` -> ``[(1, 2000), (0, 2000)]``."""
    out = []
    for part in spec.split(","):
        name, _, count = part.strip().partition(":")
        name = name.strip().lower()
        if name not in ("speech", "silence") or not count.strip().isdigit():
            raise ValueError(f"bad segment {part!r}; expected speech:N or silence:N")
        out.append((SPEECH if name == "speech" else SILENCE, int(count)))
    if not out or sum(n for _, n in out) == 0:
        raise ValueError("segment spec is empty")
    return out


def generate_vad_data(
    config: VadConfig, segments: Sequence[tuple[int, int]] | str
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate observations and per-sample labels for alternating segments.

    Each speech segment starts its AR(1) source from the stationary law.
    """
    if isinstance(segments, str):
        segments = parse_segments(segments)
    rng = np.random.default_rng(config.seed)
    obs_sd = math.sqrt(config.observation_variance)
    ys, labels = [], []
    for label, count in segments:
        if label == SPEECH:
            s = np.empty(count)
            prev = rng.normal(0.0, math.sqrt(config.initial_source.variance))
            shocks = math.sqrt(config.process_variance) * rng.standard_normal(count)
            for t in range(count):
                prev = config.rho * prev + shocks[t]
                s[t] = prev
        else:
            s = math.sqrt(config.silence_variance) * rng.standard_normal(count)
        ys.append(s + obs_sd * rng.standard_normal(count))
        labels.append(np.full(count, label, dtype=int))
    return np.concatenate(ys), np.concatenate(labels)


def load_signal(path: str | os.PathLike) -> np.ndarray:
    """One real sample per line; blank lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        values = []
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise InvalidInputError(f"{os.fspath(path)}:{lineno}: not a number: {line!r}") from exc
    return np.asarray(values)


def _check_signal(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise InvalidInputError(f"signal must be one-dimensional, got shape {y.shape}")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise InvalidInputError(f"signal has non-finite samples, first at t={bad[0]}")
    return y


class VadModel:
    """One filtering step as a factor graph.

    z_{t-1} prior -> Transition -> z_t -> mixture m. Branch 1 (speech):
    s_{t-1} prior -> AR(1) -> s_t -> likelihood -> branch. Branch 0 (silence):
    noise prior -> likelihood -> branch. The mixture's out edge is y_t.
    """

    def __init__(self, config: VadConfig):
        g = FactorGraph()
        mix = g.add_node(MixtureNode(2))
        self.z_prior = g.add_node(Prior(Categorical([0.5, 0.5])))
        trans = g.add_node(Transition(config.transition_matrix))
        g.add_edge((self.z_prior, "out"), (trans, "prev"), categorical(2))
        self.z_edge = g.add_edge((trans, "next"), (mix, "m"), categorical(2))

        noise = g.add_node(Prior(Gaussian(0.0, config.silence_variance)))
        noise_like = g.add_node(GaussianLikelihood(config.observation_variance))
        g.add_edge((noise, "out"), (noise_like, "s"))
        g.add_edge((noise_like, "y"), (mix, f"branch{SILENCE}"))

        self.s_prior = g.add_node(Prior(config.initial_source))
        ar = g.add_node(GaussianAR1(config.rho, config.process_variance))
        speech_like = g.add_node(GaussianLikelihood(config.observation_variance))
        g.add_edge((self.s_prior, "out"), (ar, "prev"))
        self.s_edge = g.add_edge((ar, "next"), (speech_like, "s"))
        g.add_edge((speech_like, "y"), (mix, f"branch{SPEECH}"))

        y = g.add_edge((mix, "out"))
        self.observation = g.observe(y, 0.0)
        self.graph = g
        self.schedule = schedule_sweep(g)

    def step(self, qz: Categorical, qs: Gaussian, y: float) -> tuple[Categorical, Gaussian]:
        g = self.graph
        g.set_terminal(self.z_prior, qz)
        g.set_terminal(self.s_prior, qs)
        g.set_terminal(self.observation, PointMass(y))
        msgs = run(g, self.schedule, marginals=False).messages
        z_post, _ = product(msgs[(self.z_edge, Direction.FORWARD)].body, msgs[(self.z_edge, Direction.BACKWARD)].body)
        predicted = msgs[(self.s_edge, Direction.FORWARD)].body
        s_speech, _ = product(predicted, msgs[(self.s_edge, Direction.BACKWARD)].body)
        p = z_post.probabilities
        # without speech the source is unobserved and keeps its prediction
        collapsed = moment_match(GaussianMixture([p[SPEECH], p[SILENCE]], (s_speech, predicted)))
        return z_post, collapsed


def vad_signal(config: VadConfig) -> tuple[np.ndarray, np.ndarray | None]:
    if config.input_path is not None:
        return load_signal(config.input_path), None
    if config.segments is None:
        raise ValueError("VAD needs an input path or a segment spec")
    return generate_vad_data(config, config.segments)


def run_vad(config: VadConfig, y: Sequence[float] | None = None, labels: Sequence[int] | None = None) -> ResultTable:
    """Filter the speech probability q(z_t = speech | y_1..t) for every sample."""
    if y is None:
        y, labels = vad_signal(config)
    y = _check_signal(y)
    model = VadModel(config)
    qz = Categorical([1.0 - config.initial_speech, config.initial_speech])
    qs = config.initial_source
    rows = []
    for t, v in enumerate(y):
        qz, qs = model.step(qz, qs, float(v))
        rows.append((t, float(v), float(qz.probabilities[SPEECH])))
    table = ResultTable(("t", "y", "p_speech"), rows, _config_dict(config), {"samples": len(rows)})
    if labels is not None:
        labels = np.asarray(labels)
        table.totals["accuracy"] = vad_accuracy(table.column("p_speech"), labels)
    return table


def vad_accuracy(p_speech: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean((np.asarray(p_speech) > 0.5).astype(int) == np.asarray(labels)))
