"""Parametric families carried by messages and marginals.

Every value here is immutable. Products return the normalized result together
with the log of the normalizer, so callers can keep evidence in the log
domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import digamma, gammaln

from .errors import (
    ConsistencyError,
    DegenerateEvidenceError,
    DimensionError,
    UnsupportedModelError,
)

VARIANCE_FLOOR = 1e-12
SIMPLEX_TOL = 1e-9

_LOG_2PI = math.log(2.0 * math.pi)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_simplex(p: np.ndarray, what: str) -> np.ndarray:
    if p.ndim != 1 or p.size == 0:
        raise DimensionError(f"{what} must be a non-empty vector, got shape {p.shape}")
    total = p.sum()
    # a NaN minimum or a non-finite total catches every bad entry in two reductions
    if not (math.isfinite(total) and p.min() >= 0.0):
        raise ValueError(f"{what} must be finite and nonnegative: {p}")
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{what} sum to {total!r}, not 1")
    return p / total


@dataclass(frozen=True)
class Gaussian:
    """Univariate normal N(mean, variance)."""

    mean: float
    variance: float

    def __post_init__(self):
        mean, variance = float(self.mean), float(self.variance)
        if not math.isfinite(mean):
            raise ValueError(f"Gaussian mean must be finite, got {mean}")
        # rejected rather than clamped
        if not (VARIANCE_FLOOR <= variance < math.inf):
            raise ValueError(f"Gaussian variance {variance!r} is below the floor {VARIANCE_FLOOR}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * (_LOG_2PI + math.log(self.variance) + (x - self.mean) ** 2 / self.variance)

    def pdf(self, x):
        return np.exp(self.logpdf(x))


@dataclass(frozen=True, eq=False)
class Categorical:
    """Distribution over K outcomes, indexed from 0."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = _check_simplex(np.asarray(self.probabilities, dtype=float), "probabilities")
        object.__setattr__(self, "probabilities", _frozen(p))

    @property
    def size(self) -> int:
        return self.probabilities.size

    def __eq__(self, other):
        return isinstance(other, Categorical) and np.array_equal(self.probabilities, other.probabilities)

    def __repr__(self):
        return f"Categorical({self.probabilities.tolist()})"


@dataclass(frozen=True, eq=False)
class Dirichlet:
    concentration: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.concentration, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise DimensionError(f"concentration must be a non-empty vector, got shape {a.shape}")
        if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
            raise ValueError(f"concentration entries must be positive and finite: {a}")
        object.__setattr__(self, "concentration", _frozen(a))

    @property
    def size(self) -> int:
        return self.concentration.size

    def __eq__(self, other):
        return isinstance(other, Dirichlet) and np.array_equal(self.concentration, other.concentration)

    def __repr__(self):
        return f"Dirichlet({self.concentration.tolist()})"


@dataclass(frozen=True)
class PointMass:
    """Dirac delta at a real value."""

    value: float

    def __post_init__(self):
        value = float(self.value)
        if not math.isfinite(value):
            raise ValueError(f"point mass location must be finite, got {value}")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class PointMassIndex:
    """Kronecker delta on outcome ``index`` of ``size`` (0-based)."""

    index: int
    size: int

    def __post_init__(self):
        if self.size < 1 or not 0 <= self.index < self.size:
            raise ValueError(f"index {self.index} out of range for size {self.size}")

    @property
    def probabilities(self) -> np.ndarray:
        p = np.zeros(self.size)
        p[self.index] = 1.0
        return p


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ValueError("a mixture needs at least one component")
        if not all(isinstance(c, Gaussian) for c in components):
            raise TypeError("mixture components must be Gaussian")
        w = _check_simplex(np.asarray(self.weights, dtype=float), "mixture weights")
        if w.size != len(components):
            raise DimensionError(f"{w.size} weights for {len(components)} components")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "components", components)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.variance for c in self.components])

    @property
    def mean(self) -> float:
        return float(self.weights @ self.means)

    @property
    def variance(self) -> float:
        mu = self.means
        return float(self.weights @ (self.variances + mu**2) - self.mean**2)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        terms = np.stack([lw + c.logpdf(x) for lw, c in zip(logw, self.components)])
        top = terms.max(axis=0)
        return top + np.log(np.exp(terms - top).sum(axis=0))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def __repr__(self):
        parts = ", ".join(f"{w:.6g}: N({c.mean:.6g}, {c.variance:.6g})" for w, c in zip(self.weights, self.components))
        return f"GaussianMixture({{{parts}}})"


@dataclass(frozen=True)
class Flat:
    """Improper constant density on the real line (an unconstrained half-edge)."""


Distribution = Union[Gaussian, Categorical, Dirichlet, PointMass, PointMassIndex, GaussianMixture, Flat]


@dataclass(frozen=True)
class Message:
    """A message ``exp(log_scale) * body`` with ``body`` normalized."""

    log_scale: float
    body: Distribution

    def __post_init__(self):
        log_scale = float(self.log_scale)
        if log_scale == -math.inf:
            raise DegenerateEvidenceError("message carries zero mass")
        if not math.isfinite(log_scale):
            raise ValueError(f"log_scale must be finite, got {log_scale}")
        object.__setattr__(self, "log_scale", log_scale)

    def rescaled(self, delta: float) -> Message:
        return Message(self.log_scale + delta, self.body)


def gaussian_log_pdf(x: float, g: Gaussian) -> float:
    return float(-0.5 * (_LOG_2PI + math.log(g.variance) + (x - g.mean) ** 2 / g.variance))


def gaussian_product(a: Gaussian, b: Gaussian) -> tuple[Gaussian, float]:
    """Normalized product of two Gaussian densities and the log of its mass.

    The mass is ``N(a.mean | b.mean, a.variance + b.variance)``; the result is
    exactly symmetric in its arguments.
    """
    total = a.variance + b.variance
    mean = (a.mean * b.variance + b.mean * a.variance) / total
    variance = a.variance * b.variance / total
    log_z = -0.5 * (_LOG_2PI + math.log(total) + (a.mean - b.mean) ** 2 / total)
    return Gaussian(mean, variance), log_z


def _normalized_simplex(w: np.ndarray) -> tuple[Categorical, float]:
    total = w.sum()
    if not total > 0.0:
        raise DegenerateEvidenceError("all outcomes have zero mass")
    p = w / total
    if abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise ConsistencyError(f"normalized probabilities sum to {p.sum()!r}")
    return Categorical(p), math.log(total)


def categorical_product(a: Categorical, b: Categorical) -> tuple[Categorical, float]:
    if a.size != b.size:
        raise DimensionError(f"cannot multiply categoricals of sizes {a.size} and {b.size}")
    return _normalized_simplex(a.probabilities * b.probabilities)


def logsumexp(logw) -> float:
    logw = np.asarray(logw, dtype=float)
    if logw.size == 0 or np.any(np.isnan(logw)):
        raise ValueError(f"log weights must be non-empty and not NaN: {logw}")
    top = logw.max()
    if top == -math.inf:
        raise DegenerateEvidenceError("every log weight is -inf")
    if top == math.inf:
        raise ValueError("log weights contain +inf")
    return float(top + math.log(np.exp(logw - top).sum()))


def normalize_log_weights(logw) -> tuple[Categorical, float]:
    """Exponentiate and normalize log weights with max subtraction.

    Returns the categorical ``exp(logw - log_z)`` and ``log_z``.
    """
    logw = np.asarray(logw, dtype=float)
    log_z = logsumexp(logw)
    p = np.exp(logw - log_z)
    return Categorical(p / p.sum()), log_z


def log_beta(alpha) -> float:
    alpha = np.asarray(alpha, dtype=float)
    return float(gammaln(alpha).sum() - gammaln(alpha.sum()))


def dirichlet_mean(d: Dirichlet) -> Categorical:
    a = d.concentration
    return Categorical(a / a.sum())


def dirichlet_expected_log(d: Dirichlet) -> np.ndarray:
    """E[ln pi_k] under Dir(alpha): digamma(alpha_k) - digamma(sum(alpha))."""
    a = d.concentration
    return digamma(a) - digamma(a.sum())


def moment_match(m: GaussianMixture | Gaussian) -> Gaussian:
    """Collapse a mixture to the Gaussian with the same mean and variance."""
    if isinstance(m, Gaussian):
        return m
    if len(m.components) == 1:
        return m.components[0]
    return Gaussian(m.mean, m.variance)


def _mixture_times(m: GaussianMixture, other) -> tuple[Distribution, float]:
    with np.errstate(divide="ignore"):
        logw = np.log(m.weights)
    if isinstance(other, PointMass):
        log_z = logsumexp([lw + gaussian_log_pdf(other.value, c) for lw, c in zip(logw, m.components)])
        return other, log_z
    if isinstance(other, Gaussian):
        others = [(0.0, other)]
    else:
        with np.errstate(divide="ignore"):
            others = list(zip(np.log(other.weights), other.components))
    comps, scores = [], []
    for lw, c in zip(logw, m.components):
        for lw2, c2 in others:
            g, lz = gaussian_product(c, c2)
            comps.append(g)
            scores.append(lw + lw2 + lz)
    weights, log_z = normalize_log_weights(scores)
    if len(comps) == 1:
        return comps[0], log_z
    return GaussianMixture(weights.probabilities, comps), log_z


def product(a: Distribution, b: Distribution) -> tuple[Distribution, float]:
    """Normalized product of two densities and the log of its mass.

    The mass is NaN when both factors are improper (``Flat``).
    Raises ``UnsupportedModelError`` for combinations without a closed form.
    """
    if isinstance(a, Flat):
        return b, (math.nan if isinstance(b, Flat) else 0.0)
    if isinstance(b, Flat):
        return a, 0.0

    if isinstance(a, Gaussian) and isinstance(b, Gaussian):
        return gaussian_product(a, b)
    if isinstance(a, GaussianMixture) and isinstance(b, (Gaussian, GaussianMixture, PointMass)):
        return _mixture_times(a, b)
    if isinstance(b, GaussianMixture) and isinstance(a, (Gaussian, PointMass)):
        return _mixture_times(b, a)
    if isinstance(a, PointMass) and isinstance(b, Gaussian):
        return a, gaussian_log_pdf(a.value, b)
    if isinstance(b, PointMass) and isinstance(a, Gaussian):
        return b, gaussian_log_pdf(b.value, a)

    if isinstance(a, Categorical) and isinstance(b, Categorical):
        return categorical_product(a, b)
    if isinstance(a, PointMassIndex) or isinstance(b, PointMassIndex):
        delta, other = (a, b) if isinstance(a, PointMassIndex) else (b, a)
        if isinstance(other, (Categorical, PointMassIndex)):
            if other.size != delta.size:
                raise DimensionError(f"cannot multiply sizes {delta.size} and {other.size}")
            p = other.probabilities[delta.index]
            if p == 0.0:
                raise DegenerateEvidenceError(f"outcome {delta.index} has zero probability")
            return delta, math.log(p)

    if isinstance(a, Dirichlet) and isinstance(b, Dirichlet):
        if a.size != b.size:
            raise DimensionError(f"cannot multiply Dirichlets of sizes {a.size} and {b.size}")
        c = a.concentration + b.concentration - 1.0
        if np.any(c <= 0.0):
            raise UnsupportedModelError("Dirichlet product is not normalizable")
        return Dirichlet(c), log_beta(c) - log_beta(a.concentration) - log_beta(b.concentration)

    raise UnsupportedModelError(f"no closed-form product for {type(a).__name__} x {type(b).__name__}")


def mean(d: Distribution):
    if isinstance(d, (Gaussian,)):
        return d.mean
    if isinstance(d, GaussianMixture):
        return d.mean
    if isinstance(d, PointMass):
        return d.value
    if isinstance(d, (Categorical, PointMassIndex)):
        return d.probabilities
    if isinstance(d, Dirichlet):
        return dirichlet_mean(d).probabilities
    raise UnsupportedModelError(f"{type(d).__name__} has no mean")
