"""Hypersphere geometry and sampling.

``S_n`` denotes the unit sphere in ``R^(n+1)``.  Gamma functions are always
evaluated in log space so that large ``n`` never overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionMismatch, IterationCap, NegativeDimension, NonpositiveDimension, OutOfRange, ZeroVector

NORM_TOL = 1e-9
DEFAULT_ITERATION_CAP = 10**6


@dataclass(frozen=True, eq=False)
class UnitVector:
    """Point on S_n stored as n+1 real coordinates."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=float, copy=True).ravel()
        norm = np.linalg.norm(c)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"vector norm is {norm!r}, expected 1 within {NORM_TOL}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def normalized(cls, v: Iterable[float]) -> UnitVector:
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ZeroVector("cannot normalize the zero vector")
        return cls(v / norm)

    @property
    def n(self) -> int:
        return self.coords.size - 1

    def dot(self, other: UnitVector) -> float:
        if other.coords.size != self.coords.size:
            raise DimensionMismatch(f"S_{self.n} vs S_{other.n}")
        return float(self.coords @ other.coords)

    def __neg__(self) -> UnitVector:
        return UnitVector(-self.coords)


EmbeddedVector = UnitVector


@dataclass(frozen=True)
class BiasedSampleResult:
    sample: UnitVector
    iterations: int


def log_surface_area(n: int) -> float:
    if n < 0:
        raise NegativeDimension(f"sphere dimension must be >= 0, got {n}")
    half = (n + 1) / 2.0
    return math.log(2.0) + half * math.log(math.pi) - math.lgamma(half)


def surface_area(n: int) -> float:
    """Surface area of S_n: 2 pi^((n+1)/2) / Gamma((n+1)/2)."""
    return math.exp(log_surface_area(n))


def normalization_r(n: int) -> float:
    """Integral of |b . lambda| over S_n, equal to (2/n) S_{n-1}."""
    if n < 1:
        raise NonpositiveDimension(f"n must be >= 1, got {n}")
    return 2.0 / n * surface_area(n - 1)


def acceptance_probability(n: int) -> float:
    """Probability that one uniform draw on S_n is accepted with prob |a . lambda|."""
    if n < 1:
        raise NonpositiveDimension(f"n must be >= 1, got {n}")
    return math.exp(
        math.log(2.0 / (n * math.sqrt(math.pi))) + math.lgamma((n + 1) / 2.0) - math.lgamma(n / 2.0)
    )


def acceptance_bounds(n: int) -> tuple[float, float]:
    """(sqrt(1/(2 pi n)), sqrt(2/(pi n))), which bracket acceptance_probability(n)."""
    if n < 1:
        raise NonpositiveDimension(f"n must be >= 1, got {n}")
    return math.sqrt(1.0 / (2.0 * math.pi * n)), math.sqrt(2.0 / (math.pi * n))


def geometric_entropy(p: float) -> float:
    """Entropy in bits of P(i) = (1-p)^(i-1) p, i >= 1."""
    if not 0.0 < p < 1.0:
        raise OutOfRange(f"p must lie in (0, 1), got {p}")
    return math.log2(1.0 / p) + (1.0 - p) / p * math.log2(1.0 / (1.0 - p))


def geometric_pmf(i: np.ndarray | int, p: float) -> np.ndarray:
    i = np.asarray(i)
    return (1.0 - p) ** (i - 1) * p


def normalize_rows(g: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Project Gaussian rows onto the sphere, redrawing any exactly-zero row."""
    norms = np.linalg.norm(g, axis=-1)
    bad = norms == 0.0
    if np.any(bad):
        if rng is None:
            raise ZeroVector("zero Gaussian vector drawn")
        g = g.copy()
        for idx in np.flatnonzero(bad):
            while norms[idx] == 0.0:
                g[idx] = rng.standard_normal(g.shape[-1])
                norms[idx] = np.linalg.norm(g[idx])
    return g / norms[..., None]


def uniform_samples(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise NonpositiveDimension(f"n must be >= 1, got {n}")
    return normalize_rows(rng.standard_normal((size, n + 1)), rng)


def uniform_sample(n: int, rng: np.random.Generator) -> UnitVector:
    return UnitVector(uniform_samples(n, 1, rng)[0])


def accepts(u: float | np.ndarray, overlap: float | np.ndarray) -> bool | np.ndarray:
    """Acceptance rule: strict ``u < |a . lambda|`` so ties reject."""
    return u < np.abs(overlap)


def rejection_walk(
    a: UnitVector,
    lambdas: Iterator[np.ndarray],
    uniforms: Iterator[float],
    max_iterations: int = DEFAULT_ITERATION_CAP,
) -> BiasedSampleResult:
    """Consume paired (lambda, u) draws until ``u < |a . lambda|``.

    The returned iteration index is 1-based.  ``lambdas`` must yield unit
    vectors on the same sphere as ``a``.
    """
    for i in range(1, max_iterations + 1):
        lam = next(lambdas)
        if lam.shape != a.coords.shape:
            raise DimensionMismatch(f"lambda has {lam.size} coords, a has {a.coords.size}")
        if accepts(next(uniforms), a.coords @ lam):
            return BiasedSampleResult(UnitVector(lam), i)
    raise IterationCap(f"no acceptance within {max_iterations} iterations")


def _gaussian_directions(n: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    while True:
        yield normalize_rows(rng.standard_normal(n + 1)[None, :], rng)[0]


def _uniforms(rng: np.random.Generator) -> Iterator[float]:
    while True:
        yield rng.random()


def biased_rejection_sample(
    a: UnitVector,
    rng: np.random.Generator,
    max_iterations: int = DEFAULT_ITERATION_CAP,
    accept_rng: np.random.Generator | None = None,
) -> BiasedSampleResult:
    """Draw lambda with density |a . lambda| / R_n by rejection from the uniform law.

    Directions come from ``rng``; acceptance uniforms come from ``accept_rng``
    if given, otherwise from ``rng`` interleaved with the directions.
    """
    directions = _gaussian_directions(a.n, rng)
    uniforms = _uniforms(rng if accept_rng is None else accept_rng)
    return rejection_walk(a, directions, uniforms, max_iterations)
