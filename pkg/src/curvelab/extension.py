"""Weighted sequences, curve systems, and the truncated exponential sum.

The central object is the operator

    E_a(alpha) = sum_{|n| <= N} a(n) * e(alpha . Phi(n)),   e(t) = exp(2*pi*i*t),

for a weight sequence a supported in [-N, N] and an integer curve
Phi(n) = (phi_1(n), ..., phi_d(n)) with d in {1, 2, 3}.  Pointwise
evaluation reduces every phase coordinate mod 1 in exact rational
arithmetic (floats convert to Fractions losslessly), so the result is
1-periodic in each coordinate by construction.  Moment estimation is a
seeded, chunked Monte Carlo average; exact moments live in
``curvelab.moments``.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .intpoly import IntPolynomial, parse_polynomial

logger = logging.getLogger(__name__)

Weight = int | float | complex | Fraction


class WeightedSequence:
    """Complex weights on the integers of [-N, N]; zero weights dropped."""

    __slots__ = ("N", "weights")

    def __init__(self, N: int, weights: Mapping[int, Weight]):
        if N < 1:
            raise ValueError("N must be positive")
        self.N = int(N)
        cleaned: dict[int, Weight] = {}
        for n, w in weights.items():
            n = int(n)
            if abs(n) > self.N:
                raise ValueError(f"support point {n} outside [-{N}, {N}]")
            if w != 0:
                cleaned[n] = w
        self.weights = cleaned

    @classmethod
    def indicator(cls, points: Iterable[int], N: int) -> "WeightedSequence":
        return cls(N, {int(n): 1 for n in points})

    @classmethod
    def full(cls, N: int) -> "WeightedSequence":
        return cls.indicator(range(-N, N + 1), N)

    # -- basic queries ---------------------------------------------------

    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    def is_empty(self) -> bool:
        return not self.weights

    def is_indicator(self) -> bool:
        return all(w == 1 for w in self.weights.values())

    def cardinality(self) -> int:
        """A = number of support points (the set size in all bounds)."""
        return len(self.weights)

    def weight(self, n: int) -> Weight:
        return self.weights.get(int(n), 0)

    def sum_weights(self) -> Weight:
        return sum(self.weights.values(), start=0)

    def l2_norm_squared(self) -> Weight:
        """Sum of |a(n)|^2, exact for int / Fraction / Gaussian-integer weights."""
        total: Weight = 0
        for w in self.weights.values():
            if isinstance(w, (int, Fraction)):
                total += w * w
            elif isinstance(w, complex):
                re, im = w.real, w.imag
                if re.is_integer() and im.is_integer():
                    total += int(re) ** 2 + int(im) ** 2
                else:
                    total += re * re + im * im
            else:
                total += w * w
        return total

    def weight_array(self) -> np.ndarray:
        """Weights aligned with support(), as complex128."""
        return np.array([complex(self.weights[n]) for n in self.support()],
                        dtype=np.complex128)

    # -- serialization -----------------------------------------------------

    def to_json_obj(self):
        """Indicator sets serialize to a sorted integer array, general
        weights to (n, re, im) triples.  Integer weights stay integers
        so a round trip preserves the exact-arithmetic path."""
        if self.is_indicator():
            return {"N": self.N, "set": list(self.support())}
        triples = []
        for n in self.support():
            w = complex(self.weights[n])
            re = int(w.real) if w.real.is_integer() else w.real
            im = int(w.imag) if w.imag.is_integer() else w.imag
            triples.append([n, re, im])
        return {"N": self.N, "weights": triples}

    @classmethod
    def from_json_obj(cls, obj) -> "WeightedSequence":
        if "set" in obj:
            return cls.indicator(obj["set"], obj["N"])
        weights: dict[int, Weight] = {}
        for n, re, im in obj["weights"]:
            if im == 0 and float(re).is_integer():
                weights[int(n)] = int(re)
            else:
                weights[int(n)] = complex(re, im)
        return cls(obj["N"], weights)

    def __repr__(self):
        kind = "indicator" if self.is_indicator() else "weighted"
        return f"WeightedSequence(N={self.N}, {kind}, A={len(self)})"


class CurveSystem:
    """Tuple of 1 to 3 nonconstant univariate integer polynomials."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[IntPolynomial]):
        comps = tuple(components)
        if not 1 <= len(comps) <= 3:
            raise ValueError("curve dimension must be 1, 2, or 3")
        for p in comps:
            if p.variables != 1:
                raise ValueError("curve components must be univariate")
            if p.is_constant():
                raise ValueError("curve components must be nonconstant")
        self.components = comps

    @classmethod
    def cubic_linear(cls) -> "CurveSystem":
        """The standard curve (n^3, n)."""
        x = IntPolynomial.variable()
        return cls((x ** 3, x))

    @classmethod
    def univariate(cls, phi: IntPolynomial) -> "CurveSystem":
        return cls((phi,))

    @classmethod
    def with_linear(cls, phi: IntPolynomial) -> "CurveSystem":
        """(phi(n), n): phi plus the linear coordinate used by the
        constrained counting tables."""
        return cls((phi, IntPolynomial.variable()))

    @classmethod
    def from_string(cls, text: str) -> "CurveSystem":
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return cls(tuple(parse_polynomial(p, variables=1) for p in parts))

    def dimension(self) -> int:
        return len(self.components)

    def degrees(self) -> tuple[int, ...]:
        return tuple(p.degree() for p in self.components)

    def total_degree(self) -> int:
        """Sum of component degrees: the K in the conjectured exponents."""
        return sum(self.degrees())

    def evaluate(self, n: int) -> tuple[int, ...]:
        return tuple(p.evaluate([n]) for p in self.components)

    def value_rows(self, ns: Sequence[int]) -> list[tuple[int, ...]]:
        return [self.evaluate(int(n)) for n in ns]

    def component_bound(self, N: int, index: int) -> int:
        """max |phi_index(n)| over integer n in [-N, N], exact."""
        p = self.components[index]
        return max(abs(p.evaluate([n])) for n in range(-N, N + 1))

    def descriptor(self) -> str:
        return ",".join(str(p) for p in self.components)

    def __eq__(self, other):
        return isinstance(other, CurveSystem) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return f"CurveSystem({self.descriptor()})"


# -- operator evaluation ------------------------------------------------


def evaluate_operator(
    seq: WeightedSequence,
    curve: CurveSystem,
    alpha: Sequence[float | Fraction | int],
) -> complex:
    """E_a(alpha) with exact mod-1 phase reduction per coordinate.

    Floats are converted to Fractions (losslessly), so the value is
    exactly 1-periodic in each phase coordinate and large integer curve
    values never degrade the phase.
    """
    d = curve.dimension()
    if len(alpha) != d:
        raise ValueError(f"alpha must have {d} coordinates")
    alphas = [a if isinstance(a, Fraction) else Fraction(a) for a in alpha]
    total = complex(0.0, 0.0)
    for n, w in seq.weights.items():
        phase = Fraction(0)
        for a, p in zip(alphas, curve.components):
            phase += (a * p.evaluate([n])) % 1
        total += complex(w) * cmath.exp(2j * cmath.pi * float(phase % 1))
    return total


@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo estimate of the p-th absolute moment of E_a."""

    p: int
    estimate: float
    stderr: float
    samples: int
    seed: int


def monte_carlo_moment(
    seq: WeightedSequence,
    curve: CurveSystem,
    p: int,
    samples: int,
    seed: int,
    chunk_size: int = 1 << 13,
) -> MomentEstimate:
    """Estimate int |E_a|^p over the phase torus by uniform sampling.

    Sampling is chunked; each chunk draws from its own RNG stream spawned
    from the seed, so the estimate is reproducible for a given seed and
    independent of the chunk size actually used for evaluation.
    """
    if p < 1:
        raise ValueError("moment exponent must be >= 1")
    if samples < 1:
        raise ValueError("need at least one sample")
    d = curve.dimension()
    if seq.is_empty():
        return MomentEstimate(p, 0.0, 0.0, samples, seed)
    support = seq.support()
    values = np.array(curve.value_rows(support), dtype=np.float64)  # (A, d)
    weights = seq.weight_array()  # (A,)
    n_chunks = (samples + chunk_size - 1) // chunk_size
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sum_x = 0.0
    sum_x2 = 0.0
    done = 0
    for i in range(n_chunks):
        m = min(chunk_size, samples - done)
        rng = np.random.Generator(np.random.PCG64(streams[i]))
        alphas = rng.random((m, d))
        phases = (alphas @ values.T) % 1.0  # (m, A)
        ev = np.exp(2j * np.pi * phases) @ weights
        x = np.abs(ev) ** p
        sum_x += float(x.sum())
        sum_x2 += float((x * x).sum())
        done += m
    mean = sum_x / samples
    var = max(0.0, sum_x2 / samples - mean * mean)
    stderr = (var / samples) ** 0.5
    return MomentEstimate(p, mean, stderr, samples, seed)


# -- set constructors -----------------------------------------------------


def make_set(
    kind: str,
    N: int,
    *,
    density: float | None = None,
    seed: int | None = None,
    start: int | None = None,
    step: int | None = None,
    points: Iterable[int] | None = None,
) -> WeightedSequence:
    """Deterministic indicator-set constructors inside [-N, N].

    kinds: ``full``; ``random`` (per-point Bernoulli(density), PCG64(seed));
    ``progression`` (from start by step until leaving the window);
    ``explicit`` (given points).  An empty result is legal but flagged
    with a log warning.
    """
    if kind == "full":
        return WeightedSequence.full(N)
    if kind == "random":
        if density is None or seed is None:
            raise ValueError("random sets need density and seed")
        if not 0.0 <= density <= 1.0:
            raise ValueError("density must lie in [0, 1]")
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        mask = rng.random(2 * N + 1) < density
        chosen = [n for n, keep in zip(range(-N, N + 1), mask) if keep]
        out = WeightedSequence.indicator(chosen, N)
        if out.is_empty():
            logger.warning("random set (N=%d, density=%g, seed=%d) came out empty",
                           N, density, seed)
        return out
    if kind == "progression":
        if start is None or step is None or step == 0:
            raise ValueError("progression sets need start and nonzero step")
        if abs(start) > N:
            raise ValueError("progression start lies outside [-N, N]")
        pts = []
        n = start
        while abs(n) <= N:
            pts.append(n)
            n += step
        return WeightedSequence.indicator(pts, N)
    if kind == "explicit":
        if points is None:
            raise ValueError("explicit sets need points")
        return WeightedSequence.indicator(points, N)
    raise ValueError(f"unknown set kind {kind!r}")
