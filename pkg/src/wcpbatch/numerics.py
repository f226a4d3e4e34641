"""Photon-count distributions, special functions, and the shared RNG contract.

Every stochastic module in the toolkit draws through :class:`RngStream`, a
counter-based stream addressed by ``(seed, stream_id)``.  Streams are cheap
value objects: the same address always reproduces the same draw sequence, and
distinct addresses are statistically independent, so Monte Carlo trials can be
sharded across workers without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "ParameterError",
    "InfeasibleError",
    "Probability",
    "RngStream",
    "ExpFloat",
    "poisson_pmf",
    "poisson_sample",
    "poisson_counts",
    "binomial_sample",
    "lambert_w_minus1",
    "wilson_interval",
]

# Tail mass below which the Poisson CDF table is truncated.
_POISSON_TAIL = 1e-15
# Above this mean, inversion tables stop paying off; numpy's exact sampler
# takes over.  All protocol intensities are O(1), far below the cutoff.
_POISSON_INVERSION_MAX_MEAN = 30.0


class ParameterError(ValueError):
    """An operation received a parameter outside its documented domain."""


class InfeasibleError(ParameterError):
    """A well-formed request has no feasible answer (no root, no valid point)."""


class Probability(float):
    """A float validated to lie in [0, 1] on construction."""

    __slots__ = ()

    def __new__(cls, value: float) -> "Probability":
        v = float(value)
        if not 0.0 <= v <= 1.0:  # also rejects NaN
            raise ParameterError(f"probability must lie in [0, 1], got {value!r}")
        return super().__new__(cls, v)


@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable random stream.

    Backed by the counter-based Philox generator keyed through a
    ``SeedSequence`` spawn key, so ``child`` streams never overlap their
    parent or siblings.  Instances are value objects; the underlying
    generator is created lazily and advances as draws are made, so reuse a
    fresh stream whenever bit-reproducibility of a sequence is required.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ParameterError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    @cached_property
    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *indices: int) -> "RngStream":
        """Derive an independent sub-stream addressed by `indices`."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(indices))

    # Convenience draws used across the toolkit; all delegate to `generator`.
    def uniform(self, size: int | None = None):
        return self.generator.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def subset(self, pool: np.ndarray | int, size: int) -> np.ndarray:
        """Uniform subset of `size` elements drawn without replacement."""
        return self.generator.choice(pool, size=size, replace=False)

    def integer(self, high: int) -> int:
        return int(self.generator.integers(high))


@lru_cache(maxsize=512)
def _poisson_cdf_table(mean: float) -> np.ndarray:
    """CDF of Poisson(mean), truncated once the remaining tail is < 1e-15."""
    n_max = int(mean + 12.0 * math.sqrt(mean) + 30.0)
    pmf = math.exp(-mean)
    cdf = [pmf]
    for n in range(1, n_max + 1):
        pmf *= mean / n
        cdf.append(cdf[-1] + pmf)
        if 1.0 - cdf[-1] < _POISSON_TAIL:
            break
    return np.asarray(cdf)


def _check_mean(mean: float) -> float:
    mean = float(mean)
    if not math.isfinite(mean) or mean < 0.0:
        raise ParameterError(f"Poisson mean must be finite and nonnegative, got {mean!r}")
    return mean


def poisson_pmf(n: int, mean: float) -> Probability:
    """Pr[N = n] for N ~ Poisson(mean), evaluated in log space."""
    mean = _check_mean(mean)
    if n < 0 or n != int(n):
        raise ParameterError(f"photon count must be a nonnegative integer, got {n!r}")
    n = int(n)
    if mean == 0.0:
        return Probability(1.0 if n == 0 else 0.0)
    log_p = n * math.log(mean) - mean - math.lgamma(n + 1)
    return Probability(math.exp(log_p))


def poisson_counts(mean: float, size: int, rng: RngStream) -> np.ndarray:
    """Vectorised Poisson draws by CDF inversion (exact for tabulated means)."""
    mean = _check_mean(mean)
    if mean == 0.0:
        return np.zeros(size, dtype=np.int64)
    if mean > _POISSON_INVERSION_MAX_MEAN:
        return rng.generator.poisson(mean, size=size).astype(np.int64)
    table = _poisson_cdf_table(mean)
    u = rng.generator.random(size)
    return np.searchsorted(table, u, side="right").astype(np.int64)


def poisson_sample(mean: float, rng: RngStream) -> int:
    """One draw from Poisson(mean); mean = 0 returns 0 deterministically."""
    return int(poisson_counts(mean, 1, rng)[0])


def binomial_sample(trials: int, p: float, rng: RngStream) -> int:
    """Exact draw from Binomial(trials, p); degenerate p short-circuits."""
    if trials < 0 or trials != int(trials):
        raise ParameterError(f"trials must be a nonnegative integer, got {trials!r}")
    p = Probability(p)
    trials = int(trials)
    if p == 0.0:
        return 0
    if p == 1.0:
        return trials
    return int(rng.generator.binomial(trials, p))


_BRANCH_POINT = -1.0 / math.e


def lambert_w_minus1(x: float) -> float:
    """Negative branch of the Lambert W function: w <= -1 with w*exp(w) = x.

    Defined for -1/e <= x < 0.  Halley iteration from a branch-point series
    (x near -1/e) or log-log asymptote (x near 0) initial guess; falls back
    to bisection on [-745, -1] if not converged within 50 steps.
    """
    x = float(x)
    if not (_BRANCH_POINT <= x < 0.0) or not math.isfinite(x):
        raise ParameterError(f"lambert_w_minus1 requires -1/e <= x < 0, got {x!r}")

    s_sq = 2.0 * (1.0 + math.e * x)
    if s_sq <= 0.0:  # at (or within rounding of) the branch point
        return -1.0
    if x < -0.27:
        # series around the branch point with p = -sqrt(2(1 + e*x))
        p = -math.sqrt(s_sq)
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3 - 43.0 / 540.0 * p**4
    else:
        log_mx = math.log(-x)
        w = log_mx - math.log(-log_mx)
    w = min(w, -1.0)

    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        if w == -1.0:
            break
        denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * (w + 1.0))
        step = f / denom
        w_next = w - step
        if w_next > -1.0:
            w_next = -1.0
        if abs(w_next - w) <= 1e-16 * (1.0 + abs(w_next)):
            w = w_next
            break
        w = w_next
    if abs(w * math.exp(w) - x) <= 1e-12:
        return w

    # Bisection fallback: w*e^w is monotone increasing from -1/e toward 0
    # as w runs from -1 down to -745 (where e^w underflows).
    lo, hi = -745.0, -1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) - x > 0.0:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    if abs(w * math.exp(w) - x) > 1e-12:
        raise ArithmeticError(f"lambert_w_minus1 failed to converge at x={x!r}")
    return w


@dataclass(frozen=True)
class ExpFloat:
    """Nonnegative magnitude carried as its natural log.

    Finite-size error bounds take the form exp(-x*N) and routinely underflow
    double precision; carrying the exponent keeps log-magnitudes exact while
    ``value`` still gives the (possibly flushed-to-zero) float.
    """

    log_value: float

    @classmethod
    def from_value(cls, value: float) -> "ExpFloat":
        if value < 0.0:
            raise ParameterError(f"ExpFloat represents nonnegative values, got {value!r}")
        return cls(math.log(value) if value > 0.0 else -math.inf)

    @property
    def value(self) -> float:
        if self.log_value >= 709.0:  # exp overflow guard
            return math.inf
        return math.exp(self.log_value)

    def __add__(self, other: "ExpFloat") -> "ExpFloat":
        return ExpFloat(float(np.logaddexp(self.log_value, other.log_value)))

    def __mul__(self, other: "ExpFloat | float | int") -> "ExpFloat":
        if isinstance(other, ExpFloat):
            return ExpFloat(self.log_value + other.log_value)
        return self * ExpFloat.from_value(float(other))

    __rmul__ = __mul__

    def __le__(self, other: "ExpFloat") -> bool:
        return self.log_value <= other.log_value

    def __lt__(self, other: "ExpFloat") -> bool:
        return self.log_value < other.log_value

    def to_dict(self) -> dict:
        return {"log_value": self.log_value, "value": self.value}


ONE = ExpFloat(0.0)


def wilson_interval(hits: int, trials: int, z: float = 3.290527) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    The default z is the two-sided 99.9% normal quantile; pass z=3.0 for the
    plain three-sigma margin used in bound-dominance checks.
    """
    if trials <= 0:
        raise ParameterError("wilson_interval needs at least one trial")
    if not 0 <= hits <= trials:
        raise ParameterError(f"hits must lie in [0, trials], got {hits}/{trials}")
    p = hits / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))
