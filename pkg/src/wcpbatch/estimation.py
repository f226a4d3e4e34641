"""The two-intensity acceptance test run by the sender on the acknowledged set.

The sender splits its N pulses evenly between a low intensity nu and a high
intensity nu' and, after un-permuting the receiver's acknowledgements,
compares the statistic T against its honest lossy-channel expectation t with
margin Delta0.  The weighting of T is chosen so that two-photon pulses,
whose intensity of origin the receiver cannot resolve, contribute zero in
expectation whatever fraction of them is acknowledged.

Games and protocol runs are parametric in the estimation algorithm, so any
`EstimationAlgorithm` can be swapped in; only the two-intensity instance is
implemented here (multi-intensity statistics are an extension point).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .numerics import ParameterError

__all__ = [
    "Coefficients",
    "AcceptedCounts",
    "EstimationAlgorithm",
    "TwoIntensityEstimator",
    "ProtocolViolationError",
    "coefficients",
    "statistic_t",
    "reference_t",
    "algorithm_b",
]


class ProtocolViolationError(RuntimeError):
    """A party sent a malformed message (distinct from a modelled Abort)."""


@dataclass(frozen=True)
class Coefficients:
    """Poisson photon-number probabilities at the two pulse intensities.

    a, b, c are the 0-, 1- and 2-photon probabilities at nu; the primed
    fields are the same at nu'.  The discriminant b*c' - b'*c is positive
    whenever 0 < nu < nu' and normalises the test statistic.
    """

    nu: float
    nu_prime: float
    a: float
    b: float
    c: float
    a_prime: float
    b_prime: float
    c_prime: float
    discriminant: float

    def a_eta(self, eta: float) -> float:
        """Vacuum probability of the low-intensity pulse after a channel of transmittance eta."""
        return math.exp(-eta * self.nu)

    def a_prime_eta(self, eta: float) -> float:
        return math.exp(-eta * self.nu_prime)


def coefficients(nu: float, nu_prime: float) -> Coefficients:
    """Photon-number coefficients for the intensity pair; requires 0 < nu < nu'."""
    if not (0.0 < nu < nu_prime) or not math.isfinite(nu_prime):
        raise ParameterError(
            f"intensities must satisfy 0 < nu < nu_prime, got ({nu!r}, {nu_prime!r})"
        )
    a = math.exp(-nu)
    b = nu * a
    c = nu * nu * a / 2.0
    a_p = math.exp(-nu_prime)
    b_p = nu_prime * a_p
    c_p = nu_prime * nu_prime * a_p / 2.0
    return Coefficients(
        nu=nu,
        nu_prime=nu_prime,
        a=a,
        b=b,
        c=c,
        a_prime=a_p,
        b_prime=b_p,
        c_prime=c_p,
        discriminant=b * c_p - b_p * c,
    )


@dataclass(frozen=True)
class AcceptedCounts:
    """Acknowledged-pulse counts per intensity class: P at nu, P' at nu'."""

    p_low: int
    p_high: int


def statistic_t(counts: AcceptedCounts, coeffs: Coefficients) -> float:
    """T = (c'P - cP') / (bc' - b'c)."""
    num = coeffs.c_prime * counts.p_low - coeffs.c * counts.p_high
    return num / coeffs.discriminant


def reference_t(coeffs: Coefficients, eta: float, n_pulses: int) -> float:
    """Honest-channel expectation of T at transmittance eta.

    t = [c'(1 - e^(-eta*nu)) - c(1 - e^(-eta*nu'))] / (bc' - b'c) * N/2,
    the mean of T when every delivered pulse is acknowledged.
    """
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"transmittance must lie in (0, 1], got {eta!r}")
    num = coeffs.c_prime * (1.0 - coeffs.a_eta(eta)) - coeffs.c * (1.0 - coeffs.a_prime_eta(eta))
    return num / coeffs.discriminant * n_pulses / 2.0


def accepted_counts(
    accepted_indices: Sequence[int] | np.ndarray,
    intensity_labels: Sequence[float] | np.ndarray,
    coeffs: Coefficients,
) -> AcceptedCounts:
    """Classify the acknowledged indices by the sender's private intensity labels."""
    labels = np.asarray(intensity_labels, dtype=float)
    idx = np.asarray(accepted_indices, dtype=np.int64)
    n = labels.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ProtocolViolationError("acknowledged index outside the pulse range")
    if np.unique(idx).size != idx.size:
        raise ProtocolViolationError("acknowledged indices contain duplicates")
    chosen = labels[idx]
    p_low = int(np.count_nonzero(chosen == coeffs.nu))
    p_high = int(np.count_nonzero(chosen == coeffs.nu_prime))
    if p_low + p_high != idx.size:
        raise ProtocolViolationError("intensity labels do not partition into the two classes")
    return AcceptedCounts(p_low=p_low, p_high=p_high)


def algorithm_b(
    accepted_indices: Sequence[int] | np.ndarray,
    intensity_labels: Sequence[float] | np.ndarray,
    coeffs: Coefficients,
    eta: float,
    n_pulses: int,
    delta0: float,
) -> bool:
    """Two-intensity estimation decision: True (accept) iff T >= t - Delta0*N/2.

    The comparison is non-strict so the boundary case accepts; the decision
    is a pure function of the acknowledged set and the parameters.
    """
    if delta0 <= 0:
        raise ParameterError(f"delta0 must be positive, got {delta0!r}")
    counts = accepted_counts(accepted_indices, intensity_labels, coeffs)
    t_obs = statistic_t(counts, coeffs)
    t_ref = reference_t(coeffs, eta, n_pulses)
    return t_obs >= t_ref - delta0 * n_pulses / 2.0


class EstimationAlgorithm(ABC):
    """Sender-side accept/abort test over the un-permuted acknowledged set.

    Implementations see exactly what the sender possesses at the estimation
    step: the acknowledged original indices and the private per-index
    intensity labels.  Photon counts are never available.  The interface puts
    no bound on the number of intensity classes.
    """

    @abstractmethod
    def evaluate(
        self,
        accepted_indices: Sequence[int] | np.ndarray,
        intensity_labels: Sequence[float] | np.ndarray,
    ) -> bool:
        """Return True to accept the acknowledged set, False to abort."""


@dataclass(frozen=True)
class TwoIntensityEstimator(EstimationAlgorithm):
    """The concrete two-intensity test with margin delta0."""

    nu: float
    nu_prime: float
    eta: float
    n_pulses: int
    delta0: float

    def __post_init__(self) -> None:
        if self.delta0 <= 0:
            raise ParameterError(f"delta0 must be positive, got {self.delta0!r}")
        coefficients(self.nu, self.nu_prime)  # validates the intensity pair

    @cached_property
    def coeffs(self) -> Coefficients:
        return coefficients(self.nu, self.nu_prime)

    @cached_property
    def threshold(self) -> float:
        """Acceptance cutoff t - Delta0*N/2 on the statistic T."""
        return reference_t(self.coeffs, self.eta, self.n_pulses) - self.delta0 * self.n_pulses / 2.0

    def evaluate(self, accepted_indices, intensity_labels) -> bool:
        counts = accepted_counts(accepted_indices, intensity_labels, self.coeffs)
        return statistic_t(counts, self.coeffs) >= self.threshold
