"""Closed-form finite-size error budget for the two-intensity instantiation.

All bounds are Hoeffding-and-union-bound exponentials in the pulse count N.
The correctness error covers the two honest abort causes (not enough
delivered pulses; estimation test rejects).  The security error covers the
cheating receiver that acknowledges only multiphoton pulses: a batch-size
factor P_{|I|,K} for whether it can gather K such pulses at all, and an
estimation factor combining the hypergeometric/binomial concentration of the
two-photon population (M, with union-bound multiplicity 32) with the tail of
the three-plus-photon count (the Delta0'' term).

Every epsilon is returned as an :class:`ExpFloat` so magnitudes far below
double-precision underflow keep exact logs.  An unsatisfiable constraint
system yields the trivial budget (epsilon = 1) with flags explaining why.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .estimation import Coefficients
from .numerics import ExpFloat, ONE, ParameterError

__all__ = [
    "SlackParams",
    "ErrorBudget",
    "ConstraintViolation",
    "correctness_bound",
    "delta_prime",
    "delta_double_prime",
    "security_bound",
    "epsilon_ac",
    "batch_size_for",
]


class ConstraintViolation(ParameterError):
    """A slack parameter violates the constraint system; carries the inequality."""


@dataclass(frozen=True)
class SlackParams:
    """Free constants of the error budget.

    delta fixes the batch size through K = ((2 - e^(-eta*nu) - e^(-eta*nu'))/2
    - delta) * N.  delta0 is the estimation margin Delta0.  The four small
    slacks bound the deviations of the two-photon population: delta0_small /
    delta0_small_prime for the hypergeometric ratios, gamma0 / gamma0_prime
    for the per-intensity two-photon counts.
    """

    delta: float
    delta0: float
    delta0_small: float
    delta0_small_prime: float
    gamma0: float
    gamma0_prime: float

    def violations(self, coeffs: Coefficients, eta: float) -> list[str]:
        """Constraint inequalities this slack assignment breaks (empty if valid)."""
        out = []
        for name in ("delta", "delta0", "delta0_small", "delta0_small_prime",
                     "gamma0", "gamma0_prime"):
            if not getattr(self, name) > 0.0:
                out.append(f"{name} > 0")
        delta_cap = (2.0 - coeffs.a_eta(eta) - coeffs.a_prime_eta(eta)) / 2.0
        if not self.delta < delta_cap:
            out.append(f"delta < (2 - a^eta - a'^eta)/2 = {delta_cap:.6g}")
        return out

    def with_delta(self, delta: float) -> "SlackParams":
        return replace(self, delta=delta)


def batch_size_for(coeffs: Coefficients, eta: float, n_pulses: int, delta: float) -> tuple[int, float]:
    """Batch size implied by delta, and the delta the integer K maps back to.

    K = floor(((2 - a^eta - a'^eta)/2 - delta) * N); the returned effective
    delta makes the relation exact so bounds and simulations agree on one K.
    """
    rate = (2.0 - coeffs.a_eta(eta) - coeffs.a_prime_eta(eta)) / 2.0
    if not delta < rate:
        raise ConstraintViolation(f"delta < (2 - a^eta - a'^eta)/2 = {rate:.6g}")
    k = math.floor((rate - delta) * n_pulses)
    return k, rate - k / n_pulses


@dataclass(frozen=True)
class ErrorBudget:
    """Assembled correctness/security error bound and every derived quantity."""

    eps_corr: ExpFloat
    eps_sec: ExpFloat
    eps_ac: ExpFloat
    delta_prime: float
    delta_double_prime: float
    gamma: float
    c_max: float
    constraints_satisfied: bool
    pik_exponential: bool  # False when the batch-size factor fell back to 1
    violated: tuple[str, ...] = ()

    def to_dict(self, coeffs: Coefficients | None = None, eta: float | None = None,
                n_pulses: int | None = None, slack: SlackParams | None = None) -> dict:
        out: dict = {}
        if coeffs is not None:
            out.update(nu=coeffs.nu, nu_prime=coeffs.nu_prime)
        if eta is not None:
            out["eta"] = eta
        if n_pulses is not None:
            out["N"] = n_pulses
        if slack is not None:
            out.update(
                delta=slack.delta,
                Delta0=slack.delta0,
                delta0=slack.delta0_small,
                delta0p=slack.delta0_small_prime,
                gamma0=slack.gamma0,
                gamma0p=slack.gamma0_prime,
            )
        out.update(
            Delta0p=self.delta_prime,
            Delta0pp=self.delta_double_prime,
            Gamma=self.gamma,
            C=self.c_max,
            eps_corr=self.eps_corr.to_dict(),
            eps_sec=self.eps_sec.to_dict(),
            eps_AC=self.eps_ac.to_dict(),
            constraints_satisfied=self.constraints_satisfied,
            pik_branch="exponential" if self.pik_exponential else "one",
            violated=list(self.violated),
        )
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), indent=2)


def correctness_bound(coeffs: Coefficients, eta: float, n_pulses: int,
                      slack: SlackParams) -> ExpFloat:
    """eps_corr = 2 exp(-delta^2 N) + 2 exp(-Delta0^2 (bc'-b'c)^2 / (4C^2) N)."""
    bad = slack.violations(coeffs, eta)
    if bad:
        raise ConstraintViolation("; ".join(bad))
    n = n_pulses
    c_max = max(coeffs.c, coeffs.c_prime)
    ratio = coeffs.discriminant / (2.0 * c_max)
    term_subset = ExpFloat(math.log(2.0) - slack.delta**2 * n)
    term_test = ExpFloat(math.log(2.0) - (slack.delta0 * ratio) ** 2 * n)
    return term_subset + term_test


def delta_prime(coeffs: Coefficients, slack: SlackParams) -> float:
    """Delta0' = [cc'(d0 + d0') + c'g0(1 + d0) + cg0'(1 + d0')] / (bc' - b'c)."""
    d0, d0p = slack.delta0_small, slack.delta0_small_prime
    g0, g0p = slack.gamma0, slack.gamma0_prime
    num = (
        coeffs.c * coeffs.c_prime * (d0 + d0p)
        + coeffs.c_prime * g0 * (1.0 + d0)
        + coeffs.c * g0p * (1.0 + d0p)
    )
    return num / coeffs.discriminant


def delta_double_prime(coeffs: Coefficients, eta: float, delta0: float,
                       delta_prime_val: float) -> float:
    """Remaining margin for the three-plus-photon tail.

    Delta0'' = (1/c')[c'(1 - a^eta) - c(1 - a'^eta) - (Delta0 + Delta0')(bc' - b'c)]
               - (1 - a - b - c).
    A nonpositive value means the constraint system admits no security bound
    at these intensities and margins.
    """
    honest_signal = (
        coeffs.c_prime * (1.0 - coeffs.a_eta(eta))
        - coeffs.c * (1.0 - coeffs.a_prime_eta(eta))
        - (delta0 + delta_prime_val) * coeffs.discriminant
    )
    multi_photon = 1.0 - coeffs.a - coeffs.b - coeffs.c
    return honest_signal / coeffs.c_prime - multi_photon


def _batch_size_factor(coeffs: Coefficients, eta: float, n_pulses: int,
                       delta: float) -> tuple[ExpFloat, float, bool]:
    """P_{|I|,K}: probability factor that a cheater gathers K multiphoton pulses."""
    margin = (
        coeffs.a + coeffs.b + coeffs.a_prime + coeffs.b_prime
        - coeffs.a_eta(eta) - coeffs.a_prime_eta(eta)
    ) / 2.0
    gamma = margin - delta
    if 0.0 < delta < margin:
        return ExpFloat(math.log(2.0) - gamma * gamma * n_pulses), gamma, True
    return ONE, gamma, False


def security_bound(coeffs: Coefficients, eta: float, n_pulses: int, slack: SlackParams,
                   m_union_factor: float = 32.0) -> ExpFloat:
    """eps_sec = P_{|I|,K} (32 M + exp(-Delta0''^2 N)); trivial (1) when Delta0'' <= 0.

    M is the largest of the four concentration exponentials for the
    two-photon population; the factor 32 counts the union over those four
    deviation events (set m_union_factor=1 for the unmultiplied form).
    """
    bad = slack.violations(coeffs, eta)
    if bad:
        raise ConstraintViolation("; ".join(bad))
    dpp = delta_double_prime(coeffs, eta, slack.delta0, delta_prime(coeffs, slack))
    if dpp <= 0.0:
        return ONE
    n = n_pulses
    pik, _, _ = _batch_size_factor(coeffs, eta, n, slack.delta)
    log_m = max(
        -slack.gamma0**2 * n,
        -slack.delta0_small**2 * (coeffs.c - slack.gamma0) * n,
        -slack.gamma0_prime**2 * n,
        -slack.delta0_small_prime**2 * (coeffs.c_prime - slack.gamma0_prime) * n,
    )
    inner = m_union_factor * ExpFloat(log_m) + ExpFloat(-dpp * dpp * n)
    return pik * inner


def epsilon_ac(coeffs: Coefficients, eta: float, n_pulses: int, slack: SlackParams,
               m_union_factor: float = 32.0) -> ErrorBudget:
    """Full budget eps_AC = eps_corr + eps_sec with all derived quantities.

    Never raises: an invalid slack assignment or nonpositive Delta0'' comes
    back as a trivial budget with constraints_satisfied=False.
    """
    dp = delta_prime(coeffs, slack)
    dpp = delta_double_prime(coeffs, eta, slack.delta0, dp)
    pik, gamma, exponential = _batch_size_factor(coeffs, eta, n_pulses, slack.delta)
    c_max = max(coeffs.c, coeffs.c_prime)

    bad = list(slack.violations(coeffs, eta))
    if bad:
        # invalid slack: both components fall back to the trivial bound
        return ErrorBudget(
            eps_corr=ONE, eps_sec=ONE, eps_ac=ONE + ONE,
            delta_prime=dp, delta_double_prime=dpp, gamma=gamma, c_max=c_max,
            constraints_satisfied=False, pik_exponential=exponential,
            violated=tuple(bad + (["Delta0'' > 0"] if dpp <= 0.0 else [])),
        )

    eps_corr = correctness_bound(coeffs, eta, n_pulses, slack)
    eps_sec = security_bound(coeffs, eta, n_pulses, slack, m_union_factor=m_union_factor)
    return ErrorBudget(
        eps_corr=eps_corr,
        eps_sec=eps_sec,
        eps_ac=eps_corr + eps_sec,
        delta_prime=dp,
        delta_double_prime=dpp,
        gamma=gamma,
        c_max=c_max,
        constraints_satisfied=dpp > 0.0,
        pik_exponential=exponential,
        violated=() if dpp > 0.0 else ("Delta0'' > 0",),
    )
