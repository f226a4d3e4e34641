"""Exact symbolic model of the pulse payloads.

The payload states are |+_theta> with theta a multiple of pi/4, acted on by
the order-16 group generated by X and Z(pi/4) (the smallest group containing
the bit/phase flips of the quantum one-time pad together with the eight
equatorial preparations).  Global phase is quotiented out, which makes every
group and action identity exactly testable against 2x2 matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .numerics import ParameterError, RngStream, poisson_sample

__all__ = [
    "GroupElement",
    "PlusState",
    "PulseEmission",
    "IDENTITY",
    "X",
    "Z",
    "ALL_ELEMENTS",
    "PLUS",
    "compose",
    "inverse",
    "act",
    "sample_group_element",
    "emission_from_count",
    "wcp_emit",
]


@dataclass(frozen=True, slots=True)
class GroupElement:
    """Element Z(angle_index * pi/4) . X^x_bit of the payload group."""

    x_bit: int
    angle_index: int

    def __post_init__(self) -> None:
        if self.x_bit not in (0, 1):
            raise ParameterError(f"x_bit must be 0 or 1, got {self.x_bit!r}")
        if not 0 <= self.angle_index < 8:
            raise ParameterError(f"angle_index must lie in [0, 8), got {self.angle_index!r}")

    def matrix(self) -> np.ndarray:
        """2x2 unitary (one representative of the phase class)."""
        z = np.diag([1.0, np.exp(1j * self.angle_index * np.pi / 4)])
        x = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        return z @ x if self.x_bit else z


@dataclass(frozen=True, slots=True)
class PlusState:
    """State |+_theta> with theta = angle_index * pi/4; the reference state is index 0."""

    angle_index: int

    def __post_init__(self) -> None:
        if not 0 <= self.angle_index < 8:
            raise ParameterError(f"angle_index must lie in [0, 8), got {self.angle_index!r}")

    def vector(self) -> np.ndarray:
        theta = self.angle_index * np.pi / 4
        return np.array([1.0, np.exp(1j * theta)], dtype=complex) / np.sqrt(2)


IDENTITY = GroupElement(0, 0)
X = GroupElement(1, 0)
Z = GroupElement(0, 4)
ALL_ELEMENTS: tuple[GroupElement, ...] = tuple(
    GroupElement(x, k) for x, k in itertools.product((0, 1), range(8))
)
PLUS = PlusState(0)


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    """Group product g.h (h acts first), via X.Z(theta) = Z(-theta).X."""
    sign = -1 if g.x_bit else 1
    return GroupElement(g.x_bit ^ h.x_bit, (g.angle_index + sign * h.angle_index) % 8)


def inverse(g: GroupElement) -> GroupElement:
    # Reflections (x_bit = 1) are involutions; rotations invert their angle.
    if g.x_bit:
        return g
    return GroupElement(0, (-g.angle_index) % 8)


def act(g: GroupElement, s: PlusState) -> PlusState:
    """Apply g to |+_theta>: X negates the angle, Z(k*pi/4) then adds k."""
    sign = -1 if g.x_bit else 1
    return PlusState((sign * s.angle_index + g.angle_index) % 8)


def sample_group_element(rng: RngStream) -> GroupElement:
    """Uniform draw from the 16 group elements (the Haar measure here)."""
    return ALL_ELEMENTS[rng.integer(16)]


@dataclass(frozen=True, slots=True)
class PulseEmission:
    """One pulse as seen at the receiving end of the WCP source model.

    Honest channel (`states` present): the Poisson(mu*eta)-many photons all
    carry the same prepared state.  Malicious channel: losses are removed,
    single photons still arrive as states, and any multiphoton pulse leaks
    its photon count together with the classical description of the prepared
    unitary (`leaked_unitary`).
    """

    photon_count: int
    states: tuple[PlusState, ...] | None
    leaked_unitary: GroupElement | None = None

    def __post_init__(self) -> None:
        if self.photon_count < 0:
            raise ParameterError("photon_count must be nonnegative")
        if (self.states is None) == (self.leaked_unitary is None):
            raise ParameterError("exactly one of states / leaked_unitary must be set")
        if self.states is not None and len(self.states) != self.photon_count:
            raise ParameterError("states payload must carry one entry per photon")
        if self.leaked_unitary is not None and self.photon_count <= 1:
            raise ParameterError("classical leak only occurs for multiphoton pulses")


def emission_from_count(g: GroupElement, n: int, malicious: bool) -> PulseEmission:
    """Package an n-photon pulse prepared as g applied to the reference state."""
    if malicious and n > 1:
        return PulseEmission(photon_count=n, states=None, leaked_unitary=g)
    return PulseEmission(photon_count=n, states=(act(g, PLUS),) * n)


def wcp_emit(
    g: GroupElement,
    mu: float,
    eta: float,
    malicious: bool,
    rng: RngStream,
) -> PulseEmission:
    """Emit one weak coherent pulse prepared as g applied to the reference state.

    Honest receivers see a channel of transmittance eta, thinning the photon
    number to Poisson(mu*eta).  A malicious receiver replaces the channel
    (full Poisson(mu)) and reads multiphoton pulses classically.
    """
    if mu < 0:
        raise ParameterError(f"intensity must be nonnegative, got {mu!r}")
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"transmittance must lie in [0, 1], got {eta!r}")
    n = poisson_sample(mu if malicious else mu * eta, rng)
    return emission_from_count(g, n, malicious)
