"""Executable state machines for the batch-preparation protocol.

One run is four procedures: the sender permutes its intensity schedule and
emits N pulses each prepared with a fresh secret unitary; the receiver
acknowledges a size-K subset of the non-vacuum rounds (or aborts); the
sender un-permutes the acknowledged indices, runs the estimation algorithm,
and on acceptance sends the relabeling permutation together with correction
unitaries; the receiver applies the corrections so that output slot j holds
the j-th target state.

The sender/resource side is one fixed code path taking any
:class:`ReceiverStrategy`; the honest receiver and the photon-number-
splitting attacker are provided.  The ideal batch output doubles as the
correctness oracle: a non-aborting honest run must reproduce it exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimation import EstimationAlgorithm, ProtocolViolationError, TwoIntensityEstimator
from .numerics import ParameterError, RngStream, poisson_counts
from .qubits import (
    PLUS,
    GroupElement,
    PlusState,
    PulseEmission,
    act,
    compose,
    emission_from_count,
    inverse,
    sample_group_element,
)

__all__ = [
    "ProtocolParams",
    "SenderState",
    "Transcript",
    "IdealBatchOutput",
    "ReceiverStrategy",
    "HonestReceiver",
    "FirstKReceiver",
    "PnsReceiver",
    "run_honest",
    "run_with_receiver",
    "ideal_batch",
]


@dataclass(frozen=True)
class ProtocolParams:
    """Public protocol constants.

    `intensities` lists the N pulse intensities before permutation; in the
    two-intensity instantiation exactly half are nu and half nu'.  The
    estimation algorithm is the sender's acceptance test; protocol runs
    require it, while games may supply their own.  batch_size = 0 is allowed
    only so the degenerate game edge case is expressible; runs reject it.
    """

    n_pulses: int
    batch_size: int
    transmittance: float
    intensities: tuple[float, ...]
    estimator: EstimationAlgorithm | None = None

    def __post_init__(self) -> None:
        if self.n_pulses < 1:
            raise ParameterError("n_pulses must be positive")
        if not 0 <= self.batch_size <= self.n_pulses:
            raise ParameterError("batch_size must lie in [0, n_pulses]")
        if not 0.0 <= self.transmittance <= 1.0:
            raise ParameterError("transmittance must lie in [0, 1]")
        if len(self.intensities) != self.n_pulses:
            raise ParameterError("intensities must list one value per pulse")
        if any(mu < 0 for mu in self.intensities):
            raise ParameterError("intensities must be nonnegative")

    @classmethod
    def two_intensity(
        cls,
        nu: float,
        nu_prime: float,
        eta: float,
        n_pulses: int,
        batch_size: int,
        delta0: float | None = None,
    ) -> "ProtocolParams":
        """Even nu/nu' split over an even number of pulses, with the standard test."""
        if n_pulses % 2:
            raise ParameterError("two-intensity runs need an even number of pulses")
        if not 0.0 < nu < nu_prime:
            raise ParameterError("intensities must satisfy 0 < nu < nu_prime")
        half = n_pulses // 2
        estimator = None
        if delta0 is not None:
            estimator = TwoIntensityEstimator(
                nu=nu, nu_prime=nu_prime, eta=eta, n_pulses=n_pulses, delta0=delta0
            )
        return cls(
            n_pulses=n_pulses,
            batch_size=batch_size,
            transmittance=eta,
            intensities=(nu,) * half + (nu_prime,) * half,
            estimator=estimator,
        )

    @property
    def intensity_array(self) -> np.ndarray:
        return np.asarray(self.intensities)

    def two_intensity_values(self) -> tuple[float, float]:
        values = sorted(set(self.intensities))
        if len(values) != 2:
            raise ParameterError("params do not describe a two-intensity schedule")
        nu, nu_prime = values
        half = self.n_pulses // 2
        if self.intensities.count(nu) != half or self.n_pulses % 2:
            raise ParameterError("two-intensity schedule must split the pulses evenly")
        return nu, nu_prime


@dataclass(eq=False)
class SenderState:
    """Sender secrets for one run; never serialized with the transcript.

    The secrets reach the receiver only through the correction unitaries
    target . secret^{-1}.
    """

    permutation: np.ndarray
    secrets: tuple[GroupElement, ...]
    targets: tuple[GroupElement, ...]
    relabeling: np.ndarray | None = None


@dataclass(eq=False)
class Transcript:
    """Classical message history of one run; any abort ends the exchange."""

    emissions: list[PulseEmission]
    ack: list[int] | None = None
    corrections: tuple[list[int], list[GroupElement]] | None = None
    output: list[PlusState | None] | None = None
    sender_state: SenderState | None = field(default=None, repr=False)

    @property
    def aborted(self) -> bool:
        return self.output is None

    def to_jsonl(self) -> str:
        """One JSON message per line, in protocol order, stopping at any abort."""
        lines = []
        for i, e in enumerate(self.emissions):
            rec: dict = {"message": "emission", "index": i, "photon_count": e.photon_count}
            if e.leaked_unitary is not None:
                rec["leaked_unitary"] = {
                    "x_bit": e.leaked_unitary.x_bit,
                    "angle_index": e.leaked_unitary.angle_index,
                }
            else:
                rec["state_angles"] = [s.angle_index for s in e.states]
            lines.append(json.dumps(rec))
        if self.ack is None:
            lines.append(json.dumps({"message": "ack", "abort": True}))
            return "\n".join(lines) + "\n"
        lines.append(json.dumps({"message": "ack", "abort": False, "indices": list(self.ack)}))
        if self.corrections is None:
            lines.append(json.dumps({"message": "corrections", "abort": True}))
            return "\n".join(lines) + "\n"
        sigma, unitaries = self.corrections
        lines.append(
            json.dumps(
                {
                    "message": "corrections",
                    "abort": False,
                    "sigma": list(sigma),
                    "unitaries": [
                        {"x_bit": g.x_bit, "angle_index": g.angle_index} for g in unitaries
                    ],
                }
            )
        )
        if self.output is None:
            lines.append(json.dumps({"message": "output", "abort": True}))
        else:
            lines.append(
                json.dumps(
                    {
                        "message": "output",
                        "abort": False,
                        "state_angles": [
                            None if s is None else s.angle_index for s in self.output
                        ],
                    }
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        emissions: list[PulseEmission] = []
        ack = corrections = output = None
        for line in text.splitlines():
            rec = json.loads(line)
            kind = rec["message"]
            if kind == "emission":
                if "leaked_unitary" in rec:
                    leak = rec["leaked_unitary"]
                    emissions.append(
                        PulseEmission(
                            photon_count=rec["photon_count"],
                            states=None,
                            leaked_unitary=GroupElement(leak["x_bit"], leak["angle_index"]),
                        )
                    )
                else:
                    emissions.append(
                        PulseEmission(
                            photon_count=rec["photon_count"],
                            states=tuple(PlusState(k) for k in rec["state_angles"]),
                        )
                    )
            elif kind == "ack" and not rec["abort"]:
                ack = list(rec["indices"])
            elif kind == "corrections" and not rec["abort"]:
                corrections = (
                    list(rec["sigma"]),
                    [GroupElement(u["x_bit"], u["angle_index"]) for u in rec["unitaries"]],
                )
            elif kind == "output" and not rec["abort"]:
                output = [None if k is None else PlusState(k) for k in rec["state_angles"]]
        return cls(emissions=emissions, ack=ack, corrections=corrections, output=output)


@dataclass(frozen=True)
class IdealBatchOutput:
    """What the ideal batch resource hands the receiver: target j applied to the reference state."""

    states: tuple[PlusState, ...]


def ideal_batch(targets: Sequence[GroupElement]) -> IdealBatchOutput:
    return IdealBatchOutput(states=tuple(act(g, PLUS) for g in targets))


class ReceiverStrategy:
    """Receiver side of a run.

    `malicious` is the flag handed to the pulse source: honest receivers see
    the lossy channel, malicious ones the lossless channel with classical
    multiphoton leaks.  `acknowledge` returns the acked round indices (any
    order; size must be the batch size) or None to abort.  `collect` extracts
    the stored state per acked round, and `finish` turns corrections into the
    final output; the defaults follow the protocol honestly.
    """

    malicious: bool = False

    def acknowledge(
        self, emissions: Sequence[PulseEmission], batch_size: int, rng: RngStream
    ) -> list[int] | None:
        raise NotImplementedError

    def collect(
        self, emissions: Sequence[PulseEmission], acked: Sequence[int]
    ) -> list[PlusState | None]:
        kept = []
        for i in acked:
            e = emissions[i]
            if e.states:
                kept.append(e.states[0])  # extra photons of a stored pulse go unread
            elif e.leaked_unitary is not None:
                kept.append(act(e.leaked_unitary, PLUS))  # leak fully determines the state
            else:
                kept.append(None)
        return kept

    def finish(
        self,
        kept: list[PlusState | None],
        sigma: Sequence[int],
        corrections: Sequence[GroupElement],
    ) -> list[PlusState | None] | None:
        corrected = [
            None if s is None else act(u, s) for u, s in zip(corrections, kept)
        ]
        sigma_inv = np.argsort(np.asarray(sigma))
        return [corrected[j] for j in sigma_inv]


class HonestReceiver(ReceiverStrategy):
    """Keeps one photon from a uniform size-K subset of the non-vacuum rounds."""

    malicious = False

    def acknowledge(self, emissions, batch_size, rng):
        nonempty = [i for i, e in enumerate(emissions) if e.photon_count >= 1]
        if len(nonempty) < batch_size:
            return None
        chosen = rng.subset(np.asarray(nonempty), batch_size)
        return sorted(int(i) for i in chosen)


class FirstKReceiver(ReceiverStrategy):
    """Acks the first K non-vacuum rounds; used to probe sender obliviousness."""

    malicious = False

    def acknowledge(self, emissions, batch_size, rng):
        nonempty = [i for i, e in enumerate(emissions) if e.photon_count >= 1]
        if len(nonempty) < batch_size:
            return None
        return nonempty[:batch_size]


class PnsReceiver(ReceiverStrategy):
    """Photon-number-splitting attack: lossless channel, multiphoton acks only.

    Fills the batch from the highest photon number downward, breaking the
    boundary level uniformly at random, and aborts when fewer than K
    multiphoton rounds arrived.  Mirrors the greedy census adversary of the
    security game level by level.
    """

    malicious = True

    def acknowledge(self, emissions, batch_size, rng):
        counts = np.array([e.photon_count for e in emissions])
        levels = np.sort(np.unique(counts[counts >= 2]))[::-1]
        picked: list[int] = []
        remaining = batch_size
        for n in levels:
            pool = np.flatnonzero(counts == n)
            if len(pool) <= remaining:
                picked.extend(int(i) for i in pool)
                remaining -= len(pool)
            else:
                picked.extend(int(i) for i in rng.subset(pool, remaining))
                remaining = 0
            if remaining == 0:
                break
        if remaining > 0:
            return None
        return sorted(picked)


def _emit_pulses(
    secrets: Sequence[GroupElement],
    means: np.ndarray,
    eta: float,
    malicious: bool,
    rng: RngStream,
) -> list[PulseEmission]:
    """All N source calls for one run; photon counts drawn per intensity class."""
    counts = np.empty(len(means), dtype=np.int64)
    for j, mu in enumerate(np.unique(means)):
        mask = means == mu
        mean = float(mu) if malicious else float(mu) * eta
        counts[mask] = poisson_counts(mean, int(mask.sum()), rng.child(j))
    return [emission_from_count(g, int(n), malicious) for g, n in zip(secrets, counts)]


def run_with_receiver(
    params: ProtocolParams,
    targets: Sequence[GroupElement],
    receiver: ReceiverStrategy,
    rng: RngStream,
) -> Transcript:
    """Execute one run; the sender/resource code path is receiver-independent.

    Sender, source, and receiver draw from disjoint sub-streams, so two runs
    with the same stream and receivers that produce the same acknowledgement
    yield identical sender messages.  A malformed acknowledgement (wrong
    size, out of range, duplicates) raises ProtocolViolationError; modelled
    aborts terminate the transcript instead.
    """
    if params.batch_size < 1:
        raise ParameterError("protocol runs need batch_size >= 1")
    if params.estimator is None:
        raise ParameterError("protocol runs need params.estimator")
    if len(targets) != params.batch_size:
        raise ParameterError("need one target unitary per batch slot")

    sender_rng, resource_rng, receiver_rng = rng.child(0), rng.child(1), rng.child(2)
    n, k = params.n_pulses, params.batch_size

    # Sender - sending WCPs: round i carries intensity slot pi[i].
    pi = sender_rng.permutation(n)
    secrets = tuple(sample_group_element(sender_rng) for _ in range(n))
    means = params.intensity_array[pi]
    emissions = _emit_pulses(secrets, means, params.transmittance, receiver.malicious, resource_rng)
    state = SenderState(permutation=pi, secrets=secrets, targets=tuple(targets))

    # Receiver - acknowledgement.
    ack = receiver.acknowledge(emissions, k, receiver_rng)
    if ack is None:
        return Transcript(emissions=emissions, sender_state=state)
    ack = [int(i) for i in ack]
    if len(ack) != k:
        raise ProtocolViolationError(f"acknowledgement must have size {k}, got {len(ack)}")
    if len(set(ack)) != k or min(ack) < 0 or max(ack) >= n:
        raise ProtocolViolationError("acknowledged indices must be distinct rounds")
    ack_sorted = sorted(ack)  # relabeling 1..K follows ascending round order

    # Sender - estimation on the un-permuted indices (original intensity slots).
    accepted_original = pi[np.asarray(ack_sorted)]
    accepted = params.estimator.evaluate(accepted_original, params.intensity_array)
    if not accepted:
        return Transcript(emissions=emissions, ack=ack_sorted, sender_state=state)

    # Sender - corrections: slot j receives target sigma(j) over secret j.
    sigma = sender_rng.permutation(k)
    state.relabeling = sigma
    utilde = [
        compose(targets[int(sigma[j])], inverse(secrets[ack_sorted[j]])) for j in range(k)
    ]

    # Receiver - corrections and inverse relabeling.
    kept = receiver.collect(emissions, ack_sorted)
    output = receiver.finish(kept, sigma, utilde)
    return Transcript(
        emissions=emissions,
        ack=ack_sorted,
        corrections=([int(s) for s in sigma], utilde),
        output=output,
        sender_state=state,
    )


def run_honest(
    params: ProtocolParams, targets: Sequence[GroupElement], rng: RngStream
) -> Transcript:
    """One run with the honest receiver (same code path as run_with_receiver)."""
    return run_with_receiver(params, targets, HonestReceiver(), rng)
