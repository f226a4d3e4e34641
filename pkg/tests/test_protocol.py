import json

import numpy as np
import pytest
from scipy import stats

from wcpbatch.estimation import EstimationAlgorithm, ProtocolViolationError
from wcpbatch.numerics import ParameterError, RngStream
from wcpbatch.protocol import (
    FirstKReceiver,
    HonestReceiver,
    PnsReceiver,
    ProtocolParams,
    ReceiverStrategy,
    Transcript,
    ideal_batch,
    run_honest,
    run_with_receiver,
)
from wcpbatch.qubits import ALL_ELEMENTS, IDENTITY, GroupElement, PlusState, sample_group_element


class AlwaysAccept(EstimationAlgorithm):
    def evaluate(self, accepted_indices, intensity_labels) -> bool:
        return True


def bright_params(n=20, k=10, delta0=5.0):
    """High intensities at unit transmittance: aborts are astronomically rare."""
    return ProtocolParams.two_intensity(nu=10.0, nu_prime=20.0, eta=1.0,
                                        n_pulses=n, batch_size=k, delta0=delta0)


def random_targets(k, rng):
    return [sample_group_element(rng) for _ in range(k)]


class TestIdealBatch:
    def test_identity_targets(self):
        out = ideal_batch([IDENTITY] * 4)
        assert out.states == (PlusState(0),) * 4

    def test_rotation_ladder(self):
        targets = [GroupElement(0, k) for k in range(8)]
        assert ideal_batch(targets).states == tuple(PlusState(k) for k in range(8))


class TestCorrectnessIdentity:
    def test_output_equals_ideal_batch_exactly(self):
        params = bright_params()
        for i in range(300):
            rng = RngStream(401, i)
            targets = random_targets(params.batch_size, rng.child(99))
            tr = run_honest(params, targets, rng)
            assert not tr.aborted
            assert tr.output == list(ideal_batch(targets).states)

    def test_zero_intensity_always_aborts(self):
        params = ProtocolParams(n_pulses=10, batch_size=2, transmittance=1.0,
                                intensities=(0.0,) * 10, estimator=AlwaysAccept())
        for i in range(20):
            tr = run_honest(params, [IDENTITY] * 2, RngStream(402, i))
            assert tr.ack is None and tr.aborted

    def test_full_batch_at_low_transmittance_aborts(self):
        # K = N demands every pulse deliver a photon
        params = ProtocolParams.two_intensity(0.1, 0.2, 0.1, 50, 50, delta0=1.0)
        for i in range(50):
            tr = run_honest(params, [IDENTITY] * 50, RngStream(403, i))
            assert tr.aborted


class TestReceiverSwapping:
    def test_honest_adapter_reproduces_run_honest(self):
        params = bright_params()
        targets = random_targets(10, RngStream(404, 99))
        a = run_honest(params, targets, RngStream(404, 0))
        b = run_with_receiver(params, targets, HonestReceiver(), RngStream(404, 0))
        assert a.to_jsonl() == b.to_jsonl()

    def test_first_k_receiver_still_gets_exact_output(self):
        # corrections work for any size-K acknowledgement of stored photons
        params = bright_params()
        for i in range(50):
            rng = RngStream(405, i)
            targets = random_targets(10, rng.child(99))
            tr = run_with_receiver(params, targets, FirstKReceiver(), rng)
            assert not tr.aborted
            assert tr.output == list(ideal_batch(targets).states)

    def test_sender_is_oblivious_beyond_the_acknowledgement(self):
        params = bright_params()
        targets = random_targets(10, RngStream(406, 99))
        honest = run_with_receiver(params, targets, HonestReceiver(), RngStream(406, 0))

        class Replay(ReceiverStrategy):
            malicious = False

            def __init__(self, ack):
                self._ack = ack

            def acknowledge(self, emissions, batch_size, rng):
                return list(self._ack)

        replayed = run_with_receiver(params, targets, Replay(honest.ack), RngStream(406, 0))
        assert replayed.emissions == honest.emissions
        assert replayed.corrections == honest.corrections

    def test_malformed_acknowledgements_are_violations(self):
        params = bright_params()
        targets = [IDENTITY] * 10

        class WrongSize(ReceiverStrategy):
            def acknowledge(self, emissions, batch_size, rng):
                return list(range(batch_size - 1))

        class OutOfRange(ReceiverStrategy):
            def acknowledge(self, emissions, batch_size, rng):
                return list(range(batch_size - 1)) + [len(emissions)]

        class Duplicates(ReceiverStrategy):
            def acknowledge(self, emissions, batch_size, rng):
                return [0] * batch_size

        for receiver in (WrongSize(), OutOfRange(), Duplicates()):
            with pytest.raises(ProtocolViolationError):
                run_with_receiver(params, targets, receiver, RngStream(407, 0))

    def test_pns_receiver_acks_multiphoton_rounds_only(self):
        params = ProtocolParams.two_intensity(0.5, 1.5, 0.9, 400, 40, delta0=5.0)
        seen_run = False
        for i in range(30):
            tr = run_with_receiver(params, [IDENTITY] * 40, PnsReceiver(), RngStream(408, i))
            leaks = sum(e.leaked_unitary is not None for e in tr.emissions)
            assert leaks > 0  # malicious branch leaks multiphoton descriptions
            if tr.ack is not None:
                seen_run = True
                assert all(tr.emissions[j].photon_count >= 2 for j in tr.ack)
        assert seen_run

    def test_pns_aborts_without_enough_multiphoton_rounds(self):
        params = ProtocolParams.two_intensity(0.01, 0.02, 1.0, 40, 20, delta0=5.0)
        for i in range(20):
            tr = run_with_receiver(params, [IDENTITY] * 20, PnsReceiver(), RngStream(409, i))
            assert tr.ack is None


class TestBlindness:
    def test_emitted_unitaries_are_uniform_per_round(self):
        # fixed targets; the marginal of each round's secret covers all 16
        params = ProtocolParams.two_intensity(0.1, 0.2, 0.5, 4, 1, delta0=5.0)
        targets = [GroupElement(1, 3)]
        index = {g: i for i, g in enumerate(ALL_ELEMENTS)}
        counts = np.zeros((4, 16), dtype=int)
        runs = 10_000
        for i in range(runs):
            tr = run_honest(params, targets, RngStream(410, i))
            for pos, g in enumerate(tr.sender_state.secrets):
                counts[pos, index[g]] += 1
        critical = stats.chi2.ppf(0.999, df=15)
        for pos in range(4):
            chi2 = float(((counts[pos] - runs / 16) ** 2 / (runs / 16)).sum())
            assert chi2 < critical


class TestTranscripts:
    def test_jsonl_round_trip_completed_run(self):
        params = bright_params()
        targets = random_targets(10, RngStream(411, 99))
        tr = run_honest(params, targets, RngStream(411, 0))
        text = tr.to_jsonl()
        back = Transcript.from_jsonl(text)
        assert back.emissions == tr.emissions
        assert back.ack == tr.ack
        assert back.corrections == tr.corrections
        assert back.output == tr.output
        assert back.to_jsonl() == text

    def test_jsonl_round_trip_aborted_run(self):
        params = ProtocolParams.two_intensity(0.1, 0.2, 0.1, 50, 50, delta0=1.0)
        tr = run_honest(params, [IDENTITY] * 50, RngStream(412, 0))
        back = Transcript.from_jsonl(tr.to_jsonl())
        assert back.ack is None and back.aborted

    def test_jsonl_round_trip_with_leaks(self):
        params = ProtocolParams.two_intensity(0.5, 1.5, 0.9, 100, 10, delta0=5.0)
        tr = run_with_receiver(params, [IDENTITY] * 10, PnsReceiver(), RngStream(413, 7))
        back = Transcript.from_jsonl(tr.to_jsonl())
        assert back.emissions == tr.emissions

    def test_messages_carry_no_sender_secrets(self):
        params = bright_params()
        targets = random_targets(10, RngStream(414, 99))
        tr = run_honest(params, targets, RngStream(414, 0))
        kinds = [json.loads(line)["message"] for line in tr.to_jsonl().splitlines()]
        assert set(kinds) == {"emission", "ack", "corrections", "output"}
        for line in tr.to_jsonl().splitlines():
            rec = json.loads(line)
            assert "permutation" not in rec and "secrets" not in rec

    def test_abort_truncates_message_order(self):
        params = ProtocolParams.two_intensity(0.1, 0.2, 0.1, 50, 50, delta0=1.0)
        tr = run_honest(params, [IDENTITY] * 50, RngStream(415, 0))
        kinds = [json.loads(line)["message"] for line in tr.to_jsonl().splitlines()]
        assert kinds[-1] == "ack"
        assert "corrections" not in kinds and "output" not in kinds


class TestAbortBudget:
    def test_honest_abort_rate_within_analytic_ceiling(self):
        from wcpbatch.bounds import SlackParams, batch_size_for, epsilon_ac
        from wcpbatch.estimation import coefficients
        from wcpbatch.numerics import wilson_interval

        co = coefficients(0.1, 0.2)
        k, delta_eff = batch_size_for(co, 0.5, 2000, 0.01)
        params = ProtocolParams.two_intensity(0.1, 0.2, 0.5, 2000, k, delta0=0.01)
        aborts = sum(
            run_honest(params, [IDENTITY] * k, RngStream(417, i)).aborted
            for i in range(1000)
        )
        slack = SlackParams(delta_eff, 0.01, 1e-3, 1e-3, 1e-3, 1e-3)
        bound = epsilon_ac(co, 0.5, 2000, slack).eps_corr.value
        low, _ = wilson_interval(aborts, 1000, z=3.0)
        assert low <= bound


class TestDeterminism:
    def test_same_stream_reproduces_transcript(self):
        params = bright_params()
        targets = random_targets(10, RngStream(416, 99))
        a = run_honest(params, targets, RngStream(416, 5))
        b = run_honest(params, targets, RngStream(416, 5))
        assert a.to_jsonl() == b.to_jsonl()


class TestParameterChecks:
    def test_run_requires_estimator_and_positive_batch(self):
        params = ProtocolParams.two_intensity(0.1, 0.2, 0.5, 10, 2)
        with pytest.raises(ParameterError, match="estimator"):
            run_honest(params, [IDENTITY] * 2, RngStream(0))
        zero = ProtocolParams.two_intensity(0.1, 0.2, 0.5, 10, 0, delta0=1.0)
        with pytest.raises(ParameterError, match="batch_size"):
            run_honest(zero, [], RngStream(0))

    def test_target_count_must_match_batch(self):
        params = bright_params()
        with pytest.raises(ParameterError):
            run_honest(params, [IDENTITY] * 9, RngStream(0))

    def test_two_intensity_validation(self):
        with pytest.raises(ParameterError):
            ProtocolParams.two_intensity(0.2, 0.1, 0.5, 10, 2)
        with pytest.raises(ParameterError):
            ProtocolParams.two_intensity(0.1, 0.2, 0.5, 11, 2)
        with pytest.raises(ParameterError):
            ProtocolParams(n_pulses=4, batch_size=5, transmittance=0.5,
                           intensities=(0.1, 0.1, 0.2, 0.2))
