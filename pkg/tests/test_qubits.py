import itertools
import math

import numpy as np
import pytest
from scipy import stats

from wcpbatch.numerics import ParameterError, RngStream
from wcpbatch.qubits import (
    ALL_ELEMENTS,
    IDENTITY,
    PLUS,
    GroupElement,
    PlusState,
    PulseEmission,
    X,
    Z,
    act,
    compose,
    inverse,
    sample_group_element,
    wcp_emit,
)

ALL_STATES = [PlusState(k) for k in range(8)]


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> bool:
    """Unit vectors/matrices representing the same physical object."""
    return abs(abs(np.vdot(a.ravel(), b.ravel())) - np.linalg.norm(a.ravel()) ** 2) < 1e-12


class TestGroupAlgebra:
    def test_required_members(self):
        assert X in ALL_ELEMENTS and Z in ALL_ELEMENTS and IDENTITY in ALL_ELEMENTS
        assert len(set(ALL_ELEMENTS)) == 16

    def test_closure_under_composition(self):
        members = set(ALL_ELEMENTS)
        for g, h in itertools.product(ALL_ELEMENTS, repeat=2):
            assert compose(g, h) in members

    def test_every_element_has_inverse(self):
        for g in ALL_ELEMENTS:
            assert compose(g, inverse(g)) == IDENTITY
            assert compose(inverse(g), g) == IDENTITY

    def test_identity_is_neutral(self):
        for g in ALL_ELEMENTS:
            assert compose(IDENTITY, g) == g
            assert compose(g, IDENTITY) == g

    def test_associativity_exhaustive(self):
        for g, h, k in itertools.product(ALL_ELEMENTS, repeat=3):
            assert compose(compose(g, h), k) == compose(g, compose(h, k))

    def test_x_z_commutation_example(self):
        # X . Z(pi/4) picks up a sign flip on the angle when normalised
        result = compose(X, GroupElement(0, 1))
        assert result == GroupElement(1, 7)
        oracle = X.matrix() @ GroupElement(0, 1).matrix()
        assert equal_up_to_phase(oracle / math.sqrt(2), result.matrix() / math.sqrt(2))

    def test_matrix_oracle_composition(self):
        for g, h in itertools.product(ALL_ELEMENTS, repeat=2):
            product = g.matrix() @ h.matrix()
            symbolic = compose(g, h).matrix()
            # equality up to global phase: |tr(A^dagger B)| = dim
            assert abs(abs(np.trace(product.conj().T @ symbolic)) - 2.0) < 1e-12

    def test_rejects_malformed_elements(self):
        with pytest.raises(ParameterError):
            GroupElement(2, 0)
        with pytest.raises(ParameterError):
            GroupElement(0, 8)


class TestGroupAction:
    def test_identity_action(self):
        assert act(IDENTITY, PLUS) == PLUS

    def test_rotation_wraps_mod_8(self):
        assert act(GroupElement(0, 1), PlusState(7)) == PlusState(0)

    def test_x_negates_angle(self):
        assert act(X, PlusState(1)) == PlusState(7)

    def test_homomorphism_exhaustive(self):
        for g, h in itertools.product(ALL_ELEMENTS, repeat=2):
            gh = compose(g, h)
            for s in ALL_STATES:
                assert act(gh, s) == act(g, act(h, s))

    def test_matrix_oracle_on_states(self):
        for g in ALL_ELEMENTS:
            for s in ALL_STATES:
                transformed = g.matrix() @ s.vector()
                assert equal_up_to_phase(transformed, act(g, s).vector())

    def test_state_validation(self):
        with pytest.raises(ParameterError):
            PlusState(-1)


class TestSampling:
    def test_uniform_over_sixteen_elements(self):
        rng = RngStream(201)
        counts = np.zeros(16, dtype=int)
        index = {g: i for i, g in enumerate(ALL_ELEMENTS)}
        for _ in range(100_000):
            counts[index[sample_group_element(rng)]] += 1
        expected = 100_000 / 16
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < stats.chi2.ppf(0.999, df=15)


class TestWcpEmit:
    def test_zero_intensity_is_vacuum(self):
        e = wcp_emit(X, 0.0, 1.0, malicious=False, rng=RngStream(0))
        assert e.photon_count == 0 and e.states == ()

    def test_honest_payload_carries_prepared_state(self):
        g = GroupElement(0, 3)
        for i in range(200):
            e = wcp_emit(g, 2.0, 1.0, malicious=False, rng=RngStream(202, i))
            assert e.leaked_unitary is None
            assert e.states == (act(g, PLUS),) * e.photon_count

    def test_malicious_multiphoton_leaks_classical_description(self):
        g = GroupElement(1, 5)
        seen_leak = False
        for i in range(200):
            e = wcp_emit(g, 3.0, 0.2, malicious=True, rng=RngStream(203, i))
            if e.photon_count > 1:
                assert e.states is None and e.leaked_unitary == g
                seen_leak = True
            else:
                assert e.states == (act(g, PLUS),) * e.photon_count
        assert seen_leak

    def test_malicious_ignores_transmittance(self):
        # eta thins the honest branch only; the malicious branch draws at full mu
        honest = [wcp_emit(X, 2.0, 0.1, False, RngStream(204, i)).photon_count
                  for i in range(3000)]
        malicious = [wcp_emit(X, 2.0, 0.1, True, RngStream(204, i)).photon_count
                     for i in range(3000)]
        assert abs(np.mean(honest) - 0.2) < 3 * math.sqrt(0.2 / 3000)
        assert abs(np.mean(malicious) - 2.0) < 3 * math.sqrt(2.0 / 3000)

    def test_delivery_frequency_matches_poisson_tail(self):
        # mu = 0.2 through eta = 0.5: Pr[n >= 1] = 1 - e^{-0.1}
        rng = RngStream(205)
        hits = sum(
            wcp_emit(IDENTITY, 0.2, 0.5, malicious=False, rng=rng).photon_count >= 1
            for _ in range(1_000_000)
        )
        p = 1.0 - math.exp(-0.1)
        assert abs(hits / 1e6 - p) < 3 * math.sqrt(p * (1 - p) / 1e6)

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            wcp_emit(X, -1.0, 0.5, False, RngStream(0))
        with pytest.raises(ParameterError):
            wcp_emit(X, 1.0, 1.5, False, RngStream(0))

    def test_payload_shape_invariants(self):
        with pytest.raises(ParameterError):
            PulseEmission(photon_count=2, states=None, leaked_unitary=None)
        with pytest.raises(ParameterError):
            PulseEmission(photon_count=1, states=None, leaked_unitary=X)
        with pytest.raises(ParameterError):
            PulseEmission(photon_count=2, states=(PLUS,), leaked_unitary=None)
