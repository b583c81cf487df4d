"""Simulator kernel tests: gate semantics, adjoints, controls, sampling."""

import math

import numpy as np
import pytest

from spq.statevector import (
    Gate,
    OperatorSequence,
    SimulationBudgetError,
    StateVector,
    ancilla_phase_flip,
    apply,
    apply_controlled_sequence,
    apply_sequence,
    ccry,
    cphase,
    cx,
    dense,
    hadamard,
    marginal_probability,
    measure_register,
    partial_swap,
    pauli_x,
    phase,
    reflect_zero,
    register_distribution,
    ry,
    sample_register,
    sequence_to_matrix,
    swap_gates,
)


def random_state(n, seed=0):
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    amps /= np.linalg.norm(amps)
    return StateVector(n, amps)


def random_sequence(n, n_gates, seed=0):
    rng = np.random.default_rng(seed)
    gates = []
    for _ in range(n_gates):
        kind = rng.integers(0, 7)
        q = int(rng.integers(0, n))
        ang = float(rng.uniform(-np.pi, np.pi))
        if kind == 0:
            gates.append(hadamard(q))
        elif kind == 1:
            gates.append(pauli_x(q))
        elif kind == 2:
            gates.append(ry(q, ang))
        elif kind == 3:
            gates.append(phase(q, ang))
        elif kind == 4 and n >= 2:
            r = int(rng.integers(0, n - 1))
            r += r >= q
            gates.append(partial_swap(q, r, ang))
        elif kind == 5 and n >= 2:
            r = int(rng.integers(0, n - 1))
            r += r >= q
            gates.append(cphase(r, q, ang))
        else:
            gates.append(reflect_zero(tuple(range(n))))
    return OperatorSequence(tuple(gates))


def hermitian_exponential(h, scale):
    """exp(1j * scale * h) for Hermitian h, by eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return v @ np.diag(np.exp(1j * scale * w)) @ v.conj().T


class TestGateSemantics:
    def test_hadamard_on_zero(self):
        sv = apply(StateVector(1), hadamard(0))
        assert np.allclose(sv.amplitudes, [1 / math.sqrt(2), 1 / math.sqrt(2)])

    def test_partial_swap_block_matches_exponential(self):
        # oracle: exponentiate (X X + Y Y) directly
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        y = np.array([[0, -1j], [1j, 0]], dtype=complex)
        h = np.kron(x, x) + np.kron(y, y)
        for beta in (0.3, np.pi / 2, -1.2):
            expected = hermitian_exponential(h, -beta / 2)
            got = sequence_to_matrix(OperatorSequence((partial_swap(0, 1, beta),)), 2)
            assert np.abs(got - expected).max() < 1e-12

    def test_partial_swap_half_pi_maps_01_to_minus_i_10(self):
        sv = StateVector.basis_state(2, 0b01)
        apply(sv, partial_swap(0, 1, np.pi / 2))
        expected = np.zeros(4, dtype=complex)
        expected[0b10] = -1j
        assert np.abs(sv.amplitudes - expected).max() < 1e-12

    def test_partial_swap_preserves_00_and_11(self):
        for idx in (0b00, 0b11):
            sv = StateVector.basis_state(2, idx)
            apply(sv, partial_swap(0, 1, 0.7))
            assert abs(sv.amplitudes[idx] - 1.0) < 1e-12

    def test_reflect_zero_flips_only_all_zeros(self):
        amps = np.zeros(4, dtype=complex)
        amps[0b00] = amps[0b01] = 1 / math.sqrt(2)
        sv = StateVector(2, amps)
        apply(sv, reflect_zero((0, 1)))
        assert abs(sv.amplitudes[0b00] + 1 / math.sqrt(2)) < 1e-12
        assert abs(sv.amplitudes[0b01] - 1 / math.sqrt(2)) < 1e-12

    def test_phase_convention_positive_exponent(self):
        sv = StateVector(1, np.array([0, 1], dtype=complex))
        apply(sv, phase(0, 0.5))
        assert abs(sv.amplitudes[1] - np.exp(0.5j)) < 1e-12

    def test_ancilla_phase_flip_hits_zero_branch(self):
        amps = np.ones(2, dtype=complex) / math.sqrt(2)
        sv = StateVector(1, amps)
        apply(sv, ancilla_phase_flip(0))
        assert abs(sv.amplitudes[0] + 1 / math.sqrt(2)) < 1e-12
        assert abs(sv.amplitudes[1] - 1 / math.sqrt(2)) < 1e-12

    def test_dense_matches_explicit_operator_on_scrambled_targets(self):
        rng = np.random.default_rng(5)
        u, _ = np.linalg.qr(rng.standard_normal((4, 4))
                            + 1j * rng.standard_normal((4, 4)))
        sv1 = random_state(4, seed=3)
        sv2 = sv1.copy()
        apply(sv1, dense((2, 0), u))          # non-contiguous target order
        # oracle: place u explicitly (gate bit 0 <-> qubit 2, bit 1 <-> qubit 0)
        op = np.zeros((16, 16), dtype=complex)
        for i in range(16):
            for j in range(16):
                if (i >> 1) & 1 == (j >> 1) & 1 and (i >> 3) & 1 == (j >> 3) & 1:
                    row = ((i >> 2) & 1) | ((i & 1) << 1)
                    col = ((j >> 2) & 1) | ((j & 1) << 1)
                    op[i, j] = u[row, col]
        expected = op @ sv2.amplitudes
        assert np.abs(sv1.amplitudes - expected).max() < 1e-12

    def test_non_unitary_dense_rejected(self):
        with pytest.raises(ValueError, match="unitary"):
            dense((0,), np.array([[1, 0], [0, 2]], dtype=complex))

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            apply(StateVector(2), hadamard(5))

    def test_overlapping_targets_and_controls_rejected(self):
        with pytest.raises(ValueError):
            Gate("phase", (1,), ((1, 1),), 0.3)

    def test_qubit_budget(self):
        with pytest.raises(SimulationBudgetError):
            StateVector(25)


class TestSequences:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_forward_then_adjoint_is_identity(self, seed):
        n = 6
        seq = random_sequence(n, 100, seed=seed)
        sv = random_state(n, seed=seed + 10)
        ref = sv.copy()
        apply_sequence(sv, seq, "forward")
        assert abs(sv.norm() - 1.0) < 1e-10
        apply_sequence(sv, seq, "adjoint")
        assert np.abs(sv.amplitudes - ref.amplitudes).max() < 1e-9

    def test_empty_sequence_is_identity(self):
        sv = random_state(3)
        ref = sv.copy()
        apply_sequence(sv, OperatorSequence(()))
        assert np.array_equal(sv.amplitudes, ref.amplitudes)

    def test_adjoint_of_ry_is_negated_angle(self):
        sv1 = random_state(2, seed=4)
        sv2 = sv1.copy()
        apply_sequence(sv1, OperatorSequence((ry(0, 0.8),)), "adjoint")
        apply(sv2, ry(0, -0.8))
        assert np.abs(sv1.amplitudes - sv2.amplitudes).max() < 1e-12

    def test_norm_preserved_by_every_gate(self):
        sv = random_state(5, seed=7)
        for g in random_sequence(5, 60, seed=8):
            apply(sv, g)
            assert abs(sv.norm() - 1.0) < 1e-10

    def test_swap_gates_exact(self):
        got = sequence_to_matrix(OperatorSequence(tuple(swap_gates(0, 1))), 2)
        expected = np.eye(4)[[0, 2, 1, 3]]
        assert np.abs(got - expected).max() < 1e-12


class TestControlledApplication:
    def test_control_off_leaves_state(self):
        seq = random_sequence(3, 20, seed=1)
        sv = random_state(4, seed=2)   # qubit 3 is |0> or |1> mixed in
        # force control qubit to |0>
        amps = np.zeros(16, dtype=complex)
        amps[:8] = sv.amplitudes[:8]
        amps /= np.linalg.norm(amps)
        sv = StateVector(4, amps)
        ref = sv.copy()
        apply_controlled_sequence(sv, seq, control_qubit=3)
        assert np.abs(sv.amplitudes - ref.amplitudes).max() < 1e-12

    def test_control_on_equals_plain_application(self):
        seq = random_sequence(3, 20, seed=3)
        rng = np.random.default_rng(11)
        lower = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        lower /= np.linalg.norm(lower)
        amps = np.zeros(16, dtype=complex)
        amps[8:] = lower                       # control qubit 3 in |1>
        sv = StateVector(4, amps)
        apply_controlled_sequence(sv, seq, control_qubit=3)
        direct = StateVector(3, lower.copy())
        apply_sequence(direct, seq)
        assert np.abs(sv.amplitudes[8:] - direct.amplitudes).max() < 1e-10
        assert np.abs(sv.amplitudes[:8]).max() == 0.0

    def test_two_repetitions_of_phase_compose(self):
        sv1 = random_state(2, seed=6)
        sv2 = sv1.copy()
        # force control |1> on qubit 1 not needed: compare plain composition
        seq = OperatorSequence((phase(0, np.pi / 4),))
        full = sv1.extended(1)
        # put the control in |1>
        amps = np.zeros(8, dtype=complex)
        amps[4:] = sv1.amplitudes
        full = StateVector(3, amps)
        apply_controlled_sequence(full, seq, control_qubit=2, repetitions=2)
        apply(sv2, phase(0, np.pi / 2))
        assert np.abs(full.amplitudes[4:] - sv2.amplitudes).max() < 1e-12

    def test_control_collision_rejected(self):
        seq = OperatorSequence((hadamard(0),))
        with pytest.raises(ValueError, match="collides"):
            apply_controlled_sequence(random_state(2), seq, control_qubit=0)

    def test_ccry_truth_table(self):
        # rotation fires only when both controls are |1>
        ang = 0.9
        for c1 in (0, 1):
            for c2 in (0, 1):
                idx = c1 | (c2 << 1)
                sv = StateVector.basis_state(3, idx)
                apply(sv, ccry(0, 1, 2, ang))
                p1 = marginal_probability(sv, 2, 1)
                expected = math.sin(ang / 2) ** 2 if c1 and c2 else 0.0
                assert abs(p1 - expected) < 1e-12


class TestMeasurement:
    def test_basis_state_is_certain(self):
        sv = StateVector.basis_state(3, 0b101)
        assert measure_register(sv, [0, 1, 2], rng_seed=0) == 0b101
        # non-collapsing: the stored state is untouched
        assert abs(sv.amplitudes[0b101] - 1.0) < 1e-15

    def test_born_rule_frequencies(self):
        sv = apply(StateVector(1), hadamard(0))
        outcomes = sample_register(sv, [0], 100_000, np.random.default_rng(42))
        freq = outcomes.mean()
        assert abs(freq - 0.5) < 0.01

    def test_sampling_matches_marginal_within_4_sigma(self):
        sv = random_state(4, seed=9)
        shots = 40_000
        outcomes = sample_register(sv, [2], shots, np.random.default_rng(1))
        p = marginal_probability(sv, 2, 1)
        sigma = math.sqrt(p * (1 - p) / shots)
        assert abs(outcomes.mean() - p) < 4 * sigma

    def test_register_distribution_sums_to_one(self):
        sv = random_state(5, seed=12)
        for qubits in ([0, 1], [3, 4], [1, 3]):
            dist = register_distribution(sv, qubits)
            assert abs(dist.sum() - 1.0) < 1e-12

    def test_marginal_of_uniform_two_qubit_state(self):
        sv = StateVector(2, np.full(4, 0.5, dtype=complex))
        for q in (0, 1):
            assert abs(marginal_probability(sv, q, 1) - 0.5) < 1e-12

    def test_ancilla_in_one_state(self):
        sv = StateVector.basis_state(1, 1)
        assert marginal_probability(sv, 0, 1) == 1.0

    def test_measured_qubits_must_be_distinct(self):
        with pytest.raises(ValueError):
            register_distribution(random_state(3), [1, 1])


class TestStateVector:
    def test_length_is_power_of_two(self):
        sv = StateVector(4)
        assert sv.amplitudes.size == 16

    def test_norm_validated_on_construction(self):
        with pytest.raises(ValueError, match="norm"):
            StateVector(1, np.array([1.0, 1.0], dtype=complex))

    def test_extended_appends_zero_qubits(self):
        sv = random_state(2, seed=13)
        big = sv.extended(1)
        assert big.num_qubits == 3
        assert np.array_equal(big.amplitudes[:4], sv.amplitudes)
        assert np.abs(big.amplitudes[4:]).max() == 0.0

    def test_cx_matches_cnot_matrix(self):
        got = sequence_to_matrix(OperatorSequence((cx(0, 1),)), 2)
        expected = np.eye(4)[[0, 3, 2, 1]]
        assert np.abs(got - expected).max() < 1e-12
