"""Canonical quantum amplitude estimation.

State preparation A = oracle after DQA, the Grover operator
Q = A S0 A+ S_psi0, and m-qubit phase estimation with an exact inverse
QFT.  The measured integer b maps to the amplitude estimate
sin^2(pi b / 2^m), so estimates live on a fixed grid; b and 2^m - b yield
the same value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Bounds
from .statevector import (
    MAX_QUBITS,
    OperatorSequence,
    SimulationBudgetError,
    StateVector,
    ancilla_phase_flip,
    apply,
    apply_controlled_sequence,
    apply_sequence,
    cphase,
    hadamard,
    marginal_probability,
    reflect_zero,
    sample_register,
    swap_gates,
)


@dataclass(frozen=True)
class QaeConfig:
    """Estimate-register width and sampling plan.

    One run applies the Grover operator 2^m - 1 times, i.e. 2^(m+1) - 1
    applications of A counting both orientations.
    """

    m: int
    repetitions: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.m <= 12:
            raise ValueError(f"estimate qubits m={self.m} outside [1, 12]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @property
    def M(self) -> int:
        return 2 ** self.m

    @property
    def a_applications(self) -> int:
        return 2 ** (self.m + 1) - 1


@dataclass(frozen=True)
class EstimateResult:
    """One amplitude-estimation readout."""

    b: int
    a_hat: float
    phi_hat: float
    a_true: float | None = None
    within_bound: bool | None = None


def build_qft(qubits: tuple[int, ...]) -> OperatorSequence:
    """QFT on the register: |k> -> M^{-1/2} sum_b e^{2 pi i k b / M} |b>,
    with bit i of k on qubits[i]."""
    m = len(qubits)
    gates = []
    for i in range(m - 1, -1, -1):
        gates.append(hadamard(qubits[i]))
        for j in range(i - 1, -1, -1):
            gates.append(cphase(qubits[j], qubits[i], math.pi / 2 ** (i - j)))
    for i in range(m // 2):
        gates.extend(swap_gates(qubits[i], qubits[m - 1 - i]))
    return OperatorSequence(tuple(gates), "qft")


def build_inverse_qft(qubits: tuple[int, ...]) -> OperatorSequence:
    return build_qft(qubits).adjoint()


def build_A(dqa_seq: OperatorSequence, oracle_seq: OperatorSequence,
            layout=None) -> OperatorSequence:
    """State preparation: the oracle applied after the annealing circuit."""
    if layout is not None:
        system = set(layout.y_register) | set(layout.xi_register)
        if layout.ancilla is not None:
            system.add(layout.ancilla)
        extra = (dqa_seq.qubits() | oracle_seq.qubits()) - system
        if extra:
            raise ValueError(f"register mismatch: qubits {sorted(extra)} are "
                             "outside the layout's system registers")
    return OperatorSequence(dqa_seq.gates + oracle_seq.gates, "A")


def build_grover(A_seq: OperatorSequence, layout) -> OperatorSequence:
    """Q = A S0 A+ S_psi0.

    S0 reflects about all-zeros on the system qubits.  S_psi0 is realized
    as a phase flip on the ancilla-|0> subspace, which agrees with the
    rank-one reflection on the two-dimensional subspace reachable from
    A|0>; the rotation-by-2-theta test pins this.
    """
    if layout.ancilla is None:
        raise ValueError("Grover construction needs an ancilla in the layout")
    system = tuple(sorted(layout.y_register + layout.xi_register + (layout.ancilla,)))
    extra = A_seq.qubits() - set(system)
    if extra:
        raise ValueError(f"A touches qubits {sorted(extra)} outside the system register")
    gates = (ancilla_phase_flip(layout.ancilla),)
    gates += A_seq.adjoint().gates
    gates += (reflect_zero(system),)
    gates += A_seq.gates
    return OperatorSequence(gates, "Q")


def _check_budget(layout, m: int) -> None:
    total = layout.num_system_qubits + m
    if total > MAX_QUBITS:
        raise SimulationBudgetError(
            f"QAE needs {total} qubits, over the simulator cap of {MAX_QUBITS}")


def qpe_state(A_seq: OperatorSequence, config: QaeConfig, layout) -> StateVector:
    """Final phase-estimation state over (system, estimate) registers.

    Computed by stacking Q^k A|0> for k = 0..M-1 and applying the inverse
    QFT as a discrete Fourier transform along the estimate axis; this is
    gate-for-gate equivalent to the controlled-power circuit (pinned by a
    test) at a fraction of the cost, and one final state then serves any
    number of estimate samples.
    """
    _check_budget(layout, config.m)
    n_sys = layout.num_system_qubits
    grover = build_grover(A_seq, layout)
    M = config.M
    psi = StateVector(n_sys)
    apply_sequence(psi, A_seq)
    stack = np.empty((M, 2 ** n_sys), dtype=complex)
    for k in range(M):
        stack[k] = psi.amplitudes
        if k < M - 1:
            apply_sequence(psi, grover)
    final = np.fft.fft(stack, axis=0) / M
    out = StateVector.__new__(StateVector)
    out.num_qubits = n_sys + config.m
    out.amplitudes = final.reshape(-1)
    return out


def qpe_state_gates(A_seq: OperatorSequence, config: QaeConfig, layout) -> StateVector:
    """Reference gate-level phase estimation: Hadamards on the estimate
    register, controlled Q^(2^j) per estimate qubit, exact inverse QFT."""
    _check_budget(layout, config.m)
    n_sys = layout.num_system_qubits
    est = tuple(range(n_sys, n_sys + config.m))
    grover = build_grover(A_seq, layout)
    state = StateVector(n_sys + config.m)
    apply_sequence(state, A_seq)
    for q in est:
        apply(state, hadamard(q))
    for j, q in enumerate(est):
        apply_controlled_sequence(state, grover, q, repetitions=2 ** j)
    apply_sequence(state, build_inverse_qft(est))
    return state


def _readout(bs: np.ndarray, config: QaeConfig, bounds: Bounds,
             a_true: float | None) -> list[EstimateResult]:
    out = []
    for b in bs:
        b = int(b)
        a_hat = math.sin(math.pi * b / config.M) ** 2
        phi_hat = a_hat * bounds.width + bounds.q_l
        within = None
        if a_true is not None:
            within = error_bound_check(a_hat, a_true, config.M)
        out.append(EstimateResult(b=b, a_hat=a_hat, phi_hat=phi_hat,
                                  a_true=a_true, within_bound=within))
    return out


def run_qae(A_seq: OperatorSequence, config: QaeConfig, layout, bounds: Bounds,
            a_true: float | None = None,
            rng: np.random.Generator | None = None) -> list[EstimateResult]:
    """Phase estimation on the Grover operator; draws ``repetitions``
    estimate-register samples from one final state."""
    state = qpe_state(A_seq, config, layout)
    n_sys = layout.num_system_qubits
    est = list(range(n_sys, n_sys + config.m))
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    bs = sample_register(state, est, config.repetitions, rng)
    return _readout(bs, config, bounds, a_true)


def mc_estimate(A_seq: OperatorSequence, shots: int, layout,
                rng_seed: np.random.Generator | int | None = None) -> float:
    """Monte Carlo baseline: prepare A once and sample the ancilla,
    returning the |1> frequency."""
    if not isinstance(rng_seed, np.random.Generator):
        rng_seed = np.random.default_rng(rng_seed)
    return float(mc_estimate_batch(A_seq, shots, layout, rng_seed, 1)[0])


def mc_estimate_batch(A_seq: OperatorSequence, shots: int, layout,
                      rng: np.random.Generator, n_estimates: int) -> np.ndarray:
    """Batch of independent Monte Carlo estimates from one prepared state
    (non-collapsing sampling is i.i.d.-equivalent to re-preparing)."""
    state = StateVector(layout.num_system_qubits)
    apply_sequence(state, A_seq)
    p1 = marginal_probability(state, layout.ancilla, 1)
    return rng.binomial(shots, p1, size=n_estimates) / shots


def error_bound_check(a_hat: float, a_true: float, M: int) -> bool:
    """|a_hat - a_true| <= pi/M + pi^2/M^2 (the canonical confidence box)."""
    return abs(a_hat - a_true) <= math.pi / M + math.pi ** 2 / M ** 2
