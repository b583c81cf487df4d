"""Dense statevector simulation kernels.

Qubit index 0 is the least-significant bit of the amplitude index
(little-endian), so extracting a register is a mask/shift.  Gate kernels
operate in place over strided views of the amplitude buffer; dense
unitaries go through a gather/scatter path over the target subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Hard cap on simulated register width (16 GiB of complex128 beyond this).
MAX_QUBITS = 24

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# Gate kinds.  "phase" is diag(1, e^{+i*angle}); a ControlledPhase is a
# phase gate with one control, a doubly controlled RY is an "ry" with two
# controls.  "reflect0" flips the sign of the all-zeros component of its
# target register; the ancilla phase flip used by the Grover operator is
# reflect0 on a single qubit.
KIND_H = "h"
KIND_X = "x"
KIND_RY = "ry"
KIND_PHASE = "phase"
KIND_PSWAP = "pswap"
KIND_DENSE = "dense"
KIND_REFLECT0 = "reflect0"

_ANGLE_KINDS = frozenset({KIND_RY, KIND_PHASE, KIND_PSWAP})


class SimulationBudgetError(RuntimeError):
    """Raised when a requested register exceeds the simulator qubit cap."""


@dataclass(frozen=True)
class Gate:
    """One primitive operation on a statevector.

    Args:
        kind: one of the KIND_* constants.
        targets: qubit indices the base operation acts on.
        controls: optional ``(qubit, polarity)`` pairs; the base operation
            is applied only where every control qubit matches its polarity
            (1 = control on |1>, 0 = control on |0>).
        angle: rotation/phase angle in radians (ry, phase, pswap).
        matrix: unitary of dimension 2^len(targets) (dense only).
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()
    angle: float | None = None
    matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        tset = set(self.targets)
        if len(tset) != len(self.targets):
            raise ValueError(f"duplicate target qubits: {self.targets}")
        cset = {q for q, _ in self.controls}
        if len(cset) != len(self.controls):
            raise ValueError(f"duplicate control qubits: {self.controls}")
        if tset & cset:
            raise ValueError(
                f"targets {self.targets} and controls {self.controls} overlap"
            )
        for _, pol in self.controls:
            if pol not in (0, 1):
                raise ValueError(f"control polarity must be 0 or 1, got {pol}")
        if self.kind in _ANGLE_KINDS and self.angle is None:
            raise ValueError(f"{self.kind} gate requires an angle")
        if self.kind == KIND_PSWAP and len(self.targets) != 2:
            raise ValueError("pswap acts on exactly two qubits")
        if self.kind == KIND_DENSE:
            dim = 2 ** len(self.targets)
            m = self.matrix
            if m is None or m.shape != (dim, dim):
                raise ValueError(f"dense gate on {len(self.targets)} qubits "
                                 f"needs a {dim}x{dim} matrix")
            err = np.abs(m.conj().T @ m - np.eye(dim)).max()
            if err > 1e-10:
                raise ValueError(f"dense matrix is not unitary (|U+U - I|max = {err:.3e})")

    def adjoint(self) -> "Gate":
        if self.kind in _ANGLE_KINDS:
            return Gate(self.kind, self.targets, self.controls, -self.angle)
        if self.kind == KIND_DENSE:
            g = Gate.__new__(Gate)
            object.__setattr__(g, "kind", KIND_DENSE)
            object.__setattr__(g, "targets", self.targets)
            object.__setattr__(g, "controls", self.controls)
            object.__setattr__(g, "angle", None)
            # adjoint of a validated unitary is unitary; skip the re-check
            object.__setattr__(g, "matrix", np.ascontiguousarray(self.matrix.conj().T))
            return g
        return self  # h, x, reflect0 are self-adjoint

    def controlled(self, qubit: int, polarity: int = 1) -> "Gate":
        return Gate(self.kind, self.targets, self.controls + ((qubit, polarity),),
                    self.angle, self.matrix)

    def qubits(self) -> set[int]:
        return set(self.targets) | {q for q, _ in self.controls}


# -- gate constructors --------------------------------------------------

def hadamard(q: int) -> Gate:
    return Gate(KIND_H, (q,))


def pauli_x(q: int) -> Gate:
    return Gate(KIND_X, (q,))


def ry(q: int, angle: float) -> Gate:
    return Gate(KIND_RY, (q,), angle=angle)


def phase(q: int, angle: float) -> Gate:
    """P(angle) = diag(1, e^{+i angle})."""
    return Gate(KIND_PHASE, (q,), angle=angle)


def cphase(control: int, target: int, angle: float) -> Gate:
    return Gate(KIND_PHASE, (target,), ((control, 1),), angle)


def ccry(control_a: int, control_b: int, target: int, angle: float) -> Gate:
    return Gate(KIND_RY, (target,), ((control_a, 1), (control_b, 1)), angle)


def cx(control: int, target: int) -> Gate:
    return Gate(KIND_X, (target,), ((control, 1),))


def partial_swap(q1: int, q2: int, angle: float) -> Gate:
    """exp(-i(angle/2)(XX+YY)): identity on |00>,|11>, the block
    [[cos a, -i sin a], [-i sin a, cos a]] on span{|01>,|10>}."""
    return Gate(KIND_PSWAP, (q1, q2), angle=angle)


def dense(targets: tuple[int, ...], matrix: np.ndarray) -> Gate:
    return Gate(KIND_DENSE, tuple(targets),
                matrix=np.ascontiguousarray(matrix, dtype=complex))


def reflect_zero(targets: tuple[int, ...]) -> Gate:
    """I - 2|0...0><0...0| on the target register."""
    return Gate(KIND_REFLECT0, tuple(targets))


def ancilla_phase_flip(q: int) -> Gate:
    """Sign flip on the ancilla-|0> subspace (single-qubit reflect_zero)."""
    return Gate(KIND_REFLECT0, (q,))


def swap_gates(q1: int, q2: int) -> list[Gate]:
    """Exact SWAP from three controlled-X gates."""
    return [cx(q1, q2), cx(q2, q1), cx(q1, q2)]


@dataclass(frozen=True)
class OperatorSequence:
    """Ordered gate program; invertible and controllable gate-by-gate."""

    gates: tuple[Gate, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def adjoint(self) -> "OperatorSequence":
        return OperatorSequence(tuple(g.adjoint() for g in reversed(self.gates)),
                                self.label + "+")

    def then(self, other: "OperatorSequence", label: str = "") -> "OperatorSequence":
        return OperatorSequence(self.gates + other.gates, label or self.label)

    def qubits(self) -> set[int]:
        out: set[int] = set()
        for g in self.gates:
            out |= g.qubits()
        return out


class StateVector:
    """Dense complex amplitude array over ``num_qubits`` qubits."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits: int, amplitudes: np.ndarray | None = None):
        if num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        if num_qubits > MAX_QUBITS:
            raise SimulationBudgetError(
                f"{num_qubits} qubits exceeds the simulator cap of {MAX_QUBITS}")
        self.num_qubits = num_qubits
        if amplitudes is None:
            amplitudes = np.zeros(2 ** num_qubits, dtype=complex)
            amplitudes[0] = 1.0
        else:
            amplitudes = np.ascontiguousarray(amplitudes, dtype=complex)
            if amplitudes.shape != (2 ** num_qubits,):
                raise ValueError(
                    f"expected {2 ** num_qubits} amplitudes, got {amplitudes.shape}")
            nrm = np.linalg.norm(amplitudes)
            if abs(nrm - 1.0) > 1e-10:
                raise ValueError(f"state norm {nrm} deviates from 1 by more than 1e-10")
        self.amplitudes = amplitudes

    @classmethod
    def basis_state(cls, num_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(2 ** num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    def copy(self) -> "StateVector":
        out = StateVector.__new__(StateVector)
        out.num_qubits = self.num_qubits
        out.amplitudes = self.amplitudes.copy()
        return out

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return (a.real * a.real + a.imag * a.imag)

    def extended(self, extra_qubits: int) -> "StateVector":
        """Append ``extra_qubits`` new qubits in |0>, as the new high bits."""
        if extra_qubits == 0:
            return self.copy()
        n = self.num_qubits + extra_qubits
        if n > MAX_QUBITS:
            raise SimulationBudgetError(
                f"{n} qubits exceeds the simulator cap of {MAX_QUBITS}")
        amps = np.zeros(2 ** n, dtype=complex)
        amps[: self.amplitudes.size] = self.amplitudes
        out = StateVector.__new__(StateVector)
        out.num_qubits = n
        out.amplitudes = amps
        return out


def inner_product(bra: StateVector, ket: StateVector) -> complex:
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(inner_product(a, b)) ** 2


# -- application kernels -------------------------------------------------

def _axis_view(amps: np.ndarray, q: int, n: int) -> np.ndarray:
    return amps.reshape(2 ** (n - 1 - q), 2, 2 ** q)


def _pair_view(amps: np.ndarray, lo: int, hi: int, n: int) -> np.ndarray:
    # axes: (above hi, bit hi, between, bit lo, below lo)
    return amps.reshape(2 ** (n - 1 - hi), 2, 2 ** (hi - 1 - lo), 2, 2 ** lo)


def _one_qubit_matrix(gate: Gate) -> np.ndarray:
    if gate.kind == KIND_H:
        return np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]],
                        dtype=complex)
    if gate.kind == KIND_X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if gate.kind == KIND_RY:
        c, s = math.cos(gate.angle / 2), math.sin(gate.angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.kind == KIND_PHASE:
        return np.array([[1, 0], [0, np.exp(1j * gate.angle)]], dtype=complex)
    if gate.kind == KIND_REFLECT0:
        return np.array([[-1, 0], [0, 1]], dtype=complex)
    if gate.kind == KIND_DENSE:
        return gate.matrix
    raise ValueError(f"not a one-qubit kind: {gate.kind}")


# cache of index arrays for the gather/scatter fallback, keyed by
# (num_qubits, targets, controls)
_FIBER_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
_FIBER_CACHE_MAX = 128


def _fiber_indices(n: int, targets: tuple[int, ...],
                   controls: tuple[tuple[int, int], ...]) -> tuple[np.ndarray, np.ndarray]:
    """Base indices (target bits zero, controls satisfied) and the flat
    index array of shape (n_base, 2^k) spanning the target subspace."""
    key = (n, targets, controls)
    hit = _FIBER_CACHE.get(key)
    if hit is not None:
        return hit
    idx = np.arange(2 ** n, dtype=np.int64)
    keep = np.ones(idx.size, dtype=bool)
    for t in targets:
        keep &= (idx >> t) & 1 == 0
    for q, pol in controls:
        keep &= (idx >> q) & 1 == pol
    base = idx[keep]
    offsets = np.zeros(2 ** len(targets), dtype=np.int64)
    for bit, t in enumerate(targets):
        sel = (np.arange(2 ** len(targets)) >> bit) & 1
        offsets += sel.astype(np.int64) << t
    fibers = base[:, None] + offsets[None, :]
    if len(_FIBER_CACHE) >= _FIBER_CACHE_MAX:
        _FIBER_CACHE.clear()
    _FIBER_CACHE[key] = (base, fibers)
    return base, fibers


def _apply_via_fibers(amps: np.ndarray, gate: Gate, n: int) -> None:
    _, fibers = _fiber_indices(n, gate.targets, gate.controls)
    if gate.kind == KIND_PHASE:
        amps[fibers[:, 1]] *= np.exp(1j * gate.angle)
        return
    if gate.kind == KIND_REFLECT0:
        amps[fibers[:, 0]] *= -1.0
        return
    block = amps[fibers]
    if gate.kind == KIND_PSWAP:
        c, s = math.cos(gate.angle), math.sin(gate.angle)
        a, b = block[:, 1].copy(), block[:, 2].copy()
        block[:, 1] = c * a - 1j * s * b
        block[:, 2] = -1j * s * a + c * b
    elif gate.kind == KIND_DENSE:
        block = block @ gate.matrix.T
    else:
        block = block @ _one_qubit_matrix(gate).T
    amps[fibers] = block


def _apply_dense_low(amps: np.ndarray, matrix: np.ndarray, k: int) -> None:
    """Dense unitary on the k lowest qubits: gather/scatter as a matmul."""
    m = amps.reshape(-1, 2 ** k)
    # With a constrained input (e.g. preparing from |0...0>) most target
    # columns are zero; restricting the matmul to live columns is exact.
    live = np.flatnonzero(np.any(m != 0, axis=0))
    if live.size <= m.shape[1] // 4:
        out = m[:, live] @ matrix[:, live].T
    else:
        out = m @ matrix.T
    m[:] = out


def apply(state: StateVector, gate: Gate) -> StateVector:
    """Apply one gate in place; returns the same StateVector."""
    n = state.num_qubits
    for q in gate.qubits():
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")
    amps = state.amplitudes

    if gate.controls:
        _apply_via_fibers(amps, gate, n)
        return state

    kind = gate.kind
    if kind == KIND_PSWAP:
        q1, q2 = gate.targets
        lo, hi = (q1, q2) if q1 < q2 else (q2, q1)
        v = _pair_view(amps, lo, hi, n)
        a = v[:, 0, :, 1, :]
        b = v[:, 1, :, 0, :]
        c, s = math.cos(gate.angle), math.sin(gate.angle)
        na = c * a - 1j * s * b
        nb = -1j * s * a + c * b
        v[:, 0, :, 1, :] = na
        v[:, 1, :, 0, :] = nb
        return state

    if kind == KIND_REFLECT0:
        if len(gate.targets) == n:
            amps[0] *= -1.0
        elif len(gate.targets) == 1:
            v = _axis_view(amps, gate.targets[0], n)
            v[:, 0, :] *= -1.0
        else:
            _apply_via_fibers(amps, gate, n)
        return state

    if kind == KIND_DENSE and len(gate.targets) > 1:
        k = len(gate.targets)
        if gate.targets == tuple(range(k)):
            _apply_dense_low(amps, gate.matrix, k)
        else:
            _apply_via_fibers(amps, gate, n)
        return state

    # single-qubit fast paths
    t = gate.targets[0]
    v = _axis_view(amps, t, n)
    if kind == KIND_PHASE:
        v[:, 1, :] *= np.exp(1j * gate.angle)
    elif kind == KIND_X:
        tmp = v[:, 0, :].copy()
        v[:, 0, :] = v[:, 1, :]
        v[:, 1, :] = tmp
    else:
        u = _one_qubit_matrix(gate)
        a = v[:, 0, :]
        b = v[:, 1, :]
        na = u[0, 0] * a + u[0, 1] * b
        nb = u[1, 0] * a + u[1, 1] * b
        v[:, 0, :] = na
        v[:, 1, :] = nb
    return state


def apply_sequence(state: StateVector, seq: OperatorSequence,
                   mode: str = "forward") -> StateVector:
    """Apply a sequence forward, or its conjugate transpose in reverse."""
    if mode == "forward":
        for g in seq.gates:
            apply(state, g)
    elif mode == "adjoint":
        for g in reversed(seq.gates):
            apply(state, g.adjoint())
    else:
        raise ValueError(f"mode must be 'forward' or 'adjoint', got {mode!r}")
    return state


def apply_controlled_sequence(state: StateVector, seq: OperatorSequence,
                              control_qubit: int, repetitions: int = 1) -> StateVector:
    """Apply seq ``repetitions`` times on the control=|1> subspace, gate by
    gate, by adding the control to every gate."""
    if control_qubit in seq.qubits():
        raise ValueError(f"control qubit {control_qubit} collides with the sequence")
    controlled = [g.controlled(control_qubit) for g in seq.gates]
    for _ in range(repetitions):
        for g in controlled:
            apply(state, g)
    return state


# -- measurement ---------------------------------------------------------

def register_distribution(state: StateVector, qubits: list[int]) -> np.ndarray:
    """Exact marginal over the listed qubits; entry r is the probability of
    the outcome whose bit i equals the value of qubits[i]."""
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"measured qubits must be distinct: {qubits}")
    n = state.num_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")
    p = state.probabilities()
    k = len(qubits)
    if qubits == list(range(k)):
        return p.reshape(-1, 2 ** k).sum(axis=0)
    if qubits == list(range(n - k, n)):
        return p.reshape(2 ** k, -1).sum(axis=1)
    idx = np.arange(2 ** n, dtype=np.int64)
    key = np.zeros(2 ** n, dtype=np.int64)
    for bit, q in enumerate(qubits):
        key += ((idx >> q) & 1) << bit
    return np.bincount(key, weights=p, minlength=2 ** k)


def sample_register(state: StateVector, qubits: list[int], shots: int,
                    rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Draw ``shots`` outcomes from the register marginal without
    collapsing the stored state (i.i.d.-equivalent to re-preparing)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    dist = register_distribution(state, qubits)
    dist = np.clip(dist, 0.0, None)
    dist /= dist.sum()
    return rng.choice(dist.size, size=shots, p=dist)


def measure_register(state: StateVector, qubits: list[int],
                     rng_seed: np.random.Generator | int | None = None) -> int:
    """Sample one outcome of the listed qubits.

    The result is the sampled basis index of the sub-register: bit i of the
    returned integer is the value of qubits[i].
    """
    return int(sample_register(state, qubits, 1, rng_seed)[0])


def marginal_probability(state: StateVector, qubit: int, outcome: int) -> float:
    """Exact probability of measuring ``outcome`` on one qubit."""
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    n = state.num_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n}-qubit state")
    v = _axis_view(state.amplitudes, qubit, n)[:, outcome, :]
    p = float((v.real * v.real + v.imag * v.imag).sum())
    return min(max(p, 0.0), 1.0)


def sequence_to_matrix(seq: OperatorSequence, num_qubits: int) -> np.ndarray:
    """Materialize a sequence as a dense matrix (small registers only)."""
    dim = 2 ** num_qubits
    if num_qubits > 12:
        raise SimulationBudgetError("sequence_to_matrix is for small registers")
    out = np.empty((dim, dim), dtype=complex)
    for col in range(dim):
        sv = StateVector.basis_state(num_qubits, col)
        apply_sequence(sv, seq)
        out[:, col] = sv.amplitudes
    return out
