"""Scenario-controlled digitized quantum annealing.

The circuit prepares a constrained superposition on the decision register
and the scenario distribution on its own register, then alternates cost,
penalty, and Hamming-weight-preserving mixer layers along a linear
annealing ramp.  The scenario register is only ever used as control logic,
so its probability marginal is preserved exactly.

Sign conventions: the unit-commitment phases use P(theta) = diag(1,
e^{+i theta}) with raw cost angles, and the mixer is the partial swap
exp(-i(beta/2)(XX+YY)); the generic-problem path uses the cost unitary
e^{-i gamma H} with mixer gates e^{+i beta X}.  Each pairing drives the
decision register toward the per-scenario cost minimum (the uniform
initial state is the mixer ground state); the worked two-qubit example in
the tests pins both conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import (
    DiscreteDistribution,
    GenericDiagonalProblem,
    UnitCommitmentModel,
    cost_diagonal,
    expected_value_exact,
    feasible_decisions,
    scenario_optima,
    _cost_matrix,
)
from .statevector import (
    Gate,
    KIND_DENSE,
    OperatorSequence,
    StateVector,
    apply_sequence,
    cphase,
    hadamard,
    partial_swap,
    pauli_x,
)

_GENERIC_QUBIT_CAP = 8  # dense per-layer cost unitaries; desk scale only


@dataclass(frozen=True)
class AnnealSchedule:
    """Layer count plus cost/mixer angle interpolators.

    Defaults are the linear ramp a(t) = t/T, b(t) = 1 - t/T; the time step
    is absorbed into the layer index, so layer t uses angles (a(t), b(t))
    for t = 1..T.
    """

    T: int
    a: Callable[[int], float] | None = None
    b: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.T < 0 or int(self.T) != self.T:
            raise ValueError("annealing layer count T must be a nonnegative integer")
        if self.T >= 1:
            if abs(self.cost_angle(0)) > 1e-12:
                raise ValueError("cost interpolator must satisfy a(0) = 0")
            if abs(self.mixer_angle(self.T)) > 1e-12:
                raise ValueError("mixer interpolator must satisfy b(T) = 0")

    @classmethod
    def linear(cls, T: int) -> "AnnealSchedule":
        return cls(T)

    def cost_angle(self, t: int) -> float:
        if self.a is not None:
            return self.a(t)
        return t / self.T

    def mixer_angle(self, t: int) -> float:
        if self.b is not None:
            return self.b(t)
        return 1.0 - t / self.T

    def cost_angles(self) -> np.ndarray:
        return np.array([self.cost_angle(t) for t in range(1, self.T + 1)])

    def mixer_angles(self) -> np.ndarray:
        return np.array([self.mixer_angle(t) for t in range(1, self.T + 1)])


@dataclass(frozen=True)
class RegisterLayout:
    """Role-to-qubit assignment for a simulation register."""

    y_register: tuple[int, ...]
    xi_register: tuple[int, ...]
    ancilla: int | None = None
    estimate_register: tuple[int, ...] = ()

    def __post_init__(self):
        groups = [tuple(self.y_register), tuple(self.xi_register),
                  tuple(self.estimate_register)]
        if self.ancilla is not None:
            groups.append((self.ancilla,))
        flat = [q for g in groups for q in g]
        if len(set(flat)) != len(flat):
            raise ValueError(f"register roles overlap: {groups}")
        object.__setattr__(self, "y_register", tuple(self.y_register))
        object.__setattr__(self, "xi_register", tuple(self.xi_register))
        object.__setattr__(self, "estimate_register", tuple(self.estimate_register))

    @classmethod
    def standard(cls, n_y: int, n_xi: int, include_ancilla: bool = False,
                 m_estimate: int = 0) -> "RegisterLayout":
        """y on qubits [0, n_y), xi on [n_y, n_y + n_xi), then the QAE
        ancilla, then the estimate register on top."""
        y = tuple(range(n_y))
        xi = tuple(range(n_y, n_y + n_xi))
        anc = n_y + n_xi if include_ancilla else None
        base = n_y + n_xi + (1 if include_ancilla else 0)
        est = tuple(range(base, base + m_estimate))
        return cls(y, xi, anc, est)

    @property
    def num_problem_qubits(self) -> int:
        return len(self.y_register) + len(self.xi_register)

    @property
    def num_system_qubits(self) -> int:
        return self.num_problem_qubits + (1 if self.ancilla is not None else 0)

    @property
    def num_qubits(self) -> int:
        return self.num_system_qubits + len(self.estimate_register)


@dataclass
class DqaDiagnostics:
    """Energy bookkeeping for one prepared state."""

    expectation_hq: float
    phi_exact: float
    delta: float
    delta_decomposed: float
    per_scenario_overlap: dict[int, float | None]


# -- state preparation ----------------------------------------------------

def _unitary_with_first_column(column: np.ndarray) -> np.ndarray:
    """Householder reflection sending |0...0> to the given real unit vector."""
    v = np.asarray(column, dtype=float)
    w = -v.copy()
    w[0] += 1.0
    nw2 = float(w @ w)
    if nw2 < 1e-28:
        return np.eye(v.size, dtype=complex)
    u = np.eye(v.size) - (2.0 / nw2) * np.outer(w, w)
    return u.astype(complex)


def _column_prep_gate(column: np.ndarray, qubits: tuple[int, ...]) -> Gate:
    # Householder matrices are exactly orthogonal; skip the unitarity scan,
    # which is cubic in the dimension.
    g = Gate.__new__(Gate)
    object.__setattr__(g, "kind", KIND_DENSE)
    object.__setattr__(g, "targets", tuple(qubits))
    object.__setattr__(g, "controls", ())
    object.__setattr__(g, "angle", None)
    object.__setattr__(g, "matrix",
                       np.ascontiguousarray(_unitary_with_first_column(column)))
    return g


def dicke_amplitudes(n: int, k: int) -> np.ndarray:
    """Uniform superposition of all weight-k bitstrings on n qubits."""
    if not 0 <= k <= n:
        raise ValueError(f"Hamming weight {k} out of range for {n} qubits")
    v = np.zeros(2 ** n)
    v[feasible_decisions(n, k)] = 1.0
    return v / np.linalg.norm(v)


def prepare_dicke(n: int, k: int, qubits: tuple[int, ...] | None = None) -> OperatorSequence:
    """Sequence mapping |0...0> to the Dicke state of weight k.

    Realized as a dense unitary completion of the target column, so the
    adjoint and controlled forms needed by amplitude estimation come for
    free.
    """
    if qubits is None:
        qubits = tuple(range(n))
    if k == 0:
        return OperatorSequence((), "dicke")
    return OperatorSequence((_column_prep_gate(dicke_amplitudes(n, k), qubits),),
                            "dicke")


def prepare_distribution(dist: DiscreteDistribution,
                         qubits: tuple[int, ...] | None = None) -> OperatorSequence:
    """Sequence loading sum_w sqrt(p(w)) |xi_w> from |0...0>.

    The uniform i.i.d. case compiles to Hadamards and a point mass to X
    gates; anything else becomes a dense column completion.
    """
    if qubits is None:
        qubits = tuple(range(dist.n_xi))
    if len(qubits) != dist.n_xi:
        raise ValueError("qubit count does not match the distribution width")
    if dist.is_uniform:
        return OperatorSequence(tuple(hadamard(q) for q in qubits), "dist")
    if len(dist.entries) == 1:
        scenario = dist.entries[0][0]
        gates = tuple(pauli_x(qubits[j]) for j in range(dist.n_xi)
                      if (scenario >> j) & 1)
        return OperatorSequence(gates, "dist")
    amps = np.zeros(2 ** dist.n_xi)
    amps[dist.scenarios] = np.sqrt(dist.probabilities)
    return OperatorSequence((_column_prep_gate(amps, qubits),), "dist")


def prepare_per_scenario_optimal(model: UnitCommitmentModel, x: int,
                                 dist: DiscreteDistribution) -> OperatorSequence:
    """Exact preparation of the per-scenario optimized wavefunction, built
    from brute-force second-stage minima (the T -> infinity surrogate)."""
    n = 2 * model.n_y
    if n > 12:
        raise ValueError("dense per-scenario preparation is desk scale (n_y <= 6)")
    y_stars, _ = scenario_optima(model, x, dist)
    amps = np.zeros(2 ** n)
    for (scenario, p), y_star in zip(dist.entries, y_stars):
        amps[(scenario << model.n_y) | int(y_star)] = math.sqrt(p)
    return OperatorSequence((_column_prep_gate(amps, tuple(range(n))),), "psi_star")


# -- circuit assembly -----------------------------------------------------

def mixer_pair_angle(beta: float, n_y: int) -> float:
    """Per-pair partial-swap angle for one mixer layer.

    The layer applies a swap on every qubit pair, so each qubit is rotated
    by ~(n_y - 1) * angle per layer.  Normalizing by the degree keeps that
    total bounded as the register grows; with the raw interpolator value
    the digitized evolution stops converging (the residual temperature
    plateaus near 0.7 at n_y = 6 independent of depth).  At n_y = 2 this
    is the identity normalization.
    """
    return beta / max(n_y - 1, 1)


def _uc_layer_gates(model: UnitCommitmentModel, layout: RegisterLayout,
                    gamma: float, beta: float) -> list[Gate]:
    yq, xq = layout.y_register, layout.xi_register
    pair_angle = mixer_pair_angle(beta, model.n_y)
    gates: list[Gate] = []
    for j in range(model.n_y):                      # cost of using turbine j
        gates.append(cphase(xq[j], yq[j], gamma * model.c[j]))
    for j in range(model.n_y):                      # penalty: turbine on, no wind
        gates.append(pauli_x(xq[j]))
        gates.append(cphase(xq[j], yq[j], gamma * model.c_r))
        gates.append(pauli_x(xq[j]))
    for j in range(model.n_y - 1):                  # mixer on the y register only
        for k in range(j + 1, model.n_y):
            gates.append(partial_swap(yq[j], yq[k], pair_angle))
    return gates


def _generic_mixer_gate(qubit: int, beta: float) -> Gate:
    # exp(+i beta X): the uniform initial state is the mixer ground state
    c, s = math.cos(beta), math.sin(beta)
    return Gate(KIND_DENSE, (qubit,),
                matrix=np.array([[c, 1j * s], [1j * s, c]]))


def _generic_layer_gates(problem: GenericDiagonalProblem, layout: RegisterLayout,
                         diag: np.ndarray, gamma: float, beta: float) -> list[Gate]:
    n = layout.num_problem_qubits
    phases = np.exp(-1j * gamma * diag)             # U(gamma) = e^{-i gamma H}
    gates = [Gate(KIND_DENSE, tuple(range(n)), matrix=np.diag(phases))]
    for q in layout.y_register:
        gates.append(_generic_mixer_gate(q, beta))
    return gates


def build_dqa(problem, x: int | None, dist: DiscreteDistribution,
              schedule: AnnealSchedule,
              layout: RegisterLayout | None = None) -> OperatorSequence:
    """Full annealing circuit: constrained initialization, then T layers of
    cost, penalty, mixer (in that order within a layer)."""
    if isinstance(problem, UnitCommitmentModel):
        if x is None or not 0 <= x <= problem.d:
            raise ValueError(f"first-stage decision x={x} outside [0, {problem.d}]")
        if layout is None:
            layout = RegisterLayout.standard(problem.n_y, problem.n_xi)
        gates = list(prepare_dicke(problem.n_y, problem.d - x, layout.y_register))
        gates += list(prepare_distribution(dist, layout.xi_register))
        for t in range(1, schedule.T + 1):
            gates += _uc_layer_gates(model=problem, layout=layout,
                                     gamma=schedule.cost_angle(t),
                                     beta=schedule.mixer_angle(t))
        return OperatorSequence(tuple(gates), "dqa")

    if isinstance(problem, GenericDiagonalProblem):
        if layout is None:
            layout = RegisterLayout.standard(problem.n_y, problem.n_xi)
        n = layout.num_problem_qubits
        if n > _GENERIC_QUBIT_CAP:
            raise ValueError(f"generic problems are capped at {_GENERIC_QUBIT_CAP} "
                             f"qubits (dense cost layers), got {n}")
        if problem.feasible is None:
            gates = [hadamard(q) for q in layout.y_register]
        else:
            col = np.zeros(2 ** problem.n_y)
            col[problem.feasible_decisions()] = 1.0
            col /= np.linalg.norm(col)
            gates = [_column_prep_gate(col, layout.y_register)]
        gates += list(prepare_distribution(dist, layout.xi_register))
        diag = cost_diagonal(problem, layout)
        for t in range(1, schedule.T + 1):
            gates += _generic_layer_gates(problem, layout, diag,
                                          gamma=schedule.cost_angle(t),
                                          beta=schedule.mixer_angle(t))
        return OperatorSequence(tuple(gates), "dqa")

    raise TypeError(f"unsupported problem type {type(problem).__name__}")


def run_dqa(seq: OperatorSequence, layout: RegisterLayout) -> StateVector:
    """Run the annealing circuit from |0...0> over the problem registers."""
    state = StateVector(layout.num_problem_qubits)
    return apply_sequence(state, seq)


# -- fast restricted evolution ---------------------------------------------

_PAIR_CACHE: dict[tuple[int, int, int, int], tuple[np.ndarray, np.ndarray]] = {}


def _mixer_pairs(n_y: int, weight: int, j: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    key = (n_y, weight, j, k)
    hit = _PAIR_CACHE.get(key)
    if hit is None:
        ys = feasible_decisions(n_y, weight)
        pos = {int(y): i for i, y in enumerate(ys)}
        a_rows, b_rows = [], []
        for i, y in enumerate(ys):
            y = int(y)
            if (y >> j) & 1 and not (y >> k) & 1:
                a_rows.append(i)
                b_rows.append(pos[y ^ (1 << j) ^ (1 << k)])
        hit = (np.array(a_rows, dtype=np.int64), np.array(b_rows, dtype=np.int64))
        _PAIR_CACHE[key] = hit
    return hit


def run_dqa_fast(model: UnitCommitmentModel, x: int, dist: DiscreteDistribution,
                 schedule: AnnealSchedule) -> StateVector:
    """Statevector-equivalent DQA run confined to the feasible subspace.

    The mixer never leaks out of the weight-(d-x) block and the phase
    layers are diagonal, so evolving only the populated rows (scenarios
    batched along the columns) reproduces run_dqa(build_dqa(...)) exactly;
    the equivalence is pinned by a test.  This is what makes the
    2^20-amplitude parameter sweeps tractable.
    """
    if not 0 <= x <= model.d:
        raise ValueError(f"first-stage decision x={x} outside [0, {model.d}]")
    n_y, n_xi = model.n_y, dist.n_xi
    weight = model.d - x
    ys = feasible_decisions(n_y, weight)

    xi_amps = np.zeros(2 ** n_xi)
    xi_amps[dist.scenarios] = np.sqrt(dist.probabilities)
    m = np.broadcast_to(xi_amps / math.sqrt(len(ys)),
                        (len(ys), 2 ** n_xi)).astype(complex)
    m = np.ascontiguousarray(m)

    T = schedule.T
    if T > 0:
        # q(x, y, xi) for populated rows; the fused cost+penalty layer is
        # the diagonal phase e^{+i a(t) q} (P(theta) has the +i convention)
        qmat = _cost_matrix(model, ys, np.arange(2 ** n_xi, dtype=np.int64)).T
        gammas = schedule.cost_angles()
        betas = schedule.mixer_angles()
        steps = np.diff(gammas, prepend=0.0)
        incremental = np.allclose(steps, steps[0], rtol=0.0, atol=1e-15)
        if incremental:
            base = np.exp(1j * steps[0] * qmat)
            u = np.ones_like(base)
        for t in range(T):
            if incremental:
                u *= base
                m *= u
            else:
                m *= np.exp(1j * gammas[t] * qmat)
            beta = mixer_pair_angle(betas[t], n_y)
            c, s = math.cos(beta), math.sin(beta)
            for j in range(n_y - 1):
                for k in range(j + 1, n_y):
                    a_rows, b_rows = _mixer_pairs(n_y, weight, j, k)
                    if a_rows.size == 0:
                        continue
                    a = m[a_rows]
                    b = m[b_rows]
                    m[a_rows] = c * a - 1j * s * b
                    m[b_rows] = -1j * s * a + c * b

    full = np.zeros((2 ** n_xi, 2 ** n_y), dtype=complex)
    full[:, ys] = m.T
    return StateVector(n_y + n_xi, full.ravel())


# -- observables ------------------------------------------------------------

def expectation_HQ(state: StateVector, problem, layout: RegisterLayout | None = None) -> float:
    """Exact <H_Q> = sum_i |amp_i|^2 q_i over the (y, xi) register."""
    if isinstance(problem, GenericDiagonalProblem):
        n = problem.n_y + problem.n_xi
    else:
        n = 2 * problem.n_y
    if state.num_qubits != n:
        raise ValueError(f"state has {state.num_qubits} qubits, problem needs {n}")
    diag = cost_diagonal(problem, layout)
    return float(state.probabilities() @ diag)


def residual_diagnostics(state: StateVector, model: UnitCommitmentModel, x: int,
                         dist: DiscreteDistribution,
                         layout: RegisterLayout | None = None) -> DqaDiagnostics:
    """Residual temperature delta = <H_Q> - phi(x), its per-scenario
    decomposition, and the conditional mass on each scenario's optimal set.

    Scenarios with zero probability report an overlap of None.
    """
    if layout is not None and layout.y_register != tuple(range(model.n_y)):
        raise ValueError("diagnostics assume the standard register packing")
    n_y, n_xi = model.n_y, dist.n_xi
    exp_hq = expectation_HQ(state, model)
    phi = expected_value_exact(model, x, dist)

    probs2 = state.probabilities().reshape(2 ** n_xi, 2 ** n_y)
    diag2 = cost_diagonal(model).reshape(2 ** n_xi, 2 ** n_y)
    ys = feasible_decisions(n_y, model.d - x)
    qmat = _cost_matrix(model, ys, dist.scenarios)
    q_star = qmat.min(axis=1)

    overlaps: dict[int, float | None] = {}
    decomposed = 0.0
    for i, (scenario, p) in enumerate(dist.entries):
        row = probs2[scenario]
        decomposed += float(row @ diag2[scenario]) - p * q_star[i]
        mass = row.sum()
        if p <= 0.0 or mass <= 0.0:
            overlaps[scenario] = None
            continue
        optimal = ys[np.abs(qmat[i] - q_star[i]) <= 1e-12]
        overlaps[scenario] = float(row[optimal].sum() / mass)

    return DqaDiagnostics(expectation_hq=exp_hq, phi_exact=phi,
                          delta=exp_hq - phi, delta_decomposed=decomposed,
                          per_scenario_overlap=overlaps)
