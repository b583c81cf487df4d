"""Payoff oracles: cost-dependent amplitude written onto the QAE ancilla.

Two constructions: an exact per-basis-state rotation (brute-force dense,
demonstration scale only) and the small-angle product of doubly controlled
RY gates, whose per-branch rotation angle is additive in the cost terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Bounds, UnitCommitmentModel, bounds_for, cost_diagonal
from .statevector import Gate, KIND_DENSE, OperatorSequence, ccry, pauli_x

_EXACT_ORACLE_MAX_NY = 5  # dense 2^(2*n_y + 1) matrix; demonstration scale


@dataclass(frozen=True)
class OracleKind:
    """Which oracle to build and how costs map to rotation angles.

    ``angle_scale`` (sin variant) is the rotation in radians per unit of
    cost.  The default pi / q_u keeps the total per-branch angle inside
    [0, pi] so sin^2 stays invertible; the literal angle scale of pi can be
    requested with ``allow_aliasing`` for parity runs where costs stay
    below one.
    """

    variant: str
    bounds: Bounds
    angle_scale: float | None = None
    allow_aliasing: bool = False

    def __post_init__(self):
        if self.variant not in ("exact", "sin"):
            raise ValueError(f"unknown oracle variant {self.variant!r}")
        if self.variant == "sin":
            if self.angle_scale is None or self.angle_scale <= 0:
                raise ValueError("sin oracle requires a positive angle_scale")
            total = self.angle_scale * self.bounds.q_u
            if total > math.pi + 1e-12 and not self.allow_aliasing:
                raise ValueError(
                    f"angle_scale * q_u = {total:.4f} > pi aliases the rotation; "
                    "pass allow_aliasing=True to override")

    @classmethod
    def exact(cls, bounds: Bounds) -> "OracleKind":
        return cls("exact", bounds)

    @classmethod
    def sin_approx(cls, bounds: Bounds, angle_scale: float | None = None,
                   literal_pi: bool = False) -> "OracleKind":
        if literal_pi:
            return cls("sin", bounds, math.pi, allow_aliasing=True)
        if angle_scale is None:
            angle_scale = math.pi / bounds.q_u
        return cls("sin", bounds, angle_scale)


def qbar(model: UnitCommitmentModel, x: int, q: float) -> float:
    """Cost normalized to [0, 1] by the certified bounds."""
    b = bounds_for(model, x)
    if q < b.q_l - 1e-12 or q > b.q_u + 1e-12:
        raise ValueError(f"cost {q} outside certified bounds [{b.q_l}, {b.q_u}]")
    return min(max((q - b.q_l) / b.width, 0.0), 1.0)


def _exact_oracle_gate(model: UnitCommitmentModel, x: int, bounds: Bounds,
                       ancilla: int) -> Gate:
    """Block-diagonal RY(2 arcsin sqrt(qbar)) per (y, xi) basis state."""
    n = 2 * model.n_y
    diag = cost_diagonal(model)
    # Infeasible y values can exceed q_u; they carry no amplitude after
    # the constraint-preserving evolution, so their angles are clamped.
    qb = np.clip((diag - bounds.q_l) / bounds.width, 0.0, 1.0)
    s = np.sqrt(qb)
    c = np.sqrt(1.0 - qb)
    dim = 2 ** n
    u = np.zeros((2 * dim, 2 * dim), dtype=complex)
    idx = np.arange(dim)
    u[idx, idx] = c
    u[dim + idx, idx] = s
    u[idx, dim + idx] = -s
    u[dim + idx, dim + idx] = c
    # unitary by construction (orthogonal 2x2 block per basis state);
    # the cubic unitarity scan is skipped at this dimension
    g = Gate.__new__(Gate)
    object.__setattr__(g, "kind", KIND_DENSE)
    object.__setattr__(g, "targets", tuple(range(n)) + (ancilla,))
    object.__setattr__(g, "controls", ())
    object.__setattr__(g, "angle", None)
    object.__setattr__(g, "matrix", u)
    return g


def build_oracle(kind: OracleKind, model: UnitCommitmentModel, x: int,
                 layout) -> OperatorSequence:
    """Oracle sequence on the (y, xi, ancilla) registers."""
    if layout.ancilla is None:
        raise ValueError("oracle construction needs an ancilla in the layout")
    anc = layout.ancilla
    if kind.variant == "exact":
        if model.n_y > _EXACT_ORACLE_MAX_NY:
            raise ValueError(f"exact oracle is brute-force dense; "
                             f"capped at n_y <= {_EXACT_ORACLE_MAX_NY}")
        if anc != 2 * model.n_y or layout.y_register != tuple(range(model.n_y)):
            raise ValueError("exact oracle assumes the standard register packing")
        return OperatorSequence((_exact_oracle_gate(model, x, kind.bounds, anc),),
                                "F_exact")

    yq, xq = layout.y_register, layout.xi_register
    scale = kind.angle_scale
    gates = []
    for j in range(model.n_y):
        gates.append(ccry(xq[j], yq[j], anc, scale * model.c[j]))
        gates.append(pauli_x(xq[j]))
        gates.append(ccry(xq[j], yq[j], anc, scale * model.c_r))
        gates.append(pauli_x(xq[j]))
    return OperatorSequence(tuple(gates), "F_sin")


def sin_oracle_readback(a_hat: float, kind: OracleKind) -> float:
    """Invert the per-branch relation Pr[1] = sin^2(angle_scale * q / 2).

    Exact for a concentrated state; a mixture of sin^2 values is not the
    sin^2 of the mixture, so mixed states carry a convexity bias (the
    worked two-point formula is pinned in the tests).
    """
    if kind.variant != "sin":
        raise ValueError("readback inversion applies to the sin oracle")
    if not 0.0 <= a_hat <= 1.0:
        raise ValueError(f"estimate {a_hat} outside [0, 1]")
    return (2.0 / kind.angle_scale) * math.asin(math.sqrt(a_hat))
