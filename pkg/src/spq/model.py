"""Classical domain model and brute-force reference solvers.

Binary unit commitment: a gas generator committed at integer output x, wind
turbines y that must cover the remaining demand d - x, and a binary wind
scenario per turbine.  Bit j of a y or scenario integer refers to turbine j
throughout; scenario bit 1 means the wind blows at that turbine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np


class InfeasibleDecisionError(ValueError):
    """A second-stage decision violates the demand constraint."""


@dataclass(frozen=True)
class UnitCommitmentModel:
    """Problem instance: costs, demand, and turbine count."""

    n_y: int
    c_x: float
    c: tuple[float, ...]
    c_r: float
    d: int

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if self.n_y < 1:
            raise ValueError("need at least one turbine")
        if len(self.c) != self.n_y:
            raise ValueError(f"expected {self.n_y} turbine costs, got {len(self.c)}")
        for cj in self.c:
            if not 0.0 < cj < self.c_x:
                raise ValueError(f"turbine cost {cj} must satisfy 0 < c_j < c_x={self.c_x}")
        if not self.c_x < self.c_r:
            raise ValueError(f"recourse cost c_r={self.c_r} must exceed c_x={self.c_x}")
        if self.d < 0 or int(self.d) != self.d:
            raise ValueError("demand d must be a nonnegative integer")

    @property
    def n_xi(self) -> int:
        return self.n_y


@dataclass(frozen=True)
class DiscreteDistribution:
    """Sample space with pmf: entries are (scenario bitmask, probability)."""

    n_xi: int
    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries",
                           tuple((int(s), float(p)) for s, p in self.entries))
        seen = set()
        total = 0.0
        for s, p in self.entries:
            if not 0 <= s < 2 ** self.n_xi:
                raise ValueError(f"scenario {s} does not fit in {self.n_xi} bits")
            if s in seen:
                raise ValueError(f"duplicate scenario {s}")
            seen.add(s)
            if p < 0:
                raise ValueError(f"negative probability for scenario {s}")
            total += p
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def uniform(cls, n_xi: int) -> "DiscreteDistribution":
        n = 2 ** n_xi
        return cls(n_xi, tuple((s, 1.0 / n) for s in range(n)))

    @classmethod
    def point_mass(cls, n_xi: int, scenario: int) -> "DiscreteDistribution":
        return cls(n_xi, ((scenario, 1.0),))

    @classmethod
    def from_pmf(cls, n_xi: int, pmf: dict[int, float]) -> "DiscreteDistribution":
        return cls(n_xi, tuple(sorted(pmf.items())))

    @property
    def scenarios(self) -> np.ndarray:
        return np.array([s for s, _ in self.entries], dtype=np.int64)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.entries])

    @property
    def is_uniform(self) -> bool:
        return (len(self.entries) == 2 ** self.n_xi
                and np.allclose(self.probabilities, 1.0 / 2 ** self.n_xi, atol=1e-15))


@dataclass(frozen=True)
class Bounds:
    """Certified range of the second-stage objective."""

    q_l: float
    q_u: float

    def __post_init__(self):
        if not self.q_u > self.q_l:
            raise ValueError(f"need q_u > q_l, got [{self.q_l}, {self.q_u}]")

    @property
    def width(self) -> float:
        return self.q_u - self.q_l


@dataclass(frozen=True)
class GenericDiagonalProblem:
    """Diagonal-cost problem over a y register and a scenario register.

    ``cost`` is the full (2^n_y, 2^n_xi) table; columns for scenarios
    outside the distribution support should be zero (the cost operator is a
    sum of per-scenario projectors, so it vanishes off support).
    ``feasible`` lists the allowed y bitmasks, or None for all of them.
    """

    n_y: int
    n_xi: int
    cost: np.ndarray
    feasible: tuple[int, ...] | None = None

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        if cost.shape != (2 ** self.n_y, 2 ** self.n_xi):
            raise ValueError(f"cost table must be {(2 ** self.n_y, 2 ** self.n_xi)}, "
                             f"got {cost.shape}")
        if not np.all(np.isfinite(cost)):
            raise ValueError("cost table must be finite")
        object.__setattr__(self, "cost", cost)
        if self.feasible is not None:
            object.__setattr__(self, "feasible", tuple(sorted(self.feasible)))

    def feasible_decisions(self) -> np.ndarray:
        if self.feasible is None:
            return np.arange(2 ** self.n_y, dtype=np.int64)
        return np.array(self.feasible, dtype=np.int64)


# -- feasibility and costs ------------------------------------------------

_FEASIBLE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def feasible_decisions(n_y: int, weight: int) -> np.ndarray:
    """All y bitmasks of the given Hamming weight, ascending."""
    key = (n_y, weight)
    hit = _FEASIBLE_CACHE.get(key)
    if hit is None:
        hit = np.array(sorted(sum(1 << j for j in comb)
                              for comb in combinations(range(n_y), weight)),
                       dtype=np.int64)
        _FEASIBLE_CACHE[key] = hit
    return hit


def second_stage_cost(model: UnitCommitmentModel, x: int, y: int, xi: int) -> float:
    """sum_j [c_j y_j xi_j - c_r y_j (xi_j - 1)] for a feasible y."""
    if not 0 <= x <= model.d:
        raise InfeasibleDecisionError(f"x={x} outside [0, d={model.d}]")
    if bin(y).count("1") != model.d - x:
        raise InfeasibleDecisionError(
            f"y={y:0{model.n_y}b} has Hamming weight {bin(y).count('1')}, "
            f"demand requires {model.d - x}")
    total = 0.0
    for j in range(model.n_y):
        yj = (y >> j) & 1
        xij = (xi >> j) & 1
        total += yj * (model.c[j] * xij + model.c_r * (1 - xij))
    return total


def _cost_matrix(model: UnitCommitmentModel, ys: np.ndarray,
                 xis: np.ndarray) -> np.ndarray:
    """q values for every (scenario, y) pair, shape (len(xis), len(ys))."""
    c = np.array(model.c)
    ybits = ((ys[:, None] >> np.arange(model.n_y)[None, :]) & 1).astype(float)
    xbits = ((xis[:, None] >> np.arange(model.n_y)[None, :]) & 1).astype(float)
    base = ybits @ np.full(model.n_y, model.c_r)          # all-recourse cost
    cross = xbits @ (ybits * (c - model.c_r)[None, :]).T  # wind replaces recourse
    return base[None, :] + cross


def brute_force_Q(model: UnitCommitmentModel, x: int, xi: int) -> tuple[int, float]:
    """Exhaustive second-stage minimum; ties go to the lowest y bitmask."""
    if x > model.d:
        raise InfeasibleDecisionError(f"no feasible y for x={x} > d={model.d}")
    ys = feasible_decisions(model.n_y, model.d - x)
    q = _cost_matrix(model, ys, np.array([xi], dtype=np.int64))[0]
    best = int(np.argmin(q))  # argmin returns the first, i.e. lowest, y
    return int(ys[best]), float(q[best])


def scenario_optima(model: UnitCommitmentModel, x: int,
                    dist: DiscreteDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Per-scenario (y*, q*) for every scenario in the distribution."""
    if x > model.d:
        raise InfeasibleDecisionError(f"no feasible y for x={x} > d={model.d}")
    ys = feasible_decisions(model.n_y, model.d - x)
    q = _cost_matrix(model, ys, dist.scenarios)
    best = np.argmin(q, axis=1)
    return ys[best], q[np.arange(q.shape[0]), best]


def expected_value_exact(model: UnitCommitmentModel, x: int,
                         dist: DiscreteDistribution) -> float:
    """phi(x): probability-weighted sum of per-scenario minima."""
    _, q_star = scenario_optima(model, x, dist)
    return float(dist.probabilities @ q_star)


def objective_exact(model: UnitCommitmentModel, x: int,
                    dist: DiscreteDistribution) -> float:
    return model.c_x * x + expected_value_exact(model, x, dist)


def bounds_for(model: UnitCommitmentModel, x: int) -> Bounds:
    """q_l = 0 and q_u = c_r (d - x).

    At x = d the second stage is identically zero and c_r (d - x)
    degenerates to q_l; any positive width then normalizes q = 0 to 0, so
    c_r is used as the scale.
    """
    width = model.c_r * max(model.d - x, 1)
    return Bounds(0.0, width)


def cost_diagonal(problem, layout=None) -> np.ndarray:
    """Diagonal of the cost operator over the full (y, xi) basis.

    Entry for basis index i is q(x, y, xi) with y = low n_y bits and xi the
    next n_xi bits (or per ``layout`` if given).  Defined for every basis
    state, including infeasible y.
    """
    if isinstance(problem, GenericDiagonalProblem):
        n_y, n_xi = problem.n_y, problem.n_xi
        table = problem.cost
    else:
        n_y = n_xi = problem.n_y
        table = None
    idx = np.arange(2 ** (n_y + n_xi), dtype=np.int64)
    if layout is None:
        y = idx & (2 ** n_y - 1)
        xi = idx >> n_y
    else:
        y = np.zeros_like(idx)
        for bit, q in enumerate(layout.y_register):
            y |= ((idx >> q) & 1) << bit
        xi = np.zeros_like(idx)
        for bit, q in enumerate(layout.xi_register):
            xi |= ((idx >> q) & 1) << bit
    if table is not None:
        return table[y, xi]
    diag = np.zeros(idx.size)
    for j in range(n_y):
        yj = ((y >> j) & 1).astype(float)
        xij = ((xi >> j) & 1).astype(float)
        diag += yj * (problem.c[j] * xij + problem.c_r * (1.0 - xij))
    return diag


def diagonal_cost_lookup(problem, basis_index: int, layout=None) -> float:
    """Cost-operator diagonal entry for one basis index."""
    if isinstance(problem, GenericDiagonalProblem):
        n_y, n_xi = problem.n_y, problem.n_xi
    else:
        n_y = n_xi = problem.n_y
    if not 0 <= basis_index < 2 ** (n_y + n_xi):
        raise IndexError(f"basis index {basis_index} out of range")
    return float(cost_diagonal(problem, layout)[basis_index])


# -- instance files -------------------------------------------------------

def generate_instance(n_y: int, seed: int, c_x: float = 0.4, c_r: float = 1.0,
                      c_range: tuple[float, float] = (0.01, 0.2),
                      d: int | None = None) -> dict:
    """Random instance of the benchmark family, seed recorded."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(c_range[0], c_range[1], size=n_y)
    return {
        "n_y": n_y,
        "c_x": c_x,
        "c": [float(v) for v in c],
        "c_r": c_r,
        "d": n_y if d is None else d,
        "distribution": {"type": "uniform"},
        "seed": seed,
    }


def model_from_instance(inst: dict) -> tuple[UnitCommitmentModel, DiscreteDistribution]:
    model = UnitCommitmentModel(n_y=inst["n_y"], c_x=inst["c_x"],
                                c=tuple(inst["c"]), c_r=inst["c_r"], d=inst["d"])
    spec = inst.get("distribution", {"type": "uniform"})
    if spec.get("type") == "uniform":
        dist = DiscreteDistribution.uniform(model.n_xi)
    elif spec.get("type") == "explicit":
        entries = tuple((int(e["scenario"], 2) if isinstance(e["scenario"], str)
                         else int(e["scenario"]), float(e["p"]))
                        for e in spec["entries"])
        dist = DiscreteDistribution(model.n_xi, entries)
    else:
        raise ValueError(f"unknown distribution type {spec.get('type')!r}")
    return model, dist


def load_instance(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_instance(inst: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(inst, fh, indent=2, sort_keys=True)
        fh.write("\n")
