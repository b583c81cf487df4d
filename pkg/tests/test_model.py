"""Classical model and brute-force solver tests.

The n_y=2 worked instance (d=2, c_x=0.4, c=[0.1, 0.2], c_r=1, uniform
wind) is enumerated by hand here and reused as a regression anchor.
"""

import numpy as np
import pytest

from spq.model import (
    DiscreteDistribution,
    GenericDiagonalProblem,
    InfeasibleDecisionError,
    UnitCommitmentModel,
    bounds_for,
    brute_force_Q,
    cost_diagonal,
    diagonal_cost_lookup,
    expected_value_exact,
    feasible_decisions,
    generate_instance,
    load_instance,
    model_from_instance,
    objective_exact,
    save_instance,
    scenario_optima,
    second_stage_cost,
)


def worked_model():
    return UnitCommitmentModel(n_y=2, c_x=0.4, c=(0.1, 0.2), c_r=1.0, d=2)


def reference_cost(model, y, xi):
    """Independent evaluation of sum_j [c_j y_j xi_j - c_r y_j (xi_j - 1)]."""
    total = 0.0
    for j in range(model.n_y):
        yj = (y >> j) & 1
        xij = (xi >> j) & 1
        total += model.c[j] * yj * xij - model.c_r * yj * (xij - 1)
    return total


class TestSecondStageCost:
    def test_worked_example_turbine0_on_full_wind(self):
        # y has turbine 0 on, both winds blowing -> pay c_0 only
        assert second_stage_cost(worked_model(), x=1, y=0b01, xi=0b11) == pytest.approx(0.1)

    def test_all_zeros_decision_costs_nothing(self):
        model = worked_model()
        for xi in range(4):
            assert second_stage_cost(model, x=2, y=0, xi=xi) == 0.0

    def test_turbine_on_without_wind_pays_recourse(self):
        # turbine 1 on, no wind anywhere
        assert second_stage_cost(worked_model(), x=1, y=0b10, xi=0b00) == pytest.approx(1.0)

    def test_matches_reference_sum_exhaustively(self):
        model = UnitCommitmentModel(3, 0.4, (0.05, 0.1, 0.15), 1.0, 3)
        for x in range(4):
            for y in feasible_decisions(3, 3 - x):
                for xi in range(8):
                    assert second_stage_cost(model, x, int(y), xi) == \
                        pytest.approx(reference_cost(model, int(y), xi), abs=1e-12)

    def test_infeasible_weight_reported_distinctly(self):
        with pytest.raises(InfeasibleDecisionError):
            second_stage_cost(worked_model(), x=1, y=0b11, xi=0b00)


class TestBruteForce:
    def test_x_equals_d_unique_point(self):
        y_star, q_star = brute_force_Q(worked_model(), x=2, xi=0b10)
        assert (y_star, q_star) == (0, 0.0)

    def test_full_wind_selects_cheapest_turbines(self):
        model = UnitCommitmentModel(4, 0.5, (0.2, 0.05, 0.3, 0.1), 1.0, 4)
        y_star, q_star = brute_force_Q(model, x=2, xi=0b1111)
        assert y_star == 0b1010          # turbines 1 and 3, the two cheapest
        assert q_star == pytest.approx(0.15)

    def test_wind_at_turbine0_only(self):
        # scenario with wind at turbine 0 only: use turbine 0, pay c_0
        y_star, q_star = brute_force_Q(worked_model(), x=1, xi=0b01)
        assert y_star == 0b01
        assert q_star == pytest.approx(0.1)

    def test_tie_break_lowest_bitmask(self):
        model = UnitCommitmentModel(2, 0.5, (0.1, 0.1), 1.0, 2)
        y_star, _ = brute_force_Q(model, x=1, xi=0b11)   # both turbines equal
        assert y_star == 0b01

    def test_no_feasible_decision(self):
        with pytest.raises(InfeasibleDecisionError):
            brute_force_Q(worked_model(), x=3, xi=0)

    def test_matches_nested_loop_enumeration(self):
        model = UnitCommitmentModel(3, 0.4, (0.12, 0.04, 0.18), 1.0, 3)
        for x in range(4):
            for xi in range(8):
                got_y, got_q = brute_force_Q(model, x, xi)
                best = min((reference_cost(model, int(y), xi), int(y))
                           for y in feasible_decisions(3, 3 - x))
                assert got_q == pytest.approx(best[0], abs=1e-12)
                assert got_y == best[1]


class TestExpectedValue:
    def test_worked_instance_phi_one(self):
        # scenarios 00,01,10,11 give minima 1.0, 0.1, 0.2, 0.1 -> mean 0.35
        model = worked_model()
        dist = DiscreteDistribution.uniform(2)
        assert expected_value_exact(model, 1, dist) == pytest.approx(0.35)

    def test_x_equals_d_gives_zero(self):
        assert expected_value_exact(worked_model(), 2,
                                    DiscreteDistribution.uniform(2)) == 0.0

    def test_point_mass_reduces_to_brute_force(self):
        model = worked_model()
        for xi in range(4):
            dist = DiscreteDistribution.point_mass(2, xi)
            _, q_star = brute_force_Q(model, 1, xi)
            assert expected_value_exact(model, 1, dist) == pytest.approx(q_star)

    def test_objective_worked_values(self):
        model = worked_model()
        dist = DiscreteDistribution.uniform(2)
        assert objective_exact(model, 2, dist) == pytest.approx(0.8)
        assert objective_exact(model, 1, dist) == pytest.approx(0.75)

    def test_argmin_matches_exhaustive_scan(self):
        inst = generate_instance(4, seed=11)
        model, dist = model_from_instance(inst)
        objs = [objective_exact(model, x, dist) for x in range(model.d + 1)]
        xs = int(np.argmin(objs))
        for x in range(model.d + 1):
            assert objs[xs] <= objs[x] + 1e-15

    def test_uniform_expectation_is_mean_of_minima(self):
        model = worked_model()
        dist = DiscreteDistribution.uniform(2)
        _, q_stars = scenario_optima(model, 1, dist)
        assert expected_value_exact(model, 1, dist) == pytest.approx(q_stars.mean())


class TestBoundsAndDiagonal:
    def test_bounds_hold_exhaustively(self):
        for n_y in (2, 4, 6, 8):
            inst = generate_instance(n_y, seed=n_y)
            model, _ = model_from_instance(inst)
            for x in range(model.d + 1):
                b = bounds_for(model, x)
                ys = feasible_decisions(n_y, model.d - x)
                # spot-check all scenarios for small n, a sample for n=8
                xis = range(2 ** n_y) if n_y <= 4 else range(0, 2 ** n_y, 37)
                for xi in xis:
                    for y in ys[:64]:
                        q = second_stage_cost(model, x, int(y), xi)
                        assert b.q_l - 1e-12 <= q <= b.q_u + 1e-12

    def test_bounds_formula(self):
        model = worked_model()
        assert bounds_for(model, 0).q_u == pytest.approx(2.0)
        assert bounds_for(model, 1).q_u == pytest.approx(1.0)
        assert bounds_for(model, 0).q_l == 0.0

    def test_more_wind_never_costs_more(self):
        model = UnitCommitmentModel(3, 0.4, (0.02, 0.1, 0.19), 1.0, 3)
        diag = cost_diagonal(model).reshape(8, 8)   # [xi, y]
        for xi in range(8):
            for j in range(3):
                if not (xi >> j) & 1:
                    more_wind = xi | (1 << j)
                    assert np.all(diag[more_wind] <= diag[xi] + 1e-12)

    def test_diagonal_matches_second_stage_cost(self):
        model = worked_model()
        # basis index for y=0b01 (turbine 0 on), xi=0b11: xi<<2 | y
        idx = (0b11 << 2) | 0b01
        assert diagonal_cost_lookup(model, idx) == pytest.approx(0.1)

    def test_diagonal_defined_for_infeasible_y(self):
        model = worked_model()
        idx = (0b00 << 2) | 0b11     # both turbines on, no wind
        assert diagonal_cost_lookup(model, idx) == pytest.approx(2.0)

    def test_zz_problem_diagonal(self):
        # cost +1 on aligned (y, xi), -1 on anti-aligned: the Z(x)Z(xi) table
        cost = np.array([[1.0, -1.0], [-1.0, 1.0]])
        problem = GenericDiagonalProblem(n_y=1, n_xi=1, cost=cost)
        assert list(cost_diagonal(problem)) == [1.0, -1.0, -1.0, 1.0]


class TestDistribution:
    def test_uniform_probabilities(self):
        dist = DiscreteDistribution.uniform(3)
        assert len(dist.entries) == 8
        assert np.allclose(dist.probabilities, 1 / 8)

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum"):
            DiscreteDistribution(1, ((0, 0.5), (1, 0.6)))

    def test_duplicate_scenarios_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            DiscreteDistribution(1, ((0, 0.5), (0, 0.5)))

    def test_negative_probability_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            DiscreteDistribution(1, ((0, 1.5), (1, -0.5)))


class TestModelValidation:
    def test_turbine_cost_must_undercut_gas(self):
        with pytest.raises(ValueError, match="c_x"):
            UnitCommitmentModel(1, 0.4, (0.5,), 1.0, 1)

    def test_recourse_must_exceed_gas(self):
        with pytest.raises(ValueError, match="c_r"):
            UnitCommitmentModel(1, 0.4, (0.1,), 0.3, 1)


class TestInstanceFiles:
    def test_generation_is_seeded(self):
        a = generate_instance(5, seed=3)
        b = generate_instance(5, seed=3)
        c = generate_instance(5, seed=4)
        assert a == b
        assert a != c
        assert all(0.01 <= cj <= 0.2 for cj in a["c"])
        assert a["d"] == 5 and a["seed"] == 3

    def test_round_trip(self, tmp_path):
        inst = generate_instance(3, seed=9)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        assert load_instance(path) == inst
        model, dist = model_from_instance(inst)
        assert model.n_y == 3 and dist.is_uniform

    def test_explicit_distribution(self):
        inst = {"n_y": 2, "c_x": 0.4, "c": [0.1, 0.2], "c_r": 1.0, "d": 2,
                "distribution": {"type": "explicit",
                                 "entries": [{"scenario": 0, "p": 0.5},
                                             {"scenario": 3, "p": 0.5}]},
                "seed": 0}
        _, dist = model_from_instance(inst)
        assert dist.entries == ((0, 0.5), (3, 0.5))

    def test_explicit_distribution_binary_strings(self):
        inst = {"n_y": 2, "c_x": 0.4, "c": [0.1, 0.2], "c_r": 1.0, "d": 2,
                "distribution": {"type": "explicit",
                                 "entries": [{"scenario": "10", "p": 0.25},
                                             {"scenario": "01", "p": 0.75}]},
                "seed": 0}
        _, dist = model_from_instance(inst)
        assert set(dist.entries) == {(1, 0.75), (2, 0.25)}   # "10" = wind at turbine 1
