import numpy as np
import pytest

from conftest import OCTAGON_H, OCTAGON_h
from nnadp import (
    ExactMpcController,
    HorizonSets,
    HPolytope,
    LinearSystem,
    Mlp,
    StageCost,
    Trajectory,
    ValueFwController,
    VertexPolicyController,
    admissible_input_set,
    backward_reach_sequence,
    chebyshev_center,
    contains,
    enumerate_vertices,
    remove_redundant,
    sample_uniform,
    simulate_closed_loop,
)
from nnadp.control import QuadraticValue, policy_controller_step, resimulate, value_controller_step
from nnadp.errors import ControllerFailure, EmptyAdmissibleSet, EmptyPolytope, Infeasible
from nnadp.solvers import FwConfig


def zero_value_net():
    return Mlp([np.zeros((3, 2)), np.zeros((1, 3))], [np.zeros(3), np.zeros(1)])


@pytest.fixture(scope="module")
def trained(pipeline_run, bench, bench_sets):
    models = pipeline_run["out"] / "models"
    value = Mlp.load(models / "value_1.json")
    policy = Mlp.load(models / "policy.json")
    V = enumerate_vertices(bench.U)
    return {
        "value": value,
        "policy": policy,
        "controllers": [
            ExactMpcController(bench.system, bench.cost, bench_sets),
            ValueFwController(value, bench.cost, bench.system, bench_sets, bench.fw),
            VertexPolicyController(policy, V),
        ],
    }


# problem data

def test_system_and_cost_validation():
    with pytest.raises(ValueError):
        LinearSystem(np.ones((2, 3)), np.eye(2))
    with pytest.raises(ValueError):
        LinearSystem(np.eye(2), np.ones((3, 1)))
    with pytest.raises(ValueError):
        StageCost(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        StageCost(np.array([[1, 1], [0, 1]]), np.eye(2))
    g = StageCost(np.eye(2), 2 * np.eye(2))
    assert g.stage(np.array([1.0, 2.0]), np.array([1.0, 0.0])) == 7.0
    assert g.terminal(np.array([3.0, 4.0])) == 0.0


def test_quadratic_value():
    V = QuadraticValue(np.diag([1.0, 3.0]))
    v, g = V.value_and_gradient(np.array([1.0, 1.0]))
    assert v == 4.0 and np.array_equal(g, [2.0, 6.0])


# reachable sets

def test_benchmark_sequence(bench, bench_sets):
    assert len(bench_sets.sets) == 7
    for P in bench_sets.sets:
        assert chebyshev_center(P)[1] >= 0
    assert bench_sets.check_nesting()
    for x0 in bench.initial_states:
        assert contains(bench_sets.sets[0], x0)


def test_stage_five_is_forced_input_set(bench, bench_sets):
    expected = remove_redundant(HPolytope(np.vstack([OCTAGON_H @ bench.system.A, bench.X.H]),
                                          np.concatenate([OCTAGON_h, bench.X.h])))
    got = bench_sets.sets[5]
    for v in enumerate_vertices(got).vertices:
        assert contains(expected, v, 1e-9)
    for v in enumerate_vertices(expected).vertices:
        assert contains(got, v, 1e-9)


def test_loose_terminal_set_contains_ball(bench):
    sets = backward_reach_sequence(bench.system, bench.X, bench.U, bench.X, 1)
    assert chebyshev_center(sets.sets[0])[1] > 1
    assert contains(sets.sets[0], [0, 0])


def test_unreachable_terminal_set():
    system = LinearSystem(np.zeros((2, 2)), np.eye(2))
    X = HPolytope.from_box([-10, -10], [10, 10])
    X_N = HPolytope.from_box([9, 9], [9, 9])
    with pytest.raises(EmptyPolytope):
        backward_reach_sequence(system, X, HPolytope.from_box([-1, -1], [1, 1]), X_N, 2)
    with pytest.raises(ValueError):
        backward_reach_sequence(system, X, X, X, 0)


def test_nesting_check_detects_violation(bench_sets):
    sets = list(bench_sets.sets)
    sets[2], sets[3] = sets[3], sets[2]
    assert not HorizonSets(bench_sets.N, sets, bench_sets.U, bench_sets.X).check_nesting()


# admissible input sets

def test_admissible_set_at_origin(bench):
    Ux = remove_redundant(admissible_input_set(bench.system, bench.X, bench.U, [0, 0]))
    assert {tuple(np.round(v, 9)) for v in enumerate_vertices(Ux).vertices} == \
        {tuple(v) for v in enumerate_vertices(bench.U).vertices}


def test_admissible_set_empty_outside(bench, bench_sets):
    Ux = admissible_input_set(bench.system, bench_sets.sets[1], bench.U, [9.9, -9.9])
    assert not contains(bench_sets.sets[0], [9.9, -9.9])
    assert chebyshev_center(Ux)[1] < 0


def test_admissible_set_membership(bench, bench_sets):
    rng = np.random.default_rng(0)
    X1 = bench_sets.sets[1]
    A, B = bench.system.A, bench.system.B
    for _ in range(1000):
        x = rng.uniform(-10, 10, 2)
        u = rng.uniform(-6, 6, 2)
        direct = contains(bench.U, u, 0) and contains(X1, A @ x + B @ u, 0)
        assert contains(admissible_input_set(bench.system, X1, bench.U, x), u, 0) == direct


# value controller step

def test_value_step_zero_net_interior(bench):
    res = value_controller_step(np.array([1.0, 1.0]), zero_value_net(), bench.cost, bench.system, bench.X, bench.U,
                                FwConfig(max_iters=50))
    assert np.abs(res.u).max() <= 1e-6


def test_value_step_empty(bench, bench_sets):
    with pytest.raises(EmptyAdmissibleSet):
        value_controller_step(np.array([9.9, -9.9]), zero_value_net(), bench.cost, bench.system,
                              bench_sets.sets[1], bench.U)


def test_value_step_warm_start_is_used(bench):
    res = value_controller_step(np.array([1.0, 1.0]), zero_value_net(), bench.cost, bench.system, bench.X, bench.U,
                                FwConfig(max_iters=1), warm=np.array([0.5, 0.5]), record=True)
    assert np.array_equal(res.iterates[0], [0.5, 0.5])


def test_value_step_feasible_on_x0(bench, bench_sets, trained):
    rng = np.random.default_rng(1)
    X1 = bench_sets.sets[1]
    for x in sample_uniform(bench_sets.sets[0], 1000, rng):
        u = value_controller_step(x, trained["value"], bench.cost, bench.system, X1, bench.U, bench.fw).u
        assert contains(bench.U, u, 1e-8)
        assert contains(X1, bench.system.step(x, u), 1e-8)


# policy controller step

def test_policy_zero_net_gives_centroid(bench):
    V = enumerate_vertices(bench.U)
    net = Mlp([np.zeros((4, 2)), np.zeros((8, 4))], [np.zeros(4), np.zeros(8)], output="softmax")
    assert np.abs(policy_controller_step(np.array([3.0, -2.0]), net, V)).max() <= 1e-15


def test_policy_saturated(bench):
    V = enumerate_vertices(bench.U)
    b = np.zeros(8)
    b[3] = 100.0
    net = Mlp([np.zeros((4, 2)), np.zeros((8, 4))], [np.zeros(4), b], output="softmax")
    assert np.abs(policy_controller_step(np.zeros(2), net, V) - V.vertices[3]).max() <= 1e-6


def test_policy_width_mismatch(bench):
    V = enumerate_vertices(bench.U)
    net = Mlp([np.zeros((4, 2)), np.zeros((6, 4))], [np.zeros(4), np.zeros(6)], output="softmax")
    with pytest.raises(ValueError):
        policy_controller_step(np.zeros(2), net, V)
    with pytest.raises(ValueError):
        VertexPolicyController(net, V)


# closed loop

def test_zero_state_stays_put(bench, bench_sets, trained):
    for ctrl in trained["controllers"][:1]:
        traj = simulate_closed_loop(ctrl, bench.system, bench.cost, bench_sets, [0, 0], 5)
        assert np.abs(traj.states).max() <= 1e-12 and traj.total_cost <= 1e-12


def test_exact_mpc_reaches_origin(bench, bench_sets, trained):
    x0 = np.array([6.75, 9.0])
    traj = simulate_closed_loop(trained["controllers"][0], bench.system, bench.cost, bench_sets, x0, 12)
    assert np.linalg.norm(traj.states[-1]) < 0.1 * np.linalg.norm(x0)
    assert all(contains(bench.U, u, 1e-8) for u in traj.inputs)
    assert all(contains(bench.X, x, 1e-8) for x in traj.states)


def test_value_controller_stays_in_x0(bench, bench_sets, trained):
    traj = simulate_closed_loop(trained["controllers"][1], bench.system, bench.cost, bench_sets, [-8.6, -7.1], 12)
    assert all(contains(bench_sets.sets[0], x, 1e-8) for x in traj.states)
    assert all(contains(bench.U, u, 1e-8) for u in traj.inputs)


@pytest.mark.parametrize("x0", [(6.75, 9.0), (-8.6, -7.1)])
def test_closed_loop_invariants(bench, bench_sets, trained, x0):
    costs = {}
    for ctrl in trained["controllers"]:
        traj = simulate_closed_loop(ctrl, bench.system, bench.cost, bench_sets, x0, 12)
        assert all(contains(bench.U, u, 1e-8) for u in traj.inputs)
        assert np.array_equal(resimulate(bench.system, x0, traj.inputs), traj.states)
        assert traj.total_cost == pytest.approx(traj.stage_costs.sum() + traj.terminal_cost, abs=0)
        costs[ctrl.kind] = traj.total_cost
    tol = 1e-6 * (1 + costs["exact"])
    assert costs["exact"] <= costs["value"] + tol
    assert costs["exact"] <= costs["policy"] + tol


def test_trajectory_csv_round_trip(tmp_path, bench, bench_sets, trained):
    traj = simulate_closed_loop(trained["controllers"][2], bench.system, bench.cost, bench_sets, [6.75, 9.0], 4)
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "k,x1,x2,u1,u2,stage_cost" and len(lines) == 6
    back = Trajectory.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.inputs, traj.inputs)
    assert np.array_equal(back.stage_costs, traj.stage_costs)


def test_simulation_errors(bench, bench_sets, trained):
    with pytest.raises(Infeasible):
        simulate_closed_loop(trained["controllers"][0], bench.system, bench.cost, bench_sets, [10, 10], 3)
    with pytest.raises(ValueError):
        simulate_closed_loop(trained["controllers"][0], bench.system, bench.cost, bench_sets, [0, 0], 0)

    class Broken(ExactMpcController):
        def step(self, x, warm=None):
            raise RuntimeError("boom")

    with pytest.raises(ControllerFailure) as info:
        simulate_closed_loop(Broken(bench.system, bench.cost, bench_sets), bench.system, bench.cost, bench_sets, [1, 1], 3)
    assert info.value.step == 0
