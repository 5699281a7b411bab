"""Problem data, reachable sets, controllers and closed-loop simulation."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ControllerFailure, EmptyAdmissibleSet, EmptyPolytope, Infeasible
from .geometry import (
    HPolytope,
    chebyshev_center,
    contains,
    enumerate_vertices,
    project,
)
from .network import Mlp, predict, value_and_gradient
from .solvers import FwConfig, frank_wolfe, solve_mpc_qp


@dataclass
class LinearSystem:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        nx = self.A.shape[0]
        if self.A.shape != (nx, nx) or self.B.shape[0] != nx:
            raise ValueError("A must be square and B must have as many rows as A")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise ValueError("system matrices must be finite")

    @property
    def nx(self):
        return self.A.shape[0]

    @property
    def nu(self):
        return self.B.shape[1]

    def step(self, x, u):
        return self.A @ x + self.B @ u


@dataclass
class StageCost:
    """Quadratic stage cost ``x'Qx + u'Ru`` with terminal cost ``x'Q_N x``."""

    Q: np.ndarray
    R: np.ndarray
    terminal_Q: np.ndarray = None

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if self.terminal_Q is None:
            self.terminal_Q = np.zeros_like(self.Q)
        self.terminal_Q = np.atleast_2d(np.asarray(self.terminal_Q, dtype=float))
        for name in ("Q", "R", "terminal_Q"):
            M = getattr(self, name)
            if M.shape[0] != M.shape[1] or np.max(np.abs(M - M.T)) > 1e-12:
                raise ValueError(f"{name} must be square and symmetric")
        if self.terminal_Q.shape != self.Q.shape:
            raise ValueError("terminal_Q must match Q")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError:
            raise ValueError("R must be positive definite") from None

    def stage(self, x, u):
        return float(x @ self.Q @ x + u @ self.R @ u)

    def terminal(self, x):
        return float(x @ self.terminal_Q @ x)


class QuadraticValue:
    """Cost-to-go ``x'Px`` used where an exact quadratic replaces a network."""

    def __init__(self, P):
        self.P = np.atleast_2d(np.asarray(P, dtype=float))

    def __call__(self, x):
        return float(x @ self.P @ x)

    def value_and_gradient(self, x):
        Px = self.P @ x
        return float(x @ Px), 2.0 * Px


def _next_value(value, x):
    if isinstance(value, Mlp):
        return value_and_gradient(value, x)
    return value.value_and_gradient(x)


@dataclass
class HorizonSets:
    N: int
    sets: list
    U: HPolytope
    X: HPolytope

    def __post_init__(self):
        if len(self.sets) != self.N + 1:
            raise ValueError(f"expected {self.N + 1} sets, got {len(self.sets)}")

    def check_nesting(self, tol=1e-9):
        """True iff the vertices of every ``X_{k+1}`` lie in ``X_k``."""
        for k in range(self.N):
            V = enumerate_vertices(self.sets[k + 1]).vertices
            if not all(contains(self.sets[k], v, tol) for v in V):
                return False
        return True


def backward_reach_sequence(system, X, U, X_N, N):
    """Sets ``X_k`` of states that can reach ``X_{k+1}`` in one admissible step."""
    if N < 1:
        raise ValueError("horizon must be at least 1")
    nx, nu = system.nx, system.nu
    sets = [None] * (N + 1)
    sets[N] = X_N
    for k in range(N - 1, -1, -1):
        Xn = sets[k + 1]
        H = np.vstack([
            np.hstack([Xn.H @ system.A, Xn.H @ system.B]),
            np.hstack([np.zeros((U.m, nx)), U.H]),
            np.hstack([X.H, np.zeros((X.m, nu))]),
        ])
        h = np.concatenate([Xn.h, U.h, X.h])
        try:
            sets[k] = project(HPolytope(H, h), list(range(nx)))
        except EmptyPolytope as exc:
            raise EmptyPolytope(f"X_{k} is empty: {exc}") from None
    return HorizonSets(N, sets, U, X)


def admissible_input_set(system, X_next, U, x):
    """Inputs in ``U`` that map ``x`` into ``X_next``; rows are not reduced."""
    x = np.asarray(x, dtype=float).reshape(-1)
    H = np.vstack([X_next.H @ system.B, U.H])
    h = np.concatenate([X_next.h - X_next.H @ system.A @ x, U.h])
    try:
        return HPolytope(H, h)
    except EmptyPolytope:
        # a constant row is violated; keep the set representable but empty
        e = np.zeros(system.nu)
        e[0] = 1.0
        return HPolytope(np.vstack([e, -e]), [-1.0, -1.0])


def value_controller_step(x, next_value, cost, system, X_next, U, cfg=None, warm=None, record=False):
    """One Frank-Wolfe solve of ``min g(x,u) + J_next(Ax + Bu)`` over U(x).

    Returns the :class:`FwResult`; ``result.u`` is the input.
    """
    cfg = cfg or FwConfig()
    x = np.asarray(x, dtype=float).reshape(-1)
    Ux = admissible_input_set(system, X_next, U, x)
    start = None
    if warm is not None and contains(Ux, warm, 1e-9):
        start = np.asarray(warm, dtype=float)
    else:
        center, radius = chebyshev_center(Ux)
        if center is None or radius < -1e-9:
            raise EmptyAdmissibleSet(f"no admissible input at state {x}")
        start = center
    Ax = system.A @ x
    B = system.B
    R = cost.R
    state_cost = float(x @ cost.Q @ x)
    hess = None
    if isinstance(next_value, QuadraticValue):
        hess = 2.0 * (R + B.T @ next_value.P @ B)

    def fun(u):
        v, _ = _next_value(next_value, Ax + B @ u)
        return state_cost + float(u @ R @ u) + v

    def grad(u):
        _, gx = _next_value(next_value, Ax + B @ u)
        return 2.0 * R @ u + B.T @ gx

    return frank_wolfe(fun, grad, Ux, start, cfg, hess=hess, record=record)


def policy_controller_step(x, policy, V):
    """Convex combination of the vertices of ``V`` weighted by ``policy(x)``."""
    if policy.output != "softmax":
        raise ValueError("policy network needs a softmax output unit")
    if policy.n_out != V.n_v:
        raise ValueError(f"policy has {policy.n_out} outputs but V has {V.n_v} vertices")
    lam = predict(policy, np.asarray(x, dtype=float)[None])[0]
    return lam @ V.vertices


class Controller:
    kind = None

    def step(self, x, warm=None):
        raise NotImplementedError

    def predict(self, X):
        """Inputs for every row of ``X`` (no warm starts)."""
        return np.array([self.step(x) for x in np.atleast_2d(X)])


class ExactMpcController(Controller):
    kind = "exact"

    def __init__(self, system, cost, sets, tol=1e-8):
        self.system, self.cost, self.sets, self.tol = system, cost, sets, tol

    def step(self, x, warm=None):
        return solve_mpc_qp(self.system, self.cost, self.sets, x, tol=self.tol).inputs[0]


class ValueFwController(Controller):
    """Receding-horizon use of the stage-0 problem with ``J_1`` as tail cost."""

    kind = "value"

    def __init__(self, value_net, cost, system, sets, cfg=None):
        self.value_net = value_net
        self.cost = cost
        self.system = system
        self.sets = sets
        self.cfg = cfg or FwConfig()

    def step(self, x, warm=None):
        res = value_controller_step(
            x, self.value_net, self.cost, self.system, self.sets.sets[1], self.sets.U, self.cfg, warm
        )
        return res.u


class VertexPolicyController(Controller):
    kind = "policy"

    def __init__(self, policy_net, V):
        if policy_net.n_out != V.n_v:
            raise ValueError(f"policy has {policy_net.n_out} outputs but V has {V.n_v} vertices")
        self.policy_net = policy_net
        self.V = V

    def step(self, x, warm=None):
        return policy_controller_step(x, self.policy_net, self.V)


@dataclass
class Trajectory:
    states: np.ndarray
    inputs: np.ndarray
    stage_costs: np.ndarray
    terminal_cost: float = 0.0
    step_times: list = field(default_factory=list)

    @property
    def total_cost(self):
        return float(np.sum(self.stage_costs) + self.terminal_cost)

    def to_csv(self, path):
        nx = self.states.shape[1]
        nu = self.inputs.shape[1]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k"] + [f"x{i + 1}" for i in range(nx)] + [f"u{i + 1}" for i in range(nu)] + ["stage_cost"])
            for k in range(len(self.inputs)):
                w.writerow([k] + [repr(float(v)) for v in self.states[k]]
                           + [repr(float(v)) for v in self.inputs[k]] + [repr(float(self.stage_costs[k]))])
            k = len(self.inputs)
            w.writerow([k] + [repr(float(v)) for v in self.states[k]] + [""] * nu + [""])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        header = rows[0]
        nx = sum(1 for h in header if h.startswith("x"))
        nu = sum(1 for h in header if h.startswith("u"))
        states, inputs, costs = [], [], []
        for row in rows[1:]:
            states.append([float(v) for v in row[1:1 + nx]])
            if row[1 + nx]:
                inputs.append([float(v) for v in row[1 + nx:1 + nx + nu]])
                costs.append(float(row[-1]))
        return cls(np.array(states), np.array(inputs).reshape(-1, nu), np.array(costs))


def simulate_closed_loop(ctrl, system, cost, sets, x0, T=12, warm_start=True):
    """Apply ``ctrl`` for ``T`` steps from ``x0``."""
    if T < 1:
        raise ValueError("T must be at least 1")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if not contains(sets.sets[0], x, 1e-9):
        raise Infeasible(f"initial state {x} is outside X_0")
    states = [x]
    inputs, costs, times = [], [], []
    u_prev = None
    for k in range(T):
        t0 = time.perf_counter()
        try:
            u = ctrl.step(x, warm=u_prev if warm_start else None)
        except Exception as exc:
            raise ControllerFailure(f"{ctrl.kind} controller failed at step {k}, state {x}: {exc}", k, x) from exc
        times.append(time.perf_counter() - t0)
        x_next = system.A @ x + system.B @ u
        if ctrl.kind == "value" and not contains(sets.sets[1], x_next, 1e-8):
            raise ControllerFailure(f"successor state left X_1 at step {k}", k, x_next)
        inputs.append(u)
        costs.append(cost.stage(x, u))
        states.append(x_next)
        x = x_next
        u_prev = u
    return Trajectory(np.array(states), np.array(inputs), np.array(costs), cost.terminal(x), times)


def resimulate(system, x0, inputs):
    x = np.asarray(x0, dtype=float)
    states = [x]
    for u in inputs:
        x = system.A @ x + system.B @ u
        states.append(x)
    return np.array(states)

